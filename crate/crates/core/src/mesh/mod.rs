//! Affine simplicial meshes (triangles in 2D, tetrahedra in 3D).

mod io;

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::{Error, Result};

pub use io::{load_off, parse_off, save_off, save_vtk, write_cell_csv, write_off, write_vtk, VtkField};

/// Constant P1 data of one element.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementGeometry {
    pub volume: f64,
    /// Row `v` is the gradient of the hat function of local vertex `v`.
    pub grad_hats: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFacet {
    /// Vertex ids, ordered so the facet is outward oriented.
    pub vertices: Vec<usize>,
    /// Box face label (-x=1, +x=2, -y=3, +y=4, -z=5, +z=6) or 0.
    pub marker: u32,
}

#[derive(Debug, Clone)]
pub struct SimplicialMesh {
    dim: usize,
    vertices: Vec<Vec<f64>>,
    elements: Vec<Vec<usize>>,
    boundary: Vec<BoundaryFacet>,
    geometry: Vec<ElementGeometry>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).product::<usize>() as f64
}

fn edge_matrix(dim: usize, pts: &[&[f64]]) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |r, c| pts[c + 1][r] - pts[0][r])
}

/// Volume and hat gradients of a simplex given by its `n + 1` vertices.
pub fn simplex_geometry(dim: usize, pts: &[&[f64]]) -> Option<ElementGeometry> {
    let j = edge_matrix(dim, pts);
    let volume = j.determinant().abs() / factorial(dim);
    let inv = j.try_inverse()?;
    let mut grad_hats = DMatrix::zeros(dim + 1, dim);
    for v in 1..=dim {
        for a in 0..dim {
            grad_hats[(v, a)] = inv[(v - 1, a)];
            grad_hats[(0, a)] -= inv[(v - 1, a)];
        }
    }
    Some(ElementGeometry { volume, grad_hats })
}

fn signed_volume(dim: usize, pts: &[&[f64]]) -> f64 {
    edge_matrix(dim, pts).determinant() / factorial(dim)
}

/// Sign of the permutation sorting `ids` (all distinct).
fn permutation_sign(ids: &[usize]) -> i32 {
    let mut s = 1;
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            if ids[i] > ids[j] {
                s = -s;
            }
        }
    }
    s
}

/// Oriented faces of a simplex: face `i` omits vertex `i` and carries
/// orientation `(-1)^i`.
fn oriented_faces(simplex: &[usize]) -> impl Iterator<Item = (Vec<usize>, i32)> + '_ {
    (0..simplex.len()).map(move |i| {
        let face: Vec<usize> = simplex.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).collect();
        (face, if i % 2 == 0 { 1 } else { -1 })
    })
}

/// Boundary operator on an integer chain of oriented simplices keyed by
/// sorted vertex tuples. Zero coefficients are dropped.
pub fn chain_boundary(chain: &BTreeMap<Vec<usize>, i32>) -> BTreeMap<Vec<usize>, i32> {
    let mut out = BTreeMap::new();
    for (simplex, &c) in chain {
        for (face, o) in oriented_faces(simplex) {
            *out.entry(face).or_insert(0) += c * o;
        }
    }
    out.retain(|_, c| *c != 0);
    out
}

impl SimplicialMesh {
    /// Builds a mesh, flipping negatively oriented elements, computing
    /// element geometry and extracting the boundary.
    ///
    /// Boundary facets lying on a face of the bounding box receive that
    /// face's marker, others marker 0.
    pub fn new(dim: usize, vertices: Vec<Vec<f64>>, mut elements: Vec<Vec<usize>>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::UnsupportedDimension(dim));
        }
        for (i, v) in vertices.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::InvalidInput(format!("vertex {i} has {} coordinates, expected {dim}", v.len())));
            }
        }
        let scale = bounding_scale(dim, &vertices);
        let mut geometry = Vec::with_capacity(elements.len());
        for (e, el) in elements.iter_mut().enumerate() {
            if el.len() != dim + 1 {
                return Err(Error::InvalidInput(format!(
                    "element {e} has {} vertices, expected {}",
                    el.len(),
                    dim + 1
                )));
            }
            if let Some(&bad) = el.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::InvalidInput(format!(
                    "element {e} references vertex {bad} (only {} vertices)",
                    vertices.len()
                )));
            }
            let pts: Vec<&[f64]> = el.iter().map(|&v| vertices[v].as_slice()).collect();
            let vol = signed_volume(dim, &pts);
            if vol.abs() <= 1e-14 * scale.powi(dim as i32) {
                return Err(Error::DegenerateElement { element: e, volume: vol });
            }
            if vol < 0.0 {
                el.swap(0, 1);
            }
            let pts: Vec<&[f64]> = el.iter().map(|&v| vertices[v].as_slice()).collect();
            geometry.push(simplex_geometry(dim, &pts).ok_or(Error::DegenerateElement { element: e, volume: vol })?);
        }
        let mut mesh = Self { dim, vertices, elements, boundary: Vec::new(), geometry };
        mesh.boundary = mesh.extract_boundary();
        Ok(mesh)
    }

    fn extract_boundary(&self) -> Vec<BoundaryFacet> {
        // Count each facet with its induced orientation; interior facets cancel.
        let mut seen: BTreeMap<Vec<usize>, (i32, Vec<usize>)> = BTreeMap::new();
        for el in &self.elements {
            for (face, o) in oriented_faces(el) {
                let mut key = face.clone();
                key.sort_unstable();
                let entry = seen.entry(key).or_insert((0, Vec::new()));
                entry.0 += o * permutation_sign(&face);
                if entry.1.is_empty() {
                    // store an outward ordering: even permutation of `face`
                    // when o = +1, odd otherwise
                    let mut f = face;
                    if o < 0 {
                        f.swap(0, 1);
                    }
                    entry.1 = f;
                }
            }
        }
        let (lo, hi) = self.bounds();
        let tol = 1e-10 * bounding_scale(self.dim, &self.vertices);
        seen.into_values()
            .filter(|(c, _)| *c != 0)
            .map(|(_, vertices)| {
                let mut marker = 0;
                'axes: for axis in 0..self.dim {
                    for (side, bound) in [(1, lo[axis]), (2, hi[axis])] {
                        if vertices.iter().all(|&v| (self.vertices[v][axis] - bound).abs() <= tol) {
                            marker = 2 * axis as u32 + side;
                            break 'axes;
                        }
                    }
                }
                BoundaryFacet { vertices, marker }
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn vertex(&self, v: usize) -> &[f64] {
        &self.vertices[v]
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e]
    }

    pub fn elements(&self) -> &[Vec<usize>] {
        &self.elements
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary
    }

    /// Cached geometry of element `e`.
    pub fn element_geometry(&self, e: usize) -> &ElementGeometry {
        &self.geometry[e]
    }

    pub fn total_volume(&self) -> f64 {
        self.geometry.iter().map(|g| g.volume).sum()
    }

    /// Per-axis bounding box.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for v in &self.vertices {
            for a in 0..self.dim {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        (lo, hi)
    }

    /// Length of the bounding box diagonal.
    pub fn scale(&self) -> f64 {
        bounding_scale(self.dim, &self.vertices)
    }

    /// `(n-1)`-measure of a boundary facet.
    pub fn facet_measure(&self, facet: &BoundaryFacet) -> f64 {
        let p: Vec<&[f64]> = facet.vertices.iter().map(|&v| self.vertex(v)).collect();
        let d = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
        match self.dim {
            2 => {
                let e = d(p[1], p[0]);
                (e[0] * e[0] + e[1] * e[1]).sqrt()
            }
            _ => {
                let (u, w) = (d(p[1], p[0]), d(p[2], p[0]));
                let c = [u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0]];
                0.5 * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
            }
        }
    }

    /// Vertices lying on facets with any of the given markers, sorted.
    pub fn vertices_with_markers(&self, markers: &[u32]) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .boundary
            .iter()
            .filter(|f| markers.contains(&f.marker))
            .flat_map(|f| f.vertices.iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Vertices on any boundary facet, sorted.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.boundary.iter().flat_map(|f| f.vertices.iter().copied()).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// The n-chain of all positively oriented elements.
    pub fn element_chain(&self) -> BTreeMap<Vec<usize>, i32> {
        let mut chain = BTreeMap::new();
        for el in &self.elements {
            let mut key = el.clone();
            let s = permutation_sign(&key);
            key.sort_unstable();
            *chain.entry(key).or_insert(0) += s;
        }
        chain
    }

    /// The boundary facets as an oriented (n-1)-chain.
    pub fn boundary_chain(&self) -> BTreeMap<Vec<usize>, i32> {
        let mut chain = BTreeMap::new();
        for f in &self.boundary {
            let mut key = f.vertices.clone();
            let s = permutation_sign(&key);
            key.sort_unstable();
            *chain.entry(key).or_insert(0) += s;
        }
        chain
    }
}

fn bounding_scale(dim: usize, vertices: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for a in 0..dim {
        let (lo, hi) = vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v[a]), h.max(v[a])));
        if hi >= lo {
            s += (hi - lo) * (hi - lo);
        }
    }
    s.sqrt()
}

/// Structured simplicial mesh of the box `[lo, hi]`.
///
/// 2D cells are split along their `(lo, lo)-(hi, hi)` diagonal; 3D cubes use
/// the Kuhn subdivision into 6 tetrahedra sharing the main diagonal.
pub fn build_box_mesh(dim: usize, divisions: &[usize], lo: &[f64], hi: &[f64]) -> Result<SimplicialMesh> {
    if dim != 2 && dim != 3 {
        return Err(Error::UnsupportedDimension(dim));
    }
    if divisions.len() != dim || lo.len() != dim || hi.len() != dim {
        return Err(Error::DimensionMismatch("box mesh arguments".into()));
    }
    if divisions.contains(&0) {
        return Err(Error::InvalidInput("divisions must be >= 1".into()));
    }
    if (0..dim).any(|a| !(hi[a] > lo[a])) {
        return Err(Error::InvalidInput("box bounds must satisfy lo < hi".into()));
    }
    let stride: Vec<usize> = {
        let mut s = vec![1; dim];
        for a in 1..dim {
            s[a] = s[a - 1] * (divisions[a - 1] + 1);
        }
        s
    };
    let count: usize = divisions.iter().map(|d| d + 1).product();
    let vertices: Vec<Vec<f64>> = (0..count)
        .map(|id| {
            (0..dim)
                .map(|a| {
                    let i = (id / stride[a]) % (divisions[a] + 1);
                    if i == divisions[a] {
                        hi[a]
                    } else {
                        lo[a] + (hi[a] - lo[a]) * i as f64 / divisions[a] as f64
                    }
                })
                .collect()
        })
        .collect();

    let mut elements = Vec::new();
    let cells: usize = divisions.iter().product();
    for c in 0..cells {
        let mut base = 0;
        let mut rem = c;
        for a in 0..dim {
            base += (rem % divisions[a]) * stride[a];
            rem /= divisions[a];
        }
        if dim == 2 {
            let (v00, v10, v01, v11) = (base, base + stride[0], base + stride[1], base + stride[0] + stride[1]);
            elements.push(vec![v00, v10, v11]);
            elements.push(vec![v00, v11, v01]);
        } else {
            for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
                let mut path = vec![base];
                let mut cur = base;
                for &axis in &perm {
                    cur += stride[axis];
                    path.push(cur);
                }
                elements.push(path);
            }
        }
    }
    SimplicialMesh::new(dim, vertices, elements)
}
