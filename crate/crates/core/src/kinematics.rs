//! Deformation 1-forms and the kinematic quantities built from them.
//!
//! The deformed frame `{f_a}` is the ambient Cartesian basis, so the
//! vector-valued deformation 1-form `f_a (x) theta^a` has, on each element,
//! the `n x n` coefficient matrix `Theta[a][A]` (row = deformed leg, column =
//! reference coordinate). For a compatible state this is the deformation
//! gradient.

use nalgebra::DMatrix;

use crate::mesh::SimplicialMesh;
use crate::par::Policy;
use crate::{Error, Result};

/// Current vertex positions `phi`, flattened as `[x0, y0, (z0), x1, ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationField {
    dim: usize,
    positions: Vec<f64>,
}

impl DeformationField {
    pub fn new(dim: usize, positions: Vec<f64>) -> Result<Self> {
        if !positions.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch(format!("{} position values for dimension {dim}", positions.len())));
        }
        Ok(Self { dim, positions })
    }

    /// The undeformed placement `phi(X) = X`.
    pub fn identity(mesh: &SimplicialMesh) -> Self {
        Self { dim: mesh.dim(), positions: mesh.vertices().iter().flatten().copied().collect() }
    }

    /// `phi(X) = A X + b` at every vertex.
    pub fn affine(mesh: &SimplicialMesh, a: &DMatrix<f64>, b: &[f64]) -> Self {
        let n = mesh.dim();
        let mut positions = Vec::with_capacity(n * mesh.num_vertices());
        for x in mesh.vertices() {
            for r in 0..n {
                positions.push(b[r] + (0..n).map(|c| a[(r, c)] * x[c]).sum::<f64>());
            }
        }
        Self { dim: n, positions }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn position(&self, v: usize) -> &[f64] {
        &self.positions[v * self.dim..(v + 1) * self.dim]
    }

    pub fn position_mut(&mut self, v: usize) -> &mut [f64] {
        &mut self.positions[v * self.dim..(v + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.positions
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.positions
    }

    /// `phi(X) - X` per vertex.
    pub fn displacement(&self, mesh: &SimplicialMesh) -> Vec<Vec<f64>> {
        (0..self.num_vertices())
            .map(|v| self.position(v).iter().zip(mesh.vertex(v)).map(|(p, x)| p - x).collect())
            .collect()
    }
}

/// Element-constant deformation 1-forms, one `n x n` matrix per element.
pub type DeformationOneForms = Vec<DMatrix<f64>>;

/// Exact differential of the P1 deformation on element `e`:
/// `dphi[a][A] = sum_v phi_a(v) dN_v/dX^A`.
pub fn dphi_element(mesh: &SimplicialMesh, phi: &DeformationField, e: usize) -> DMatrix<f64> {
    let n = mesh.dim();
    let g = &mesh.element_geometry(e).grad_hats;
    let mut out = DMatrix::zeros(n, n);
    for (lv, &v) in mesh.element(e).iter().enumerate() {
        let p = phi.position(v);
        for a in 0..n {
            for big_a in 0..n {
                out[(a, big_a)] += p[a] * g[(lv, big_a)];
            }
        }
    }
    out
}

pub fn dphi(mesh: &SimplicialMesh, phi: &DeformationField) -> DeformationOneForms {
    dphi_with(Policy::default(), mesh, phi)
}

pub fn dphi_with(policy: Policy, mesh: &SimplicialMesh, phi: &DeformationField) -> DeformationOneForms {
    policy.map(mesh.num_elements(), |e| dphi_element(mesh, phi, e))
}

/// Right Cauchy-Green tensor `C = delta_ab theta^a (x) theta^b = Theta^T Theta`.
pub fn c_from_theta(theta: &DMatrix<f64>) -> DMatrix<f64> {
    theta.transpose() * theta
}

/// Volume ratio `J = det Theta`.
pub fn jacobian(theta: &DMatrix<f64>) -> f64 {
    theta.determinant()
}

/// `J` of element `e`, or [`Error::Inadmissible`] when `J <= 0`.
pub fn admissible_jacobian(theta: &DMatrix<f64>, element: usize) -> Result<f64> {
    let j = jacobian(theta);
    if j > 0.0 {
        Ok(j)
    } else {
        Err(Error::Inadmissible { element, jacobian: j })
    }
}

/// Checks `det Theta > 0` on every element; reports the first violation.
pub fn check_admissible(thetas: &[DMatrix<f64>]) -> Result<()> {
    for (e, t) in thetas.iter().enumerate() {
        admissible_jacobian(t, e)?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct CompatibilityResidual {
    /// `dphi_e - Theta_e`.
    pub per_element: Vec<DMatrix<f64>>,
    /// `(sum_e vol_e |R_e|_F^2)^(1/2)`.
    pub norm: f64,
}

pub fn compatibility_residual(
    mesh: &SimplicialMesh,
    phi: &DeformationField,
    thetas: &[DMatrix<f64>],
) -> Result<CompatibilityResidual> {
    if thetas.len() != mesh.num_elements() {
        return Err(Error::DimensionMismatch(format!(
            "{} deformation 1-forms for {} elements",
            thetas.len(),
            mesh.num_elements()
        )));
    }
    let per_element: Vec<DMatrix<f64>> =
        Policy::default().map(mesh.num_elements(), |e| dphi_element(mesh, phi, e) - &thetas[e]);
    let norm = per_element
        .iter()
        .enumerate()
        .map(|(e, r)| mesh.element_geometry(e).volume * r.norm_squared())
        .sum::<f64>()
        .sqrt();
    Ok(CompatibilityResidual { per_element, norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_box_mesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rotation(t: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()])
    }

    #[test]
    fn identity_and_homogeneous_deformations() {
        let mesh = build_box_mesh(2, &[3, 4], &[0.0, 0.0], &[1.0, 2.0]).unwrap();
        for t in dphi(&mesh, &DeformationField::identity(&mesh)) {
            assert!((t - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-14);
        }
        let a = DMatrix::from_row_slice(2, 2, &[1.3, 0.0, 0.0, 0.7]);
        let phi = DeformationField::affine(&mesh, &a, &[0.2, -0.1]);
        for t in dphi(&mesh, &phi) {
            assert!((t - &a).abs().max() < 1e-14);
        }
    }

    #[test]
    fn dphi_matches_finite_differences_of_interpolant() {
        let mesh = build_box_mesh(2, &[2, 2], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut phi = DeformationField::identity(&mesh);
        for x in phi.as_mut_slice() {
            *x += rng.gen_range(-0.05..0.05);
        }
        let d = dphi(&mesh, &phi);
        for e in 0..mesh.num_elements() {
            let el = mesh.element(e);
            let pts: Vec<&[f64]> = el.iter().map(|&v| mesh.vertex(v)).collect();
            // barycentric interpolation of phi
            let interp = |x: &[f64]| -> Vec<f64> {
                let m = DMatrix::from_fn(2, 2, |r, c| pts[c + 1][r] - pts[0][r]);
                let rhs = nalgebra::DVector::from_vec(vec![x[0] - pts[0][0], x[1] - pts[0][1]]);
                let l = m.lu().solve(&rhs).unwrap();
                let w = [1.0 - l[0] - l[1], l[0], l[1]];
                (0..2).map(|a| (0..3).map(|i| w[i] * phi.position(el[i])[a]).sum()).collect()
            };
            let c: Vec<f64> = (0..2).map(|a| pts.iter().map(|p| p[a]).sum::<f64>() / 3.0).collect();
            let h = 1e-6;
            for big_a in 0..2 {
                let (mut p, mut m) = (c.clone(), c.clone());
                p[big_a] += h;
                m[big_a] -= h;
                let (fp, fm) = (interp(&p), interp(&m));
                for a in 0..2 {
                    let fd = (fp[a] - fm[a]) / (2.0 * h);
                    assert!((fd - d[e][(a, big_a)]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn cauchy_green_examples() {
        assert_eq!(c_from_theta(&DMatrix::identity(2, 2)), DMatrix::identity(2, 2));
        let c = c_from_theta(&rotation(0.7));
        assert!((c - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-15);

        let stretch = DMatrix::from_row_slice(2, 2, &[1.5, 0.0, 0.0, 1.0]);
        let c = c_from_theta(&(&stretch * rotation(0.3)));
        // (diag R)^T (diag R) = R^T diag^2 R
        let expected =
            rotation(0.3).transpose() * DMatrix::from_row_slice(2, 2, &[2.25, 0.0, 0.0, 1.0]) * rotation(0.3);
        assert!((c - expected).abs().max() < 1e-14);
        let c = c_from_theta(&(rotation(0.3) * &stretch));
        assert!((c - DMatrix::from_row_slice(2, 2, &[2.25, 0.0, 0.0, 1.0])).abs().max() < 1e-14);
    }

    #[test]
    fn jacobian_examples() {
        assert_eq!(jacobian(&DMatrix::identity(3, 3)), 1.0);
        assert!((jacobian(&DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0])) - 6.0).abs() < 1e-15);
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, -0.4, 0.3, 2.0, 0.1, -0.5, 0.7, 1.5]);
        let cofactor = m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
            - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
            + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)]);
        assert!((jacobian(&m) - cofactor).abs() < 1e-14);
        let flip = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        assert!(matches!(admissible_jacobian(&flip, 4), Err(Error::Inadmissible { element: 4, .. })));
    }

    #[test]
    fn compatibility_residual_examples() {
        let mesh = build_box_mesh(2, &[2, 2], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[1.1, 0.2, 0.0, 0.9]);
        let phi = DeformationField::affine(&mesh, &a, &[0.0, 0.0]);
        let mut thetas = dphi(&mesh, &phi);
        assert_eq!(compatibility_residual(&mesh, &phi, &thetas).unwrap().norm, 0.0);

        let eps = 1e-3;
        thetas[3][(0, 1)] += eps;
        let r = compatibility_residual(&mesh, &phi, &thetas).unwrap();
        let expected = eps * mesh.element_geometry(3).volume.sqrt();
        assert!((r.norm - expected).abs() < 1e-15);

        let rigid = DeformationField::affine(&mesh, &rotation(0.4), &[0.0, 0.0]);
        let ident = vec![DMatrix::identity(2, 2); mesh.num_elements()];
        assert!(compatibility_residual(&mesh, &rigid, &ident).unwrap().norm > 0.1);
    }
}
