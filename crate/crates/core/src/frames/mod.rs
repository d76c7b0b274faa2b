//! Cartan moving frames on chart grids.
//!
//! Conventions: a coframe `theta^i = Theta[i][j] dx^j` is orthonormal for
//! the metric it induces, `g = delta_ij theta^i (x) theta^j`. The connection
//! is the unique antisymmetric matrix of 1-forms satisfying the torsion-free
//! first structure equation
//!
//! ```text
//! d theta^i + omega^i_j ^ theta^j = 0,
//! ```
//!
//! and the curvature is `Omega^i_j = d omega^i_j + omega^i_k ^ omega^k_j`.
//! Both vanish exactly when the metric is Euclidean on the chart.

mod catalog;
mod export;
mod grid;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::exterior::{basis_len, pullback, wedge, KFormPoint, MetricPoint};
use crate::par::Policy;
use crate::{Error, Result};

pub use catalog::{CatalogField, CATALOG_NAMES};
pub use export::{write_frames_csv, write_frames_vtk};
pub use grid::{numeric_d, numeric_d_with, ChartGrid, FormFieldGrid, INTERIOR_MARGIN};

/// Closed-form coframe used for sampling and for exact exterior derivatives
/// in convergence studies.
pub trait AnalyticCoframe: fmt::Debug + Send + Sync {
    fn dim(&self) -> usize;

    /// Coefficient matrix, row `i` = components of `theta^i`.
    fn coframe(&self, x: &[f64]) -> DMatrix<f64>;

    /// `d/dx^axis` of [`AnalyticCoframe::coframe`].
    fn coframe_partial(&self, x: &[f64], axis: usize) -> DMatrix<f64>;

    /// Exact `d theta^i = sum_k dx^k ^ d_k theta^i`.
    fn d_coframe(&self, x: &[f64]) -> Result<Vec<KFormPoint>> {
        let n = self.dim();
        let partials: Vec<DMatrix<f64>> = (0..n).map(|k| self.coframe_partial(x, k)).collect();
        (0..n)
            .map(|i| {
                let mut out = KFormPoint::zero(n, 2)?;
                for (k, p) in partials.iter().enumerate() {
                    let row: Vec<f64> = p.row(i).iter().copied().collect();
                    out = out + wedge(&KFormPoint::dx(n, k)?, &KFormPoint::one_form(&row)?)?;
                }
                Ok(out)
            })
            .collect()
    }
}

fn check_orientation(grid: &ChartGrid, node: usize, m: &DMatrix<f64>) -> Result<f64> {
    let n = m.nrows();
    let scale = m.abs().max().max(f64::MIN_POSITIVE).powi(n as i32);
    let det = m.determinant();
    if det.abs() < 1e-12 * scale {
        return Err(Error::SingularFrame { node, coords: grid.coords(node), det });
    }
    if det < 0.0 {
        return Err(Error::InvalidInput(format!("coframe at node {node} is negatively oriented (det = {det:e})")));
    }
    Ok(det)
}

/// Frame vectors `e_j` sampled at the nodes; column `j` of each matrix is `e_j`.
#[derive(Debug, Clone)]
pub struct FrameField {
    grid: ChartGrid,
    frames: Vec<DMatrix<f64>>,
}

impl FrameField {
    pub fn new(grid: ChartGrid, frames: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = grid.dim();
        if frames.len() != grid.node_count() || frames.iter().any(|f| f.shape() != (n, n)) {
            return Err(Error::DimensionMismatch("frame field shape".into()));
        }
        Ok(Self { grid, frames })
    }

    pub fn sample(grid: &ChartGrid, f: impl Fn(&[f64]) -> DMatrix<f64>) -> Result<Self> {
        let frames = (0..grid.node_count()).map(|n| f(&grid.coords(n))).collect();
        Self::new(grid.clone(), frames)
    }

    pub fn grid(&self) -> &ChartGrid {
        &self.grid
    }

    pub fn at(&self, node: usize) -> &DMatrix<f64> {
        &self.frames[node]
    }
}

/// The `n` coframe 1-form fields `theta^i`.
#[derive(Debug, Clone)]
pub struct CoframeField {
    grid: ChartGrid,
    forms: Vec<FormFieldGrid>,
    source: Option<Arc<dyn AnalyticCoframe>>,
}

impl CoframeField {
    /// Validates degree 1 and `det Theta > 0` at every node.
    pub fn from_forms(forms: Vec<FormFieldGrid>) -> Result<Self> {
        let grid =
            forms.first().map(|f| f.grid().clone()).ok_or_else(|| Error::DimensionMismatch("empty coframe".into()))?;
        if forms.len() != grid.dim() || forms.iter().any(|f| f.degree() != 1 || f.grid() != &grid) {
            return Err(Error::DimensionMismatch("coframe needs n 1-form fields on one grid".into()));
        }
        let field = Self { grid, forms, source: None };
        for node in 0..field.grid.node_count() {
            check_orientation(&field.grid, node, &field.matrix_at(node))?;
        }
        Ok(field)
    }

    /// Samples an analytic coframe and keeps it for exact derivatives.
    pub fn sample(grid: &ChartGrid, source: Arc<dyn AnalyticCoframe>) -> Result<Self> {
        let n = grid.dim();
        if source.dim() != n {
            return Err(Error::DimensionMismatch("analytic coframe vs grid dimension".into()));
        }
        let mats: Vec<DMatrix<f64>> = (0..grid.node_count()).map(|k| source.coframe(&grid.coords(k))).collect();
        let forms = (0..n)
            .map(|i| {
                let values = mats
                    .iter()
                    .map(|m| KFormPoint::one_form(&m.row(i).iter().copied().collect::<Vec<_>>()))
                    .collect::<Result<Vec<_>>>()?;
                FormFieldGrid::new(grid.clone(), 1, values)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut field = Self::from_forms(forms)?;
        field.source = Some(source);
        Ok(field)
    }

    pub fn grid(&self) -> &ChartGrid {
        &self.grid
    }

    pub fn forms(&self) -> &[FormFieldGrid] {
        &self.forms
    }

    pub fn source(&self) -> Option<&Arc<dyn AnalyticCoframe>> {
        self.source.as_ref()
    }

    /// Drops the analytic source, so derivatives fall back to finite differences.
    pub fn without_source(mut self) -> Self {
        self.source = None;
        self
    }

    pub fn matrix_at(&self, node: usize) -> DMatrix<f64> {
        let n = self.grid.dim();
        DMatrix::from_fn(n, n, |i, j| self.forms[i].at(node).coeffs()[j])
    }

    /// `d theta^i` by finite differences.
    pub fn numeric_derivative(&self) -> Result<Vec<FormFieldGrid>> {
        self.forms.iter().map(numeric_d).collect()
    }

    /// `d theta^i`: exact when an analytic source is attached, otherwise
    /// by finite differences.
    pub fn exterior_derivative(&self) -> Result<Vec<FormFieldGrid>> {
        let Some(src) = &self.source else {
            return self.numeric_derivative();
        };
        let n = self.grid.dim();
        let per_node: Vec<Vec<KFormPoint>> =
            Policy::default().try_map(self.grid.node_count(), |node| src.d_coframe(&self.grid.coords(node)))?;
        (0..n).map(|i| FormFieldGrid::new(self.grid.clone(), 2, per_node.iter().map(|v| v[i]).collect())).collect()
    }
}

/// Pointwise inverse of a frame: `theta^i(e_j) = delta^i_j`.
pub fn coframe_from_frame(frame: &FrameField) -> Result<CoframeField> {
    let grid = frame.grid();
    let n = grid.dim();
    let mats = Policy::default().try_map(grid.node_count(), |node| {
        let e = frame.at(node);
        let scale = e.abs().max().max(f64::MIN_POSITIVE).powi(n as i32);
        let det = e.determinant();
        if det.abs() < 1e-12 * scale {
            return Err(Error::SingularFrame { node, coords: grid.coords(node), det });
        }
        e.clone().try_inverse().ok_or(Error::SingularFrame { node, coords: grid.coords(node), det })
    })?;
    let forms = (0..n)
        .map(|i| {
            let values = mats
                .iter()
                .map(|m| KFormPoint::one_form(&m.row(i).iter().copied().collect::<Vec<_>>()))
                .collect::<Result<Vec<_>>>()?;
            FormFieldGrid::new(grid.clone(), 1, values)
        })
        .collect::<Result<Vec<_>>>()?;
    CoframeField::from_forms(forms)
}

fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    match (n, i, j) {
        (2, 0, 1) => 0,
        (3, 0, 1) => 0,
        (3, 0, 2) => 1,
        (3, 1, 2) => 2,
        _ => unreachable!(),
    }
}

/// Index pairs `(i, j)` with `i < j`, in storage order.
pub fn upper_pairs(n: usize) -> Vec<(usize, usize)> {
    match n {
        2 => vec![(0, 1)],
        _ => vec![(0, 1), (0, 2), (1, 2)],
    }
}

/// Antisymmetric `n x n` matrix of form fields, storing only `i < j`.
///
/// Antisymmetry holds by construction: `at(node, j, i) = -at(node, i, j)`
/// and the diagonal is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewFormField {
    grid: ChartGrid,
    degree: usize,
    upper: Vec<FormFieldGrid>,
}

/// Connection 1-forms `omega^i_j`.
pub type ConnectionField = SkewFormField;
/// Curvature 2-forms `Omega^i_j`.
pub type CurvatureField = SkewFormField;

impl SkewFormField {
    /// `upper` lists the fields for `(0,1)` in 2D and `(0,1), (0,2), (1,2)` in 3D.
    pub fn from_upper(upper: Vec<FormFieldGrid>) -> Result<Self> {
        let first = upper.first().ok_or_else(|| Error::DimensionMismatch("empty skew field".into()))?;
        let grid = first.grid().clone();
        let degree = first.degree();
        let n = grid.dim();
        if upper.len() != n * (n - 1) / 2 || upper.iter().any(|f| f.grid() != &grid || f.degree() != degree) {
            return Err(Error::DimensionMismatch("skew field needs C(n,2) fields of one shape".into()));
        }
        Ok(Self { grid, degree, upper })
    }

    pub fn zero(grid: &ChartGrid, degree: usize) -> Result<Self> {
        let n = grid.dim();
        let upper =
            (0..n * (n - 1) / 2).map(|_| FormFieldGrid::zero(grid.clone(), degree)).collect::<Result<Vec<_>>>()?;
        Self::from_upper(upper)
    }

    pub fn grid(&self) -> &ChartGrid {
        &self.grid
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn upper(&self) -> &[FormFieldGrid] {
        &self.upper
    }

    pub fn entry(&self, i: usize, j: usize) -> Option<&FormFieldGrid> {
        (i < j).then(|| &self.upper[pair_index(self.grid.dim(), i, j)])
    }

    pub fn at(&self, node: usize, i: usize, j: usize) -> KFormPoint {
        let n = self.grid.dim();
        if i == j {
            KFormPoint::zero(n, self.degree).expect("valid shape")
        } else if i < j {
            *self.upper[pair_index(n, i, j)].at(node)
        } else {
            -*self.upper[pair_index(n, j, i)].at(node)
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().fold(0.0, |m, f| m.max(f.max_abs()))
    }

    pub fn max_abs_on(&self, nodes: &[usize]) -> f64 {
        self.upper.iter().fold(0.0, |m, f| m.max(f.max_abs_on(nodes)))
    }

    /// Coefficients re-expressed in the coframe basis `theta^I` instead of
    /// `dx^I` (pointwise pullback by `Theta^-1`).
    pub fn in_coframe(&self, theta: &CoframeField) -> Result<Self> {
        if theta.grid() != &self.grid {
            return Err(Error::DimensionMismatch("coframe on a different grid".into()));
        }
        let inverses: Vec<DMatrix<f64>> = (0..self.grid.node_count())
            .map(|k| theta.matrix_at(k).try_inverse().expect("coframe validated nondegenerate"))
            .collect();
        let upper = self
            .upper
            .iter()
            .map(|f| {
                let values =
                    f.values().iter().zip(&inverses).map(|(v, inv)| pullback(v, inv)).collect::<Result<Vec<_>>>()?;
                FormFieldGrid::new(self.grid.clone(), self.degree, values)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_upper(upper)
    }
}

/// Solves the torsion-free first structure equation for the antisymmetric
/// connection, node by node, with `d theta` from finite differences.
///
/// Unknowns are the `n` components of each `omega^i_j, i < j`; equations are
/// the `C(n,2)` coefficients of each of the `n` structure equations, giving a
/// square system of size `n * C(n,2)`.
pub fn connection_from_coframe(theta: &CoframeField) -> Result<ConnectionField> {
    connection_from_coframe_with(Policy::default(), theta)
}

pub fn connection_from_coframe_with(policy: Policy, theta: &CoframeField) -> Result<ConnectionField> {
    let grid = theta.grid();
    let n = grid.dim();
    let dtheta: Vec<FormFieldGrid> = theta.forms().iter().map(|f| numeric_d_with(policy, f)).collect::<Result<_>>()?;
    let pairs = upper_pairs(n);
    let m2 = basis_len(n, 2);
    let size = n * m2;

    let solutions = policy.try_map(grid.node_count(), |node| {
        let th: Vec<KFormPoint> = theta.forms().iter().map(|f| *f.at(node)).collect();
        let mut mat = DMatrix::zeros(size, size);
        for (p, &(i, j)) in pairs.iter().enumerate() {
            for comp in 0..n {
                let col = p * n + comp;
                let dxc = KFormPoint::dx(n, comp)?;
                // omega^i_j = dx^c contributes dx^c ^ theta^j to equation i,
                // omega^j_i = -dx^c contributes -dx^c ^ theta^i to equation j.
                let to_i = wedge(&dxc, &th[j])?;
                let to_j = wedge(&dxc, &th[i])?;
                for b in 0..m2 {
                    mat[(i * m2 + b, col)] += to_i.coeffs()[b];
                    mat[(j * m2 + b, col)] -= to_j.coeffs()[b];
                }
            }
        }
        let rhs = DVector::from_fn(size, |r, _| -dtheta[r / m2].at(node).coeffs()[r % m2]);
        mat.lu().solve(&rhs).ok_or_else(|| Error::SingularFrame { node, coords: grid.coords(node), det: 0.0 })
    })?;

    let upper = (0..pairs.len())
        .map(|p| {
            let values = solutions
                .iter()
                .map(|x| KFormPoint::one_form(&x.as_slice()[p * n..(p + 1) * n]))
                .collect::<Result<Vec<_>>>()?;
            FormFieldGrid::new(grid.clone(), 1, values)
        })
        .collect::<Result<Vec<_>>>()?;
    ConnectionField::from_upper(upper)
}

#[derive(Debug, Clone)]
pub struct TorsionResidual {
    /// `max_i |d theta^i + omega^i_j ^ theta^j|` (coefficient max-norm) per node.
    pub per_node: Vec<f64>,
    pub max: f64,
    /// Max over nodes at least [`INTERIOR_MARGIN`] cells from the boundary.
    pub max_interior: f64,
}

/// First structure equation residual. Uses the exact `d theta` when the
/// coframe carries an analytic source, so for a connection computed by
/// [`connection_from_coframe`] it measures the discretization error.
pub fn torsion_residual(theta: &CoframeField, omega: &ConnectionField) -> Result<TorsionResidual> {
    let grid = theta.grid();
    if omega.grid() != grid || omega.degree() != 1 {
        return Err(Error::DimensionMismatch("connection does not match coframe".into()));
    }
    let n = grid.dim();
    let dtheta = theta.exterior_derivative()?;
    let per_node = Policy::default().try_map(grid.node_count(), |node| {
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let mut r = *dtheta[i].at(node);
            for j in 0..n {
                if j != i {
                    r = r + wedge(&omega.at(node, i, j), theta.forms()[j].at(node))?;
                }
            }
            worst = worst.max(r.max_abs());
        }
        Ok::<f64, Error>(worst)
    })?;
    let max = per_node.iter().copied().fold(0.0, f64::max);
    let max_interior = grid.interior_nodes(INTERIOR_MARGIN).iter().map(|&k| per_node[k]).fold(0.0, f64::max);
    Ok(TorsionResidual { per_node, max, max_interior })
}

/// Second structure equation `Omega^i_j = d omega^i_j + omega^i_k ^ omega^k_j`.
pub fn curvature(omega: &ConnectionField) -> Result<CurvatureField> {
    curvature_with(Policy::default(), omega)
}

pub fn curvature_with(policy: Policy, omega: &ConnectionField) -> Result<CurvatureField> {
    if omega.degree() != 1 {
        return Err(Error::DimensionMismatch("curvature needs a connection of 1-forms".into()));
    }
    let grid = omega.grid();
    let n = grid.dim();
    let pairs = upper_pairs(n);
    let upper = pairs
        .iter()
        .map(|&(i, j)| {
            let d = numeric_d_with(policy, omega.entry(i, j).expect("i < j"))?;
            let values = policy.try_map(grid.node_count(), |node| {
                let mut v = *d.at(node);
                for k in 0..n {
                    if k != i && k != j {
                        v = v + wedge(&omega.at(node, i, k), &omega.at(node, k, j))?;
                    }
                }
                Ok::<KFormPoint, Error>(v)
            })?;
            FormFieldGrid::new(grid.clone(), 2, values)
        })
        .collect::<Result<Vec<_>>>()?;
    CurvatureField::from_upper(upper)
}

/// `g = Theta^T Theta` at every node.
pub fn metric_from_coframe(theta: &CoframeField) -> Result<Vec<MetricPoint>> {
    (0..theta.grid().node_count())
        .map(|node| {
            let m = theta.matrix_at(node);
            let g = m.transpose() * &m;
            MetricPoint::new((&g + g.transpose()) * 0.5)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct FlatnessReport {
    pub connection: ConnectionField,
    pub torsion: TorsionResidual,
    pub curvature: CurvatureField,
    /// Interior max of the curvature coefficients in the `dx` basis.
    pub max_curvature: f64,
    /// Interior max of the curvature coefficients in the `theta` basis.
    pub max_curvature_frame: f64,
    pub tolerance: f64,
    /// `max_curvature <= tolerance`.
    pub compatible: bool,
}

/// Euclidean realizability diagnostic: connection, torsion residual and
/// curvature of a coframe.
pub fn flatness_report(theta: &CoframeField, tolerance: f64) -> Result<FlatnessReport> {
    let connection = connection_from_coframe(theta)?;
    let torsion = torsion_residual(theta, &connection)?;
    let curvature = curvature(&connection)?;
    let interior = theta.grid().interior_nodes(INTERIOR_MARGIN);
    let max_curvature = curvature.max_abs_on(&interior);
    let max_curvature_frame = curvature.in_coframe(theta)?.max_abs_on(&interior);
    Ok(FlatnessReport {
        connection,
        torsion,
        curvature,
        max_curvature,
        max_curvature_frame,
        tolerance,
        compatible: max_curvature <= tolerance,
    })
}

/// Least-squares slope of `log(err)` against `log(h)`; `None` when fewer than
/// two positive errors are available.
pub fn loglog_slope(h: &[f64], err: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = h.iter().zip(err).filter(|(_, &e)| e > 0.0).map(|(&h, &e)| (h.ln(), e.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(n, d), (x, y)| (n + (x - mx) * (y - my), d + (x - mx) * (x - mx)));
    Some(num / den)
}

#[derive(Debug, Clone)]
pub struct RefinementLevel {
    pub divisions: usize,
    pub h: f64,
    pub max_torsion: f64,
    pub max_curvature: f64,
    pub max_curvature_frame: f64,
}

#[derive(Debug, Clone)]
pub struct RefinementStudy {
    pub levels: Vec<RefinementLevel>,
    pub torsion_slope: Option<f64>,
    pub curvature_slope: Option<f64>,
}

/// Interior margin, in chart length per axis, of the coarsest of several
/// grids over one domain.
pub fn study_margin(coarsest: &ChartGrid) -> Vec<f64> {
    (0..coarsest.dim()).map(|a| INTERIOR_MARGIN as f64 * coarsest.spacing(a)).collect()
}

/// Runs [`flatness_report`] on a catalog field at each division count and
/// fits convergence slopes of the torsion and curvature maxima.
///
/// Every level is measured on the interior region of the coarsest grid, so
/// the maxima are taken over one fixed set of chart points.
pub fn refinement_study(field: &CatalogField, divisions: &[usize]) -> Result<RefinementStudy> {
    let coarsest = divisions
        .iter()
        .copied()
        .min()
        .ok_or_else(|| Error::InvalidInput("refinement study needs at least one level".into()))?;
    let margin = study_margin(&field.grid(coarsest)?);
    let mut levels = Vec::with_capacity(divisions.len());
    for &div in divisions {
        let grid = field.grid(div)?;
        let region = grid.nodes_inside(&margin);
        let theta = CoframeField::sample(&grid, field.source())?;
        let report = flatness_report(&theta, f64::INFINITY)?;
        levels.push(RefinementLevel {
            divisions: div,
            h: grid.h(),
            max_torsion: region.iter().map(|&k| report.torsion.per_node[k]).fold(0.0, f64::max),
            max_curvature: report.curvature.max_abs_on(&region),
            max_curvature_frame: report.curvature.in_coframe(&theta)?.max_abs_on(&region),
        });
    }
    let hs: Vec<f64> = levels.iter().map(|l| l.h).collect();
    let torsion: Vec<f64> = levels.iter().map(|l| l.max_torsion).collect();
    let curv: Vec<f64> = levels.iter().map(|l| l.max_curvature).collect();
    Ok(RefinementStudy {
        torsion_slope: loglog_slope(&hs, &torsion),
        curvature_slope: loglog_slope(&hs, &curv),
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rot(a: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a.cos(), -a.sin(), a.sin(), a.cos()])
    }

    fn unit_grid(div: usize) -> ChartGrid {
        ChartGrid::new(&[0.0, 0.0], &[1.0, 1.0], &[div, div]).unwrap()
    }

    #[test]
    fn identity_frame_gives_cartesian_coframe() {
        let g = unit_grid(4);
        let frame = FrameField::sample(&g, |_| DMatrix::identity(2, 2)).unwrap();
        let theta = coframe_from_frame(&frame).unwrap();
        for node in 0..g.node_count() {
            assert_eq!(theta.matrix_at(node), DMatrix::identity(2, 2));
        }
    }

    #[test]
    fn rotated_and_scaled_frames() {
        let g = unit_grid(5);
        let alpha = |x: &[f64]| x[0] * x[1];
        let frame = FrameField::sample(&g, |x| rot(alpha(x))).unwrap();
        let theta = coframe_from_frame(&frame).unwrap();
        for node in 0..g.node_count() {
            let x = g.coords(node);
            // explicit 2x2 inverse of R(a) is R(-a)
            assert!((theta.matrix_at(node) - rot(-alpha(&x))).abs().max() < 1e-15);
            let pairing = theta.matrix_at(node) * frame.at(node);
            assert!((pairing - DMatrix::<f64>::identity(2, 2)).abs().max() <= 1e-13);
        }

        let scaled = FrameField::sample(&g, |_| DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0])).unwrap();
        let theta = coframe_from_frame(&scaled).unwrap();
        assert_eq!(theta.forms()[0].at(3).coeffs(), &[0.5, 0.0]);
    }

    #[test]
    fn singular_frame_names_node() {
        let g = unit_grid(4);
        let frame = FrameField::sample(&g, |x| {
            if x[0] == 0.5 && x[1] == 0.25 {
                DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0])
            } else {
                DMatrix::identity(2, 2)
            }
        })
        .unwrap();
        match coframe_from_frame(&frame) {
            Err(Error::SingularFrame { node, coords, .. }) => {
                assert_eq!(node, g.node_index(&[2, 1]));
                assert_eq!(coords, vec![0.5, 0.25]);
            }
            other => panic!("expected singular frame, got {other:?}"),
        }
    }

    #[test]
    fn cartesian_connection_vanishes() {
        let field = CatalogField::Cartesian { dim: 3 };
        let theta = CoframeField::sample(&field.grid(5).unwrap(), field.source()).unwrap();
        let omega = connection_from_coframe(&theta).unwrap();
        assert_eq!(omega.max_abs(), 0.0);
        assert_eq!(torsion_residual(&theta, &omega).unwrap().max, 0.0);
        assert_eq!(curvature(&omega).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn rotated_coframe_connection_is_d_alpha() {
        let field = CatalogField::RotXy;
        let margin = study_margin(&field.grid(16).unwrap());
        let mut errs = Vec::new();
        let mut hs = Vec::new();
        for div in [16, 32, 64] {
            let grid = field.grid(div).unwrap();
            let theta = CoframeField::sample(&grid, field.source()).unwrap();
            let omega = connection_from_coframe(&theta).unwrap();
            let interior = grid.nodes_inside(&margin);
            let err = interior
                .iter()
                .map(|&k| {
                    let x = grid.coords(k);
                    let w = omega.at(k, 0, 1);
                    (w.coeffs()[0] - x[1]).abs().max((w.coeffs()[1] - x[0]).abs())
                })
                .fold(0.0, f64::max);
            // antisymmetry as stored
            assert_eq!(omega.at(7, 1, 0), -omega.at(7, 0, 1));
            errs.push(err);
            hs.push(grid.h());
        }
        let slope = loglog_slope(&hs, &errs).unwrap();
        assert!((1.8..=2.2).contains(&slope), "slope {slope}");
    }

    #[test]
    fn sphere_like_connection_and_curvature() {
        let field = CatalogField::Sphere;
        let grid = field.grid(64).unwrap();
        let theta = CoframeField::sample(&grid, field.source()).unwrap();
        let omega = connection_from_coframe(&theta).unwrap();
        let omega_frame = curvature(&omega).unwrap().in_coframe(&theta).unwrap();
        let curv = curvature(&omega).unwrap();
        for k in grid.interior_nodes(INTERIOR_MARGIN) {
            let r = grid.coords(k)[0];
            let w = omega.at(k, 0, 1);
            assert!(w.coeffs()[0].abs() < 1e-3);
            assert!((w.coeffs()[1] + r.cos()).abs() < 1e-3);
            assert!((curv.at(k, 0, 1).coeffs()[0] - r.sin()).abs() < 1e-2);
            assert!((omega_frame.at(k, 0, 1).coeffs()[0] - 1.0).abs() < 1e-2);
        }
    }

    #[test]
    fn sampled_polynomial_connection_is_flat() {
        // omega^1_2 = d(xy) = y dx + x dy sampled exactly
        let g = unit_grid(8);
        let w = FormFieldGrid::sample(&g, 1, |x| vec![x[1], x[0]]).unwrap();
        let omega = ConnectionField::from_upper(vec![w]).unwrap();
        let omega_curv = curvature(&omega).unwrap();
        assert!(omega_curv.max_abs_on(&g.interior_nodes(INTERIOR_MARGIN)) <= 1e-13);
        assert!(curvature(&ConnectionField::zero(&g, 1).unwrap()).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn analytic_connection_residual_and_missing_connection() {
        let field = CatalogField::RotXy;
        let margin = study_margin(&field.grid(16).unwrap());
        let mut errs = Vec::new();
        let mut hs = Vec::new();
        for div in [16, 32, 64] {
            let grid = field.grid(div).unwrap();
            // finite-difference d theta against the sampled exact omega
            let theta = CoframeField::sample(&grid, field.source()).unwrap().without_source();
            let w = FormFieldGrid::sample(&grid, 1, |x| vec![x[1], x[0]]).unwrap();
            let omega = ConnectionField::from_upper(vec![w]).unwrap();
            let res = torsion_residual(&theta, &omega).unwrap();
            errs.push(grid.nodes_inside(&margin).iter().map(|&k| res.per_node[k]).fold(0.0, f64::max));
            hs.push(grid.h());
        }
        let slope = loglog_slope(&hs, &errs).unwrap();
        assert!((1.8..=2.2).contains(&slope), "slope {slope}");

        let grid = field.grid(16).unwrap();
        let theta = CoframeField::sample(&grid, field.source()).unwrap();
        let zero = ConnectionField::zero(&grid, 1).unwrap();
        let res = torsion_residual(&theta, &zero).unwrap();
        let dtheta = theta.exterior_derivative().unwrap();
        let expected = dtheta.iter().map(|f| f.max_abs()).fold(0.0, f64::max);
        assert!(res.max > 0.1);
        assert_eq!(res.max, expected);
    }

    #[test]
    fn metric_examples() {
        let g = unit_grid(4);
        let cart = CatalogField::Cartesian { dim: 2 };
        let theta = CoframeField::sample(&g, cart.source()).unwrap();
        assert!(metric_from_coframe(&theta).unwrap().iter().all(|m| m.matrix() == &DMatrix::identity(2, 2)));

        let forms = vec![
            FormFieldGrid::sample(&g, 1, |_| vec![2.0, 0.0]).unwrap(),
            FormFieldGrid::sample(&g, 1, |_| vec![0.0, 1.0]).unwrap(),
        ];
        let theta = CoframeField::from_forms(forms).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        assert!(metric_from_coframe(&theta).unwrap().iter().all(|m| m.matrix() == &expected));

        let theta = CoframeField::sample(&g, CatalogField::RotXy.source()).unwrap();
        for m in metric_from_coframe(&theta).unwrap() {
            assert!((m.matrix() - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-15);
        }
    }

    #[test]
    fn flatness_of_catalog_fields() {
        let cart = CatalogField::Cartesian { dim: 2 };
        let theta = CoframeField::sample(&cart.grid(8).unwrap(), cart.source()).unwrap();
        let r = flatness_report(&theta, 1e-13).unwrap();
        assert!(r.compatible && r.torsion.max <= 1e-13);

        let sphere = CatalogField::Sphere;
        let grid = sphere.grid(32).unwrap();
        let theta = CoframeField::sample(&grid, sphere.source()).unwrap();
        let r = flatness_report(&theta, 1e-3).unwrap();
        assert!(!r.compatible);
        let max_sin = grid.interior_nodes(INTERIOR_MARGIN).iter().map(|&k| grid.coords(k)[0].sin()).fold(0.0, f64::max);
        assert!((r.max_curvature - max_sin).abs() < 1e-2);

        for field in [CatalogField::Warp { dim: 2 }, CatalogField::RotAtan2] {
            let grid = field.grid(32).unwrap();
            let h = grid.h();
            let theta = CoframeField::sample(&grid, field.source()).unwrap();
            let r = flatness_report(&theta, 10.0 * h * h).unwrap();
            assert!(r.compatible, "{field:?}: {} vs {}", r.max_curvature, 10.0 * h * h);
        }
    }

    #[test]
    fn pulled_back_coframes_converge_to_flat_in_3d() {
        for field in [CatalogField::Warp { dim: 3 }, CatalogField::Twist] {
            let study = refinement_study(&field, &[8, 16, 32]).unwrap();
            let slope = study.curvature_slope.unwrap();
            assert!((1.8..=2.2).contains(&slope), "{field:?} curvature slope {slope}");
            let slope = study.torsion_slope.unwrap();
            assert!((1.8..=2.2).contains(&slope), "{field:?} torsion slope {slope}");
        }
    }

    #[test]
    fn slope_fit() {
        let h = [0.1, 0.05, 0.025];
        let e: Vec<f64> = h.iter().map(|h| 3.0 * h * h).collect();
        assert!((loglog_slope(&h, &e).unwrap() - 2.0).abs() < 1e-12);
        assert!(loglog_slope(&h, &[0.0, 0.0, 1.0]).is_none());
    }
}
