use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{AnalyticCoframe, ChartGrid};
use crate::{Error, Result};

/// Built-in analytic coframes.
///
/// `Warp` and `Twist` are differentials `theta^i = dF^i` of smooth maps and
/// are therefore flat; `Sphere` has unit Gauss curvature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CatalogField {
    /// `theta^i = dx^i` on the unit cube.
    Cartesian { dim: usize },
    /// Coframe rotated by `alpha = x y` on `[0,1]^2`.
    RotXy,
    /// Coframe rotated by `alpha = atan2(y, x)` on `[1,2]^2`.
    RotAtan2,
    /// `theta^1 = dr`, `theta^2 = sin r dphi` on `(r, phi) in [0.5,2.5] x [0,1]`.
    Sphere,
    /// `dF` for `F = (x + 0.2 sin xy, y + 0.1 cos xy)` or
    /// `F = (x + 0.1 sin yz, y + 0.1 sin zx, z + 0.1 sin xy)` on the unit cube.
    Warp { dim: usize },
    /// `dF` for the rotation about z by `alpha = x z / 2`, on `[0,1]^3`.
    Twist,
}

pub const CATALOG_NAMES: [&str; 6] = ["cartesian", "rot-xy", "rot-atan2", "sphere", "warp", "twist"];

impl CatalogField {
    /// `dim` applies to `cartesian` and `warp`; the other fields have a fixed dimension.
    pub fn from_name(name: &str, dim: usize) -> Result<Self> {
        let field = match name {
            "cartesian" => Self::Cartesian { dim },
            "rot-xy" => Self::RotXy,
            "rot-atan2" => Self::RotAtan2,
            "sphere" => Self::Sphere,
            "warp" => Self::Warp { dim },
            "twist" => Self::Twist,
            _ => {
                return Err(Error::InvalidInput(format!(
                    "unknown frame field `{name}` (expected one of {})",
                    CATALOG_NAMES.join(", ")
                )))
            }
        };
        let d = AnalyticCoframe::dim(&field);
        if d != 2 && d != 3 {
            return Err(Error::UnsupportedDimension(d));
        }
        Ok(field)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Cartesian { .. } => "cartesian",
            Self::RotXy => "rot-xy",
            Self::RotAtan2 => "rot-atan2",
            Self::Sphere => "sphere",
            Self::Warp { .. } => "warp",
            Self::Twist => "twist",
        }
    }

    pub fn domain(&self) -> (Vec<f64>, Vec<f64>) {
        let n = AnalyticCoframe::dim(self);
        match self {
            Self::RotAtan2 => (vec![1.0, 1.0], vec![2.0, 2.0]),
            Self::Sphere => (vec![0.5, 0.0], vec![2.5, 1.0]),
            _ => (vec![0.0; n], vec![1.0; n]),
        }
    }

    /// Chart grid over [`CatalogField::domain`] with `divisions` cells per axis.
    pub fn grid(&self, divisions: usize) -> Result<ChartGrid> {
        let (lo, hi) = self.domain();
        ChartGrid::new(&lo, &hi, &vec![divisions; lo.len()])
    }

    pub fn source(&self) -> Arc<dyn AnalyticCoframe> {
        Arc::new(*self)
    }

    /// Whether the coframe is the differential of a map, hence flat.
    pub fn is_flat(&self) -> bool {
        !matches!(self, Self::Sphere)
    }
}

impl fmt::Display for CatalogField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn rotation(a: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[a.cos(), -a.sin(), a.sin(), a.cos()])
}

fn rotation_derivative(a: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[-a.sin(), -a.cos(), a.cos(), -a.sin()])
}

/// Jacobian and Hessian of the warp maps, `hess[i][(j, k)] = d_j d_k F^i`.
fn warp(x: &[f64]) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
    if x.len() == 2 {
        let (px, py) = (x[0], x[1]);
        let (s, c) = (px * py).sin_cos();
        let jac = DMatrix::from_row_slice(2, 2, &[1.0 + 0.2 * py * c, 0.2 * px * c, -0.1 * py * s, 1.0 - 0.1 * px * s]);
        let mixed0 = 0.2 * c - 0.2 * px * py * s;
        let mixed1 = -0.1 * s - 0.1 * px * py * c;
        let h0 = DMatrix::from_row_slice(2, 2, &[-0.2 * py * py * s, mixed0, mixed0, -0.2 * px * px * s]);
        let h1 = DMatrix::from_row_slice(2, 2, &[-0.1 * py * py * c, mixed1, mixed1, -0.1 * px * px * c]);
        return (jac, vec![h0, h1]);
    }
    // F^i = x^i + 0.1 sin(x^j x^k) with (i, j, k) cyclic
    let mut jac = DMatrix::identity(3, 3);
    let mut hess = Vec::with_capacity(3);
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let (s, c) = (x[j] * x[k]).sin_cos();
        jac[(i, j)] = 0.1 * x[k] * c;
        jac[(i, k)] = 0.1 * x[j] * c;
        let mut h = DMatrix::zeros(3, 3);
        h[(j, j)] = -0.1 * x[k] * x[k] * s;
        h[(k, k)] = -0.1 * x[j] * x[j] * s;
        h[(j, k)] = 0.1 * c - 0.1 * x[j] * x[k] * s;
        h[(k, j)] = h[(j, k)];
        hess.push(h);
    }
    (jac, hess)
}

const TWIST_RATE: f64 = 0.5;

/// Jacobian and Hessian of the twist map `F = (u, v, z)` with
/// `u = x c - y s`, `v = x s + y c`, `c, s = cos, sin(k x z)`.
/// `hess[i][(j, k)] = d_j d_k F^i`.
fn twist(x: &[f64]) -> (DMatrix<f64>, [DMatrix<f64>; 2]) {
    let k = TWIST_RATE;
    let (px, py, pz) = (x[0], x[1], x[2]);
    let (s, c) = (k * px * pz).sin_cos();
    let u = px * c - py * s;
    let v = px * s + py * c;
    let jac =
        DMatrix::from_row_slice(3, 3, &[c - k * pz * v, -s, -k * px * v, s + k * pz * u, c, k * px * u, 0.0, 0.0, 1.0]);
    let (uxx, uxy, uxz) =
        (-2.0 * k * pz * s - k * k * pz * pz * u, -k * pz * c, -k * px * s - k * v - k * k * px * pz * u);
    let (uyz, uzz) = (-k * px * c, -k * k * px * px * u);
    let (vxx, vxy, vxz) =
        (2.0 * k * pz * c - k * k * pz * pz * v, -k * pz * s, k * px * c + k * u - k * k * px * pz * v);
    let (vyz, vzz) = (-k * px * s, -k * k * px * px * v);
    let hu = DMatrix::from_row_slice(3, 3, &[uxx, uxy, uxz, uxy, 0.0, uyz, uxz, uyz, uzz]);
    let hv = DMatrix::from_row_slice(3, 3, &[vxx, vxy, vxz, vxy, 0.0, vyz, vxz, vyz, vzz]);
    (jac, [hu, hv])
}

impl AnalyticCoframe for CatalogField {
    fn dim(&self) -> usize {
        match *self {
            Self::Cartesian { dim } | Self::Warp { dim } => dim,
            Self::Twist => 3,
            _ => 2,
        }
    }

    fn coframe(&self, x: &[f64]) -> DMatrix<f64> {
        let n = AnalyticCoframe::dim(self);
        match self {
            Self::Cartesian { .. } => DMatrix::identity(n, n),
            Self::RotXy => rotation(x[0] * x[1]),
            Self::RotAtan2 => rotation(x[1].atan2(x[0])),
            Self::Sphere => DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, x[0].sin()]),
            Self::Warp { .. } => warp(x).0,
            Self::Twist => twist(x).0,
        }
    }

    fn coframe_partial(&self, x: &[f64], axis: usize) -> DMatrix<f64> {
        let n = AnalyticCoframe::dim(self);
        let mut m = DMatrix::zeros(n, n);
        match self {
            Self::Cartesian { .. } => {}
            Self::RotXy => {
                let grad = [x[1], x[0]];
                m = rotation_derivative(x[0] * x[1]) * grad[axis];
            }
            Self::RotAtan2 => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                let grad = [-x[1] / r2, x[0] / r2];
                m = rotation_derivative(x[1].atan2(x[0])) * grad[axis];
            }
            Self::Sphere => {
                if axis == 0 {
                    m[(1, 1)] = x[0].cos();
                }
            }
            Self::Warp { .. } => {
                for (i, h) in warp(x).1.iter().enumerate() {
                    for j in 0..n {
                        m[(i, j)] = h[(j, axis)];
                    }
                }
            }
            Self::Twist => {
                for (i, h) in twist(x).1.iter().enumerate() {
                    for j in 0..3 {
                        m[(i, j)] = h[(j, axis)];
                    }
                }
            }
        }
        m
    }
}
