//! Stored energies and the stress they generate.
//!
//! With the deformed frame held orthonormal and fixed, the covector part of
//! the stress form is obtained by differentiating the stored energy with
//! respect to the deformation 1-forms: `P[a][A] = dW/dTheta[a][A]`. The
//! traction (n-1)-forms are then `tau_a = P[a][A] *dX^A`, with `*` the
//! Euclidean Hodge star on the reference chart.
//!
//! Fourth-order tangents are stored as `n^2 x n^2` matrices with the
//! row-major flattening `(a, A) -> a * n + A`.

use nalgebra::DMatrix;

use crate::exterior::{self, CoVectorValuedForm, KFormPoint, MetricPoint};
use crate::kinematics::{admissible_jacobian, jacobian};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    pub lambda: f64,
    pub mu: f64,
}

impl MaterialParams {
    /// Requires `mu > 0` and `lambda + 2 mu / n > 0`.
    pub fn new(lambda: f64, mu: f64, dim: usize) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::InvalidInput(format!("mu must be positive, got {mu}")));
        }
        if !(lambda + 2.0 * mu / dim as f64 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "lambda + 2 mu / n must be positive (lambda = {lambda}, mu = {mu}, n = {dim})"
            )));
        }
        Ok(Self { lambda, mu })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaterialKind {
    SaintVenantKirchhoff,
    NeoHookean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyModel {
    pub kind: MaterialKind,
    pub params: MaterialParams,
}

fn green_lagrange(f: &DMatrix<f64>) -> DMatrix<f64> {
    let n = f.nrows();
    (f.transpose() * f - DMatrix::identity(n, n)) * 0.5
}

fn inverse_transpose(f: &DMatrix<f64>) -> DMatrix<f64> {
    f.clone().try_inverse().expect("J > 0 checked by caller").transpose()
}

impl EnergyModel {
    pub fn new(kind: MaterialKind, params: MaterialParams) -> Self {
        Self { kind, params }
    }

    pub fn svk(lambda: f64, mu: f64) -> Self {
        Self::new(MaterialKind::SaintVenantKirchhoff, MaterialParams { lambda, mu })
    }

    pub fn neo_hookean(lambda: f64, mu: f64) -> Self {
        Self::new(MaterialKind::NeoHookean, MaterialParams { lambda, mu })
    }

    /// Stored energy density `W(Theta)`.
    ///
    /// SVK: `(lambda/2)(tr E)^2 + mu tr(E^2)`. Neo-Hookean:
    /// `(mu/2)(tr C - n) - mu ln J + (lambda/2)(ln J)^2`.
    pub fn energy(&self, theta: &DMatrix<f64>) -> Result<f64> {
        let j = admissible_jacobian(theta, 0)?;
        let MaterialParams { lambda, mu } = self.params;
        let n = theta.nrows() as f64;
        Ok(match self.kind {
            MaterialKind::SaintVenantKirchhoff => {
                let e = green_lagrange(theta);
                let tr = e.trace();
                0.5 * lambda * tr * tr + mu * (&e * &e).trace()
            }
            MaterialKind::NeoHookean => {
                let lnj = j.ln();
                0.5 * mu * (theta.norm_squared() - n) - mu * lnj + 0.5 * lambda * lnj * lnj
            }
        })
    }

    /// First Piola-Kirchhoff stress `P = dW/dTheta`.
    pub fn pk1(&self, theta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let j = admissible_jacobian(theta, 0)?;
        let MaterialParams { lambda, mu } = self.params;
        let n = theta.nrows();
        Ok(match self.kind {
            MaterialKind::SaintVenantKirchhoff => {
                let e = green_lagrange(theta);
                let s = DMatrix::identity(n, n) * (lambda * e.trace()) + e * (2.0 * mu);
                theta * s
            }
            MaterialKind::NeoHookean => {
                let fit = inverse_transpose(theta);
                (theta - &fit) * mu + fit * (lambda * j.ln())
            }
        })
    }

    /// Consistent tangent `dP/dTheta`.
    pub fn tangent(&self, theta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let j = admissible_jacobian(theta, 0)?;
        let MaterialParams { lambda, mu } = self.params;
        let n = theta.nrows();
        let f = theta;
        let mut out = DMatrix::zeros(n * n, n * n);
        let delta = |i: usize, k: usize| if i == k { 1.0 } else { 0.0 };
        match self.kind {
            MaterialKind::SaintVenantKirchhoff => {
                let e = green_lagrange(f);
                let s = DMatrix::identity(n, n) * (lambda * e.trace()) + e * (2.0 * mu);
                let fft = f * f.transpose();
                for a in 0..n {
                    for big_a in 0..n {
                        for b in 0..n {
                            for big_b in 0..n {
                                out[(a * n + big_a, b * n + big_b)] = delta(a, b) * s[(big_a, big_b)]
                                    + lambda * f[(a, big_a)] * f[(b, big_b)]
                                    + mu * (f[(a, big_b)] * f[(b, big_a)] + fft[(a, b)] * delta(big_a, big_b));
                            }
                        }
                    }
                }
            }
            MaterialKind::NeoHookean => {
                let fit = inverse_transpose(f);
                let lnj = j.ln();
                for a in 0..n {
                    for big_a in 0..n {
                        for b in 0..n {
                            for big_b in 0..n {
                                out[(a * n + big_a, b * n + big_b)] = mu * delta(a, b) * delta(big_a, big_b)
                                    + (mu - lambda * lnj) * fit[(a, big_b)] * fit[(b, big_a)]
                                    + lambda * fit[(a, big_a)] * fit[(b, big_b)];
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Cauchy stress `sigma = J^-1 P Theta^T`.
pub fn cauchy_from_pk1(p: &DMatrix<f64>, theta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let j = jacobian(theta);
    if !(j > 0.0) {
        return Err(Error::Inadmissible { element: 0, jacobian: j });
    }
    Ok(p * theta.transpose() / j)
}

/// Per-element traction coefficient matrices `P_e`.
pub type TractionForms = Vec<DMatrix<f64>>;

/// `tau_a = sum_A P[a][A] *dX^A` with the Euclidean reference Hodge star.
pub fn traction_forms(p: &DMatrix<f64>) -> Result<CoVectorValuedForm> {
    let n = p.nrows();
    let g = MetricPoint::identity(n)?;
    let stars: Vec<KFormPoint> =
        (0..n).map(|big_a| exterior::hodge(&KFormPoint::dx(n, big_a)?, &g)).collect::<Result<_>>()?;
    let mut parts = Vec::with_capacity(n);
    for a in 0..n {
        let mut tau = KFormPoint::zero(n, n - 1)?;
        for (big_a, star) in stars.iter().enumerate() {
            tau = tau + star.scale(p[(a, big_a)]);
        }
        parts.push(tau);
    }
    CoVectorValuedForm::new(parts)
}

/// Inverse of [`traction_forms`].
pub fn form_to_matrix(tau: &CoVectorValuedForm) -> Result<DMatrix<f64>> {
    let n = tau.dim();
    if tau.degree() != n - 1 {
        return Err(Error::DimensionMismatch("traction forms have degree n - 1".into()));
    }
    let g = MetricPoint::identity(n)?;
    // *dX^A is a signed basis element; read the coefficient back with the
    // matching sign.
    let mut p = DMatrix::zeros(n, n);
    for big_a in 0..n {
        let star = exterior::hodge(&KFormPoint::dx(n, big_a)?, &g)?;
        let (slot, sign) = star
            .coeffs()
            .iter()
            .enumerate()
            .find(|(_, c)| **c != 0.0)
            .map(|(i, c)| (i, *c))
            .expect("Hodge star of a basis 1-form is a signed basis form");
        for a in 0..n {
            p[(a, big_a)] = tau.part(a).coeffs()[slot] * sign;
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::{pair_forms, VectorValuedForm};

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(v))
    }

    fn rot3(t: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[t.cos(), -t.sin(), 0.0, t.sin(), t.cos(), 0.0, 0.0, 0.0, 1.0])
    }

    #[test]
    fn params_validation() {
        assert!(MaterialParams::new(1.0, 0.0, 3).is_err());
        assert!(MaterialParams::new(-1.0, 1.0, 2).is_err());
        assert!(MaterialParams::new(-0.5, 1.0, 3).is_ok());
    }

    #[test]
    fn stress_free_reference() {
        for m in [EnergyModel::svk(2.0, 1.0), EnergyModel::neo_hookean(2.0, 1.0)] {
            for n in [2, 3] {
                let i = DMatrix::identity(n, n);
                assert_eq!(m.energy(&i).unwrap(), 0.0);
                assert!(m.pk1(&i).unwrap().abs().max() <= 1e-14);
                assert!(m.energy(&rot3(0.4)).unwrap().abs() < 1e-14);
            }
        }
    }

    #[test]
    fn svk_uniaxial() {
        let (lambda, mu, s) = (2.0, 1.5, 1.2);
        let m = EnergyModel::svk(lambda, mu);
        let theta = diag(&[s, 1.0, 1.0]);
        let e11 = (s * s - 1.0) / 2.0;
        assert!((m.energy(&theta).unwrap() - (lambda / 2.0 + mu) * e11 * e11).abs() < 1e-14);
        let p = m.pk1(&theta).unwrap();
        assert!((p[(0, 0)] - s * (lambda / 2.0 + mu) * (s * s - 1.0)).abs() < 1e-14);
        assert!((p[(1, 1)] - lambda / 2.0 * (s * s - 1.0)).abs() < 1e-14);
        assert!((p[(2, 2)] - lambda / 2.0 * (s * s - 1.0)).abs() < 1e-14);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(p[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn small_strain_limit_of_svk_tangent() {
        let (lambda, mu) = (1.7, 0.6);
        let a = EnergyModel::svk(lambda, mu).tangent(&DMatrix::identity(3, 3)).unwrap();
        let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let expected = lambda * d(i, j) * d(k, l) + mu * (d(i, k) * d(j, l) + d(i, l) * d(j, k));
                        assert_eq!(a[(i * 3 + j, k * 3 + l)], expected);
                    }
                }
            }
        }
    }

    #[test]
    fn inadmissible_states_are_signalled() {
        let flip = diag(&[-1.0, 1.0]);
        for m in [EnergyModel::svk(1.0, 1.0), EnergyModel::neo_hookean(1.0, 1.0)] {
            assert!(matches!(m.energy(&flip), Err(Error::Inadmissible { .. })));
            assert!(m.pk1(&flip).is_err());
            assert!(m.tangent(&flip).is_err());
        }
        assert!(cauchy_from_pk1(&flip, &flip).is_err());
    }

    #[test]
    fn cauchy_examples() {
        let m = EnergyModel::neo_hookean(1.0, 1.0);
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(cauchy_from_pk1(&p, &DMatrix::identity(2, 2)).unwrap(), p);
        let r = rot3(0.9);
        let sigma = cauchy_from_pk1(&m.pk1(&r).unwrap(), &r).unwrap();
        assert!(sigma.abs().max() < 1e-14);
    }

    #[test]
    fn traction_forms_hodge_table() {
        let mut p = DMatrix::zeros(3, 3);
        p[(0, 0)] = 1.0;
        let tau = traction_forms(&p).unwrap();
        assert_eq!(tau.part(0).coeffs(), &[0.0, 0.0, 1.0]);
        assert_eq!(tau.part(1).coeffs(), &[0.0, 0.0, 0.0]);

        let p = DMatrix::from_row_slice(2, 2, &[0.3, -1.2, 2.5, 0.7]);
        assert_eq!(form_to_matrix(&traction_forms(&p).unwrap()).unwrap(), p);
    }

    #[test]
    fn pairing_reduces_to_contraction_in_2d() {
        let p = DMatrix::from_row_slice(2, 2, &[0.3, -1.2, 2.5, 0.7]);
        let u = DMatrix::from_row_slice(2, 2, &[1.1, 0.4, -0.6, 2.0]);
        let legs = (0..2).map(|a| KFormPoint::one_form(&[u[(a, 0)], u[(a, 1)]])).collect::<Result<Vec<_>>>().unwrap();
        let paired = pair_forms(&traction_forms(&p).unwrap(), &VectorValuedForm::new(legs).unwrap()).unwrap();
        assert!((paired.coeffs()[0] - p.dot(&u)).abs() < 1e-15);
    }
}
