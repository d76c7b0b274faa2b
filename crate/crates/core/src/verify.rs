//! Fast self-check suite: algebraic identities of the exterior algebra,
//! finite-difference checks of the constitutive and Hu-Washizu derivatives,
//! and one 2D patch test. Deterministic for a given seed.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constitutive::EnergyModel;
use crate::exterior::{basis_len, hodge, pullback, wedge, KFormPoint, MetricPoint};
use crate::hw::{
    assemble_functional, initial_guess, newton_solve, residual_phi_full, residual_tau, residual_theta, BoundaryData,
    HWState, SolverConfig,
};
use crate::kinematics::{dphi, DeformationField};
use crate::mesh::{build_box_mesh, SimplicialMesh};
use crate::Result;

pub const DEFAULT_SEED: u64 = 0x5eed_2024;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub cases: usize,
    /// Worst observed error, in the check's own (relative) measure.
    pub max_error: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} ({} cases, max error {:.3e}, tolerance {:.1e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.max_error,
            self.tolerance
        )
    }
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = a.iter().chain(b).fold(1.0_f64, |m, x| m.max(x.abs()));
    diff / scale
}

pub fn random_form(rng: &mut impl Rng, dim: usize, degree: usize) -> KFormPoint {
    let c: Vec<f64> = (0..basis_len(dim, degree)).map(|_| rng.gen_range(-1.0..1.0)).collect();
    KFormPoint::new(dim, degree, &c).expect("valid shape")
}

pub fn random_matrix(rng: &mut impl Rng, dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0))
}

/// `L L^T + I / 2` with entries of `L` in `[-1, 1]`.
pub fn random_metric(rng: &mut impl Rng, dim: usize) -> MetricPoint {
    let l = random_matrix(rng, dim);
    let g = &l * l.transpose() + DMatrix::identity(dim, dim) * 0.5;
    MetricPoint::new((&g + g.transpose()) * 0.5).expect("SPD by construction")
}

/// `I + 0.3 R` with `det >= 0.2`.
pub fn random_admissible(rng: &mut impl Rng, dim: usize) -> DMatrix<f64> {
    loop {
        let f = DMatrix::identity(dim, dim) + random_matrix(rng, dim) * 0.3;
        if f.determinant() >= 0.2 {
            return f;
        }
    }
}

/// Anticommutativity, associativity, Hodge defining relation, Hodge
/// involution and pullback functoriality, `cases` random cases per
/// dimension each.
pub fn exterior_identities(cases: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0_f64; 5];
    for dim in [2, 3] {
        for _ in 0..cases {
            // degrees with k + l + m <= dim so every product below is defined
            let k = rng.gen_range(0..=dim);
            let l = rng.gen_range(0..=dim - k);
            let m = rng.gen_range(0..=dim - k - l);
            let (a, b, c) =
                (random_form(&mut rng, dim, k), random_form(&mut rng, dim, l), random_form(&mut rng, dim, m));

            let sign = if (k * l) % 2 == 0 { 1.0 } else { -1.0 };
            let (ab, ba) = (wedge(&a, &b)?, wedge(&b, &a)?.scale(sign));
            worst[0] = worst[0].max(rel(ab.coeffs(), ba.coeffs()));
            let left = wedge(&ab, &c)?;
            let right = wedge(&a, &wedge(&b, &c)?)?;
            worst[1] = worst[1].max(rel(left.coeffs(), right.coeffs()));

            let g = random_metric(&mut rng, dim);
            let beta = random_form(&mut rng, dim, k);
            let lhs = wedge(&beta, &hodge(&a, &g)?)?;
            let rhs = g.volume_form().scale(g.inner(&beta, &a)?);
            worst[2] = worst[2].max(rel(lhs.coeffs(), rhs.coeffs()));

            let sign = if (k * (dim - k)) % 2 == 0 { 1.0 } else { -1.0 };
            let twice = hodge(&hodge(&a, &g)?, &g)?;
            worst[3] = worst[3].max(rel(twice.coeffs(), a.scale(sign).coeffs()));

            let (f, h) = (random_matrix(&mut rng, dim), random_matrix(&mut rng, dim));
            let composed = pullback(&a, &(&f * &h))?;
            let stepwise = pullback(&pullback(&a, &f)?, &h)?;
            let lhs = pullback(&ab, &f)?;
            let rhs = wedge(&pullback(&a, &f)?, &pullback(&b, &f)?)?;
            let err = rel(composed.coeffs(), stepwise.coeffs()).max(rel(lhs.coeffs(), rhs.coeffs()));
            worst[4] = worst[4].max(err);
        }
    }
    let names = [
        "wedge anticommutativity",
        "wedge associativity",
        "Hodge defining relation",
        "Hodge involution",
        "pullback functoriality",
    ];
    Ok(names
        .iter()
        .zip(worst)
        .map(|(name, max_error)| CheckResult { name: name.to_string(), cases: 2 * cases, max_error, tolerance: 1e-12 })
        .collect())
}

fn flat(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    (0..n * n).map(|p| m[(p / n, p % n)]).collect()
}

/// Central differences of `W` against `pk1` and of `pk1` against the
/// tangent, over random admissible states for both models in 2D and 3D.
pub fn constitutive_gradients(cases: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6;
    let (mut worst_p, mut worst_a) = (0.0_f64, 0.0_f64);
    let models = [EnergyModel::svk(1.2, 0.8), EnergyModel::neo_hookean(1.2, 0.8)];
    for dim in [2, 3] {
        for model in &models {
            for _ in 0..cases {
                let f = random_admissible(&mut rng, dim);
                let p = model.pk1(&f)?;
                let a = model.tangent(&f)?;
                let mut fd_p = vec![0.0; dim * dim];
                let mut fd_a = DMatrix::zeros(dim * dim, dim * dim);
                for q in 0..dim * dim {
                    let mut fp = f.clone();
                    let mut fm = f.clone();
                    fp[(q / dim, q % dim)] += h;
                    fm[(q / dim, q % dim)] -= h;
                    fd_p[q] = (model.energy(&fp)? - model.energy(&fm)?) / (2.0 * h);
                    let col = (model.pk1(&fp)? - model.pk1(&fm)?) / (2.0 * h);
                    fd_a.set_column(q, &DVector::from_vec(flat(&col)));
                }
                worst_p = worst_p.max(rel(&fd_p, &flat(&p)));
                worst_a = worst_a.max(rel(fd_a.as_slice(), a.as_slice()));
            }
        }
    }
    Ok(vec![
        CheckResult {
            name: "stress is the energy gradient".into(),
            cases: 4 * cases,
            max_error: worst_p,
            tolerance: 1e-6,
        },
        CheckResult {
            name: "tangent is the stress gradient".into(),
            cases: 4 * cases,
            max_error: worst_a,
            tolerance: 1e-5,
        },
    ])
}

/// Random state near the reference on `mesh`: perturbed positions,
/// `Theta = dphi` plus noise, random tractions.
pub fn random_state(rng: &mut impl Rng, mesh: &SimplicialMesh, amplitude: f64) -> HWState {
    let n = mesh.dim();
    let mut phi = DeformationField::identity(mesh);
    let h = mesh.scale() / (mesh.num_vertices() as f64).powf(1.0 / n as f64);
    for p in phi.as_mut_slice() {
        *p += amplitude * h * rng.gen_range(-1.0..1.0);
    }
    let theta = dphi(mesh, &phi).into_iter().map(|t| t + random_matrix(rng, n) * amplitude).collect();
    let traction = (0..mesh.num_elements()).map(|_| random_matrix(rng, n)).collect();
    HWState { phi, theta, traction }
}

/// Directional central differences of the functional against the three
/// residuals, per field and jointly. Errors are relative to
/// `max(|dE|, |E|)`; cancellation makes the plain relative error
/// meaningless for directions with small derivative.
pub fn variational_consistency(mesh: &SimplicialMesh, states: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = mesh.dim();
    let h = 1e-6;
    let mut bcs = BoundaryData { body_force: Some(vec![0.3; n]), ..Default::default() };
    bcs.neumann.insert(2, vec![-0.2; n]);
    let models = [EnergyModel::svk(1.0, 1.0), EnergyModel::neo_hookean(1.0, 1.0)];
    let mut worst = [0.0_f64; 4];
    for s in 0..states {
        let model = &models[s % 2];
        let state = random_state(&mut rng, mesh, 0.05);
        let r_phi = residual_phi_full(mesh, &state, &bcs);
        let r_theta = residual_theta(mesh, &state, model)?;
        let r_tau = residual_tau(mesh, &state);
        let e0 = assemble_functional(mesh, &state, &bcs, model)?.abs();
        let dir = HWState {
            phi: DeformationField::new(n, (0..n * mesh.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect())?,
            theta: (0..mesh.num_elements()).map(|_| random_matrix(&mut rng, n)).collect(),
            traction: (0..mesh.num_elements()).map(|_| random_matrix(&mut rng, n)).collect(),
        };
        for (which, slot) in worst.iter_mut().enumerate() {
            let mut d = dir.clone();
            if which != 0 && which != 3 {
                d.phi.as_mut_slice().iter_mut().for_each(|x| *x = 0.0);
            }
            if which != 1 && which != 3 {
                d.theta.iter_mut().for_each(|m| m.fill(0.0));
            }
            if which != 2 && which != 3 {
                d.traction.iter_mut().for_each(|m| m.fill(0.0));
            }
            let fd = (assemble_functional(mesh, &state.axpy(h, &d), &bcs, model)?
                - assemble_functional(mesh, &state.axpy(-h, &d), &bcs, model)?)
                / (2.0 * h);
            let exact: f64 = r_phi.iter().zip(d.phi.as_slice()).map(|(r, x)| r * x).sum::<f64>()
                + r_theta.iter().zip(&d.theta).map(|(r, x)| r.dot(x)).sum::<f64>()
                + r_tau.iter().zip(&d.traction).map(|(r, x)| r.dot(x)).sum::<f64>();
            *slot = slot.max((fd - exact).abs() / exact.abs().max(e0).max(1e-300));
        }
    }
    let names = [
        "equilibrium residual is dE/dphi",
        "constitutive residual is dE/dTheta",
        "compatibility residual is dE/dT",
        "joint directional derivative of E",
    ];
    Ok(names
        .iter()
        .zip(worst)
        .map(|(name, max_error)| CheckResult { name: name.to_string(), cases: states, max_error, tolerance: 1e-7 })
        .collect())
}

/// Affine Dirichlet data `diag(1.1, 0.95)` on the boundary of a 4x4 mesh:
/// the Newton solution must be the affine map everywhere.
pub fn patch_test_2d() -> Result<CheckResult> {
    let mesh = build_box_mesh(2, &[4, 4], &[0.0, 0.0], &[1.0, 1.0])?;
    let a = DMatrix::from_row_slice(2, 2, &[1.1, 0.0, 0.0, 0.95]);
    let model = EnergyModel::neo_hookean(1.0, 1.0);
    let bcs = BoundaryData::affine_dirichlet(&mesh, &[1, 2, 3, 4], &a, &[0.0, 0.0]);
    let sol = newton_solve(&mesh, &bcs, &model, &SolverConfig::default(), initial_guess(&mesh, &bcs, &model)?)?;
    let exact = DeformationField::affine(&mesh, &a, &[0.0, 0.0]);
    let p = model.pk1(&a)?;
    let mut err = rel(sol.state.phi.as_slice(), exact.as_slice());
    for e in 0..mesh.num_elements() {
        err = err.max((&sol.state.theta[e] - &a).abs().max());
        err = err.max((&sol.state.traction[e] - &p).abs().max());
    }
    Ok(CheckResult { name: "2D patch test".into(), cases: 1, max_error: err, tolerance: 1e-9 })
}

/// The whole fast suite.
pub fn run_all(seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = exterior_identities(200, seed)?;
    out.extend(constitutive_gradients(20, seed.wrapping_add(1))?);
    let mesh = build_box_mesh(2, &[3, 3], &[0.0, 0.0], &[1.0, 1.0])?;
    out.extend(variational_consistency(&mesh, 4, seed.wrapping_add(2))?);
    out.push(patch_test_2d()?);
    Ok(out)
}
