//! Three-field Hu-Washizu formulation of hyperelasticity in forms language.
//!
//! Unknowns are the P1 deformation `phi`, element-constant deformation
//! 1-forms `Theta_e` and element-constant traction coefficients `T_e`. The
//! functional is
//!
//! ```text
//! E = sum_e vol_e [W(Theta_e) + T_e : (dphi_e - Theta_e)]
//!     - sum_e vol_e b . avg_e(phi) - sum_f area_f t . avg_f(phi)
//! ```
//!
//! where `T_e : (dphi_e - Theta_e)` is the integrand of the pairing of the
//! traction (n-1)-forms with `dphi - Theta`. Its three partial derivatives
//! are the compatibility, constitutive and equilibrium residuals. Dirichlet
//! data is imposed strongly on whole vertices.

mod functional;
mod kkt;
mod newton;
mod output;

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::constitutive::{EnergyModel, TractionForms};
use crate::kinematics::{dphi, DeformationField, DeformationOneForms};
use crate::mesh::SimplicialMesh;
use crate::par::Policy;
use crate::{Error, Result};

pub use functional::{
    assemble_functional, load_vector, residual_phi, residual_phi_full, residual_tau, residual_theta, Residuals,
};
pub use kkt::{assemble_kkt, newton_direction, KktMatrix, KktSystem, NewtonDirection};
pub use newton::{condensed_solve, newton_solve, solve, solve_in_steps};
pub use output::{write_history_csv, write_report, write_solution_vtk, ElementFields};

/// The three primal fields.
#[derive(Debug, Clone, PartialEq)]
pub struct HWState {
    pub phi: DeformationField,
    pub theta: DeformationOneForms,
    pub traction: TractionForms,
}

impl HWState {
    /// Compatible state on the constitutive manifold: `Theta = dphi`,
    /// `T = pk1(Theta)`.
    pub fn compatible(mesh: &SimplicialMesh, phi: DeformationField, model: &EnergyModel) -> Result<Self> {
        let theta = dphi(mesh, &phi);
        let traction = pk1_field(model, &theta)?;
        Ok(Self { phi, theta, traction })
    }

    /// `self + s * dir`, field by field.
    pub fn axpy(&self, s: f64, dir: &HWState) -> HWState {
        let mut phi = self.phi.clone();
        for (p, d) in phi.as_mut_slice().iter_mut().zip(dir.phi.as_slice()) {
            *p += s * d;
        }
        let comb = |a: &[DMatrix<f64>], b: &[DMatrix<f64>]| a.iter().zip(b).map(|(x, y)| x + y * s).collect();
        HWState { phi, theta: comb(&self.theta, &dir.theta), traction: comb(&self.traction, &dir.traction) }
    }
}

/// `pk1` on every element; an inadmissible element is reported by index.
pub fn pk1_field(model: &EnergyModel, theta: &[DMatrix<f64>]) -> Result<TractionForms> {
    Policy::default().try_map(theta.len(), |e| model.pk1(&theta[e]).map_err(|err| with_element(err, e)))
}

pub(crate) fn with_element(err: Error, element: usize) -> Error {
    match err {
        Error::Inadmissible { jacobian, .. } => Error::Inadmissible { element, jacobian },
        other => other,
    }
}

/// Constant loads and strongly imposed Dirichlet positions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundaryData {
    /// Vertex id to prescribed position (all components).
    pub dirichlet: BTreeMap<usize, Vec<f64>>,
    /// Boundary marker to constant traction per unit reference area.
    pub neumann: BTreeMap<u32, Vec<f64>>,
    /// Body force per unit reference volume.
    pub body_force: Option<Vec<f64>>,
}

impl BoundaryData {
    /// Prescribes `x -> A x + b` on every vertex carrying one of `markers`.
    pub fn affine_dirichlet(mesh: &SimplicialMesh, markers: &[u32], a: &DMatrix<f64>, b: &[f64]) -> Self {
        let mut out = Self::default();
        out.add_affine_dirichlet(mesh, markers, a, b);
        out
    }

    /// Later calls override earlier ones on shared vertices.
    pub fn add_affine_dirichlet(&mut self, mesh: &SimplicialMesh, markers: &[u32], a: &DMatrix<f64>, b: &[f64]) {
        let n = mesh.dim();
        for v in mesh.vertices_with_markers(markers) {
            let x = mesh.vertex(v);
            let pos = (0..n).map(|r| b[r] + (0..n).map(|c| a[(r, c)] * x[c]).sum::<f64>()).collect();
            self.dirichlet.insert(v, pos);
        }
    }

    pub fn validate(&self, mesh: &SimplicialMesh) -> Result<()> {
        let n = mesh.dim();
        for (&v, p) in &self.dirichlet {
            if v >= mesh.num_vertices() || p.len() != n {
                return Err(Error::InvalidInput(format!("bad Dirichlet entry for vertex {v}")));
            }
        }
        for (m, t) in &self.neumann {
            if t.len() != n {
                return Err(Error::InvalidInput(format!("traction on marker {m} needs {n} components")));
            }
        }
        if let Some(b) = &self.body_force {
            if b.len() != n {
                return Err(Error::InvalidInput(format!("body force needs {n} components")));
            }
        }
        Ok(())
    }

    /// Data at load factor `s`: Dirichlet displacements, tractions and body
    /// force multiplied by `s`.
    pub fn scaled(&self, mesh: &SimplicialMesh, s: f64) -> Self {
        let dirichlet = self
            .dirichlet
            .iter()
            .map(|(&v, p)| {
                let x = mesh.vertex(v);
                (v, p.iter().zip(x).map(|(pi, xi)| xi + s * (pi - xi)).collect())
            })
            .collect();
        let scale = |t: &Vec<f64>| t.iter().map(|c| s * c).collect::<Vec<f64>>();
        Self {
            dirichlet,
            neumann: self.neumann.iter().map(|(&m, t)| (m, scale(t))).collect(),
            body_force: self.body_force.as_ref().map(scale),
        }
    }

    pub fn is_constrained(&self, vertex: usize) -> bool {
        self.dirichlet.contains_key(&vertex)
    }

    /// Overwrites constrained vertices of `phi` with their data.
    pub fn impose(&self, phi: &mut DeformationField) {
        for (&v, p) in &self.dirichlet {
            phi.position_mut(v).copy_from_slice(p);
        }
    }

    /// Flat indices `v * n + a` of unconstrained components, ascending.
    pub fn free_dofs(&self, mesh: &SimplicialMesh) -> Vec<usize> {
        let n = mesh.dim();
        (0..mesh.num_vertices())
            .filter(|v| !self.is_constrained(*v))
            .flat_map(|v| (0..n).map(move |a| v * n + a))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    /// Newton on all three fields with the full saddle-point system.
    Monolithic,
    /// `Theta := dphi` and `T := pk1(Theta)` eliminated elementwise.
    Condensed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub mode: SolveMode,
    pub tol_rel: f64,
    /// `None` selects `1e-12 * mu * mesh scale`.
    pub tol_abs: Option<f64>,
    pub max_iter: usize,
    pub backtrack: f64,
    pub sufficient_decrease: f64,
    pub max_backtracks: usize,
    pub policy: Policy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mode: SolveMode::Monolithic,
            tol_rel: 1e-10,
            tol_abs: None,
            max_iter: 50,
            backtrack: 0.5,
            sufficient_decrease: 1e-4,
            max_backtracks: 30,
            policy: Policy::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if !(self.tol_rel > 0.0) {
            return bad("tol_rel must be positive");
        }
        if matches!(self.tol_abs, Some(t) if !(t > 0.0)) {
            return bad("tol_abs must be positive");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtracking factor must lie in (0, 1)");
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease < 1.0) {
            return bad("sufficient-decrease factor must lie in (0, 1)");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        Ok(())
    }

    pub fn absolute_tolerance(&self, mesh: &SimplicialMesh, model: &EnergyModel) -> f64 {
        self.tol_abs.unwrap_or(1e-12 * model.params.mu * mesh.scale())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub r_phi: f64,
    pub r_theta: f64,
    pub r_tau: f64,
    /// Stacked 2-norm of the three residuals.
    pub residual: f64,
    /// Accepted step length that led to this iterate (0 for the initial state).
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub mode: SolveMode,
    pub converged: bool,
    /// Newton steps taken.
    pub iterations: usize,
    /// Tolerance the stacked residual had to reach.
    pub tolerance: f64,
    pub history: Vec<IterationRecord>,
}

impl ConvergenceReport {
    pub fn initial_residual(&self) -> f64 {
        self.history.first().map_or(0.0, |r| r.residual)
    }

    pub fn final_residual(&self) -> f64 {
        self.history.last().map_or(0.0, |r| r.residual)
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub state: HWState,
    pub report: ConvergenceReport,
}

/// Default starting point: reference placement with Dirichlet data imposed,
/// `Theta = dphi`, `T = pk1(Theta)`.
pub fn initial_guess(mesh: &SimplicialMesh, bcs: &BoundaryData, model: &EnergyModel) -> Result<HWState> {
    initial_guess_from(mesh, bcs, model, DeformationField::identity(mesh))
}

/// As [`initial_guess`] from an arbitrary placement.
pub fn initial_guess_from(
    mesh: &SimplicialMesh,
    bcs: &BoundaryData,
    model: &EnergyModel,
    mut phi: DeformationField,
) -> Result<HWState> {
    bcs.validate(mesh)?;
    bcs.impose(&mut phi);
    HWState::compatible(mesh, phi, model)
}
