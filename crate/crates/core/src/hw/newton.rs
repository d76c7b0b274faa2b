use super::functional::Residuals;
use super::kkt::newton_direction;
use super::{
    initial_guess_from, pk1_field, BoundaryData, ConvergenceReport, HWState, IterationRecord, Solution, SolveMode,
    SolverConfig,
};
use crate::constitutive::EnergyModel;
use crate::kinematics::{check_admissible, dphi_with, DeformationField};
use crate::mesh::SimplicialMesh;
use crate::{Error, Result};

/// Runs the solver selected by `config.mode` from `initial`.
pub fn solve(
    mesh: &SimplicialMesh,
    bcs: &BoundaryData,
    model: &EnergyModel,
    config: &SolverConfig,
    initial: HWState,
) -> Result<Solution> {
    match config.mode {
        SolveMode::Monolithic => newton_solve(mesh, bcs, model, config, initial),
        SolveMode::Condensed => condensed_solve(mesh, bcs, model, config, initial),
    }
}

/// Load continuation: runs [`solve`] with the data scaled by `k / steps` for
/// `k = 1..=steps`. Each increment starts from the previous deformation with
/// the new Dirichlet data imposed, `Theta = dphi` and `T = pk1(Theta)`.
/// The returned report concatenates the histories of all increments.
pub fn solve_in_steps(
    mesh: &SimplicialMesh,
    bcs: &BoundaryData,
    model: &EnergyModel,
    config: &SolverConfig,
    steps: usize,
) -> Result<Solution> {
    if steps == 0 {
        return Err(Error::InvalidInput("load steps must be at least 1".into()));
    }
    let mut phi = DeformationField::identity(mesh);
    let mut history = Vec::new();
    let mut iterations = 0;
    for k in 1..=steps {
        let data = bcs.scaled(mesh, k as f64 / steps as f64);
        let start = initial_guess_from(mesh, &data, model, phi)?;
        let mut sol = solve(mesh, &data, model, config, start)?;
        for mut rec in sol.report.history.drain(..) {
            rec.iter += iterations;
            history.push(rec);
        }
        iterations += sol.report.iterations;
        if k == steps {
            sol.report.iterations = iterations;
            sol.report.history = history;
            return Ok(sol);
        }
        phi = sol.state.phi;
    }
    unreachable!("loop returns on the last increment")
}

/// Damped Newton on all three fields.
pub fn newton_solve(
    mesh: &SimplicialMesh,
    bcs: &BoundaryData,
    model: &EnergyModel,
    config: &SolverConfig,
    initial: HWState,
) -> Result<Solution> {
    iterate(mesh, bcs, model, config, initial, SolveMode::Monolithic)
}

/// Damped Newton on the deformation with `Theta := dphi`, `T := pk1(Theta)`.
pub fn condensed_solve(
    mesh: &SimplicialMesh,
    bcs: &BoundaryData,
    model: &EnergyModel,
    config: &SolverConfig,
    initial: HWState,
) -> Result<Solution> {
    iterate(mesh, bcs, model, config, initial, SolveMode::Condensed)
}

fn record(iter: usize, res: &Residuals, step: f64) -> IterationRecord {
    IterationRecord {
        iter,
        r_phi: res.norm_phi(),
        r_theta: res.norm_theta(),
        r_tau: res.norm_tau(),
        residual: res.norm(),
        step,
    }
}

/// Fails on `J <= 0` in `Theta` or in `dphi`.
fn admissible(mesh: &SimplicialMesh, state: &HWState, config: &SolverConfig) -> Result<()> {
    check_admissible(&state.theta)?;
    check_admissible(&dphi_with(config.policy, mesh, &state.phi))
}

fn condense(mesh: &SimplicialMesh, model: &EnergyModel, config: &SolverConfig, state: &mut HWState) -> Result<()> {
    state.theta = dphi_with(config.policy, mesh, &state.phi);
    state.traction = pk1_field(model, &state.theta)?;
    Ok(())
}

fn iterate(
    mesh: &SimplicialMesh,
    bcs: &BoundaryData,
    model: &EnergyModel,
    config: &SolverConfig,
    mut state: HWState,
    mode: SolveMode,
) -> Result<Solution> {
    config.validate()?;
    bcs.validate(mesh)?;
    bcs.impose(&mut state.phi);
    if mode == SolveMode::Condensed {
        check_admissible(&dphi_with(config.policy, mesh, &state.phi))?;
        condense(mesh, model, config, &mut state)?;
    }
    admissible(mesh, &state, config)?;

    let mut res = Residuals::evaluate(config.policy, mesh, &state, bcs, model)?;
    let tolerance = (config.tol_rel * res.norm()).max(config.absolute_tolerance(mesh, model));
    let mut report =
        ConvergenceReport { mode, converged: false, iterations: 0, tolerance, history: vec![record(0, &res, 0.0)] };

    loop {
        let r = res.norm();
        if r <= tolerance {
            report.converged = true;
            return Ok(Solution { state, report });
        }
        if report.iterations == config.max_iter {
            return Err(Error::NonConvergence {
                reason: format!("max_iter = {} reached with residual {r:e} > {tolerance:e}", config.max_iter),
                report: Box::new(report),
                state: Box::new(state),
            });
        }
        let dir = newton_direction(config.policy, mesh, &state, bcs, model, &res)?.step;

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=config.max_backtracks {
            let mut trial = state.axpy(alpha, &dir);
            let evaluated = (|| {
                if mode == SolveMode::Condensed {
                    check_admissible(&dphi_with(config.policy, mesh, &trial.phi))?;
                    condense(mesh, model, config, &mut trial)?;
                }
                admissible(mesh, &trial, config)?;
                Residuals::evaluate(config.policy, mesh, &trial, bcs, model)
            })();
            match evaluated {
                Ok(trial_res) if trial_res.norm() <= (1.0 - config.sufficient_decrease * alpha) * r => {
                    accepted = Some((trial, trial_res));
                    break;
                }
                Ok(_) | Err(Error::Inadmissible { .. }) => alpha *= config.backtrack,
                Err(other) => return Err(other),
            }
        }
        let Some((next, next_res)) = accepted else {
            return Err(Error::NonConvergence {
                reason: format!(
                    "line search found no sufficient decrease after {} backtracks (residual {r:e})",
                    config.max_backtracks
                ),
                report: Box::new(report),
                state: Box::new(state),
            });
        };
        state = next;
        res = next_res;
        report.iterations += 1;
        report.history.push(record(report.iterations, &res, alpha));
    }
}
