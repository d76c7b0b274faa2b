use std::io::Write;

use nalgebra::DMatrix;

use super::{with_element, ConvergenceReport, HWState, SolveMode};
use crate::constitutive::EnergyModel;
use crate::kinematics::{c_from_theta, compatibility_residual, jacobian};
use crate::mesh::{write_vtk, SimplicialMesh, VtkField};
use crate::Result;

/// Per-element derived quantities of a state.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementFields {
    pub c: Vec<DMatrix<f64>>,
    pub jacobian: Vec<f64>,
    pub energy: Vec<f64>,
    /// `J^-1 T Theta^T` from the traction unknowns.
    pub cauchy: Vec<DMatrix<f64>>,
    /// Frobenius norm of `dphi_e - Theta_e`.
    pub compatibility: Vec<f64>,
}

impl ElementFields {
    pub fn compute(mesh: &SimplicialMesh, state: &HWState, model: &EnergyModel) -> Result<Self> {
        let compat = compatibility_residual(mesh, &state.phi, &state.theta)?;
        let mut out = Self {
            c: Vec::new(),
            jacobian: Vec::new(),
            energy: Vec::new(),
            cauchy: Vec::new(),
            compatibility: compat.per_element.iter().map(|r| r.norm()).collect(),
        };
        for (e, theta) in state.theta.iter().enumerate() {
            let j = jacobian(theta);
            out.c.push(c_from_theta(theta));
            out.jacobian.push(j);
            out.energy.push(model.energy(theta).map_err(|err| with_element(err, e))?);
            out.cauchy.push(&state.traction[e] * theta.transpose() / j);
        }
        Ok(out)
    }
}

/// VTK with position and displacement per vertex and Theta, T, C, J, W,
/// Cauchy stress and compatibility residual per element.
pub fn write_solution_vtk(
    mesh: &SimplicialMesh,
    state: &HWState,
    model: &EnergyModel,
    out: &mut impl Write,
) -> Result<()> {
    let f = ElementFields::compute(mesh, state, model)?;
    let positions = (0..mesh.num_vertices()).map(|v| state.phi.position(v).to_vec()).collect();
    let fields = [
        VtkField::PointVectors { name: "position".into(), values: positions },
        VtkField::PointVectors { name: "displacement".into(), values: state.phi.displacement(mesh) },
        VtkField::CellTensors { name: "theta".into(), values: state.theta.clone() },
        VtkField::CellTensors { name: "traction".into(), values: state.traction.clone() },
        VtkField::CellTensors { name: "C".into(), values: f.c },
        VtkField::CellScalars { name: "J".into(), values: f.jacobian },
        VtkField::CellScalars { name: "W".into(), values: f.energy },
        VtkField::CellTensors { name: "sigma".into(), values: f.cauchy },
        VtkField::CellScalars { name: "compatibility".into(), values: f.compatibility },
    ];
    write_vtk(mesh, &fields, out)
}

/// `iter, r_phi, r_theta, r_tau, step` per iteration.
pub fn write_history_csv(report: &ConvergenceReport, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iter", "r_phi", "r_theta", "r_tau", "step"])?;
    for r in &report.history {
        w.write_record([
            r.iter.to_string(),
            format!("{:.16e}", r.r_phi),
            format!("{:.16e}", r.r_theta),
            format!("{:.16e}", r.r_tau),
            format!("{:.16e}", r.step),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Plain-text summary of a solve.
pub fn write_report(
    mesh: &SimplicialMesh,
    state: &HWState,
    model: &EnergyModel,
    report: &ConvergenceReport,
    out: &mut impl Write,
) -> Result<()> {
    let mode = match report.mode {
        SolveMode::Monolithic => "monolithic",
        SolveMode::Condensed => "condensed",
    };
    let f = ElementFields::compute(mesh, state, model)?;
    let jmin = f.jacobian.iter().copied().fold(f64::INFINITY, f64::min);
    let jmax = f.jacobian.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let compat = f.compatibility.iter().copied().fold(0.0, f64::max);
    let energy: f64 = f.energy.iter().enumerate().map(|(e, w)| mesh.element_geometry(e).volume * w).sum();
    writeln!(out, "status: {}", if report.converged { "converged" } else { "not converged" })?;
    writeln!(out, "mode: {mode}")?;
    writeln!(out, "dimension: {}", mesh.dim())?;
    writeln!(out, "vertices: {}", mesh.num_vertices())?;
    writeln!(out, "elements: {}", mesh.num_elements())?;
    writeln!(out, "iterations: {}", report.iterations)?;
    writeln!(out, "initial residual: {:.6e}", report.initial_residual())?;
    writeln!(out, "final residual: {:.6e}", report.final_residual())?;
    writeln!(out, "tolerance: {:.6e}", report.tolerance)?;
    writeln!(out, "stored energy: {energy:.12e}")?;
    writeln!(out, "J range: [{jmin:.12e}, {jmax:.12e}]")?;
    writeln!(out, "max compatibility residual: {compat:.6e}")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hw::{initial_guess, BoundaryData, IterationRecord};
    use crate::mesh::build_box_mesh;

    #[test]
    fn history_csv_layout() {
        let report = ConvergenceReport {
            mode: SolveMode::Condensed,
            converged: true,
            iterations: 1,
            tolerance: 1e-10,
            history: vec![
                IterationRecord { iter: 0, r_phi: 1.0, r_theta: 0.0, r_tau: 0.0, residual: 1.0, step: 0.0 },
                IterationRecord { iter: 1, r_phi: 0.25, r_theta: 0.0, r_tau: 0.0, residual: 0.25, step: 1.0 },
            ],
        };
        let mut buf = Vec::new();
        write_history_csv(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "iter,r_phi,r_theta,r_tau,step");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("1,2.5000000000000000e-1,"));
    }

    #[test]
    fn solution_vtk_names_all_fields() {
        let mesh = build_box_mesh(2, &[1, 1], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let model = EnergyModel::svk(1.0, 1.0);
        let s = initial_guess(&mesh, &BoundaryData::default(), &model).unwrap();
        let mut buf = Vec::new();
        write_solution_vtk(&mesh, &s, &model, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for key in [
            "VECTORS position",
            "VECTORS displacement",
            "TENSORS theta",
            "TENSORS traction",
            "TENSORS C",
            "SCALARS J",
            "SCALARS W",
            "TENSORS sigma",
            "SCALARS compatibility",
        ] {
            assert!(text.contains(key), "{key}");
        }
    }
}
