use std::io::Write;

use super::{upper_pairs, FlatnessReport, FormFieldGrid};
use crate::exterior::{basis_masks, mask_indices};
use crate::Result;

const AXES: [&str; 3] = ["x", "y", "z"];

fn component_names(dim: usize, degree: usize) -> Vec<String> {
    basis_masks(dim, degree)
        .iter()
        .map(|&m| mask_indices(m).iter().map(|&i| format!("d{}", AXES[i])).collect())
        .collect()
}

/// Named nodal columns of a report, in export order.
fn columns(report: &FlatnessReport) -> Vec<(String, Vec<f64>)> {
    let dim = report.connection.grid().dim();
    let mut cols = vec![("torsion".to_string(), report.torsion.per_node.clone())];
    let mut push = |prefix: &str, field: &FormFieldGrid, i: usize, j: usize| {
        for (c, name) in component_names(dim, field.degree()).into_iter().enumerate() {
            let values = field.values().iter().map(|v| v.coeffs()[c]).collect();
            cols.push((format!("{prefix}_{}{}_{name}", i + 1, j + 1), values));
        }
    };
    for (p, &(i, j)) in upper_pairs(dim).iter().enumerate() {
        push("omega", &report.connection.upper()[p], i, j);
    }
    for (p, &(i, j)) in upper_pairs(dim).iter().enumerate() {
        push("curvature", &report.curvature.upper()[p], i, j);
    }
    cols
}

/// One row per node: coordinates, torsion residual, then `omega^i_j` and
/// `Omega^i_j` coefficients for `i < j`.
pub fn write_frames_csv(report: &FlatnessReport, out: impl Write) -> Result<()> {
    let grid = report.connection.grid();
    let cols = columns(report);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = vec!["node".into()];
    header.extend(AXES[..grid.dim()].iter().map(|s| s.to_string()));
    header.extend(cols.iter().map(|(n, _)| n.clone()));
    w.write_record(&header)?;
    for node in 0..grid.node_count() {
        let mut row = vec![node.to_string()];
        row.extend(grid.coords(node).iter().map(|x| format!("{x:.16e}")));
        row.extend(cols.iter().map(|(_, v)| format!("{:.16e}", v[node])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Legacy ASCII VTK structured-points file with one scalar array per column
/// of [`write_frames_csv`].
pub fn write_frames_vtk(report: &FlatnessReport, out: &mut impl Write) -> Result<()> {
    let grid = report.connection.grid();
    let n = grid.dim();
    let dims: Vec<usize> = (0..3).map(|a| if a < n { grid.divisions()[a] + 1 } else { 1 }).collect();
    let origin: Vec<f64> = (0..3).map(|a| if a < n { grid.lo()[a] } else { 0.0 }).collect();
    let spacing: Vec<f64> = (0..3).map(|a| if a < n { grid.spacing(a) } else { 1.0 }).collect();
    writeln!(out, "# vtk DataFile Version 2.0")?;
    writeln!(out, "hwforms frame diagnostics")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET STRUCTURED_POINTS")?;
    writeln!(out, "DIMENSIONS {} {} {}", dims[0], dims[1], dims[2])?;
    writeln!(out, "ORIGIN {:.16e} {:.16e} {:.16e}", origin[0], origin[1], origin[2])?;
    writeln!(out, "SPACING {:.16e} {:.16e} {:.16e}", spacing[0], spacing[1], spacing[2])?;
    writeln!(out, "POINT_DATA {}", grid.node_count())?;
    for (name, values) in columns(report) {
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for v in values {
            writeln!(out, "{v:.16e}")?;
        }
    }
    Ok(())
}
