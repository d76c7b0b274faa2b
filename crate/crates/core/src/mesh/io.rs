use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use super::SimplicialMesh;
use crate::{Error, Result};

/// Loads an ASCII `OFF` (triangles, 2D) or `TOFF` (tetrahedra, 3D) file.
pub fn load_off(path: impl AsRef<Path>) -> Result<SimplicialMesh> {
    parse_off(&fs::read_to_string(path)?)
}

/// Parses OFF/TOFF text.
///
/// The counts may follow the header token on the same line or sit on the
/// next non-comment line. Vertex lines carry three coordinates; 2D meshes
/// must have `z = 0`. Cell lines start with the vertex count (3 or 4).
pub fn parse_off(text: &str) -> Result<SimplicialMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    let mut tokens: Vec<&str> = header.split_whitespace().collect();
    let dim = match tokens[0] {
        "OFF" => 2,
        "TOFF" => 3,
        other => return Err(Error::parse(hline, format!("expected OFF or TOFF header, found {other:?}"))),
    };
    tokens.remove(0);
    let mut count_line = hline;
    if tokens.is_empty() {
        let (l, next) = lines.next().ok_or_else(|| Error::parse(hline, "missing counts line"))?;
        count_line = l;
        tokens = next.split_whitespace().collect();
    }
    if tokens.len() < 2 {
        return Err(Error::parse(count_line, "counts line needs vertex and cell counts"));
    }
    let parse_count = |s: &str| s.parse::<usize>().map_err(|_| Error::parse(count_line, format!("bad count {s:?}")));
    let (nv, nc) = (parse_count(tokens[0])?, parse_count(tokens[1])?);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (l, line) =
            lines.next().ok_or_else(|| Error::parse(count_line, format!("expected {nv} vertices, file ended")))?;
        let xyz: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| Error::parse(l, format!("bad coordinate {t:?}"))))
            .collect::<Result<_>>()?;
        if xyz.len() != 3 {
            return Err(Error::parse(l, format!("vertex needs 3 coordinates, found {}", xyz.len())));
        }
        if dim == 2 && xyz[2] != 0.0 {
            return Err(Error::parse(l, "2D OFF mesh requires z = 0"));
        }
        vertices.push(xyz[..dim].to_vec());
    }

    let mut elements = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (l, line) =
            lines.next().ok_or_else(|| Error::parse(count_line, format!("expected {nc} cells, file ended")))?;
        let ids: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| Error::parse(l, format!("bad index {t:?}"))))
            .collect::<Result<_>>()?;
        if ids.first() != Some(&(dim + 1)) || ids.len() != dim + 2 {
            return Err(Error::parse(l, format!("cell must list {} vertex indices", dim + 1)));
        }
        if let Some(bad) = ids[1..].iter().find(|&&v| v >= nv) {
            return Err(Error::parse(l, format!("vertex index {bad} out of range (0..{nv})")));
        }
        elements.push(ids[1..].to_vec());
    }
    if let Some((l, _)) = lines.next() {
        return Err(Error::parse(l, "trailing data after the declared cells"));
    }
    SimplicialMesh::new(dim, vertices, elements)
}

/// Writes OFF (2D) or TOFF (3D) with 17 significant digits per coordinate.
pub fn write_off(mesh: &SimplicialMesh, out: &mut impl Write) -> Result<()> {
    let header = if mesh.dim() == 2 { "OFF" } else { "TOFF" };
    writeln!(out, "{header}")?;
    writeln!(out, "{} {} 0", mesh.num_vertices(), mesh.num_elements())?;
    for v in mesh.vertices() {
        let z = if mesh.dim() == 2 { 0.0 } else { v[2] };
        writeln!(out, "{:.16e} {:.16e} {:.16e}", v[0], v[1], z)?;
    }
    for el in mesh.elements() {
        let ids: Vec<String> = el.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{} {}", el.len(), ids.join(" "))?;
    }
    Ok(())
}

pub fn save_off(path: impl AsRef<Path>, mesh: &SimplicialMesh) -> Result<()> {
    let mut buf = Vec::new();
    write_off(mesh, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

/// Named field attached to a VTK file.
#[derive(Debug, Clone)]
pub enum VtkField {
    /// One n-vector per vertex (padded to 3 components).
    PointVectors { name: String, values: Vec<Vec<f64>> },
    /// One scalar per element.
    CellScalars { name: String, values: Vec<f64> },
    /// One n x n matrix per element (padded to 3 x 3).
    CellTensors { name: String, values: Vec<DMatrix<f64>> },
}

fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn pad3(v: &[f64]) -> [f64; 3] {
    let mut p = [0.0; 3];
    p[..v.len()].copy_from_slice(v);
    p
}

/// Legacy ASCII VTK 2.0 unstructured grid.
pub fn write_vtk(mesh: &SimplicialMesh, fields: &[VtkField], out: &mut impl Write) -> Result<()> {
    let (nv, ne, n) = (mesh.num_vertices(), mesh.num_elements(), mesh.dim());
    for f in fields {
        let (name, len, expected) = match f {
            VtkField::PointVectors { name, values } => (name, values.len(), nv),
            VtkField::CellScalars { name, values } => (name, values.len(), ne),
            VtkField::CellTensors { name, values } => (name, values.len(), ne),
        };
        if len != expected {
            return Err(Error::DimensionMismatch(format!("field {name} has {len} entries, expected {expected}")));
        }
        if name.contains(char::is_whitespace) {
            return Err(Error::InvalidInput(format!("VTK field name {name:?} contains whitespace")));
        }
    }

    writeln!(out, "# vtk DataFile Version 2.0")?;
    writeln!(out, "hwforms output")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {nv} double")?;
    for v in mesh.vertices() {
        let p = pad3(v);
        writeln!(out, "{} {} {}", fmt_num(p[0]), fmt_num(p[1]), fmt_num(p[2]))?;
    }
    writeln!(out, "CELLS {} {}", ne, ne * (n + 2))?;
    for el in mesh.elements() {
        let ids: Vec<String> = el.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{} {}", n + 1, ids.join(" "))?;
    }
    writeln!(out, "CELL_TYPES {ne}")?;
    let cell_type = if n == 2 { 5 } else { 10 };
    for _ in 0..ne {
        writeln!(out, "{cell_type}")?;
    }

    let point: Vec<&VtkField> = fields.iter().filter(|f| matches!(f, VtkField::PointVectors { .. })).collect();
    if !point.is_empty() {
        writeln!(out, "POINT_DATA {nv}")?;
        for f in point {
            if let VtkField::PointVectors { name, values } = f {
                writeln!(out, "VECTORS {name} double")?;
                for v in values {
                    let p = pad3(v);
                    writeln!(out, "{} {} {}", fmt_num(p[0]), fmt_num(p[1]), fmt_num(p[2]))?;
                }
            }
        }
    }
    let cell: Vec<&VtkField> = fields.iter().filter(|f| !matches!(f, VtkField::PointVectors { .. })).collect();
    if !cell.is_empty() {
        writeln!(out, "CELL_DATA {ne}")?;
        for f in cell {
            match f {
                VtkField::CellScalars { name, values } => {
                    writeln!(out, "SCALARS {name} double 1")?;
                    writeln!(out, "LOOKUP_TABLE default")?;
                    for v in values {
                        writeln!(out, "{}", fmt_num(*v))?;
                    }
                }
                VtkField::CellTensors { name, values } => {
                    writeln!(out, "TENSORS {name} double")?;
                    for m in values {
                        for r in 0..3 {
                            let row: Vec<String> = (0..3)
                                .map(|c| {
                                    let v = if r < m.nrows() && c < m.ncols() { m[(r, c)] } else { 0.0 };
                                    fmt_num(v)
                                })
                                .collect();
                            writeln!(out, "{}", row.join(" "))?;
                        }
                    }
                }
                VtkField::PointVectors { .. } => unreachable!(),
            }
        }
    }
    Ok(())
}

pub fn save_vtk(path: impl AsRef<Path>, mesh: &SimplicialMesh, fields: &[VtkField]) -> Result<()> {
    let mut buf = Vec::new();
    write_vtk(mesh, fields, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

/// CSV of per-element scalars: `element, barycenter coords..., columns...`.
pub fn write_cell_csv(mesh: &SimplicialMesh, columns: &[(&str, &[f64])], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let axes = ["x", "y", "z"];
    let mut header = vec!["element".to_string()];
    header.extend(axes[..mesh.dim()].iter().map(|s| s.to_string()));
    header.extend(columns.iter().map(|(n, _)| n.to_string()));
    w.write_record(&header)?;
    for e in 0..mesh.num_elements() {
        let el = mesh.element(e);
        let mut rec = vec![e.to_string()];
        for a in 0..mesh.dim() {
            let c: f64 = el.iter().map(|&v| mesh.vertex(v)[a]).sum::<f64>() / el.len() as f64;
            rec.push(fmt_num(c));
        }
        for (name, vals) in columns {
            let v = vals
                .get(e)
                .ok_or_else(|| Error::DimensionMismatch(format!("column {name} shorter than element count")))?;
            rec.push(fmt_num(*v));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
