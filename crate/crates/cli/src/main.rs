//! `hwforms` command line tool.
//!
//! Exit codes: 0 success, 1 failed self-check, 2 usage or configuration
//! error, 3 solver did not converge, 4 inadmissible state.

mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hwforms::frames::{
    flatness_report, refinement_study, write_frames_csv, write_frames_vtk, CatalogField, CoframeField,
};
use hwforms::hw::{solve_in_steps, write_history_csv, write_report, write_solution_vtk, ConvergenceReport, HWState};
use hwforms::mesh::{build_box_mesh, save_off, SimplicialMesh};
use hwforms::verify::{run_all, DEFAULT_SEED};
use hwforms::Error;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "hwforms", version, about = "Moving frames, stress forms and three-field nonlinear elasticity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a simplicial box mesh as OFF (2D) or TOFF (3D).
    Mesh {
        #[arg(long, value_parser = clap::value_parser!(u8).range(2..=3))]
        dim: u8,
        /// Cells per axis, e.g. `8x8` or `2x2x2`.
        #[arg(long)]
        div: String,
        /// Lower corner, comma separated.
        #[arg(long)]
        lo: Option<String>,
        /// Upper corner, comma separated.
        #[arg(long)]
        hi: Option<String>,
        /// Output path; defaults to `box.off` or `box.toff`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Hu-Washizu solve described by a `key = value` config file.
    Solve { config: PathBuf },
    /// Structure-equation diagnostics for a built-in coframe.
    Frames {
        /// cartesian, rot-xy, rot-atan2, sphere, warp or twist.
        #[arg(long)]
        field: String,
        /// Dimension for `cartesian` and `warp`.
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Cells per axis of the exported grid and of the coarsest refinement level.
        #[arg(long, default_value_t = 16)]
        div: usize,
        /// Number of refinement levels (div, 2 div, 4 div, ...) for slope fits.
        #[arg(long)]
        refine: Option<usize>,
        /// Output prefix; `.csv` and `.vtk` are appended.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fast self-check: algebra identities, derivative checks, 2D patch test.
    Check,
}

/// Parses `NxM` or `NxMxK` with every count at least 1.
pub(crate) fn parse_divisions(text: &str) -> Result<Vec<usize>, String> {
    let div = text
        .split('x')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| format!("bad divisions `{text}` (expected e.g. 8x8)"))?;
    if div.contains(&0) {
        return Err(format!("divisions must be at least 1 in `{text}`"));
    }
    Ok(div)
}

fn parse_point(text: &str, dim: usize) -> Result<Vec<f64>, String> {
    let p = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| format!("bad point `{text}`"))?;
    if p.len() != dim {
        return Err(format!("point `{text}` needs {dim} components"));
    }
    Ok(p)
}

enum Failure {
    Usage(String),
    Check(String),
    NonConvergence(String),
    Inadmissible(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Usage(_) => 2,
            Failure::NonConvergence(_) => 3,
            Failure::Inadmissible(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Check(m) | Failure::NonConvergence(m) | Failure::Inadmissible(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Inadmissible { .. } => Failure::Inadmissible(e.to_string()),
            Error::NonConvergence { .. } | Error::SingularKkt { .. } => Failure::NonConvergence(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_mesh(dim: u8, div: &str, lo: Option<&str>, hi: Option<&str>, out: Option<PathBuf>) -> Result<(), Failure> {
    let dim = dim as usize;
    let div = parse_divisions(div).map_err(Failure::Usage)?;
    if div.len() != dim {
        return Err(Failure::Usage(format!("--div has {} counts for --dim {dim}", div.len())));
    }
    let lo = lo.map_or(Ok(vec![0.0; dim]), |t| parse_point(t, dim)).map_err(Failure::Usage)?;
    let hi = hi.map_or(Ok(vec![1.0; dim]), |t| parse_point(t, dim)).map_err(Failure::Usage)?;
    let mesh = build_box_mesh(dim, &div, &lo, &hi)?;
    let out = out.unwrap_or_else(|| PathBuf::from(if dim == 2 { "box.off" } else { "box.toff" }));
    save_off(&out, &mesh)?;
    println!(
        "wrote {}: {} vertices, {} {}",
        out.display(),
        mesh.num_vertices(),
        mesh.num_elements(),
        if dim == 2 { "triangles" } else { "tetrahedra" }
    );
    Ok(())
}

fn write_artifacts(
    cfg: &RunConfig,
    mesh: &SimplicialMesh,
    state: &HWState,
    report: &ConvergenceReport,
) -> Result<(), Failure> {
    let model = cfg.model();
    let vtk = with_suffix(&cfg.out_prefix, ".vtk");
    let csv = with_suffix(&cfg.out_prefix, "_history.csv");
    let txt = with_suffix(&cfg.out_prefix, "_report.txt");
    write_solution_vtk(mesh, state, &model, &mut create(&vtk)?)?;
    write_history_csv(report, create(&csv)?)?;
    write_report(mesh, state, &model, report, &mut create(&txt)?)?;
    println!("wrote {}, {}, {}", vtk.display(), csv.display(), txt.display());
    Ok(())
}

fn cmd_solve(path: &Path) -> Result<(), Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let cfg = RunConfig::parse(&text, base).map_err(|e| Failure::Usage(e.to_string()))?;
    let mesh = cfg.build_mesh()?;
    let bcs = cfg.boundary_data(&mesh);
    match solve_in_steps(&mesh, &bcs, &cfg.model(), &cfg.solver(), cfg.load_steps) {
        Ok(sol) => {
            write_artifacts(&cfg, &mesh, &sol.state, &sol.report)?;
            println!("converged in {} iterations, residual {:.3e}", sol.report.iterations, sol.report.final_residual());
            Ok(())
        }
        Err(Error::NonConvergence { reason, report, state }) => {
            write_artifacts(&cfg, &mesh, &state, &report)?;
            Err(Failure::NonConvergence(format!("not converged: {reason}")))
        }
        Err(other) => Err(other.into()),
    }
}

fn cmd_frames(field: &str, dim: usize, div: usize, refine: Option<usize>, out: Option<PathBuf>) -> Result<(), Failure> {
    let field = CatalogField::from_name(field, dim).map_err(|e| Failure::Usage(e.to_string()))?;
    if div < 4 {
        return Err(Failure::Usage("--div must be at least 4".into()));
    }
    let grid = field.grid(div)?;
    let theta = CoframeField::sample(&grid, field.source())?;
    let report = flatness_report(&theta, f64::INFINITY)?;
    let prefix = out.unwrap_or_else(|| PathBuf::from(format!("frames_{}", field.name())));
    let (csv, vtk) = (with_suffix(&prefix, ".csv"), with_suffix(&prefix, ".vtk"));
    write_frames_csv(&report, create(&csv)?)?;
    write_frames_vtk(&report, &mut create(&vtk)?)?;
    println!("wrote {}, {}", csv.display(), vtk.display());
    println!(
        "{field} div {div}: max torsion {:.3e} (interior {:.3e}), max curvature {:.3e}, frame-basis curvature {:.6e}",
        report.torsion.max, report.torsion.max_interior, report.max_curvature, report.max_curvature_frame
    );
    if let Some(levels) = refine {
        if !(2..=6).contains(&levels) {
            return Err(Failure::Usage("--refine takes 2 to 6 levels".into()));
        }
        let divisions: Vec<usize> = (0..levels).map(|k| div << k).collect();
        let study = refinement_study(&field, &divisions)?;
        for l in &study.levels {
            println!(
                "  div {:>4}  h {:.4e}  torsion {:.4e}  curvature {:.4e}  frame-basis curvature {:.6e}",
                l.divisions, l.h, l.max_torsion, l.max_curvature, l.max_curvature_frame
            );
        }
        let fmt = |s: Option<f64>| s.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        println!("torsion slope {}, curvature slope {}", fmt(study.torsion_slope), fmt(study.curvature_slope));
    }
    Ok(())
}

fn cmd_check() -> Result<(), Failure> {
    let results = run_all(DEFAULT_SEED)?;
    for r in &results {
        println!("{r}");
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed()).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        println!("all {} checks passed", results.len());
        Ok(())
    } else {
        Err(Failure::Check(format!("failed: {}", failed.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Mesh { dim, div, lo, hi, out } => cmd_mesh(dim, &div, lo.as_deref(), hi.as_deref(), out),
        Command::Solve { config } => cmd_solve(&config),
        Command::Frames { field, dim, div, refine, out } => cmd_frames(&field, dim, div, refine, out),
        Command::Check => cmd_check(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
