//! Command-line front end: `dumbbell-spectra <command> --config run.json`.
//!
//! Every command reads a [`RunConfig`], writes its artifacts under the
//! output directory and exits with 0 (ok), 2 (configuration), 3 (numerical
//! failure) or 4 (a theorem check failed on stable data).

pub mod cache;
pub mod config;
pub mod svg;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::analytic::{self, rect_spectrum, AnalyticError};
use crate::asymptotics::{
    self, track_branches, verdict, AsymptoticsError, BranchTrace, Target, TrackOptions, VerdictReport,
};
use crate::eigen::{classify_symmetry, smallest_eigenpairs_with, EigenOptions, EigenPair, Parity};
use crate::fem::{assemble_mass, assemble_stiffness};
use crate::geometry::BulkShape;
use crate::mesh::{generate, refine_uniform, write_mesh, TriMesh};
use crate::nodal::{count_nodal_domains, eigen_index, stability_check, DeficiencyRecord};
use crate::sturm::{SLGrid, SturmError};

use cache::{write_bundle, Bundle, Cache, CacheKey};
pub use config::{ConfigError, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_THEOREM: i32 = 4;

/// Report format version.
pub const SCHEMA: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("theorem check failed: {0}")]
    Theorem(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numeric(_) | CliError::Io(_) => EXIT_NUMERIC,
            CliError::Theorem(_) => EXIT_THEOREM,
        }
    }
}

fn numeric(context: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Numeric(format!("{context}: {e}"))
}

impl From<AsymptoticsError> for CliError {
    fn from(e: AsymptoticsError) -> Self {
        match e {
            AsymptoticsError::TheoremViolation(msg) => CliError::Theorem(msg),
            // the chosen target does not satisfy the standing assumptions
            AsymptoticsError::Analytic(a @ (AnalyticError::AssumptionViolated(_) | AnalyticError::Resonant { .. })) => {
                CliError::Config(ConfigError::new("/target", a.to_string()))
            }
            AsymptoticsError::Sturm(s @ SturmError::NearResonance { .. }) => {
                CliError::Config(ConfigError::new("/target", s.to_string()))
            }
            AsymptoticsError::InvalidInput(msg) => CliError::Config(ConfigError::new("", msg)),
            other => numeric("branch tracking", other),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "dumbbell-spectra",
    version,
    propagate_version = true,
    about = "Neumann spectra of thin-neck dumbbells"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Eigensolver seed; overrides `solver.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mesh the dumbbell at `geometry.epsilon`.
    Mesh(Common),
    /// Smallest eigenpairs with parity labels.
    Solve(Common),
    /// Neck eigenvalues and the symmetric boundary value problems at the target.
    Sl(Common),
    /// Limiting branch indices and nodal bounds for the target.
    Predict(Common),
    /// Track both branches over `sweep.epsilons`.
    Sweep(Common),
    /// Sweep and require the predicted indices, counts and ordering.
    Verify(Common),
    /// Nodal counts and deficiencies of the computed eigenpairs.
    Nodal(Common),
}

impl Command {
    fn name_and_args(&self) -> (&'static str, &Common) {
        match self {
            Command::Mesh(c) => ("mesh", c),
            Command::Solve(c) => ("solve", c),
            Command::Sl(c) => ("sl", c),
            Command::Predict(c) => ("predict", c),
            Command::Sweep(c) => ("sweep", c),
            Command::Verify(c) => ("verify", c),
            Command::Nodal(c) => ("nodal", c),
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let (name, common) = cli.command.name_and_args();
    let outcome = RunConfig::load(&common.config)
        .map_err(CliError::from)
        .and_then(|mut cfg| {
            if let Some(out) = &common.out {
                cfg.output.dir = out.clone();
            }
            if let Some(seed) = common.seed {
                cfg.solver.seed = seed;
            }
            execute(name, &cfg)
        });
    match outcome {
        Ok(outcome) => {
            let mut so = std::io::stdout().lock();
            for line in &outcome.stdout {
                // a closed pipe is not an error of the command
                let _ = std::io::Write::write_all(&mut so, format!("{line}\n").as_bytes());
            }
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// What a command produced.
#[derive(Debug)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub cache_hit: bool,
    pub exit_code: i32,
    pub stdout: Vec<String>,
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// Runs `command` with a parsed configuration.
pub fn execute(command: &str, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let out = cfg.output.dir.clone();
    let (bundle, cache_hit, stdout) = match command {
        "sl" => {
            let text = to_json(&sl_report(cfg)?);
            (
                single("sl.json", text.clone()),
                false,
                vec![text.trim_end().to_string()],
            )
        }
        "predict" => {
            let text = to_json(&predict_report(cfg)?);
            (
                single("predict.json", text.clone()),
                false,
                vec![text.trim_end().to_string()],
            )
        }
        "mesh" | "solve" | "sweep" | "verify" | "nodal" => {
            let cache = Cache::for_output(&out);
            let key = CacheKey::of(&cfg.cache_subset(command));
            match cache.get(&key) {
                Some(b) => (b, true, Vec::new()),
                None => {
                    let b = match command {
                        "mesh" => cmd_mesh(cfg)?,
                        "solve" => cmd_solve(cfg)?,
                        "sweep" | "verify" => cmd_sweep(cfg, command)?,
                        _ => cmd_nodal(cfg)?,
                    };
                    cache.put(&key, &b)?;
                    (b, false, Vec::new())
                }
            }
        }
        other => return Err(ConfigError::new("", format!("unknown command {other}")).into()),
    };
    write_bundle(&out, &bundle)?;
    let files: Vec<PathBuf> = bundle.files.keys().map(|k| out.join(k)).collect();
    let mut stdout = stdout;
    if stdout.is_empty() {
        stdout = files.iter().map(|f| f.display().to_string()).collect();
    }
    let exit_code = match command {
        "verify" => verify_status(&bundle)?,
        "nodal" => nodal_status(&bundle)?,
        _ => EXIT_OK,
    };
    Ok(Outcome {
        files,
        cache_hit,
        exit_code,
        stdout,
    })
}

fn single(name: &str, text: String) -> Bundle {
    let mut b = Bundle::default();
    b.files.insert(name.to_string(), text);
    b
}

fn eigen_options(cfg: &RunConfig) -> EigenOptions {
    EigenOptions {
        max_basis: cfg.solver.max_krylov,
        seed: cfg.solver.seed,
        ..EigenOptions::default()
    }
}

fn track_options(cfg: &RunConfig) -> TrackOptions {
    TrackOptions {
        h_bulk: cfg.mesh.h_bulk,
        neck_layers: cfg.mesh.neck_layers,
        richardson: cfg.mesh.refinements >= 1,
        tol: cfg.solver.tol,
        eigen: eigen_options(cfg),
        sl_intervals: cfg.sl.nodes,
        ..TrackOptions::default()
    }
}

fn mesh_at(cfg: &RunConfig) -> Result<TriMesh, CliError> {
    generate(&cfg.geometry, cfg.mesh.h_bulk, cfg.mesh.neck_layers).map_err(|e| numeric("meshing", e))
}

/// Resolves the target section to a bulk mode and builds its limit data.
fn resolve_target(cfg: &RunConfig) -> Result<Target, CliError> {
    let (width, height) = match cfg.geometry.left.shape {
        BulkShape::Rectangle { width, height } => (width, height),
        BulkShape::Polygon(_) => {
            return Err(ConfigError::new("/geometry/left/shape", "targets need a rectangular bulk").into())
        }
    };
    let (j, n) = match (cfg.target.mode, cfg.target.mu) {
        (Some(mode), _) => mode,
        (None, Some(mu)) => {
            let mut count = 32;
            loop {
                let modes = rect_spectrum(width, height, count);
                let tol = 1e-9 * mu.max(1.0);
                if let Some(m) = modes.iter().find(|m| (m.lambda - mu).abs() <= tol) {
                    break (m.j, m.n);
                }
                if modes.last().is_some_and(|m| m.lambda > mu + tol) {
                    return Err(ConfigError::new("/target/mu", format!("{mu} is not a rectangle eigenvalue")).into());
                }
                count *= 2;
            }
        }
        (None, None) => return Err(ConfigError::new("/target", "give mode or mu").into()),
    };
    let mu = analytic::RectMode::new(j, n, width, height).lambda;
    let grid = SLGrid::new(&cfg.geometry.neck, cfg.sl.nodes).map_err(|e| numeric("neck grid", e))?;
    grid.check_resonance(mu, cfg.sl.guard)
        .map_err(|e| ConfigError::new("/target", e.to_string()))?;
    Ok(Target::new(&cfg.geometry, j, n, cfg.sl.nodes)?)
}

fn sl_report(cfg: &RunConfig) -> Result<serde_json::Value, CliError> {
    let t = resolve_target(cfg)?;
    let an = &t.analysis;
    Ok(json!({
        "schema": SCHEMA,
        "mu": an.mu,
        "a": an.a,
        "taus": an.taus,
        "k": an.k,
        "theta_even": an.theta_even,
        "theta_odd": an.theta_odd,
        "theta_even_endpoint": an.theta_even_endpoint,
        "theta_odd_endpoint": an.theta_odd_endpoint,
        "N_e": an.n_even,
        "N_o": an.n_odd,
        "order": t.order().map_err(|e| numeric("branch order", e))?,
        "neumann_resonant": an.neumann_resonant,
    }))
}

/// Whether the configured geometry is the rectangle pair of the worked
/// examples, for which published reference values exist.
fn is_example_geometry(cfg: &RunConfig) -> bool {
    let g = &cfg.geometry;
    matches!(g.left.shape, BulkShape::Rectangle { width, height }
        if (width - analytic::example_width()).abs() < 1e-12 && height == 1.0)
        && (g.left.offset - 0.5).abs() < 1e-12
        && g.length() == 2.0
        && g.neck.min() == 1.0
        && g.neck.max() == 1.0
}

fn predict_report(cfg: &RunConfig) -> Result<serde_json::Value, CliError> {
    let t = resolve_target(cfg)?;
    let p = &t.prediction;
    let mut v = json!({
        "schema": SCHEMA,
        "mu": p.mu,
        "mode": [t.mode.j, t.mode.n],
        "index_in_bulk": p.index_in_bulk,
        "bulk_nodal_count": t.mode.nodal_count,
        "k": p.k,
        "order": t.order().map_err(|e| numeric("branch order", e))?,
        "indices": p.indices,
        "nodal_bounds": t.nodal,
        "theta_even": t.analysis.theta_even,
        "theta_odd": t.analysis.theta_odd,
    });
    let second = analytic::second_example_mode();
    if is_example_geometry(cfg) && (t.mode.j, t.mode.n) == (second.j, second.n) {
        v["reference"] = json!({
            "position": analytic::REFERENCE_SECOND_POSITION,
            "deficiency": analytic::REFERENCE_SECOND_DEFICIENCY,
        });
    }
    Ok(v)
}

fn cmd_mesh(cfg: &RunConfig) -> Result<Bundle, CliError> {
    let mesh = mesh_at(cfg)?;
    let mut text = Vec::new();
    write_mesh(&mesh, &mut text)?;
    let summary = json!({
        "schema": SCHEMA,
        "epsilon": cfg.geometry.epsilon,
        "vertices": mesh.vertex_count(),
        "triangles": mesh.triangle_count(),
        "area": mesh.area(),
        "min_angle_deg": mesh.min_angle_deg(|_| true),
        "max_edge": mesh.max_edge_length(),
        "euler_characteristic": mesh.euler_characteristic(),
        "invariant_violations": mesh.check_invariants(),
    });
    let mut b = single("mesh.json", to_json(&summary));
    b.files
        .insert("mesh.txt".into(), String::from_utf8(text).expect("mesh text is ascii"));
    Ok(b)
}

fn solve_pairs(mesh: &TriMesh, cfg: &RunConfig) -> Result<(Vec<EigenPair>, Vec<(usize, usize)>), CliError> {
    let k = assemble_stiffness(mesh);
    let m = assemble_mass(mesh);
    let count = cfg.solver.k_eigs.min(mesh.vertex_count());
    let mut pairs = smallest_eigenpairs_with(&k, &m, count, cfg.solver.tol, &eigen_options(cfg))
        .map_err(|e| numeric("eigensolve", e))?;
    let ambiguous = match &mesh.mirror {
        Some(mirror) => classify_symmetry(&mut pairs, &m, &mirror.perm, asymptotics::SYMMETRY_GAP).ambiguous,
        None => Vec::new(),
    };
    Ok((pairs, ambiguous))
}

#[derive(Serialize)]
struct PairRecord {
    position: usize,
    lambda: f64,
    parity: Option<Parity>,
    residual: f64,
    parity_defect: Option<f64>,
}

fn cmd_solve(cfg: &RunConfig) -> Result<Bundle, CliError> {
    let mesh = mesh_at(cfg)?;
    let (pairs, ambiguous) = solve_pairs(&mesh, cfg)?;
    let records: Vec<PairRecord> = pairs
        .iter()
        .map(|p| PairRecord {
            position: p.index_1based,
            lambda: p.lambda,
            parity: p.parity,
            residual: p.residual,
            parity_defect: p.parity_defect,
        })
        .collect();
    let report = json!({
        "schema": SCHEMA,
        "epsilon": cfg.geometry.epsilon,
        "vertices": mesh.vertex_count(),
        "pairs": records,
        "ambiguous_clusters": ambiguous,
    });
    Ok(single("solve.json", to_json(&report)))
}

/// One row per epsilon.
pub fn trace_csv(trace: &BranchTrace) -> String {
    let mut s = String::from(
        "epsilon,vertices,lambda_even,lambda_odd,lambda_even_coarse,lambda_odd_coarse,index_even,index_odd,\
count_even,count_odd,count_stable_even,count_stable_odd,h1_err_bulk_even,h1_err_bulk_odd,h1_err_neck_even,\
h1_err_neck_odd,order\n",
    );
    for r in &trace.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:?}",
            r.epsilon,
            r.vertices,
            r.lambda_even,
            r.lambda_odd,
            r.lambda_even_coarse,
            r.lambda_odd_coarse,
            r.index_even,
            r.index_odd,
            r.count_even,
            r.count_odd,
            r.count_stable_even,
            r.count_stable_odd,
            r.h1_err_bulk_even,
            r.h1_err_bulk_odd,
            r.h1_err_neck_even,
            r.h1_err_neck_odd,
            r.order
        );
    }
    s
}

fn run_verdict(cfg: &RunConfig) -> Result<VerdictReport, CliError> {
    let target = resolve_target(cfg)?;
    let trace = track_branches(&cfg.geometry, &target, &cfg.sweep.epsilons, &track_options(cfg))?;
    Ok(verdict(&target, trace)?)
}

fn cmd_sweep(cfg: &RunConfig, command: &str) -> Result<Bundle, CliError> {
    let report = run_verdict(cfg)?;
    let mut b = single(&format!("{command}.json"), to_json(&report));
    if cfg.output.emit_csv {
        b.files.insert(format!("{command}.csv"), trace_csv(&report.trace));
    }
    Ok(b)
}

/// `verify` additionally requires the predicted indices, nodal bounds and
/// branch ordering.
fn verify_status(bundle: &Bundle) -> Result<i32, CliError> {
    let text = bundle
        .files
        .get("verify.json")
        .ok_or_else(|| CliError::Numeric("verify report missing".into()))?;
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| numeric("verify report", e))?;
    let failed: Vec<&str> = ["indices_match", "counts_within_bounds", "ordering_matches"]
        .into_iter()
        .filter(|k| v[*k] != serde_json::Value::Bool(true))
        .collect();
    if failed.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!("verification failed: {}", failed.join(", "));
        Ok(EXIT_THEOREM)
    }
}

#[derive(Serialize)]
struct NodalRecord {
    position: usize,
    lambda: f64,
    parity: Option<Parity>,
    #[serde(flatten)]
    deficiency: DeficiencyRecord,
    refined_count: Option<usize>,
    stable: Option<bool>,
}

fn cmd_nodal(cfg: &RunConfig) -> Result<Bundle, CliError> {
    let thr = crate::nodal::DEFAULT_THRESHOLD;
    let mesh = mesh_at(cfg)?;
    let (pairs, _) = solve_pairs(&mesh, cfg)?;
    let fine = if cfg.mesh.refinements >= 1 {
        let fm = refine_uniform(&mesh);
        let (fp, _) = solve_pairs(&fm, cfg)?;
        Some((fm, fp))
    } else {
        None
    };
    let lambdas: Vec<f64> = pairs.iter().map(|p| p.lambda).collect();
    let mut b = Bundle::default();
    let mut records = Vec::with_capacity(pairs.len());
    for (j, p) in pairs.iter().enumerate() {
        let field = p.field(&mesh);
        let part = count_nodal_domains(&field, thr).map_err(|e| numeric("nodal count", e))?;
        let index = eigen_index(&lambdas, j + 1, asymptotics::CLUSTER_TOL);
        let (refined_count, stable) = match &fine {
            Some((fm, fp)) if j < fp.len() => {
                let s = stability_check(&field, &fp[j].field(fm), thr).map_err(|e| numeric("nodal count", e))?;
                (Some(s.refined_count), Some(s.stable))
            }
            _ => (None, None),
        };
        if cfg.output.emit_svg {
            b.files.insert(
                format!("nodal_{:02}.svg", j + 1),
                svg::export_svg(&mesh, &p.vector, &part),
            );
        }
        records.push(NodalRecord {
            position: j + 1,
            lambda: p.lambda,
            parity: p.parity,
            deficiency: DeficiencyRecord::new(index, part.count),
            refined_count,
            stable,
        });
    }
    let courant_bound_holds = records
        .iter()
        .filter(|r| r.stable != Some(false))
        .all(|r| r.deficiency.count <= r.deficiency.index);
    let report = json!({
        "schema": SCHEMA,
        "epsilon": cfg.geometry.epsilon,
        "vertices": mesh.vertex_count(),
        "threshold": thr,
        "records": records,
        "courant_bound_holds": courant_bound_holds,
    });
    b.files.insert("nodal.json".into(), to_json(&report));
    Ok(b)
}

fn nodal_status(bundle: &Bundle) -> Result<i32, CliError> {
    let text = bundle
        .files
        .get("nodal.json")
        .ok_or_else(|| CliError::Numeric("nodal report missing".into()))?;
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| numeric("nodal report", e))?;
    if v["courant_bound_holds"] == serde_json::Value::Bool(true) {
        Ok(EXIT_OK)
    } else {
        eprintln!("a stable nodal count exceeds its eigenvalue index");
        Ok(EXIT_THEOREM)
    }
}
