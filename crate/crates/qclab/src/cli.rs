//! Command-line front end: reproducible experiments with JSON reports and
//! QCF1 grid dumps.
//!
//! Exit contract: 0 on success, 1 when a scientific verdict fails or a
//! computation errors (the originating error text is embedded in the JSON
//! report), 2 on usage errors.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::beltrami::{solve_principal, truncate_mu, MuField, SolverConfig};
use crate::fields::catalog::{example1_pair, AnalyticMap};
use crate::fields::{
    finite_diff_gradients, integrability_scan, integrability_scan_map, sample, ComplexGrid,
    GridField, GridSpec,
};
use crate::gridio;
use crate::matalg::suite::run_identity_suite;
use crate::stoilow::{
    decompose_pair, energy_trace_slope, rigidity_fit, DecomposeConfig, RigidityVerdict,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(
    name = "qclab",
    version,
    about = "Conformal matrix algebra, Beltrami solves, and factorization experiments on planar mappings"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run the randomized matrix-identity suite and report per-identity defects.
    AlgebraCheck(AlgebraCheckArgs),
    /// Solve the Beltrami equation for a dumped coefficient grid.
    Solve(SolveArgs),
    /// Factor a pair of mappings through a common homeomorphism.
    Decompose(DecomposeArgs),
    /// Fit the best global rotation between the gradients of a pair.
    Rigidity(RigidityArgs),
    /// Run the piecewise counterexample end to end and check its verdicts.
    Counterexample(CounterexampleArgs),
    /// Integrate the dilatation quotient over shrinking half-strips.
    Scan(ScanArgs),
}

#[derive(Args, Debug, Serialize)]
struct AlgebraCheckArgs {
    /// Random matrices per identity.
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Defect gate for the pass verdict.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct SolveArgs {
    /// QCF1 dump of the coefficient (2 components, with JSON sidecar).
    #[arg(long)]
    mu_file: PathBuf,
    /// Resample the coefficient to an N x N grid before solving.
    #[arg(long)]
    grid: Option<usize>,
    /// Truncate the coefficient at this level before solving.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 2.0)]
    padding: f64,
    #[arg(long, default_value_t = 0.95)]
    kappa_max: f64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct DecomposeArgs {
    /// Catalog pair `id,id` (e.g. `z,(z-1)^2`) or two QCF1 field files.
    #[arg(long)]
    pair: String,
    /// Nodes per axis for catalog pairs.
    #[arg(long, default_value_t = 256)]
    grid: usize,
    /// Square domain bounds for catalog pairs.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [-0.75, 0.75])]
    domain: Vec<f64>,
    /// Descending truncation levels.
    #[arg(long, value_delimiter = ',')]
    eps_schedule: Option<Vec<f64>>,
    #[arg(long, default_value_t = 6000)]
    max_iters: usize,
    #[arg(long, default_value_t = 2e-5)]
    tol: f64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct RigidityArgs {
    /// Catalog pair `id,id` or two QCF1 field files.
    #[arg(long)]
    pair: String,
    #[arg(long, default_value_t = 128)]
    grid: usize,
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [-1.0, 1.0])]
    domain: Vec<f64>,
    /// Verdict expected for exit-code purposes.
    #[arg(long, default_value = "rigid")]
    expect: String,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct CounterexampleArgs {
    /// Rotation angle of the x1 > 0 branch, in (0, 2pi).
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    theta: f64,
    /// Nodes per axis for the sampled pair.
    #[arg(long, default_value_t = 256)]
    grid: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct ScanArgs {
    /// Catalog map to scan.
    #[arg(long)]
    map: Option<String>,
    /// QCF1 field file to scan (gradients rebuilt by finite differences).
    #[arg(long)]
    field: Option<PathBuf>,
    /// Scan region: x in (delta, X_MAX), y in (Y_MIN, Y_MAX).
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [1.0, -1.0, 1.0])]
    region: Vec<f64>,
    /// Descending cut levels.
    #[arg(long, value_delimiter = ',', required = true)]
    deltas: Vec<f64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

/// Entry point used by both the binary and the tests.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    if let Some(threads) = std::env::var_os("QCLAB_THREADS") {
        match threads.to_string_lossy().parse::<usize>() {
            Ok(n) if n >= 1 => {
                // computations in this build are single-threaded; the cap is
                // accepted so configured environments keep working
            }
            _ => {
                eprintln!("QCLAB_THREADS must be a positive integer");
                return 2;
            }
        }
    }
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.exit_code() == 0 { 0 } else { 2 };
            let _ = e.print();
            return code;
        }
    };
    let (out_dir, outcome) = match cli.cmd {
        Cmd::AlgebraCheck(a) => (a.out_dir.clone(), algebra_check(a)),
        Cmd::Solve(a) => (a.out_dir.clone(), solve_cmd(a)),
        Cmd::Decompose(a) => (a.out_dir.clone(), decompose_cmd(a)),
        Cmd::Rigidity(a) => (a.out_dir.clone(), rigidity_cmd(a)),
        Cmd::Counterexample(a) => (a.out_dir.clone(), counterexample_cmd(a)),
        Cmd::Scan(a) => (a.out_dir.clone(), scan_cmd(a)),
    };
    match outcome {
        Ok(code) => code,
        Err(msg) => {
            let report = json!({ "version": VERSION, "error": msg });
            let _ = emit_report(&out_dir, &report);
            eprintln!("error: {msg}");
            1
        }
    }
}

fn emit_report(out_dir: &Path, report: &serde_json::Value) -> Result<(), String> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| format!("cannot create {}: {e}", out_dir.display()))?;
    let path = out_dir.join("report.json");
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(&path, &text).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    println!("{text}");
    Ok(())
}

fn algebra_check(args: AlgebraCheckArgs) -> Result<i32, String> {
    let suite = run_identity_suite(args.samples, args.seed);
    let pass = suite.all_within(args.tol);
    let report = json!({
        "command": "algebra-check",
        "version": VERSION,
        "config": &args,
        "checks": suite.checks,
        "max_defect": suite.max_defect,
        "pass": pass,
    });
    emit_report(&args.out_dir, &report)?;
    Ok(if pass { 0 } else { 1 })
}

fn resample_complex(g: &ComplexGrid, n: usize) -> Result<ComplexGrid, String> {
    let spec = GridSpec::new(
        g.spec.x_min,
        g.spec.x_max,
        g.spec.y_min,
        g.spec.y_max,
        n,
        n,
    );
    let mut out = ComplexGrid::zeros(spec);
    for j in 0..n {
        for i in 0..n {
            let v = g.interp(spec.node(i, j)).map_err(|e| e.to_string())?;
            out.set(i, j, v);
        }
    }
    Ok(out)
}

fn solve_cmd(args: SolveArgs) -> Result<i32, String> {
    let mut grid = gridio::read_complex_grid(&args.mu_file).map_err(|e| e.to_string())?;
    if let Some(n) = args.grid {
        if n < 2 {
            return Err("--grid must be at least 2".into());
        }
        grid = resample_complex(&grid, n)?;
    }
    let support = grid.spec;
    let mut mu = MuField::new(grid, support).map_err(|e| e.to_string())?;
    if let Some(eps) = args.epsilon {
        if !(eps > 0.0 && eps < std::f64::consts::SQRT_2) {
            return Err(format!("--epsilon {eps} outside (0, sqrt(2))"));
        }
        mu = truncate_mu(&mu, eps);
    }
    let config = SolverConfig {
        epsilon_trunc: args.epsilon.unwrap_or(0.05),
        max_neumann_iters: args.max_iters,
        residual_tol: args.tol,
        padding_factor: args.padding,
        kappa_max: args.kappa_max,
    };
    let sol = solve_principal(&mu, &config).map_err(|e| e.to_string())?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| e.to_string())?;
    gridio::write_field_values(&args.out_dir.join("solution.qcf1"), &sol.f)
        .map_err(|e| e.to_string())?;
    gridio::write_complex_grid(&args.out_dir.join("dbar_residual.qcf1"), &sol.dbar_residual)
        .map_err(|e| e.to_string())?;
    let report = json!({
        "command": "solve",
        "version": VERSION,
        "config": &args,
        "kappa": mu.kappa,
        "iterations": sol.iterations_used,
        "converged": sol.neumann_converged,
        "max_residual": sol.max_residual,
        "min_interior_det": sol.f.min_interior_det(),
        "outputs": ["solution.qcf1", "dbar_residual.qcf1"],
    });
    emit_report(&args.out_dir, &report)?;
    Ok(if sol.neumann_converged { 0 } else { 1 })
}

/// `id,id` catalog pair, or two QCF1 paths.
fn load_pair(
    pair: &str,
    grid: usize,
    domain: &[f64],
) -> Result<(GridField, GridField, String), String> {
    let (a, b) = pair
        .split_once(',')
        .ok_or_else(|| format!("--pair {pair:?} is not of the form A,B"))?;
    if Path::new(a).exists() && Path::new(b).exists() {
        let fa = gridio::read_field_values(Path::new(a)).map_err(|e| e.to_string())?;
        let fb = gridio::read_field_values(Path::new(b)).map_err(|e| e.to_string())?;
        return Ok((
            finite_diff_gradients(&fa),
            finite_diff_gradients(&fb),
            "files".into(),
        ));
    }
    if grid < 2 {
        return Err("--grid must be at least 2".into());
    }
    let (lo, hi) = (domain[0], domain[1]);
    let map_a = AnalyticMap::from_cli_id(a.trim())?;
    let map_b = AnalyticMap::from_cli_id(b.trim())?;
    let spec = GridSpec::square(lo, hi, grid);
    let fa = sample(&map_a, &spec).map_err(|e| e.to_string())?;
    let fb = sample(&map_b, &spec).map_err(|e| e.to_string())?;
    Ok((fa, fb, "catalog".into()))
}

fn decompose_cmd(args: DecomposeArgs) -> Result<i32, String> {
    let (u, v, source) = load_pair(&args.pair, args.grid, &args.domain)?;
    let mut config = DecomposeConfig::default();
    config.solver.max_neumann_iters = args.max_iters;
    config.solver.residual_tol = args.tol;
    if let Some(schedule) = &args.eps_schedule {
        if schedule.is_empty() || schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err("--eps-schedule must be non-empty and strictly descending".into());
        }
        config.eps_schedule = schedule.clone();
    }
    let (res, trace) = decompose_pair(&u, &v, &config).map_err(|e| e.to_string())?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| e.to_string())?;
    for (name, field) in [
        ("w.qcf1", &res.w),
        ("h.qcf1", &res.h),
        ("phi_u.qcf1", &res.phi_u),
        ("phi_v.qcf1", &res.phi_v),
    ] {
        gridio::write_field_values(&args.out_dir.join(name), field).map_err(|e| e.to_string())?;
    }
    gridio::write_complex_grid(&args.out_dir.join("psi.qcf1"), &res.psi)
        .map_err(|e| e.to_string())?;
    let flags: Vec<f64> = res
        .pole_flags
        .iter()
        .map(|&b| if b { 1.0 } else { 0.0 })
        .collect();
    gridio::write_scalar_grid(&args.out_dir.join("pole_flags.qcf1"), &res.psi.spec, &flags)
        .map_err(|e| e.to_string())?;
    let slope = energy_trace_slope(&trace).ok();
    let report = json!({
        "command": "decompose",
        "version": VERSION,
        "config": &args,
        "pair_source": source,
        "epsilon_used": res.epsilon_used,
        "relation_residual": res.relation_residual,
        "compared_samples": res.compared_samples,
        "composition_defect": res.composition_defect,
        "pole_count": res.pole_flags.iter().filter(|&&b| b).count(),
        "energy_trace": trace,
        "energy_slope": slope,
        "outputs": ["w.qcf1", "h.qcf1", "phi_u.qcf1", "phi_v.qcf1", "psi.qcf1", "pole_flags.qcf1"],
    });
    emit_report(&args.out_dir, &report)?;
    Ok(0)
}

fn rigidity_cmd(args: RigidityArgs) -> Result<i32, String> {
    let expect = match args.expect.as_str() {
        "rigid" => RigidityVerdict::Rigid,
        "non-rigid" | "non_rigid" => RigidityVerdict::NonRigid,
        other => return Err(format!("--expect {other:?} is not rigid|non-rigid")),
    };
    let (u, v, source) = load_pair(&args.pair, args.grid, &args.domain)?;
    let rep = rigidity_fit(&u, &v).map_err(|e| e.to_string())?;
    let report = json!({
        "command": "rigidity",
        "version": VERSION,
        "config": &args,
        "pair_source": source,
        "report": rep,
    });
    emit_report(&args.out_dir, &report)?;
    Ok(if rep.verdict == expect { 0 } else { 1 })
}

fn counterexample_cmd(args: CounterexampleArgs) -> Result<i32, String> {
    let (u, v) = example1_pair(args.theta).map_err(|e| e.to_string())?;
    // cell-centered sampling keeps the seam x1 = 0 off the grid
    let spec = GridSpec::cell_centered(-1.0, 1.0, -1.0, 1.0, args.grid, args.grid);
    let uf = sample(&u, &spec).map_err(|e| e.to_string())?;
    let vf = sample(&v, &spec).map_err(|e| e.to_string())?;

    // matching coefficients off the seam
    let mut mu_defect = 0.0f64;
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let mu_u = crate::matalg::beltrami_of(&uf.gradient(i, j)).map_err(|e| e.to_string())?;
            let mu_v = crate::matalg::beltrami_of(&vf.gradient(i, j)).map_err(|e| e.to_string())?;
            mu_defect = mu_defect.max(mu_u.sub(&mu_v).modulus());
        }
    }
    let mu_match = mu_defect <= 1e-12;

    // no global rotation
    let rig = rigidity_fit(&uf, &vf).map_err(|e| e.to_string())?;
    let non_rigid = rig.verdict == RigidityVerdict::NonRigid && rig.mean_residual >= 0.1;

    // divergence of the dilatation integral as the seam strip shrinks
    let deltas: Vec<f64> = (4..=10).map(|k| 2f64.powi(-k)).collect();
    let scan =
        integrability_scan_map(&u, 1.0, -1.0, 1.0, &deltas, 512).map_err(|e| e.to_string())?;
    let increments: Vec<f64> = scan.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let mean_increment = increments.iter().sum::<f64>() / increments.len() as f64;
    let divergent = increments.iter().all(|&d| d > 0.5);

    let confirmed = mu_match && non_rigid && divergent;
    let report = json!({
        "command": "counterexample",
        "version": VERSION,
        "config": &args,
        "mu_match": mu_match,
        "mu_match_max_defect": mu_defect,
        "rigid": rig.verdict == RigidityVerdict::Rigid,
        "rigidity": rig,
        "scan": {
            "deltas": deltas,
            "integrals": scan.iter().map(|s| s.1).collect::<Vec<_>>(),
            "increments": increments,
            "mean_increment_per_halving": mean_increment,
            "divergent": divergent,
        },
        "confirmed": confirmed,
    });
    emit_report(&args.out_dir, &report)?;
    Ok(if confirmed { 0 } else { 1 })
}

fn scan_cmd(args: ScanArgs) -> Result<i32, String> {
    if args.region.len() != 3 {
        return Err("--region needs X_MAX,Y_MIN,Y_MAX".into());
    }
    let (x_max, y_min, y_max) = (args.region[0], args.region[1], args.region[2]);
    let rows = match (&args.map, &args.field) {
        (Some(id), None) => {
            let map = AnalyticMap::from_cli_id(id)?;
            integrability_scan_map(&map, x_max, y_min, y_max, &args.deltas, 256)
                .map_err(|e| e.to_string())?
        }
        (None, Some(path)) => {
            let f = gridio::read_field_values(path).map_err(|e| e.to_string())?;
            let f = finite_diff_gradients(&f);
            integrability_scan(&f, &args.deltas).map_err(|e| e.to_string())?
        }
        _ => return Err("exactly one of --map or --field is required".into()),
    };
    std::fs::create_dir_all(&args.out_dir).map_err(|e| e.to_string())?;
    gridio::write_scan_csv(&args.out_dir.join("scan.csv"), &rows).map_err(|e| e.to_string())?;
    let report = json!({
        "command": "scan",
        "version": VERSION,
        "config": &args,
        "rows": rows,
        "outputs": ["scan.csv"],
    });
    emit_report(&args.out_dir, &report)?;
    Ok(0)
}
