//! Command-line front end for `entangle-core`.
//!
//! Every analysis command prints one JSON report of the form
//! `{command, inputs, results, tolerances, seed, version}`. `scan` prints
//! CSV by default. Exit status is 0 on success, 1 on a usage error and 2 on
//! a numerical failure such as an invalid state file.

pub mod statefile;

use clap::{Args, Parser, Subcommand, ValueEnum};
use entangle_core::chsh::{
    brute_force_chsh, chsh_max, gisin_filter_threshold, polarized_bell_threshold, t_matrix,
    bisect_crossing, CLASSICAL_BOUND, POLARIZED_QUOTED_BELL_BOUND, TSIRELSON_BOUND,
    WERNER_ALPHA_ENTROPIC_REFERENCE, WERNER_BELL_THRESHOLD,
};
use entangle_core::collective::{
    mirror_rows, postselect, xor_rows, MAX_PAIRS, MIN_SUCCESS_PROBABILITY, ROWS_TOL,
};
use entangle_core::densemat::{EIGEN_TOL, HERMITIAN_TOL};
use entangle_core::optimizer::{
    grid, optimize, scan_curve, transition_point, BobMode, OptimizerConfig, ScanPoint,
    MAX_OPTIMIZE_PAIRS, TRANSITION_GAIN,
};
use entangle_core::separability::{
    gisin_ppt_threshold, ppt_check, PPT_TOL, WERNER_PPT_THRESHOLD,
};
use entangle_core::states::{
    gisin_family, singlet, singlet_plus_polarized, werner, DENSITY_MIN_EIGENVALUE,
    DENSITY_TRACE_TOL,
};
use entangle_core::{acceptance, BipartiteDensity, ComplexMatrix};
use num_complex::Complex64;
use serde_json::{json, Value};
use std::io::Write;
use std::path::PathBuf;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "entangle", version, about = "Separability, CHSH and collective-test tools")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Partial-transpose eigenvalue test.
    Ppt(PptArgs),
    /// Exact CHSH maximum from the correlation matrix.
    Chsh(ChshArgs),
    /// Closed-form and computed threshold values.
    Thresholds(ThresholdArgs),
    /// Collective postselection over n copies of a state.
    Collective(CollectiveArgs),
    /// Optimize the retained rows for n Werner pairs.
    Optimize(OptimizeArgs),
    /// Optimized CHSH value over a grid of Werner fractions.
    Scan(ScanArgs),
    /// Write a state in the text state-file format.
    EmitState(EmitArgs),
    /// Run the acceptance criteria.
    Selftest(SelftestArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Family {
    Werner,
    Gisin,
    SingletPolarized,
    Singlet,
    File,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum RowsChoice {
    Xor,
    Optimize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ModeArg {
    Mirrored,
    Independent,
}

impl ModeArg {
    fn to_core(self) -> BobMode {
        match self {
            ModeArg::Mirrored => BobMode::Mirrored,
            ModeArg::Independent => BobMode::Independent,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ModeArg::Mirrored => "mirrored",
            ModeArg::Independent => "independent",
        }
    }
}

#[derive(Args, Debug)]
struct StateArgs {
    #[arg(long, value_enum, default_value = "werner")]
    family: Family,
    /// Mixing fraction in [0, 1].
    #[arg(long)]
    x: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a_im: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b_im: Option<f64>,
    /// State file, for `--family file`.
    #[arg(long)]
    path: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AmplitudeArgs {
    #[arg(long, allow_hyphen_values = true)]
    a_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a_im: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b_im: Option<f64>,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[arg(long, value_enum, default_value = "mirrored")]
    mode: ModeArg,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for restarts; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args, Debug)]
struct PptArgs {
    #[command(flatten)]
    state: StateArgs,
    /// Eigenvalues down to -tol still count as PPT.
    #[arg(long, default_value_t = PPT_TOL)]
    tol: f64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args, Debug)]
struct ChshArgs {
    #[command(flatten)]
    state: StateArgs,
    /// Also run the alternating-maximization search over settings.
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value_t = 16)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args, Debug)]
struct ThresholdArgs {
    #[command(flatten)]
    amps: AmplitudeArgs,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args, Debug)]
struct CollectiveArgs {
    #[command(flatten)]
    state: StateArgs,
    #[arg(long, default_value_t = 2)]
    pairs: usize,
    #[arg(long, value_enum, default_value = "xor")]
    rows: RowsChoice,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    /// Werner fraction.
    #[arg(long)]
    x: f64,
    #[arg(long, default_value_t = 2)]
    pairs: usize,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args, Debug)]
struct ScanArgs {
    /// Pair counts, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    pairs: Vec<usize>,
    /// Grid spacing.
    #[arg(long, default_value_t = 0.01)]
    grid: f64,
    #[arg(long, default_value_t = 0.0)]
    x_min: f64,
    #[arg(long, default_value_t = 1.0)]
    x_max: f64,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args, Debug)]
struct EmitArgs {
    #[command(flatten)]
    state: StateArgs,
    /// Destination file; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SelftestArgs {
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<entangle_core::Error> for CliError {
    fn from(e: entangle_core::Error) -> Self {
        use entangle_core::Error as E;
        match e {
            E::OutOfRange(_) | E::Unnormalized(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numerical(format!("i/o: {e}"))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn require_json(format: Format, command: &str) -> CliResult<()> {
    match format {
        Format::Json => Ok(()),
        Format::Csv => Err(usage(format!("`{command}` only supports --format json"))),
    }
}

fn amplitudes(
    a_re: Option<f64>,
    a_im: Option<f64>,
    b_re: Option<f64>,
    b_im: Option<f64>,
) -> Option<(Complex64, Complex64)> {
    if [a_re, a_im, b_re, b_im].iter().all(Option::is_none) {
        return None;
    }
    let c = |re: Option<f64>, im: Option<f64>| Complex64::new(re.unwrap_or(0.0), im.unwrap_or(0.0));
    Some((c(a_re, a_im), c(b_re, b_im)))
}

fn family_name(f: Family) -> &'static str {
    match f {
        Family::Werner => "werner",
        Family::Gisin => "gisin",
        Family::SingletPolarized => "singlet-polarized",
        Family::Singlet => "singlet",
        Family::File => "file",
    }
}

fn complex_json(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn matrix_json(m: &ComplexMatrix) -> Value {
    (0..m.dim())
        .map(|r| m.row(r).iter().copied().map(complex_json).collect::<Vec<_>>())
        .collect()
}

/// Builds the state and the `inputs` echo for the report.
fn build_state(s: &StateArgs) -> CliResult<(BipartiteDensity, Value)> {
    let need_x = || s.x.ok_or_else(|| usage(format!("--family {} needs --x", family_name(s.family))));
    let amps = amplitudes(s.a_re, s.a_im, s.b_re, s.b_im);
    if s.family != Family::Gisin && amps.is_some() {
        return Err(usage("amplitude flags only apply to --family gisin"));
    }
    if s.family != Family::File && s.path.is_some() {
        return Err(usage("--path only applies to --family file"));
    }
    if matches!(s.family, Family::Singlet | Family::File) && s.x.is_some() {
        return Err(usage(format!("--family {} takes no --x", family_name(s.family))));
    }
    let mut inputs = json!({ "family": family_name(s.family) });
    let rho = match s.family {
        Family::Werner => werner(need_x()?)?,
        Family::SingletPolarized => singlet_plus_polarized(need_x()?)?,
        Family::Singlet => singlet(),
        Family::Gisin => {
            let (a, b) = amps.ok_or_else(|| usage("--family gisin needs --a-re/--a-im/--b-re/--b-im"))?;
            inputs["a"] = complex_json(a);
            inputs["b"] = complex_json(b);
            gisin_family(a, b, need_x()?)?
        }
        Family::File => {
            let path = s.path.as_ref().ok_or_else(|| usage("--family file needs --path"))?;
            inputs["path"] = json!(path.display().to_string());
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Numerical(format!("cannot read {}: {e}", path.display())))?;
            statefile::read_state(&text)
                .map_err(|e| CliError::Numerical(format!("{}: {e}", path.display())))?
        }
    };
    if let Some(x) = s.x {
        inputs["x"] = json!(x);
    }
    inputs["d_a"] = json!(rho.d_a());
    inputs["d_b"] = json!(rho.d_b());
    Ok((rho, inputs))
}

fn report(command: &str, inputs: Value, results: Value, tolerances: Value, seed: Option<u64>) -> Value {
    json!({
        "command": command,
        "inputs": inputs,
        "results": results,
        "tolerances": tolerances,
        "seed": seed,
        "version": VERSION,
    })
}

fn state_tolerances() -> Value {
    json!({
        "eigen": EIGEN_TOL,
        "hermitian": HERMITIAN_TOL,
        "density_trace": DENSITY_TRACE_TOL,
        "density_min_eigenvalue": DENSITY_MIN_EIGENVALUE,
    })
}

fn search_config(s: &SearchArgs, default_restarts: usize) -> OptimizerConfig {
    OptimizerConfig {
        restarts: s.restarts.unwrap_or(default_restarts),
        seed: s.seed,
        mode: s.mode.to_core(),
        threads: s.threads.max(1),
        ..OptimizerConfig::default()
    }
}

fn optimizer_tolerances(cfg: &OptimizerConfig) -> Value {
    json!({
        "step": cfg.step_tol,
        "objective": cfg.objective_tol,
        "gradient_step": cfg.gradient_step,
        "max_iters": cfg.max_iters,
        "rows_orthonormality": ROWS_TOL,
        "min_success_probability": MIN_SUCCESS_PROBABILITY,
        "transition_gain": TRANSITION_GAIN,
    })
}

fn cmd_ppt(a: &PptArgs) -> CliResult<Value> {
    require_json(a.format, "ppt")?;
    if !(a.tol >= 0.0) {
        return Err(usage("--tol must be non-negative"));
    }
    let (rho, inputs) = build_state(&a.state)?;
    let v = ppt_check(&rho, a.tol)?;
    let results = json!({
        "min_eigenvalue": v.min_eigenvalue,
        "is_ppt": v.is_ppt,
        "spectrum": v.spectrum.values,
        "eigen_residual": v.spectrum.residual,
    });
    let mut tol = state_tolerances();
    tol["ppt"] = json!(a.tol);
    Ok(report("ppt", inputs, results, tol, None))
}

fn cmd_chsh(a: &ChshArgs) -> CliResult<Value> {
    require_json(a.format, "chsh")?;
    let (rho, inputs) = build_state(&a.state)?;
    if !rho.is_two_qubit() {
        return Err(CliError::Numerical("CHSH needs a two-qubit state".into()));
    }
    let t = t_matrix(&rho)?;
    let max = chsh_max(&rho)?;
    let mut results = json!({
        "max": max,
        "violated": max > CLASSICAL_BOUND,
        "m_value": t.m_value()?,
        "t_matrix": t.t,
        "classical_bound": CLASSICAL_BOUND,
        "tsirelson_bound": TSIRELSON_BOUND,
    });
    let mut seed = None;
    if a.oracle {
        if a.restarts == 0 {
            return Err(usage("--restarts must be at least 1"));
        }
        let bf = brute_force_chsh(&rho, a.restarts, 1e-12, a.seed)?;
        results["oracle"] = json!({ "value": bf.value, "settings": bf.settings });
        seed = Some(a.seed);
    }
    Ok(report("chsh", inputs, results, state_tolerances(), seed))
}

fn annotation(name: &str, value: f64, provenance: &str, note: &str) -> Value {
    json!({ "name": name, "value": value, "provenance": provenance, "note": note })
}

fn cmd_thresholds(a: &ThresholdArgs) -> CliResult<Value> {
    require_json(a.format, "thresholds")?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (ca, cb) = amplitudes(a.amps.a_re, a.amps.a_im, a.amps.b_re, a.amps.b_im)
        .unwrap_or((Complex64::new(h, 0.0), Complex64::new(h, 0.0)));

    let ppt_crossing = |f: &dyn Fn(f64) -> entangle_core::Result<BipartiteDensity>| {
        bisect_crossing(|x| Ok(-ppt_check(&f(x)?, 0.0)?.min_eigenvalue), 0.0, 0.0, 1.0, 1e-13)
    };
    let werner_ppt = ppt_crossing(&werner)?;
    let gisin_ppt = ppt_crossing(&|x| gisin_family(ca, cb, x))?;
    let werner_bell = bisect_crossing(|x| chsh_max(&werner(x)?), CLASSICAL_BOUND, 0.0, 1.0, 1e-13)?;

    let results = json!({
        "annotations": [
            annotation("gisin_ppt_threshold", gisin_ppt_threshold(ca, cb)?, "closed-form",
                "1/(1+2|ab|): entangled above this fraction"),
            annotation("gisin_ppt_threshold_computed", gisin_ppt, "computed",
                "bisection on the minimum partial-transpose eigenvalue"),
            annotation("gisin_filter_threshold", gisin_filter_threshold(ca, cb)?, "closed-form",
                "1/(1+2|ab|(sqrt2-1)): CHSH violation after local filtering"),
            annotation("werner_ppt_threshold", WERNER_PPT_THRESHOLD, "closed-form", "1/3"),
            annotation("werner_ppt_threshold_computed", werner_ppt, "computed",
                "bisection on the minimum partial-transpose eigenvalue"),
            annotation("werner_bell_threshold", WERNER_BELL_THRESHOLD, "closed-form", "1/sqrt2"),
            annotation("werner_bell_threshold_computed", werner_bell, "computed",
                "bisection on the exact CHSH maximum"),
            annotation("werner_alpha_entropic", WERNER_ALPHA_ENTROPIC_REFERENCE, "reference",
                "1/sqrt3, quoted only; the inequality is not implemented"),
            annotation("singlet_polarized_bell_threshold_computed", polarized_bell_threshold()?,
                "computed", "bisection on the exact CHSH maximum"),
            annotation("singlet_polarized_bell_bound_quoted", POLARIZED_QUOTED_BELL_BOUND,
                "reference", "quoted bound; differs from the exact crossing"),
        ]
    });
    let inputs = json!({ "a": complex_json(ca), "b": complex_json(cb) });
    let mut tol = state_tolerances();
    tol["bisection"] = json!(1e-13);
    Ok(report("thresholds", inputs, results, tol, None))
}

fn cmd_collective(a: &CollectiveArgs) -> CliResult<Value> {
    require_json(a.format, "collective")?;
    let (rho, mut inputs) = build_state(&a.state)?;
    inputs["pairs"] = json!(a.pairs);
    match a.rows {
        RowsChoice::Xor => {
            inputs["rows"] = json!("xor");
            if a.pairs == 0 || a.pairs > MAX_PAIRS {
                return Err(usage(format!("--pairs must be in 1..={MAX_PAIRS}")));
            }
            if !rho.is_two_qubit() {
                return Err(CliError::Numerical("collective test needs a two-qubit state".into()));
            }
            let u = xor_rows(a.pairs)?;
            let out = postselect(&rho, a.pairs, &u, &mirror_rows(&u))?;
            let c = chsh_max(&out.rho_new)?;
            let results = json!({
                "c_max": c,
                "violated": c > CLASSICAL_BOUND,
                "success_probability": out.success_probability,
                "rho_new": matrix_json(out.rho_new.mat()),
            });
            let mut tol = state_tolerances();
            tol["min_success_probability"] = json!(MIN_SUCCESS_PROBABILITY);
            Ok(report("collective", inputs, results, tol, None))
        }
        RowsChoice::Optimize => {
            inputs["rows"] = json!("optimize");
            inputs["mode"] = json!(a.search.mode.name());
            if a.state.family != Family::Werner {
                return Err(usage("--rows optimize needs --family werner"));
            }
            let x = inputs["x"].as_f64().expect("werner has x");
            let cfg = search_config(&a.search, OptimizerConfig::default().restarts);
            inputs["restarts"] = json!(cfg.restarts);
            let r = optimize(x, a.pairs, &cfg)?;
            let results = json!({
                "c_max": r.best_value,
                "violated": r.best_value > CLASSICAL_BOUND,
                "success_probability": r.best_success_probability,
                "xor_value": r.xor_value,
                "alice_rows": r.best_rows,
                "bob_rows": r.best_bob_rows,
            });
            Ok(report("collective", inputs, results, optimizer_tolerances(&cfg), Some(cfg.seed)))
        }
    }
}

fn cmd_optimize(a: &OptimizeArgs) -> CliResult<Value> {
    require_json(a.format, "optimize")?;
    if a.pairs == 0 || a.pairs > MAX_OPTIMIZE_PAIRS {
        return Err(usage(format!("--pairs must be in 1..={MAX_OPTIMIZE_PAIRS}")));
    }
    let cfg = search_config(&a.search, OptimizerConfig::default().restarts);
    let r = optimize(a.x, a.pairs, &cfg)?;
    let inputs = json!({
        "x": a.x,
        "pairs": a.pairs,
        "mode": a.search.mode.name(),
        "restarts": cfg.restarts,
        "threads": cfg.threads,
    });
    let results = json!({
        "best_value": r.best_value,
        "violated": r.best_value > CLASSICAL_BOUND,
        "xor_value": r.xor_value,
        "gain_over_xor": r.best_value - r.xor_value,
        "success_probability": r.best_success_probability,
        "alice_rows": r.best_rows,
        "bob_rows": r.best_bob_rows,
        "used_xor_start": r.used_xor_start,
        "per_restart": r.per_restart,
    });
    Ok(report("optimize", inputs, results, optimizer_tolerances(&cfg), Some(cfg.seed)))
}

type Curves = Vec<(usize, Vec<ScanPoint>)>;

fn scan_points(a: &ScanArgs, cfg: &OptimizerConfig) -> CliResult<(Vec<f64>, Curves)> {
    if !(a.grid > 0.0) {
        return Err(usage("--grid must be positive"));
    }
    if !(0.0..=1.0).contains(&a.x_min) || !(0.0..=1.0).contains(&a.x_max) || a.x_min > a.x_max {
        return Err(usage("need 0 <= --x-min <= --x-max <= 1"));
    }
    if a.pairs.is_empty() {
        return Err(usage("--pairs needs at least one value"));
    }
    let xs = grid(a.x_min, a.x_max, a.grid);
    let mut curves = Vec::new();
    for &n in &a.pairs {
        curves.push((n, scan_curve(n, &xs, cfg)?));
    }
    Ok((xs, curves))
}

fn cmd_scan(a: &ScanArgs, out: &mut dyn Write) -> CliResult<Option<Value>> {
    let cfg = search_config(&a.search, 16);
    let (xs, curves) = scan_points(a, &cfg)?;
    match a.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            let csv_err = |e: csv::Error| CliError::Numerical(format!("csv: {e}"));
            w.write_record(["x", "c_max", "xor_value", "success_probability", "pairs", "mode"])
                .map_err(csv_err)?;
            for (n, points) in &curves {
                for p in points {
                    w.write_record([
                        p.x.to_string(),
                        p.best_value.to_string(),
                        p.xor_value.to_string(),
                        p.success_probability.to_string(),
                        n.to_string(),
                        a.search.mode.name().to_string(),
                    ])
                    .map_err(csv_err)?;
                }
            }
            w.flush()?;
            Ok(None)
        }
        Format::Json => {
            let inputs = json!({
                "pairs": a.pairs,
                "grid": a.grid,
                "x_min": a.x_min,
                "x_max": a.x_max,
                "points": xs.len(),
                "mode": a.search.mode.name(),
                "restarts": cfg.restarts,
            });
            let curves: Vec<Value> = curves
                .iter()
                .map(|(n, pts)| json!({ "pairs": n, "transition": transition_point(pts), "points": pts }))
                .collect();
            let results = json!({ "curves": curves });
            Ok(Some(report("scan", inputs, results, optimizer_tolerances(&cfg), Some(cfg.seed))))
        }
    }
}

fn cmd_emit(a: &EmitArgs, out: &mut dyn Write) -> CliResult<()> {
    let (rho, _) = build_state(&a.state)?;
    let text = statefile::write_state(&rho);
    match &a.output {
        Some(path) => std::fs::write(path, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_selftest(a: &SelftestArgs, out: &mut dyn Write) -> CliResult<()> {
    let outcomes = acceptance::run_all();
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    match a.format {
        Format::Json => {
            let v = report(
                "selftest",
                json!({}),
                json!({ "criteria": outcomes, "failed": failed }),
                json!({}),
                None,
            );
            writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("json"))?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            for o in &outcomes {
                w.serialize(o).map_err(|e| CliError::Numerical(format!("csv: {e}")))?;
            }
            w.flush()?;
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!("acceptance criteria failed: {failed:?}")))
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    let value = match &cli.command {
        Command::Ppt(a) => Some(cmd_ppt(a)?),
        Command::Chsh(a) => Some(cmd_chsh(a)?),
        Command::Thresholds(a) => Some(cmd_thresholds(a)?),
        Command::Collective(a) => Some(cmd_collective(a)?),
        Command::Optimize(a) => Some(cmd_optimize(a)?),
        Command::Scan(a) => cmd_scan(a, out)?,
        Command::EmitState(a) => {
            cmd_emit(a, out)?;
            None
        }
        Command::Selftest(a) => {
            cmd_selftest(a, out)?;
            None
        }
    };
    if let Some(v) = value {
        writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("json"))?;
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    1
                }
            };
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
