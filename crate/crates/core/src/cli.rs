//! Command-line front end.
//!
//! Without `--out` the primary table goes to stdout; with `--out DIR` every
//! artifact is written there and a JSON summary goes to stdout. Exit codes:
//! 0 when all checks pass, 1 when a check or precondition fails (with a JSON
//! error naming the witness θ when there is one), 2 on usage errors.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::brunovsky::to_brunovsky_samples;
use crate::builtins;
use crate::ensemble_design::{
    ackermann_feedback_samples, check_conditions, multi_input_design_samples, ConditionTolerances, EigenArcDesign,
    DEFAULT_CROSS_GAP_REL, DEFAULT_TOL_GAP,
};
use crate::error::Error;
use crate::feedback_group::equivalence_residual;
use crate::indices::{indices_constant_samples, IndexKind};
use crate::io::{self, num, ErrorReport, Table};
use crate::linalg::{max_abs, re, CVec, C64};
use crate::oscillator::{self, k_star, OscillatorEnsemble};
use crate::param_core::{pointwise_reachable_samples, PairSamples, ParamGrid, SystemPair, DEFAULT_RANK_TOL};
use crate::random;
use crate::simulate::{self, InputMode, InputSequence};

/// Caps the rayon pool size when set to a positive integer.
pub const THREADS_ENV: &str = "ENSEMBLE_FEEDBACK_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ensemble-feedback", version, about = "Feedback equivalence and ensemble reachability toolkit")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Kronecker and Hermite indices over a parameter grid.
    Indices(SystemArgs),
    /// Restricted feedback transform to Brunovsky form.
    Brunovsky(BrunovskyArgs),
    /// Single-input Ackermann design along eigenvalue arcs.
    DesignSi(DesignArgs),
    /// Multi-input design via a target pair with the same Kronecker indices.
    DesignMi(DesignArgs),
    /// Sufficient conditions on the pair itself plus seeded group-law checks.
    Check(CheckArgs),
    /// Bernstein synthesis and error bound for the oscillator ensemble.
    Oscillator(OscillatorArgs),
    /// Open-loop propagation of an input sequence or polynomial.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct SystemArgs {
    /// Built-in system: example41a, example41b or oscillator.
    #[arg(long, conflicts_with = "system")]
    builtin: Option<String>,
    /// System JSON file.
    #[arg(long)]
    system: Option<PathBuf>,
    /// Number of uniform grid points.
    #[arg(long, default_value_t = 201, value_parser = clap::value_parser!(u64).range(2..))]
    grid: u64,
    /// Extra parameter values to include in the grid.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    insert: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    tol_rank: f64,
    #[arg(long, default_value_t = DEFAULT_TOL_GAP)]
    tol_gap: f64,
    /// Output directory for all artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Coefficients of g for `--builtin oscillator`, ascending.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    g: Vec<f64>,
    /// Feedback gain for `--builtin oscillator`.
    #[arg(long, allow_hyphen_values = true)]
    k: Option<f64>,
    /// Half-width of the parameter interval for `--builtin oscillator`.
    #[arg(long)]
    theta_star: Option<f64>,
}

#[derive(Debug, Args)]
struct BrunovskyArgs {
    #[command(flatten)]
    sys: SystemArgs,
    #[arg(long, default_value_t = 1e-8)]
    tol_residual: f64,
}

#[derive(Debug, Args)]
struct DesignArgs {
    #[command(flatten)]
    sys: SystemArgs,
    #[arg(long, default_value_t = 1e-7)]
    tol_residual: f64,
    /// Number of eigenvalue arcs on the unit circle.
    #[arg(long)]
    split_k: Option<usize>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[command(flatten)]
    sys: SystemArgs,
    /// Number of seeded random transforms for the group-law checks.
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol_residual: f64,
}

#[derive(Debug, Args)]
struct OscillatorArgs {
    /// Coefficients of g, ascending.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    g: Vec<f64>,
    #[arg(long)]
    theta_star: f64,
    /// Feedback gain.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "auto_k", required_unless_present = "auto_k")]
    k: Option<f64>,
    /// Use the gain k* + margin (sign-adjusted for negative g).
    #[arg(long)]
    auto_k: Option<f64>,
    /// `sincos` or `poly:c0,c1,...` (both components equal that polynomial in θ).
    #[arg(long, default_value = "sincos")]
    target: String,
    /// Lipschitz constant of the target (required for `poly:` targets).
    #[arg(long)]
    lipschitz: Option<f64>,
    /// Degrees: `a:b` for every integer in a..=b, comma lists allowed.
    #[arg(long, default_value = "3:64")]
    degrees: String,
    #[arg(long, default_value_t = 201, value_parser = clap::value_parser!(u64).range(2..))]
    grid: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    sys: SystemArgs,
    /// Input JSON with `polynomial` or `input`, optional `dt`, `target`, `system`.
    #[arg(long)]
    input: PathBuf,
    /// Fail (exit 1) when the sup error exceeds this value.
    #[arg(long)]
    max_error: Option<f64>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Error(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// What a subcommand produced: files, the stdout fallback and the verdict.
struct Outcome {
    files: Vec<(&'static str, String)>,
    primary: &'static str,
    summary: serde_json::Value,
    passed: bool,
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    configure_threads();
    let (out, result) = match cli.command {
        Command::Indices(a) => (a.out.clone(), cmd_indices(&a)),
        Command::Brunovsky(a) => (a.sys.out.clone(), cmd_brunovsky(&a)),
        Command::DesignSi(a) => (a.sys.out.clone(), cmd_design_si(&a)),
        Command::DesignMi(a) => (a.sys.out.clone(), cmd_design_mi(&a)),
        Command::Check(a) => (a.sys.out.clone(), cmd_check(&a)),
        Command::Oscillator(a) => (a.out.clone(), cmd_oscillator(&a)),
        Command::Simulate(a) => (a.sys.out.clone(), cmd_simulate(&a)),
    };
    let stdout = std::io::stdout();
    let mut stdout = stdout.lock();
    match result.and_then(|o| emit(&o, out.as_deref(), &mut stdout).map(|_| o.passed)) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Error(e)) => {
            let _ = stdout.write_all(io::to_json(&ErrorReport::from(&e)).as_bytes());
            eprintln!("error: {e}");
            1
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            // a second initialization in the same process is harmless to skip
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn emit(o: &Outcome, out: Option<&Path>, stdout: &mut impl Write) -> CliResult<()> {
    let write_err = |e: std::io::Error| Failure::Usage(format!("cannot write to stdout: {e}"));
    match out {
        Some(dir) => {
            for (name, text) in &o.files {
                io::write_text(&dir.join(name), text).map_err(|e| Failure::Usage(e.to_string()))?;
            }
            let summary = io::to_json(&o.summary);
            io::write_text(&dir.join("summary.json"), &summary).map_err(|e| Failure::Usage(e.to_string()))?;
            stdout.write_all(summary.as_bytes()).map_err(write_err)
        }
        None => {
            let text = o
                .files
                .iter()
                .find(|(name, _)| *name == o.primary)
                .map(|(_, t)| t.as_str())
                .unwrap_or("");
            stdout.write_all(text.as_bytes()).map_err(write_err)
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("--{name} must be positive, got {v}")))
    }
}

impl SystemArgs {
    fn load(&self) -> CliResult<(SystemPair, Vec<f64>)> {
        match (&self.builtin, &self.system) {
            (Some(name), None) => {
                let sys = match name.as_str() {
                    "example41a" => builtins::example41a(),
                    "example41b" => builtins::example41b(),
                    "oscillator" => {
                        let (Some(k), Some(ts)) = (self.k, self.theta_star) else {
                            return Err(usage("--builtin oscillator needs --g, --k and --theta-star"));
                        };
                        if self.g.is_empty() {
                            return Err(usage("--builtin oscillator needs --g, --k and --theta-star"));
                        }
                        builtins::oscillator(&self.g, k, ts).map_err(|e| usage(e.to_string()))?
                    }
                    other => return Err(usage(format!("unknown builtin {other:?}"))),
                };
                Ok((sys, builtins::special_points(name)))
            }
            (None, Some(path)) => {
                let text = io::read_text(path).map_err(|e| usage(e.to_string()))?;
                Ok((io::parse_system(&text).map_err(|e| usage(e.to_string()))?, Vec::new()))
            }
            (None, None) => Err(usage("one of --builtin or --system is required")),
            (Some(_), Some(_)) => Err(usage("--builtin and --system are exclusive")),
        }
    }

    fn grid_for(&self, sys: &SystemPair, special: &[f64]) -> CliResult<ParamGrid> {
        let arc = sys.arc();
        let mut extra: Vec<f64> = special.iter().copied().filter(|&t| arc.contains(t)).collect();
        for &t in &self.insert {
            if !arc.contains(t) {
                return Err(usage(format!("--insert {t} lies outside [{}, {}]", arc.lo(), arc.hi())));
            }
            extra.push(t);
        }
        Ok(ParamGrid::uniform(arc, self.grid as usize)?.with_inserted(&extra)?)
    }

    fn samples(&self) -> CliResult<PairSamples> {
        positive("tol-rank", self.tol_rank)?;
        positive("tol-gap", self.tol_gap)?;
        let (sys, special) = self.load()?;
        let grid = self.grid_for(&sys, &special)?;
        Ok(sys.sample(&grid)?)
    }

    fn tolerances(&self) -> ConditionTolerances {
        ConditionTolerances {
            rank: self.tol_rank,
            gap: self.tol_gap,
            cross_gap_rel: DEFAULT_CROSS_GAP_REL,
        }
    }
}

fn cmd_indices(a: &SystemArgs) -> CliResult<Outcome> {
    let samples = a.samples()?;
    let kron = indices_constant_samples(&samples, IndexKind::Kronecker, a.tol_rank)?;
    let herm = indices_constant_samples(&samples, IndexKind::Hermite, a.tol_rank)?;
    let reach = pointwise_reachable_samples(&samples, a.tol_rank)?;
    let m = samples.m();
    let mut header = vec!["theta".to_string()];
    header.extend((1..=m).map(|i| format!("kappa_{i}")));
    header.extend((1..=m).map(|i| format!("h_{i}")));
    header.push("reachable".into());
    let mut table = Table::new(header);
    for k in 0..samples.len() {
        let mut row = vec![num(samples.theta(k))];
        row.extend(kron.per_point[k].values.iter().map(|v| v.to_string()));
        row.extend(herm.per_point[k].values.iter().map(|v| v.to_string()));
        row.push(u8::from(reach.points[k].rank == samples.n()).to_string());
        table.push(row);
    }
    let summary = json!({
        "n": samples.n(),
        "m": m,
        "grid_points": samples.len(),
        "reachable": reach.reachable,
        "first_unreachable": reach.first_unreachable().map(|p| p.theta),
        "kronecker": constancy_json(&kron),
        "hermite": constancy_json(&herm),
    });
    Ok(Outcome {
        files: vec![("indices.csv", table.to_csv())],
        primary: "indices.csv",
        summary,
        passed: reach.reachable,
    })
}

fn constancy_json(rep: &crate::indices::ConstancyReport) -> serde_json::Value {
    json!({
        "constant": rep.constant,
        "reference": rep.reference.values,
        "first_mismatch": rep.first_mismatch.as_ref().map(|m| json!({"theta": m.theta, "values": m.values})),
    })
}

fn cmd_brunovsky(a: &BrunovskyArgs) -> CliResult<Outcome> {
    positive("tol-residual", a.tol_residual)?;
    let samples = a.sys.samples()?;
    let res = to_brunovsky_samples(&samples, a.sys.tol_rank)?;
    let mut table = Table::new(["theta", "res1", "res2", "discontinuity"]);
    for p in &res.points {
        table.push(vec![num(p.theta), num(p.state_residual), num(p.input_residual), num(p.discontinuity)]);
    }
    let max_res = res.max_state_residual().max(res.max_input_residual());
    let passed = max_res < a.tol_residual;
    let summary = json!({
        "kappa": res.kappa.values,
        "max_state_residual": res.max_state_residual(),
        "max_input_residual": res.max_input_residual(),
        "max_discontinuity": res.max_discontinuity(),
        "max_triangularity_defect": res.transform.max_triangularity_defect(),
        "tol_residual": a.tol_residual,
        "passed": passed,
    });
    Ok(Outcome {
        files: vec![
            ("residuals.csv", table.to_csv()),
            ("transform.json", io::transform_to_json(&res.transform)),
        ],
        primary: "residuals.csv",
        summary,
        passed,
    })
}

fn complex_cells(values: &[C64]) -> Vec<String> {
    values.iter().flat_map(|z| [num(z.re), num(z.im)]).collect()
}

fn complex_header(prefix: &str, count: usize) -> Vec<String> {
    (1..=count)
        .flat_map(|i| [format!("{prefix}_{i}_re"), format!("{prefix}_{i}_im")])
        .collect()
}

fn cmd_design_si(a: &DesignArgs) -> CliResult<Outcome> {
    positive("tol-residual", a.tol_residual)?;
    let samples = a.sys.samples()?;
    if samples.m() != 1 {
        return Err(usage(format!("design-si needs a single-input system, got m = {}", samples.m())));
    }
    let design = EigenArcDesign::new(samples.n(), a.split_k, samples.grid().arc())?;
    let si = ackermann_feedback_samples(&samples, &design, a.sys.tol_rank)?;
    let conditions = check_conditions(&si.closed_loop, a.sys.tolerances())?;
    let n = samples.n();
    let mut header = vec!["theta".to_string()];
    header.extend(complex_header("f", n));
    header.push("coeff_mismatch".into());
    let mut table = Table::new(header);
    for p in &si.points {
        let mut row = vec![num(p.theta)];
        row.extend(complex_cells(&p.f));
        row.push(num(p.coeff_mismatch));
        table.push(row);
    }
    let passed = conditions.all_passed() && si.max_coeff_mismatch() <= a.tol_residual;
    let summary = json!({
        "n": n,
        "split_k": design.split_k,
        "max_coeff_mismatch": si.max_coeff_mismatch(),
        "conditions_passed": conditions.all_passed(),
        "passed": passed,
    });
    Ok(Outcome {
        files: vec![
            ("feedback.csv", table.to_csv()),
            ("transform.json", io::transform_to_json(&si.transform)),
            ("conditions.json", io::to_json(&conditions)),
        ],
        primary: "feedback.csv",
        summary,
        passed,
    })
}

fn cmd_design_mi(a: &DesignArgs) -> CliResult<Outcome> {
    positive("tol-residual", a.tol_residual)?;
    let samples = a.sys.samples()?;
    let mi = multi_input_design_samples(&samples, a.split_k, a.sys.tolerances())?;
    let mut table = Table::new(["theta", "res1", "res2"]);
    for r in &mi.residuals {
        table.push(vec![num(r.theta), num(r.state), num(r.input)]);
    }
    let passed = mi.conditions.all_passed() && mi.max_residual() < a.tol_residual;
    let summary = json!({
        "kappa": mi.source.kappa.values,
        "chain_order": mi.target.chain_order,
        "b_tilde": io::matrix_to_json(&mi.target.b_tilde),
        "split_k": mi.design.split_k,
        "max_residual": mi.max_residual(),
        "max_triangularity_defect": mi.transform.max_triangularity_defect(),
        "conditions_passed": mi.conditions.all_passed(),
        "passed": passed,
    });
    Ok(Outcome {
        files: vec![
            ("residuals.csv", table.to_csv()),
            ("transform.json", io::transform_to_json(&mi.transform)),
            ("conditions.json", io::to_json(&mi.conditions)),
        ],
        primary: "residuals.csv",
        summary,
        passed,
    })
}

#[derive(Serialize)]
struct GroupCheck {
    transforms: usize,
    seed: u64,
    max_compatibility_defect: f64,
    max_inverse_defect: f64,
    max_relation_residual: f64,
    kronecker_invariant: bool,
    passed: bool,
}

/// Seeded group-law checks on the sampled pair: `(t₁t₂)·P = t₁·(t₂·P)`,
/// `t⁻¹·(t·P) = P`, the relations between `P` and `t·P`, and Kronecker
/// invariance.
fn group_checks(samples: &PairSamples, count: usize, seed: u64, tol: f64, rank_tol: f64) -> CliResult<GroupCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arc = samples.grid().arc();
    let (n, m) = (samples.n(), samples.m());
    let base = indices_constant_samples(samples, IndexKind::Kronecker, rank_tol)?.per_point;
    let scale = |p: &PairSamples| {
        (0..p.len())
            .map(|k| max_abs(p.a(k)).max(max_abs(p.b(k))))
            .fold(1.0, f64::max)
    };
    let diff = |p: &PairSamples, q: &PairSamples| {
        (0..p.len())
            .map(|k| max_abs(&(p.a(k) - q.a(k))).max(max_abs(&(p.b(k) - q.b(k)))))
            .fold(0.0, f64::max)
    };
    let (mut compat, mut inv, mut rel, mut invariant) = (0.0_f64, 0.0_f64, 0.0_f64, true);
    for _ in 0..count {
        let t1 = random::restricted_transform(&mut rng, n, m, arc);
        let t2 = random::restricted_transform(&mut rng, n, m, arc);
        let s1 = t1.sample(samples.grid())?;
        let s2 = t2.sample(samples.grid())?;
        let moved = s1.act(samples)?;
        let twice = s1.act(&s2.act(samples)?)?;
        let composed = s1.compose(&s2)?.act(samples)?;
        compat = compat.max(diff(&twice, &composed) / scale(&twice));
        inv = inv.max(diff(&s1.inverse()?.act(&moved)?, samples) / scale(samples));
        let r = equivalence_residual(&s1, samples, &moved)?;
        rel = rel.max(r.iter().map(|p| p.state.max(p.input)).fold(0.0, f64::max) / scale(&moved));
        let got = indices_constant_samples(&moved, IndexKind::Kronecker, rank_tol)?.per_point;
        invariant &= got.iter().zip(&base).all(|(x, y)| x.values == y.values);
    }
    Ok(GroupCheck {
        transforms: count,
        seed,
        max_compatibility_defect: compat,
        max_inverse_defect: inv,
        max_relation_residual: rel,
        kronecker_invariant: invariant,
        passed: compat <= tol && inv <= tol && rel <= tol && invariant,
    })
}

fn cmd_check(a: &CheckArgs) -> CliResult<Outcome> {
    positive("tol-residual", a.tol_residual)?;
    let samples = a.sys.samples()?;
    let conditions = check_conditions(&samples, a.sys.tolerances())?;
    let group = group_checks(&samples, a.samples, a.sys.seed, a.tol_residual, a.sys.tol_rank)?;
    let passed = conditions.all_passed() && group.passed;
    let report = json!({ "conditions": conditions, "group": group, "passed": passed });
    Ok(Outcome {
        files: vec![("check.json", io::to_json(&report))],
        primary: "check.json",
        summary: json!({
            "conditions_passed": conditions.all_passed(),
            "group_passed": group.passed,
            "passed": passed,
        }),
        passed,
    })
}

/// `a:b` ranges (inclusive) and comma lists.
pub fn parse_degrees(spec: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || format!("bad degree specification {part:?}");
        match part.split_once(':') {
            Some((lo, hi)) => {
                let lo: usize = lo.trim().parse().map_err(|_| bad())?;
                let hi: usize = hi.trim().parse().map_err(|_| bad())?;
                if lo > hi {
                    return Err(bad());
                }
                out.extend(lo..=hi);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() || out.contains(&0) {
        return Err(format!("degrees must be positive, got {spec:?}"));
    }
    Ok(out)
}

enum TargetSpec {
    SinCos,
    Poly(Vec<f64>),
}

impl TargetSpec {
    fn parse(s: &str) -> CliResult<Self> {
        if s == "sincos" {
            return Ok(TargetSpec::SinCos);
        }
        if let Some(rest) = s.strip_prefix("poly:") {
            let coeffs = rest
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| usage(format!("bad polynomial target {s:?}")))?;
            if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                return Err(usage(format!("bad polynomial target {s:?}")));
            }
            return Ok(TargetSpec::Poly(coeffs));
        }
        Err(usage(format!("unknown target {s:?} (use sincos or poly:c0,c1,...)")))
    }

    fn eval(&self, theta: f64) -> [f64; 2] {
        match self {
            TargetSpec::SinCos => oscillator::sincos(theta),
            TargetSpec::Poly(c) => {
                let v = c.iter().rev().fold(0.0, |acc, x| acc * theta + x);
                [v, v]
            }
        }
    }
}

fn cmd_oscillator(a: &OscillatorArgs) -> CliResult<Outcome> {
    positive("theta-star", a.theta_star)?;
    let degrees = parse_degrees(&a.degrees).map_err(usage)?;
    let target = TargetSpec::parse(&a.target)?;
    let lip = match (&target, a.lipschitz) {
        (_, Some(l)) => l,
        (TargetSpec::SinCos, None) => 1.0,
        (TargetSpec::Poly(_), None) => return Err(usage("poly: targets need --lipschitz")),
    };
    if !(lip >= 0.0 && lip.is_finite()) {
        return Err(usage(format!("--lipschitz must be non-negative, got {lip}")));
    }
    let probe = OscillatorEnsemble::new(&a.g, a.theta_star, a.k.unwrap_or(0.0)).map_err(|e| usage(e.to_string()))?;
    let grid = ParamGrid::uniform(probe.arc(), a.grid as usize)?;
    let ks = k_star(&probe, &grid)?;
    let k = match (a.k, a.auto_k) {
        (Some(k), None) => k,
        (None, Some(margin)) => {
            positive("auto-k", margin)?;
            ks.gain_with_margin(margin)
        }
        _ => return Err(usage("exactly one of --k and --auto-k is required")),
    };
    let ens = probe.with_gain(k)?;
    let f = |t: f64| target.eval(t);
    let (constants, rows) = oscillator::sweep(&ens, &f, lip, &degrees, &grid)?;
    let mut table = Table::new(["n", "measured_error", "bound"]);
    for r in &rows {
        table.push(vec![r.n.to_string(), num(r.measured_error), r.bound.map(num).unwrap_or_default()]);
    }
    let passed = rows.iter().all(|r| r.bound.is_none_or(|b| r.measured_error <= b));
    let top = *degrees.iter().max().expect("non-empty");
    let syn = oscillator::synthesize(&ens, &f, top, &grid)?;
    let report = json!({
        "g": a.g,
        "theta_star": a.theta_star,
        "k": k,
        "k_star": ks,
        "target": a.target,
        "lipschitz": lip,
        "constants": constants,
        "rows": rows,
        "p_degree": top,
        "z_range": [syn.z_min, syn.z_max],
        "p_coeffs": syn.p_coeffs(),
        "passed": passed,
    });
    Ok(Outcome {
        files: vec![("sweep.csv", table.to_csv()), ("report.json", io::to_json(&report))],
        primary: "sweep.csv",
        summary: json!({ "k": k, "k_star": ks.value, "rows": rows.len(), "passed": passed }),
        passed,
    })
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateJson {
    system: Option<io::SystemJson>,
    polynomial: Option<Vec<io::Entry>>,
    input: Option<Vec<Vec<io::Entry>>>,
    dt: Option<f64>,
    target: Option<TargetJson>,
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum TargetJson {
    Named(String),
    Samples(Vec<Vec<io::Entry>>),
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult<Outcome> {
    let text = io::read_text(&a.input).map_err(|e| usage(e.to_string()))?;
    let spec: SimulateJson = serde_json::from_str(&text).map_err(|e| usage(format!("simulate JSON: {e}")))?;
    let samples = match (&spec.system, a.sys.builtin.is_some() || a.sys.system.is_some()) {
        (Some(_), true) => return Err(usage("system given both in the input JSON and on the command line")),
        (Some(sj), false) => {
            let sys = sj.to_system().map_err(|e| usage(e.to_string()))?;
            let grid = a.sys.grid_for(&sys, &[])?;
            sys.sample(&grid)?
        }
        (None, _) => a.sys.samples()?,
    };
    let mode = match spec.dt {
        None => InputMode::Discrete,
        Some(dt) => {
            positive("dt", dt)?;
            InputMode::PiecewiseConstant { dt }
        }
    };
    let u = match (&spec.polynomial, &spec.input) {
        (Some(p), None) => {
            if samples.m() != 1 {
                return Err(usage("a polynomial input needs a single-input system"));
            }
            let coeffs: Vec<C64> = p.iter().map(|c| C64::new(c[0], c[1])).collect();
            simulate::poly_to_input(&coeffs)?.with_mode(mode)?
        }
        (None, Some(seq)) => InputSequence::new(
            seq.iter()
                .map(|u| CVec::from_iterator(u.len(), u.iter().map(|c| C64::new(c[0], c[1]))))
                .collect(),
            mode,
        )
        .map_err(|e| usage(e.to_string()))?,
        _ => return Err(usage("give exactly one of `polynomial` and `input`")),
    };
    if u.m() != samples.m() {
        return Err(usage(format!("input has {} channels, the system {}", u.m(), samples.m())));
    }
    let n = samples.n();
    let targets: Vec<CVec> = match &spec.target {
        None => vec![CVec::zeros(n); samples.len()],
        Some(TargetJson::Named(name)) if name == "sincos" && n == 2 => samples
            .grid()
            .points()
            .iter()
            .map(|&t| {
                let v = oscillator::sincos(t);
                CVec::from_vec(vec![re(v[0]), re(v[1])])
            })
            .collect(),
        Some(TargetJson::Named(name)) => return Err(usage(format!("unknown target {name:?} for n = {n}"))),
        Some(TargetJson::Samples(rows)) => {
            if rows.len() != samples.len() || rows.iter().any(|r| r.len() != n) {
                return Err(usage("target needs one n-vector per grid point"));
            }
            rows.iter()
                .map(|r| CVec::from_iterator(n, r.iter().map(|c| C64::new(c[0], c[1]))))
                .collect()
        }
    };
    let err = simulate::sup_error(&samples, &u, &targets)?;
    let mut header = vec!["theta".to_string()];
    header.extend(complex_header("x", n));
    header.push("deviation".into());
    let mut table = Table::new(header);
    for p in &err.points {
        let mut row = vec![num(p.theta)];
        row.extend(complex_cells(&p.state));
        row.push(num(p.deviation));
        table.push(row);
    }
    let passed = a.max_error.is_none_or(|m| err.value <= m);
    let summary = json!({
        "steps": u.len(),
        "mode": u.mode(),
        "sup_error": err.value,
        "witness": err.witness,
        "max_error": a.max_error,
        "passed": passed,
    });
    Ok(Outcome {
        files: vec![("states.csv", table.to_csv())],
        primary: "states.csv",
        summary,
        passed,
    })
}
