//! Command-line front end: reads a scenario, runs one pipeline and writes
//! its outputs plus a `manifest.json` under the output directory.
//!
//! Exit codes: 0 success, 2 invalid scenario, 3 audit failure, 4 solver
//! failure, 64 usage error, 66 unreadable config.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use kirchhoff_core::audit::{audit_branch, audit_p1, AuditReport};
use kirchhoff_core::continuation::{trace_branch, Branch};
use kirchhoff_core::elliptic::principal_eigenpair;
use kirchhoff_core::export::{audit_json, p1_json, write_branch_csv, write_diagram};
use kirchhoff_core::kirchhoff::{find_h_roots, has_sign_change, theorem_c_h_scan, theorem_c_solve};
use kirchhoff_core::scenarios::{reference_scenarios, Prepared};
use kirchhoff_core::{Error, ExecMode, Mesh1D, P1Solution, Regime, ScenarioConfig, TheoremCOutcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_AUDIT: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_NOINPUT: i32 = 66;

#[derive(Debug, Parser)]
#[command(name = "kirchhoff", version, about = "Continuation solver and verifier for a nonlocal Kirchhoff problem")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario JSON file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the scenario's `output_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Number of interior mesh nodes (overrides the scenario).
    #[arg(long, global = true)]
    pub mesh_n: Option<usize>,
    /// Sup norm of the first branch point (overrides the scenario).
    #[arg(long, global = true)]
    pub seed_eps: Option<f64>,
    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Principal eigenpair of the discrete Dirichlet Laplacian.
    Eigen,
    /// Trace the branch from the bifurcation point and audit it.
    Trace,
    /// Trace, then locate solutions of the nonlocal problem on the branch.
    SolveP1,
    /// Closed-form pipeline for r = p < 2, b = λ₁.
    TheoremC,
    /// Validate a scenario and run its full pipeline; without `--config`,
    /// every built-in reference scenario.
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Eigen => "eigen",
            Command::Trace => "trace",
            Command::SolveP1 => "solve-p1",
            Command::TheoremC => "theorem-c",
            Command::Validate => "validate",
        }
    }
}

/// A failed run: exit code plus message.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

fn solver(e: Error) -> Failure {
    match e {
        Error::Config(m) | Error::Regime(m) => Failure::new(EXIT_INVALID, m),
        other => Failure::new(EXIT_SOLVER, other.to_string()),
    }
}

fn io(e: impl std::fmt::Display) -> Failure {
    Failure::new(EXIT_SOLVER, format!("write failed: {e}"))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

/// Runs a parsed command. `Ok` carries 0 or a non-fatal nonzero code (audit
/// failures still write their outputs).
pub fn execute(cli: &Cli) -> Result<i32, Failure> {
    let config = load_config(cli)?;
    if cli.command == Command::Validate && config.is_none() {
        return validate_all(cli);
    }
    let config = match config {
        Some(c) => c,
        None if cli.command == Command::Eigen => apply_overrides(cli, ScenarioConfig::default()),
        None => return Err(Failure::new(EXIT_USAGE, format!("{} requires --config", cli.command.name()))),
    };
    let out_dir = cli.out.clone().unwrap_or_else(|| config.output_dir.clone());
    let mut run = Run::new(cli.command, &config, &out_dir)?;
    let code = match cli.command {
        Command::Eigen => eigen(&mut run, &config, cli.quiet)?,
        Command::Trace => trace(&mut run, &config, cli.quiet)?,
        Command::SolveP1 => solve_p1(&mut run, &config, cli.quiet)?,
        Command::TheoremC => theorem_c(&mut run, &config, cli.quiet)?,
        Command::Validate => validate_one(&mut run, &config, cli.quiet)?.code(),
    };
    run.finish()?;
    Ok(code)
}

fn load_config(cli: &Cli) -> Result<Option<ScenarioConfig>, Failure> {
    let Some(path) = &cli.config else { return Ok(None) };
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_NOINPUT, format!("cannot read {}: {e}", path.display())))?;
    let config = ScenarioConfig::from_json(&text)
        .map_err(|e| Failure::new(EXIT_INVALID, format!("invalid scenario {}: {e}", path.display())))?;
    Ok(Some(apply_overrides(cli, config)))
}

fn apply_overrides(cli: &Cli, mut config: ScenarioConfig) -> ScenarioConfig {
    if let Some(n) = cli.mesh_n {
        config.mesh_n = n;
    }
    if let Some(eps) = cli.seed_eps {
        config.continuation.seed_eps = eps;
    }
    config
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    config_sha256: String,
    mesh_n: usize,
    /// Number of solutions found, for commands that search for them.
    #[serde(skip_serializing_if = "Option::is_none")]
    roots: Option<usize>,
    files: Vec<String>,
    timings_ms: BTreeMap<String, u128>,
    timestamp: u64,
}

/// Output bookkeeping for one command.
struct Run {
    command: Command,
    out: PathBuf,
    config_sha256: String,
    mesh_n: usize,
    roots: Option<usize>,
    files: Vec<String>,
    timings: BTreeMap<String, u128>,
    clock: Instant,
}

impl Run {
    fn new(command: Command, config: &ScenarioConfig, out: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(out).map_err(io)?;
        Ok(Self {
            command,
            out: out.to_path_buf(),
            config_sha256: sha256_hex(config.to_json_pretty().as_bytes()),
            mesh_n: config.mesh_n,
            roots: None,
            files: Vec::new(),
            timings: BTreeMap::new(),
            clock: Instant::now(),
        })
    }

    fn lap(&mut self, stage: &str) {
        self.timings.insert(stage.to_owned(), self.clock.elapsed().as_millis());
        self.clock = Instant::now();
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<(), Error>) -> Result<(), Failure> {
        let path = self.out.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io)?;
        }
        let mut w = BufWriter::new(File::create(&path).map_err(io)?);
        f(&mut w).map_err(io)?;
        w.flush().map_err(io)?;
        self.files.push(name.to_owned());
        Ok(())
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<(), Failure> {
        self.write(name, |w| {
            w.write_all(text.as_bytes())?;
            w.write_all(b"\n")?;
            Ok(())
        })
    }

    fn finish(mut self) -> Result<(), Failure> {
        self.files.sort();
        let manifest = Manifest {
            tool: "kirchhoff",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: self.command.name(),
            config_sha256: self.config_sha256.clone(),
            mesh_n: self.mesh_n,
            roots: self.roots,
            files: self.files.clone(),
            timings_ms: self.timings.clone(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(io)?;
        fs::write(self.out.join("manifest.json"), text + "\n").map_err(io)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn say(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        println!("{}", msg.as_ref());
    }
}

fn eigen(run: &mut Run, config: &ScenarioConfig, quiet: bool) -> Result<i32, Failure> {
    let mesh = Mesh1D::new(config.mesh_n).map_err(|e| Failure::new(EXIT_INVALID, e.to_string()))?;
    let eig = principal_eigenpair(&mesh, config.tolerances.eig_tol).map_err(solver)?;
    run.lap("eigen");
    say(quiet, format!("lambda1_h = {:.17e}", eig.lambda1));
    say(quiet, format!("closed_form = {:.17e}", mesh.lambda1_closed_form()));
    run.write("phi1.csv", |w| eig.phi1.write_csv(&mesh, w))?;
    run.write_text("eigen.json", &format!("{{\n  \"n\": {},\n  \"lambda1\": {:.17e}\n}}", mesh.n(), eig.lambda1))?;
    Ok(EXIT_OK)
}

fn prepare(config: &ScenarioConfig) -> Result<Prepared, Failure> {
    Prepared::new(config.clone()).map_err(|e| match e {
        Error::Config(m) => Failure::new(EXIT_INVALID, m),
        other => Failure::new(EXIT_INVALID, other.to_string()),
    })
}

struct Traced {
    prep: Prepared,
    branch: Branch,
    audit: AuditReport,
}

fn trace_and_audit(run: &mut Run, config: &ScenarioConfig) -> Result<Traced, Failure> {
    let prep = prepare(config)?;
    run.lap("prepare");
    let branch = trace_branch(&prep.context(), &config.continuation, prep.window).map_err(solver)?;
    run.lap("trace");
    let audit = audit_branch(&prep.eig, &prep.mesh, &prep.params, &config.tolerances, &branch).map_err(solver)?;
    run.lap("audit");
    run.write("branch.csv", |w| write_branch_csv(&branch, w))?;
    run.write("diagram.dat", |w| write_diagram(&branch, w))?;
    Ok(Traced { prep, branch, audit })
}

fn branch_summary(quiet: bool, t: &Traced) {
    let b = &t.branch;
    say(
        quiet,
        format!(
            "branch: {} points, direction {:?}, folds {:?}, stop {:?}, lambda range {:?}",
            b.points.len(),
            b.direction,
            b.folds,
            b.stop_reason,
            b.lambda_range()
        ),
    );
    if b.is_empty() {
        eprintln!("warning: bifurcation point lies outside the lambda window; branch is empty");
    }
}

fn audit_code(report: &AuditReport) -> i32 {
    for c in report.failed_checks() {
        eprintln!("audit failure: {} [{}] value {} threshold {}", c.name, c.clause, c.value, c.threshold);
    }
    if report.passed() {
        EXIT_OK
    } else {
        EXIT_AUDIT
    }
}

fn trace(run: &mut Run, config: &ScenarioConfig, quiet: bool) -> Result<i32, Failure> {
    let t = trace_and_audit(run, config)?;
    branch_summary(quiet, &t);
    run.write_text("audit.json", &audit_json(&t.audit).map_err(io)?)?;
    if t.branch.stop_reason == kirchhoff_core::StopReason::SolverFailure {
        eprintln!("error: step size collapsed before the branch left the window");
        return Ok(EXIT_SOLVER);
    }
    Ok(audit_code(&t.audit))
}

fn declared_or_classified(prep: &Prepared) -> Option<Regime> {
    prep.config.regime.or_else(|| prep.config.validate(prep.eig.lambda1).regimes.first().copied())
}

fn write_solutions(run: &mut Run, prep: &Prepared, sols: &[P1Solution]) -> Result<(), Failure> {
    run.roots = Some(sols.len());
    let mut names = Vec::new();
    for (k, s) in sols.iter().enumerate() {
        let name = format!("u_{k}.csv");
        run.write(&name, |w| s.u.write_csv(&prep.mesh, w))?;
        names.push(name);
    }
    run.write_text("p1_solutions.json", &p1_json(sols, names).map_err(io)?)
}

fn solve_p1(run: &mut Run, config: &ScenarioConfig, quiet: bool) -> Result<i32, Failure> {
    let t = trace_and_audit(run, config)?;
    branch_summary(quiet, &t);
    let regime = declared_or_classified(&t.prep);
    let roots = find_h_roots(&t.prep.context(), &t.branch, &config.g, regime, ExecMode::default()).map_err(solver)?;
    run.lap("roots");
    let mut audit = t.audit.clone();
    for r in &roots {
        audit.extend(audit_p1(&t.prep.eig, &t.prep.mesh, &t.prep.params, &config.g, &config.tolerances, r).map_err(solver)?);
        say(
            quiet,
            format!(
                "root: lambda_star {:.12} gamma {:.12} |h| {:.2e} residual {:.2e}{}",
                r.lambda_star,
                r.gamma,
                r.h.abs(),
                r.residual_sup,
                if r.resolved { "" } else { " (unresolved)" }
            ),
        );
    }
    write_solutions(run, &t.prep, &roots)?;
    run.write_text("audit.json", &audit_json(&audit).map_err(io)?)?;
    if !roots.iter().any(|r| r.resolved) {
        eprintln!("error: no resolved zero of h on the traced branch");
        return Ok(EXIT_SOLVER);
    }
    Ok(audit_code(&audit))
}

#[derive(Serialize)]
struct TheoremCReport<'a> {
    lambda1: f64,
    range_text: String,
    #[serde(flatten)]
    outcome: &'a TheoremCOutcome,
    /// "Only if" check: does `h` change sign along `u_c` over the c-sweep?
    h_scan_sign_change: bool,
}

/// Amplitudes for the `h` scan along the vertical branch.
pub fn c_sweep() -> Vec<f64> {
    (0..=60).map(|k| 1e-3 * 10f64.powf(k as f64 / 10.0)).collect()
}

fn theorem_c(run: &mut Run, config: &ScenarioConfig, quiet: bool) -> Result<i32, Failure> {
    let prep = prepare(config)?;
    run.lap("prepare");
    let outcome = theorem_c_solve(&prep.mesh, &prep.eig, &prep.params, &config.g).map_err(solver)?;
    let scan = theorem_c_h_scan(&prep.mesh, &prep.eig, &prep.params, &config.g, &c_sweep(), ExecMode::default())
        .map_err(solver)?;
    run.lap("solve");
    let report = TheoremCReport {
        lambda1: prep.eig.lambda1,
        range_text: config.g.range().to_string(),
        outcome: &outcome,
        h_scan_sign_change: has_sign_change(&scan),
    };
    run.write_text("theorem_c.json", &serde_json::to_string_pretty(&report).map_err(io)?)?;
    match &outcome {
        TheoremCOutcome::Solved { solution, c, s_prime, degenerate } => {
            say(
                quiet,
                format!(
                    "solution: c {c:.12} s' {s_prime} gamma {:.12} residual {:.2e}{}",
                    solution.gamma,
                    solution.residual_sup,
                    if *degenerate { " (degenerate: constant g)" } else { "" }
                ),
            );
            run.write("u.csv", |w| solution.u.write_csv(&prep.mesh, w))?;
            let audit = audit_p1(&prep.eig, &prep.mesh, &prep.params, &config.g, &config.tolerances, solution)
                .map_err(solver)?;
            run.write_text("audit.json", &audit_json(&audit).map_err(io)?)?;
            Ok(audit_code(&audit))
        }
        TheoremCOutcome::NoSolution { range, target, near_boundary } => {
            if range.contains(*target) {
                say(quiet, format!("no positive solution: a/lambda1 = {target} is attained only at s' = 0 (u = 0)"));
            } else {
                say(quiet, format!("no solution: a/lambda1 = {target} is not in R[g] = {range}"));
            }
            if *near_boundary {
                eprintln!("warning: a/lambda1 is within rounding of the boundary of R[g]");
            }
            Ok(EXIT_OK)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioSummary {
    pub name: String,
    pub regimes: Vec<Regime>,
    pub points: usize,
    pub stop_reason: String,
    pub roots: usize,
    pub audit_failures: usize,
    pub exit_code: i32,
    pub message: Option<String>,
}

impl ScenarioSummary {
    fn code(&self) -> i32 {
        self.exit_code
    }
}

/// Full pipeline on one scenario: validation, trace, branch audit, roots
/// with their audits, and the closed-form path when the scenario is in the
/// Theorem C regime.
fn validate_one(run: &mut Run, config: &ScenarioConfig, quiet: bool) -> Result<ScenarioSummary, Failure> {
    let name = config.name.clone().unwrap_or_else(|| "scenario".to_owned());
    let t = trace_and_audit(run, config)?;
    let outcome = t.prep.config.validate(t.prep.eig.lambda1);
    let regime = declared_or_classified(&t.prep);
    let roots = find_h_roots(&t.prep.context(), &t.branch, &config.g, regime, ExecMode::Sequential).map_err(solver)?;
    run.lap("roots");
    let mut audit = t.audit.clone();
    for r in &roots {
        audit.extend(audit_p1(&t.prep.eig, &t.prep.mesh, &t.prep.params, &config.g, &config.tolerances, r).map_err(solver)?);
    }
    if outcome.regimes.contains(&Regime::C) {
        if let TheoremCOutcome::Solved { solution, .. } =
            theorem_c_solve(&t.prep.mesh, &t.prep.eig, &t.prep.params, &config.g).map_err(solver)?
        {
            audit.extend(
                audit_p1(&t.prep.eig, &t.prep.mesh, &t.prep.params, &config.g, &config.tolerances, &solution)
                    .map_err(solver)?,
            );
        }
    }
    write_solutions(run, &t.prep, &roots)?;
    run.write_text("audit.json", &audit_json(&audit).map_err(io)?)?;
    let mut code = audit_code(&audit);
    if code == EXIT_OK && t.branch.stop_reason == kirchhoff_core::StopReason::SolverFailure {
        code = EXIT_SOLVER;
    }
    let summary = ScenarioSummary {
        name,
        regimes: outcome.regimes,
        points: t.branch.points.len(),
        stop_reason: format!("{:?}", t.branch.stop_reason),
        roots: roots.len(),
        audit_failures: audit.failures(),
        exit_code: code,
        message: None,
    };
    say(
        quiet,
        format!(
            "{}: {} points, {} roots, {} audit failures",
            summary.name, summary.points, summary.roots, summary.audit_failures
        ),
    );
    run.write_text("validate.json", &serde_json::to_string_pretty(&summary).map_err(io)?)?;
    Ok(summary)
}

/// Runs every reference scenario concurrently, each into its own
/// subdirectory, and writes `validate.json` with one summary per scenario.
fn validate_all(cli: &Cli) -> Result<i32, Failure> {
    let root = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let configs: Vec<ScenarioConfig> = reference_scenarios().into_iter().map(|c| apply_overrides(cli, c)).collect();
    let summaries = ExecMode::default().map(&configs, |config| {
        let name = config.name.clone().unwrap_or_default();
        let dir = root.join(&name);
        let result = Run::new(Command::Validate, config, &dir).and_then(|mut run| {
            let s = validate_one(&mut run, config, true)?;
            run.finish()?;
            Ok(s)
        });
        result.unwrap_or_else(|f| ScenarioSummary {
            name,
            regimes: Vec::new(),
            points: 0,
            stop_reason: String::new(),
            roots: 0,
            audit_failures: 0,
            exit_code: f.code,
            message: Some(f.message),
        })
    });
    let mut run = Run {
        command: Command::Validate,
        out: root.clone(),
        config_sha256: sha256_hex(
            serde_json::to_string(&configs).map_err(io)?.as_bytes(),
        ),
        mesh_n: configs.first().map(|c| c.mesh_n).unwrap_or(0),
        roots: None,
        files: Vec::new(),
        timings: BTreeMap::new(),
        clock: Instant::now(),
    };
    fs::create_dir_all(&root).map_err(io)?;
    for s in &summaries {
        say(
            cli.quiet,
            format!(
                "{:<24} exit {} points {:>5} roots {} audit failures {}{}",
                s.name,
                s.exit_code,
                s.points,
                s.roots,
                s.audit_failures,
                s.message.as_deref().map(|m| format!(" ({m})")).unwrap_or_default()
            ),
        );
    }
    run.write_text("validate.json", &serde_json::to_string_pretty(&summaries).map_err(io)?)?;
    run.lap("validate");
    run.finish()?;
    Ok(summaries.iter().map(|s| s.exit_code).max().unwrap_or(EXIT_OK))
}
