//! Command-line front end: argument parsing, config files and output
//! formatting around the `designforge` library.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use designforge::design::{build_design, enumerate_design_moment, DesignSpec, DESK_PLAN};
use designforge::expanders::{build_expander, permutation_graph, GraphManifest};
use designforge::linalg::GroupTag;
use designforge::verify::{self, CheckReport, SMALL_PLAN};
use designforge::walks::Cascade;
use designforge::{Caps, Error};

/// Exit code for a completed run whose checks all passed.
pub const EXIT_PASS: i32 = 0;
/// Exit code for a completed run with a failing check.
pub const EXIT_FAIL: i32 = 1;
/// Exit code for bad invocations and rejected parameters.
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "designforge", version, about = "Explicit approximate k-designs and their verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,

    /// Worker threads. Results do not depend on this.
    #[arg(long, default_value_t = 1, global = true)]
    pub workers: usize,

    /// `key=value` file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Cap overrides such as `dense_dim=8192,enumeration=1048576`, applied
    /// after DESIGNFORGE_CAPS.
    #[arg(long, global = true)]
    pub caps: Option<String>,

    /// Write the output here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Include wall-clock runtimes in reports.
    #[arg(long, global = true)]
    pub timings: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compile one seed into a circuit.
    Sample(SampleArgs),
    /// Build a design and print its summary and cascade manifest.
    Build(DesignArgs),
    /// Exhaustively evaluate a small design.
    Enumerate(EnumerateArgs),
    /// Run named checks.
    Verify(VerifyArgs),
    /// Certify a seeded expander, from a manifest or from parameters.
    ExpanderCert(ExpanderArgs),
    /// Gap of the simple 3-bit permutations.
    PermGap(PermArgs),
}

#[derive(Args, Debug, Clone)]
pub struct DesignArgs {
    #[arg(long, default_value = "SO")]
    pub group: GroupTag,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Number of cascade stages to build (at most 2).
    #[arg(long, default_value_t = 2)]
    pub stages: usize,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub design: DesignArgs,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct EnumerateArgs {
    #[command(flatten)]
    pub design: DesignArgs,
    /// Moment degree to evaluate; defaults to `k`.
    #[arg(long)]
    pub k_eval: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum CheckName {
    Kappa,
    Reptheory,
    Trace,
    Projs,
    Tau,
    Perm,
    Contraction,
    Cascade,
    Explicit,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Checks to run, in the order given.
    #[arg(long, value_enum, required = true, num_args = 1..)]
    pub check: Vec<CheckName>,
    #[arg(long = "D", default_value_t = 64)]
    pub d: usize,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value = "SO")]
    pub group: GroupTag,
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    /// Qubits, for `perm` and `contraction`.
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Monte-Carlo samples; defaults to the `mc_samples` cap.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub instances: usize,
    #[arg(long, default_value_t = 100)]
    pub families: usize,
    /// Matrix size of the random contraction families.
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    /// Alphabet size of the small cascade used by `cascade` and `explicit`.
    #[arg(long, default_value_t = 4)]
    pub c: usize,
    /// Stages of the desk design whose graphs `contraction` checks.
    #[arg(long, default_value_t = 2)]
    pub stages: usize,
}

#[derive(Args, Debug)]
pub struct ExpanderArgs {
    /// Graph manifest (JSON) to regenerate and recertify.
    #[arg(long, conflicts_with_all = ["n", "d", "mu_target"])]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub mu_target: Option<f64>,
}

#[derive(Args, Debug)]
pub struct PermArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
}

/// What a run produced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Io(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Lib(
                Error::Construction { .. } | Error::Convergence { .. } | Error::NumericalRank(_) | Error::Symmetry(_),
            ) => EXIT_FAIL,
            _ => EXIT_USAGE,
        }
    }

    fn to_json(&self) -> String {
        let (code, message) = match self {
            Failure::Usage(m) => ("usage", m.clone()),
            Failure::Io(m) => ("io", m.clone()),
            Failure::Lib(e) => (e.code(), e.to_string()),
        };
        json!({ "schema": 1, "error": { "code": code, "message": message } }).to_string()
    }
}

/// Lines of a `key=value` config file, `#` starting a comment.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("config line {}: expected key=value", no + 1))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(format!("config line {}: empty key", no + 1));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Appends config entries as flags unless the flag is already present.
fn merge_config(argv: &[String]) -> Result<Vec<String>, Failure> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate() {
        if a == "--config" {
            path = argv.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(argv.to_vec()) };
    let text = std::fs::read_to_string(&path).map_err(|e| Failure::Io(format!("reading {path}: {e}")))?;
    let entries = parse_config(&text).map_err(Failure::Usage)?;
    let present: BTreeSet<String> = argv
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();
    let mut out = argv.to_vec();
    for (key, value) in entries {
        if key == "config" || present.contains(&key) {
            continue;
        }
        if key == "check" {
            out.push("--check".into());
            out.extend(value.split(',').map(|s| s.trim().to_string()));
        } else if value == "true" {
            out.push(format!("--{key}"));
        } else {
            out.push(format!("--{key}={value}"));
        }
    }
    Ok(out)
}

fn design(args: &DesignArgs, caps: &Caps) -> Result<DesignSpec, Failure> {
    if args.stages > DESK_PLAN.len() {
        return Err(Failure::Usage(format!("at most {} stages are available", DESK_PLAN.len())));
    }
    Ok(build_design(args.group, args.n, args.k, args.eps, args.delta, &DESK_PLAN[..args.stages], caps)?)
}

/// Output documents and whether every check passed.
struct Produced {
    docs: Vec<Value>,
    pass: bool,
}

fn report_value(r: CheckReport) -> Value {
    serde_json::to_value(r).expect("reports serialize")
}

fn run_check(name: CheckName, a: &VerifyArgs, caps: &Caps) -> Result<Vec<CheckReport>, Failure> {
    let trials = a.trials.unwrap_or(caps.mc_samples);
    let one = |r: designforge::Result<CheckReport>| -> Result<Vec<CheckReport>, Failure> { Ok(vec![r?]) };
    match name {
        CheckName::Kappa => one(verify::check_kappa_gram(a.d, a.k, caps)),
        CheckName::Reptheory => one(verify::check_reptheory_coeffs(a.group, a.m, trials, a.seed, caps)),
        CheckName::Trace => one(verify::check_trace_lemma(a.group, a.m, trials, a.seed)),
        CheckName::Projs => one(verify::check_projector_lemma(a.instances, a.seed)),
        CheckName::Tau => one(verify::check_tau_bounds(a.group, a.m, a.k, caps)),
        CheckName::Perm => one(verify::check_perm_gap(a.n, a.k, caps)),
        CheckName::Contraction => {
            let args = DesignArgs { group: a.group, n: 4, k: 1, eps: 0.1, delta: None, stages: a.stages };
            let spec = design(&args, caps)?;
            spec.cascade
                .graphs
                .iter()
                .map(|g| Ok(verify::check_contraction(g, a.families, a.dim, a.seed)?))
                .collect()
        }
        CheckName::Cascade => {
            let cascade = Cascade::build(a.c, &SMALL_PLAN, caps)?;
            one(verify::check_cascade_contraction(&cascade, a.families, a.dim, a.seed))
        }
        CheckName::Explicit => {
            let cascade = Cascade::build(a.c, &SMALL_PLAN, caps)?;
            one(verify::check_explicitness(&cascade))
        }
    }
}

fn execute(cli: &Cli, caps: &Caps) -> Result<Produced, Failure> {
    let timed = |r: CheckReport, start: Instant| if cli.timings { r.timed(start) } else { r };
    match &cli.command {
        Command::Sample(a) => {
            let spec = design(&a.design, caps)?;
            let circuit = spec.sample_circuit(spec.seed(a.seed)?)?;
            let mut v = serde_json::to_value(circuit.to_json_value()).expect("circuit serializes");
            if let Value::Object(m) = &mut v {
                m.insert("seed".into(), json!(a.seed));
                m.insert("seed_bits".into(), json!(spec.seed_bits()));
            }
            Ok(Produced { docs: vec![v], pass: true })
        }
        Command::Build(a) => {
            let spec = design(a, caps)?;
            let v = serde_json::to_value(spec.summary()?).expect("summary serializes");
            Ok(Produced { docs: vec![v], pass: true })
        }
        Command::Enumerate(a) => {
            let spec = design(&a.design, caps)?;
            let report = enumerate_design_moment(&spec, a.k_eval.unwrap_or(a.design.k), caps)?;
            let pass = report.design_error_op <= report.f_bound + 1e-9;
            let mut v = serde_json::to_value(&report).expect("report serializes");
            if let Value::Object(m) = &mut v {
                m.insert("pass".into(), json!(pass));
            }
            Ok(Produced { docs: vec![v], pass })
        }
        Command::Verify(a) => {
            let mut docs = Vec::new();
            let mut pass = true;
            for &name in &a.check {
                let start = Instant::now();
                for r in run_check(name, a, caps)? {
                    pass &= r.pass;
                    docs.push(report_value(timed(r, start)));
                }
            }
            Ok(Produced { docs, pass })
        }
        Command::ExpanderCert(a) => {
            let (manifest, claimed) = match (&a.manifest, a.n, a.d, a.mu_target) {
                (Some(path), ..) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| Failure::Io(format!("reading {}: {e}", path.display())))?;
                    let m: GraphManifest =
                        serde_json::from_str(&text).map_err(|e| Failure::Lib(Error::Parse(e.to_string())))?;
                    let claimed = Some(m.mu_certified);
                    (m, claimed)
                }
                (None, Some(n), Some(d), Some(target)) => {
                    let g = build_expander(n, d, target, caps)?;
                    (g.manifest().expect("built expanders carry a manifest"), None)
                }
                _ => return Err(Failure::Usage("give --manifest, or all of --n, --d and --mu-target".into())),
            };
            let mut g = permutation_graph(manifest.n, manifest.d, manifest.seed)?;
            let cert = g.certify(caps)?;
            let pass = claimed.is_none_or(|c| (c - cert.mu()).abs() <= 1e-8);
            let v = json!({
                "schema": 1,
                "n": manifest.n,
                "d": manifest.d,
                "seed": manifest.seed,
                "lambda_min": cert.lambda_min,
                "lambda_max": cert.lambda_max,
                "mu": cert.mu(),
                "mu_claimed": claimed,
                "pass": pass,
            });
            Ok(Produced { docs: vec![v], pass })
        }
        Command::PermGap(a) => {
            let start = Instant::now();
            let r = verify::check_perm_gap(a.n, a.k, caps)?;
            let pass = r.pass;
            Ok(Produced { docs: vec![report_value(timed(r, start))], pass })
        }
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        other => out.push((prefix.to_string(), scalar(other))),
    }
}

fn is_report(v: &Value) -> bool {
    v.get("measured").is_some() && v.get("paper_bound").is_some()
}

/// Human-readable rendering: one row per report, or key/value pairs.
pub fn render_table(docs: &[Value]) -> String {
    let mut out = String::new();
    if !docs.is_empty() && docs.iter().all(is_report) {
        out.push_str(&format!("{:<12} {:<5} {:>14} {:>14} {:>10}  parameters\n", "check", "pass", "measured", "bound", "tol"));
        for d in docs {
            let params = d.get("parameters").map(|p| p.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{:<12} {:<5} {:>14.6e} {:>14.6e} {:>10.2e}  {}\n",
                scalar(&d["name"]),
                scalar(&d["pass"]),
                d["measured"].as_f64().unwrap_or(f64::NAN),
                d["paper_bound"].as_f64().unwrap_or(f64::NAN),
                d["tolerance"].as_f64().unwrap_or(f64::NAN),
                params
            ));
        }
        return out;
    }
    for d in docs {
        let mut rows = Vec::new();
        flatten("", d, &mut rows);
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in rows {
            out.push_str(&format!("{k:<width$}  {v}\n"));
        }
    }
    out
}

fn render(docs: &[Value], format: Format) -> String {
    match format {
        Format::Json => docs.iter().map(|d| format!("{d}\n")).collect(),
        Format::Table => render_table(docs),
    }
}

fn caps_for(cli: &Cli) -> Result<Caps, Failure> {
    let caps = Caps::from_env()?;
    Ok(match &cli.caps {
        Some(spec) => caps.with_overrides(spec)?,
        None => caps,
    })
}

/// Runs one invocation; `argv[0]` is the program name.
pub fn run(argv: &[String]) -> Outcome {
    let fail = |f: Failure| Outcome { code: f.code(), stdout: String::new(), stderr: f.to_json() + "\n" };
    let argv = match merge_config(argv) {
        Ok(a) => a,
        Err(f) => return fail(f),
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                return Outcome { code: EXIT_PASS, stdout: e.to_string(), stderr: String::new() };
            }
            return fail(Failure::Usage(e.to_string().trim_end().to_string()));
        }
    };
    if cli.workers == 0 {
        return fail(Failure::Usage("--workers must be at least 1".into()));
    }
    // A global pool can only be installed once per process; later runs reuse it.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global();
    let caps = match caps_for(&cli) {
        Ok(c) => c,
        Err(f) => return fail(f),
    };
    let produced = match execute(&cli, &caps) {
        Ok(p) => p,
        Err(f) => return fail(f),
    };
    let text = render(&produced.docs, cli.format);
    let code = if produced.pass { EXIT_PASS } else { EXIT_FAIL };
    match &cli.output {
        Some(path) => match std::fs::write(path, &text) {
            Ok(()) => Outcome { code, stdout: String::new(), stderr: String::new() },
            Err(e) => fail(Failure::Io(format!("writing {}: {e}", path.display()))),
        },
        None => Outcome { code, stdout: text, stderr: String::new() },
    }
}

/// Serializes parsed design flags back into `key=value` config lines.
pub fn design_config(args: &DesignArgs) -> String {
    let mut m = Map::new();
    m.insert("group".into(), json!(args.group.name()));
    m.insert("n".into(), json!(args.n));
    m.insert("k".into(), json!(args.k));
    m.insert("eps".into(), json!(args.eps));
    if let Some(d) = args.delta {
        m.insert("delta".into(), json!(d));
    }
    m.insert("stages".into(), json!(args.stages));
    m.iter().map(|(k, v)| format!("{k}={}\n", scalar(v))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        std::iter::once("designforge").chain(s.split_whitespace()).map(String::from).collect()
    }

    #[test]
    fn config_lines_parse() {
        let c = parse_config("# comment\ngroup = SU\n\nmu_target=0.5 # trailing\n").unwrap();
        assert_eq!(c, vec![("group".into(), "SU".into()), ("mu-target".into(), "0.5".into())]);
        assert!(parse_config("novalue").is_err());
    }

    #[test]
    fn usage_errors_exit_two() {
        let out = run(&argv("frobnicate"));
        assert_eq!(out.code, EXIT_USAGE);
        let v: Value = serde_json::from_str(out.stderr.trim()).unwrap();
        assert_eq!(v["error"]["code"], "usage");
        assert_eq!(run(&argv("verify")).code, EXIT_USAGE);
    }

    #[test]
    fn library_errors_carry_codes() {
        let out = run(&argv("verify --check kappa --D 64 --k 7"));
        assert_eq!(out.code, EXIT_USAGE);
        let v: Value = serde_json::from_str(out.stderr.trim()).unwrap();
        assert_eq!(v["error"]["code"], "precondition");
    }

    #[test]
    fn kappa_runs() {
        let out = run(&argv("verify --check kappa --D 64 --k 3"));
        assert_eq!(out.code, EXIT_PASS, "{}", out.stderr);
        let v: Value = serde_json::from_str(out.stdout.trim()).unwrap();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["details"]["exact_equality"], true);
    }

    #[test]
    fn table_format() {
        let out = run(&argv("perm-gap --n 3 --k 1 --format table"));
        assert_eq!(out.code, EXIT_PASS);
        assert!(out.stdout.starts_with("check"));
        assert!(out.stdout.contains("perm"));
    }

    #[test]
    fn design_flags_roundtrip_through_config() {
        let args = DesignArgs { group: GroupTag::SU, n: 5, k: 2, eps: 0.25, delta: Some(0.0625), stages: 1 };
        let text = design_config(&args);
        let mut line = vec!["designforge".to_string(), "build".to_string()];
        for (k, v) in parse_config(&text).unwrap() {
            line.push(format!("--{k}={v}"));
        }
        let Command::Build(back) = Cli::try_parse_from(&line).unwrap().command else { panic!("wrong subcommand") };
        assert_eq!(design_config(&back), text);
    }
}
