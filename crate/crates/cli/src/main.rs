use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use uldp_core::dataset::{census_schema, encode, write_synthetic_csv, Criterion, Schema};
use uldp_core::mechanism::UldpViolation;
use uldp_core::sim::{worst_case_sweep, write_beta_csv, write_result_csv};
use uldp_core::sweep::{sparse_weights, write_sweep_csv};
use uldp_core::*;

#[derive(Parser)]
#[command(name = "uldp-lab", version, about = "Utility-optimized LDP mechanisms and their optimal tradeoff")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the optimal tradeoff and print the saddle point as JSON.
    Put(PutArgs),
    /// Solve across a log-spaced range of budgets and write CSV.
    Sweep(SweepArgs),
    /// Monte-Carlo check of the uBD scheme against its exact error.
    Simulate(SimulateArgs),
    /// Encode a categorical CSV into the alphabet and report `(w, v)`.
    Encode(EncodeArgs),
    /// Check a mechanism or block design JSON file.
    Validate(ValidateArgs),
    /// Write a dense uBD mechanism as JSON.
    Export(ExportArgs),
    /// Write a synthetic census-style CSV.
    Synth(SynthArgs),
    /// Print a bundled dataset schema as JSON.
    Schema(SchemaArgs),
}

#[derive(Args)]
struct Shape {
    /// Alphabet size.
    #[arg(long)]
    w: usize,
    /// Number of sensitive symbols.
    #[arg(long)]
    v: usize,
}

#[derive(Args)]
struct PutArgs {
    #[command(flatten)]
    shape: Shape,
    #[arg(long)]
    eps: f64,
    /// Skip the closed form and run the numerical solver.
    #[arg(long)]
    numerical: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    shape: Shape,
    #[arg(long, default_value_t = 0.1)]
    eps_min: f64,
    #[arg(long, default_value_t = 10.0)]
    eps_max: f64,
    #[arg(long, default_value_t = 30)]
    points: usize,
    #[arg(long)]
    workers: Option<usize>,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    /// Samples each output class directly; works at any size.
    Streaming,
    /// Materialises the full channel matrix.
    Dense,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, required_unless_present = "dataset")]
    w: Option<usize>,
    #[arg(long, required_unless_present = "dataset")]
    v: Option<usize>,
    #[arg(long)]
    eps: f64,
    /// Mechanism parameters: a JSON file or inline `{"alpha": .., "t": ..}`.
    /// The saddle point is used when absent.
    #[arg(long)]
    params: Option<String>,
    /// Draw clients from this CSV's empirical distribution.
    #[arg(long, requires = "schema")]
    dataset: Option<PathBuf>,
    /// Schema JSON file, or `stringent` / `permissive` for the bundled one.
    #[arg(long)]
    schema: Option<String>,
    /// Simulate at `P^(β)` instead of `P^(α)`.
    #[arg(long, conflicts_with_all = ["dataset", "betas"])]
    beta: Option<f64>,
    /// Comma-separated `β` values; writes a worst-case profile instead.
    #[arg(long, value_delimiter = ',', conflicts_with = "dataset")]
    betas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 50_000)]
    n: u64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, env = "ULDP_LAB_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = Backend::Streaming)]
    backend: Backend,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Schema JSON file, or `stringent` / `permissive` for the bundled one.
    #[arg(long)]
    schema: String,
    /// Where to write the symbol mapping.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Mechanism or block design JSON.
    input: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    shape: Shape,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    params: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 50_000)]
    rows: usize,
    #[arg(long, env = "ULDP_LAB_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SchemaArgs {
    #[arg(value_enum)]
    criterion: CriterionArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    Stringent,
    Permissive,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Put(a) => put(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Simulate(a) => simulate(a),
        Command::Encode(a) => encode_cmd(a),
        Command::Validate(a) => validate(a),
        Command::Export(a) => export(a),
        Command::Synth(a) => synth(a),
        Command::Schema(a) => schema_cmd(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// A closed downstream pipe (`| head`) is not an error.
fn broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        let io = c.downcast_ref::<io::Error>().or(match c.downcast_ref::<UldpError>() {
            Some(UldpError::Io(io)) => Some(io),
            _ => None,
        });
        io.is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
    })
}

fn say(text: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "{text}")?;
    out.flush()?;
    Ok(())
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn workers(n: Option<usize>) -> usize {
    n.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

fn put(a: PutArgs) -> Result<bool> {
    let problem = Problem::new(a.shape.w, a.shape.v, a.eps)?;
    let sol = if a.numerical {
        problem.saddle_solve()?
    } else {
        problem.solve()?
    };
    let mut doc = json!({ "w": a.shape.w, "v": a.shape.v, "epsilon": a.eps });
    if let (Value::Object(d), Value::Object(s)) = (&mut doc, serde_json::to_value(&sol)?) {
        d.extend(s);
    }
    say(&serde_json::to_string_pretty(&doc)?)?;
    Ok(true)
}

fn sweep_cmd(a: SweepArgs) -> Result<bool> {
    let (w, v) = (a.shape.w, a.shape.v);
    let rows = sweep(w, v, a.eps_min, a.eps_max, a.points, workers(a.workers))?;
    let meta = format!(
        "w={w} v={v} eps_min={} eps_max={} points={}",
        a.eps_min, a.eps_max, a.points
    );
    let mut out = output(a.out.as_deref())?;
    write_sweep_csv(&mut out, &meta, &rows)?;
    out.flush()?;

    // soft checks: reported, never fatal
    if let Ok(th) = Problem::new(w, v, a.eps_min)?.thresholds() {
        for r in &rows {
            let inside = r.epsilon > th.eps_low && r.epsilon < th.eps_high;
            if inside && r.t_star.iter().skip(2).any(|&x| x > 0.0) {
                eprintln!(
                    "note: eps={} has t* = {} outside block sizes {{1, 2}}",
                    r.epsilon,
                    sparse_weights(&r.t_star)
                );
            }
        }
    }
    for p in rows.windows(2) {
        if p[1].m_star > p[0].m_star * (1.0 + 1e-9) {
            eprintln!(
                "note: m_star increases from eps={} to eps={}",
                p[0].epsilon, p[1].epsilon
            );
        }
    }
    Ok(true)
}

/// `α` and `t` from a JSON file or inline object. `t` is an array of length
/// `v` or a sparse `"k:weight;..."` string.
fn read_params(spec: &str, v: usize) -> Result<(f64, Mixture)> {
    let text = if spec.trim_start().starts_with('{') {
        spec.to_string()
    } else {
        std::fs::read_to_string(spec).with_context(|| format!("cannot read {spec}"))?
    };
    let doc: Value = serde_json::from_str(&text).context("parameters are not valid JSON")?;
    let alpha = doc["alpha"].as_f64().context("parameters need a numeric \"alpha\"")?;
    let t = match &doc["t"] {
        Value::Array(xs) => xs
            .iter()
            .map(|x| x.as_f64().context("\"t\" entries must be numbers"))
            .collect::<Result<Vec<_>>>()?,
        Value::String(s) => parse_sparse(s, v)?,
        _ => bail!("parameters need \"t\" as an array or a \"k:weight\" string"),
    };
    if t.len() != v {
        bail!("\"t\" has {} entries, expected v = {v}", t.len());
    }
    Ok((alpha, Mixture::new(t)?))
}

fn parse_sparse(s: &str, v: usize) -> Result<Vec<f64>> {
    let mut t = vec![0.0; v];
    for pair in s.split(';').filter(|p| !p.trim().is_empty()) {
        let (k, x) = pair.split_once(':').context("expected k:weight")?;
        let k: usize = k.trim().parse().context("block size must be an integer")?;
        if k == 0 || k > v {
            bail!("block size {k} not in 1..={v}");
        }
        t[k - 1] = x.trim().parse().context("weight must be a number")?;
    }
    Ok(t)
}

fn resolve_params(params: Option<&str>, w: usize, v: usize, eps: f64) -> Result<(f64, Mixture)> {
    match params {
        Some(p) => read_params(p, v),
        None => {
            let sol = Problem::new(w, v, eps)?.solve()?;
            Ok((sol.alpha_star, Mixture::new(sol.t_star)?))
        }
    }
}

fn load_schema(spec: &str) -> Result<Schema> {
    match spec {
        "stringent" => Ok(census_schema(Criterion::Stringent)),
        "permissive" => Ok(census_schema(Criterion::Permissive)),
        path => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {path}"))?;
            Ok(Schema::from_json(&text)?)
        }
    }
}

fn simulate(a: SimulateArgs) -> Result<bool> {
    let (w, v, p, source) = match &a.dataset {
        Some(path) => {
            let schema = load_schema(a.schema.as_deref().unwrap_or_default())?;
            let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
            let enc = encode(file, &schema)?;
            eprintln!("encoded {} records: w = {}, v = {}", enc.n, enc.w, enc.v);
            (enc.w, enc.v, Some(enc.distribution()?), format!("dataset={}", path.display()))
        }
        None => (a.w.unwrap_or(0), a.v.unwrap_or(0), None, String::new()),
    };
    let part = Partition::new(w, v)?;
    let (alpha, t) = resolve_params(a.params.as_deref(), w, v, a.eps)?;
    let m = match a.backend {
        Backend::Streaming => ubd_streaming(&part, a.eps, &t)?,
        Backend::Dense => ubd_mechanism(&part, a.eps, &t, None)?,
    };
    let table = EstimatorTable::for_mechanism(&m, alpha)?;
    let cfg = SimConfig { n: a.n, trials: a.trials, seed: a.seed, workers: workers(a.workers) };
    let backend = match a.backend {
        Backend::Streaming => "streaming",
        Backend::Dense => "dense",
    };
    let mut meta = format!(
        "w={w} v={v} eps={} alpha={alpha} t={} n={} trials={} seed={} backend={backend}",
        a.eps,
        sparse_weights(t.as_slice()),
        a.n,
        a.trials,
        a.seed
    );
    let mut out = output(a.out.as_deref())?;
    if let Some(betas) = &a.betas {
        let points = worst_case_sweep(&m, &table, betas, &cfg)?;
        write_beta_csv(&mut out, &meta, &points)?;
    } else {
        let p = match (p, a.beta) {
            (Some(p), _) => {
                meta.push(' ');
                meta.push_str(&source);
                p
            }
            (None, Some(beta)) => {
                meta.push_str(&format!(" beta={beta}"));
                p_alpha(&part, beta)?
            }
            (None, None) => p_alpha(&part, alpha)?,
        };
        let r = run_trials(&m, &table, &p, &cfg)?;
        write_result_csv(&mut out, &meta, &r)?;
        if a.out.is_some() {
            eprintln!(
                "mean n*MSE = {} +/- {} (exact {})",
                r.mean_scaled_mse, r.stderr, r.theory
            );
        }
    }
    out.flush()?;
    Ok(true)
}

fn encode_cmd(a: EncodeArgs) -> Result<bool> {
    let schema = load_schema(&a.schema)?;
    let file = File::open(&a.dataset).with_context(|| format!("cannot open {}", a.dataset.display()))?;
    let enc = encode(file, &schema)?;
    if let Some(path) = &a.out {
        std::fs::write(path, enc.mapping_json()?)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    let report = json!({
        "raw_codes": enc.raw_codes,
        "w": enc.w,
        "v": enc.v,
        "n": enc.n,
        "distribution": enc.distribution()?.as_slice(),
    });
    say(&serde_json::to_string_pretty(&report)?)?;
    Ok(true)
}

fn validate(a: ValidateArgs) -> Result<bool> {
    let text = std::fs::read_to_string(&a.input)
        .with_context(|| format!("cannot read {}", a.input.display()))?;
    let doc: Value = serde_json::from_str(&text).context("not valid JSON")?;
    if doc.get("edges").is_some() {
        return validate_design_doc(&doc);
    }
    let m = Mechanism::from_json(&text)?;
    match validate_uldp(&m) {
        UldpReport::Valid => {
            say(&format!("pass: mechanism satisfies {}-ULDP on w = {}, v = {}", m.epsilon(), m.w(), m.v()))?;
            Ok(true)
        }
        UldpReport::Invalid(why) => {
            say(&format!("fail: {why}"))?;
            if let UldpViolation::Ratio { y, x, x_prime, .. } = &why {
                say(&format!("witness: x = {}, x' = {}, y = {y}", x + 1, x_prime + 1))?;
            }
            Ok(false)
        }
    }
}

fn validate_design_doc(doc: &Value) -> Result<bool> {
    let v = doc["v"].as_u64().context("design needs an integer \"v\"")? as usize;
    let edges = doc["edges"]
        .as_array()
        .context("\"edges\" must be an array")?
        .iter()
        .map(|e| {
            e.as_array()
                .context("each edge must be an array")?
                .iter()
                .map(|x| match x.as_u64() {
                    Some(x) if x >= 1 => Ok(x as usize - 1),
                    _ => bail!("vertices are positive integers"),
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    match validate_design(v, &edges) {
        DesignReport::Valid(p) => {
            println!(
                "pass: (v, b, r, k, lambda) = ({}, {}, {}, {}, {})",
                p.v, p.b, p.r, p.k, p.lambda
            );
            Ok(true)
        }
        DesignReport::Invalid(why) => {
            say(&format!("fail: {why}"))?;
            Ok(false)
        }
    }
}

fn export(a: ExportArgs) -> Result<bool> {
    let (w, v) = (a.shape.w, a.shape.v);
    let part = Partition::new(w, v)?;
    let (_, t) = resolve_params(a.params.as_deref(), w, v, a.eps)?;
    let m = ubd_mechanism(&part, a.eps, &t, None)?;
    let mut out = output(a.out.as_deref())?;
    writeln!(out, "{}", m.to_json()?)?;
    out.flush()?;
    Ok(true)
}

fn synth(a: SynthArgs) -> Result<bool> {
    let mut out = output(a.out.as_deref())?;
    write_synthetic_csv(&mut out, a.rows, a.seed)?;
    out.flush()?;
    Ok(true)
}

fn schema_cmd(a: SchemaArgs) -> Result<bool> {
    let c = match a.criterion {
        CriterionArg::Stringent => Criterion::Stringent,
        CriterionArg::Permissive => Criterion::Permissive,
    };
    say(&census_schema(c).to_json()?)?;
    Ok(true)
}
