//! `aggtail` command-line front-end.
//!
//! Every run prints exactly one JSON document on stdout holding the
//! resolved configuration and the result; diagnostics go to stderr.
//! Exit codes: 0 success, 1 failed verification, 2 usage or data error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use aggtail::dependence::{chi_empirical, eta_estimate, DEFAULT_ETA_Q};
use aggtail::montecarlo::{
    effective_margins, p_grid, simulate_aggregate, simulate_components, verify_sample, Tolerance,
};
use aggtail::pipeline::{ingest_csv, run_study, synthetic_grid, Schema, StudyConfig, SynthConfig};
use aggtail::tailpredict::{predict_copula, predict_theorem, Condition};
use aggtail::{CopulaSpec, Error, GpdParams, LtDescriptor, MarginPair, Weights};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "aggtail", version, about = "Tail behaviour of weighted sums of GPD variables")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Predict the first-order tail of R from margins and a copula or dependence descriptor.
    Predict(PredictArgs),
    /// Simulate (X1, X2, R) and write the draws as CSV.
    Simulate(SimulateArgs),
    /// Estimate chi and eta from a two-column CSV.
    Estimate(EstimateArgs),
    /// Simulate R and check the predicted tail with the transformed-quantile slope.
    Verify(VerifyArgs),
    /// Marginal, pooled and aggregate GPD fits on gridded CSV data.
    Pipeline(PipelineArgs),
    /// Write a synthetic gridded dataset.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct MarginArgs {
    #[arg(long, default_value_t = 1.0)]
    sigma1: f64,
    #[arg(long, allow_hyphen_values = true)]
    xi1: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, allow_hyphen_values = true)]
    xi2: f64,
    /// Weights "w1,w2" summing to one; omitted means R = X1 + X2.
    #[arg(long, value_parser = parse_weights)]
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<Weights>,
}

impl MarginArgs {
    fn margins(&self) -> aggtail::Result<MarginPair> {
        MarginPair::from_params(self.sigma1, self.xi1, self.sigma2, self.xi2)
    }
}

#[derive(Args, Debug, Serialize)]
struct PredictArgs {
    #[command(flatten)]
    #[serde(flatten)]
    margins: MarginArgs,
    /// logistic:G, invlogistic:G, gaussian:R, indep, perfect+ or perfect-.
    #[arg(long, value_parser = parse_copula, conflicts_with_all = ["eta", "kappa", "condition"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    copula: Option<CopulaSpec>,
    #[arg(long, requires = "condition")]
    #[serde(skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    #[arg(long, requires = "condition")]
    #[serde(skip_serializing_if = "Option::is_none")]
    kappa: Option<f64>,
    /// cond1, cond2, cond3a or cond3b.
    #[arg(long, value_parser = parse_condition)]
    #[serde(skip_serializing_if = "Option::is_none")]
    condition: Option<Condition>,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    margins: MarginArgs,
    #[arg(long, value_parser = parse_copula)]
    copula: CopulaSpec,
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV with columns x1,x2,r.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "x1")]
    col1: String,
    #[arg(long, default_value = "x2")]
    col2: String,
    #[arg(long, default_value_t = 0.95)]
    chi_q: f64,
    #[arg(long, default_value_t = DEFAULT_ETA_Q)]
    eta_q: f64,
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    margins: MarginArgs,
    #[arg(long, value_parser = parse_copula)]
    copula: CopulaSpec,
    #[arg(long, default_value_t = 10_000_000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.99)]
    p_lo: f64,
    #[arg(long, default_value_t = 0.999)]
    p_hi: f64,
    #[arg(long, default_value_t = 40)]
    p_count: usize,
    #[arg(long, default_value_t = 0.10)]
    tolerance: f64,
    /// Tolerance when the predicted prefactor is linear in r.
    #[arg(long, default_value_t = 0.15)]
    linear_tolerance: f64,
    /// Replace the predicted endpoint (negative control).
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    force_r_f: Option<f64>,
    /// Replace the predicted key parameter, xi_R or sigma_R (negative control).
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    force_key: Option<f64>,
    /// Quantile-curve CSV (p, r_p, transformed_r_p).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    curve_out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct PipelineArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "time")]
    time_col: String,
    #[arg(long, default_value = "site")]
    site_col: String,
    #[arg(long, default_value = "value")]
    value_col: String,
    #[arg(long, default_value = "x")]
    x_col: String,
    #[arg(long, default_value = "y")]
    y_col: String,
    /// Comma-separated month whitelist, e.g. 12,1,2.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    months: Option<Vec<u32>>,
    #[arg(long, default_value_t = 0.98)]
    p: f64,
    /// Site pairs "a-b,c-d" by identifier; default from grid coordinates.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    adjacency: Option<String>,
    #[arg(long, default_value_t = 7.0)]
    mean_block: f64,
    #[arg(long, default_value_t = 1000)]
    n_boot: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = DEFAULT_ETA_Q)]
    eta_q: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Also write the report JSON here.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<PathBuf>,
    /// Write the aligned text table here (default: stderr).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    table: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "lowercase")]
enum SynthKind {
    /// Hourly GPD(1, 0.2) margins, logistic:0.3.
    Heavy,
    /// Daily GPD(1, -0.2) margins, invlogistic:0.5.
    Bounded,
}

#[derive(Args, Debug, Serialize)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "heavy")]
    kind: SynthKind,
    #[arg(long, default_value_t = 10_000)]
    n_times: usize,
    #[arg(long, default_value_t = 2)]
    nx: usize,
    #[arg(long, default_value_t = 2)]
    ny: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_copula(s: &str) -> Result<CopulaSpec, String> {
    s.parse::<CopulaSpec>()
        .and_then(CopulaSpec::validated)
        .map_err(|e| e.to_string())
}

fn parse_condition(s: &str) -> Result<Condition, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_weights(s: &str) -> Result<Weights, String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [a, b] = parts.as_slice() else {
        return Err("expected two comma-separated weights".into());
    };
    let w1: f64 = a.trim().parse().map_err(|_| format!("bad weight '{a}'"))?;
    let w2: f64 = b.trim().parse().map_err(|_| format!("bad weight '{b}'"))?;
    Weights::new(w1, w2).map_err(|e| e.to_string())
}

enum Outcome {
    Done(Value),
    Failed(Value),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global() {
            eprintln!("warning: could not configure thread pool: {e}");
        }
    }
    let (doc, code) = match run(cli.command) {
        Ok(Outcome::Done(v)) => (v, ExitCode::SUCCESS),
        Ok(Outcome::Failed(v)) => (v, ExitCode::from(1)),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut out = std::io::stdout().lock();
    let written = serde_json::to_writer_pretty(&mut out, &doc)
        .map_err(std::io::Error::from)
        .and_then(|_| writeln!(out));
    if let Err(e) = written {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            eprintln!("error: writing output: {e}");
            return ExitCode::from(2);
        }
    }
    code
}

fn document(command: &str, config: &impl Serialize, result: impl Serialize) -> Value {
    json!({ "command": command, "config": config, "result": result })
}

fn create(path: &PathBuf) -> aggtail::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn run(cmd: Command) -> aggtail::Result<Outcome> {
    match cmd {
        Command::Predict(a) => predict(a),
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Verify(a) => verify(a),
        Command::Pipeline(a) => pipeline(a),
        Command::Synth(a) => synth(a),
    }
}

fn predict(a: PredictArgs) -> aggtail::Result<Outcome> {
    let margins = effective_margins(&a.margins.margins()?, a.margins.weights)?;
    let form = match (&a.copula, a.condition) {
        (Some(spec), _) => predict_copula(&margins, spec)?,
        (None, Some(cond)) => predict_theorem(&margins, &LtDescriptor::new(a.eta, a.kappa, cond)?)?,
        (None, None) => {
            return Err(Error::invalid("give either --copula or --condition (with --eta/--kappa)"));
        }
    };
    Ok(Outcome::Done(document("predict", &a, form)))
}

fn simulate(a: SimulateArgs) -> aggtail::Result<Outcome> {
    let m = a.margins.margins()?;
    let draws = simulate_components(&m, &a.copula, a.margins.weights, a.n, a.seed)?;
    let mut w = csv::Writer::from_writer(create(&a.out)?);
    w.write_record(["x1", "x2", "r"])?;
    let mut sum = 0.0;
    let mut max = f64::NEG_INFINITY;
    for &(x1, x2) in &draws {
        let r = x1 + x2;
        sum += r;
        max = max.max(r);
        w.write_record([x1.to_string(), x2.to_string(), r.to_string()])?;
    }
    w.flush()?;
    let result = json!({
        "n": draws.len(),
        "mean_r": sum / draws.len() as f64,
        "max_r": max,
        "out": a.out,
    });
    Ok(Outcome::Done(document("simulate", &a, result)))
}

fn read_pairs(a: &EstimateArgs) -> aggtail::Result<Vec<(f64, f64)>> {
    let path = a.input.display().to_string();
    let data_err = |line: u64, message: String| Error::Data {
        path: path.clone(),
        line,
        message,
    };
    let mut rdr = csv::Reader::from_path(&a.input)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| data_err(1, format!("unknown column '{name}'")))
    };
    let (c1, c2) = (col(&a.col1)?, col(&a.col2)?);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let get = |c: usize| -> aggtail::Result<f64> {
            let s = rec.get(c).unwrap_or("");
            s.trim()
                .parse()
                .map_err(|_| data_err(line, format!("value '{s}' is not a number")))
        };
        out.push((get(c1)?, get(c2)?));
    }
    if out.is_empty() {
        return Err(Error::InsufficientData(format!("{path}: no data rows")));
    }
    Ok(out)
}

fn estimate(a: EstimateArgs) -> aggtail::Result<Outcome> {
    let pairs = read_pairs(&a)?;
    let result = json!({
        "n": pairs.len(),
        "chi": chi_empirical(&pairs, a.chi_q)?,
        "eta": eta_estimate(&pairs, a.eta_q)?,
    });
    Ok(Outcome::Done(document("estimate", &a, result)))
}

fn verify(a: VerifyArgs) -> aggtail::Result<Outcome> {
    let m = a.margins.margins()?;
    let grid = p_grid(a.p_lo, a.p_hi, a.p_count)?;
    let mut prediction = predict_copula(&effective_margins(&m, a.margins.weights)?, &a.copula)?;
    if let Some(rf) = a.force_r_f {
        prediction.r_f = rf;
    }
    if let Some(k) = a.force_key {
        match prediction.sigma_r {
            Some(_) => prediction.sigma_r = Some(k),
            None => prediction.xi_r = Some(k),
        }
    }
    let sample = simulate_aggregate(&m, &a.copula, a.margins.weights, a.n, a.seed)?;
    let tol = Tolerance {
        relative: a.tolerance,
        linear_in_r: a.linear_tolerance,
    };
    let verdict = verify_sample(&sample, &prediction, &grid, tol)?;
    if let (Some(path), Some(curve)) = (&a.curve_out, &verdict.curve) {
        curve.write_csv(create(path)?)?;
    }
    if let Some(f) = &verdict.failure {
        eprintln!("verification failed: {f}");
    }
    let doc = document("verify", &a, &verdict);
    Ok(if verdict.pass { Outcome::Done(doc) } else { Outcome::Failed(doc) })
}

fn pipeline(a: PipelineArgs) -> aggtail::Result<Outcome> {
    let schema = Schema {
        time_col: a.time_col.clone(),
        site_col: a.site_col.clone(),
        value_col: a.value_col.clone(),
        x_col: a.x_col.clone(),
        y_col: a.y_col.clone(),
        months: a.months.clone(),
    };
    let ds = ingest_csv(&a.input, &schema)?;
    let adjacency = match &a.adjacency {
        None => None,
        Some(spec) => {
            let mut pairs = Vec::new();
            for item in spec.split(',').filter(|s| !s.trim().is_empty()) {
                let (l, r) = item
                    .split_once('-')
                    .ok_or_else(|| Error::invalid(format!("adjacency item '{item}' is not 'a-b'")))?;
                let find = |id: &str| {
                    ds.site_index(id.trim())
                        .ok_or_else(|| Error::invalid(format!("unknown site '{}'", id.trim())))
                };
                pairs.push((find(l)?, find(r)?));
            }
            Some(pairs)
        }
    };
    let cfg = StudyConfig {
        p: a.p,
        adjacency,
        aggregate_sites: None,
        mean_block: a.mean_block,
        n_boot: a.n_boot,
        level: a.level,
        eta_q: a.eta_q,
        seed: a.seed,
    };
    let report = run_study(&ds, &cfg)?;
    let table = report.to_table();
    match &a.table {
        Some(path) => create(path)?.write_all(table.as_bytes())?,
        None => eprint!("{table}"),
    }
    if let Some(path) = &a.report {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &report)?;
        w.flush()?;
    }
    Ok(Outcome::Done(document("pipeline", &a, report)))
}

fn synth(a: SynthArgs) -> aggtail::Result<Outcome> {
    let base = match a.kind {
        SynthKind::Heavy => SynthConfig::heavy_hourly(a.n_times, a.seed),
        SynthKind::Bounded => SynthConfig::bounded_daily(a.n_times, a.seed),
    };
    let cfg = SynthConfig { nx: a.nx, ny: a.ny, ..base };
    let ds = synthetic_grid(&cfg)?;
    let mut w = create(&a.out)?;
    ds.write_csv(&mut w)?;
    w.flush()?;
    let result = json!({
        "sites": ds.sites,
        "n_times": ds.n_times(),
        "margin": GpdParams::new(cfg.margin.sigma(), cfg.margin.xi())?,
        "copula": cfg.copula,
        "out": a.out,
    });
    Ok(Outcome::Done(document("synth", &a, result)))
}
