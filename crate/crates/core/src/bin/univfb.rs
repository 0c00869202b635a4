use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use univfb::bounds::{delta_minus, delta_plus, n_star_bounds};
use univfb::harness::{
    run_plan, sweep_rates, write_atomic, ExperimentPlan, OutputFormat, PlanEntry, SweepParams,
};
use univfb::noise::{read_noise_file, write_noise_file};
use univfb::refsys::{collapsed_entropy, iterated_mapping_eval, BlockCode, EvalMode};
use univfb::scheme::{choose_k, SchemeConfig, K_CAP, WORK_BUDGET};
use univfb::srccode::{lz78_max_gap, KtMixture, Lz78Coder, Metric, SequentialCoder};
use univfb::{Alphabet, Error, NoiseSpec, SymbolSeq};

#[derive(Parser)]
#[command(
    name = "univfb",
    version,
    about = "Rateless universal feedback communication simulator"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Base seed for codebooks, messages and seedless noise.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Lz78,
    Kt,
}

#[derive(Subcommand)]
enum Command {
    /// Run feedback sessions and emit one row per trial.
    Simulate(SimulateArgs),
    /// Report LZ78 and KT code lengths of a noise sequence as JSON.
    Compress(NoiseArgs),
    /// Tabulate redundancy bounds and horizon bounds over a grid of n.
    Bounds(BoundsArgs),
    /// Measure the iterated-mapping error of a block code on a noise sequence.
    IfbEval(IfbArgs),
    /// Draw a test-channel noise sequence and write it as a MODZ file.
    Testchannel(TestchannelArgs),
    /// Median session rates across a grid of horizons.
    Sweep(SweepArgs),
    /// Execute a JSON experiment plan.
    Plan(PlanArgs),
}

#[derive(Args)]
struct NoiseArgs {
    /// Noise spec string (e.g. bern:p=0.11,seed=42) or MODZ file path.
    #[arg(long)]
    noise: String,
    /// Horizon; required for spec strings, truncates files.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 2)]
    q: u32,
}

#[derive(Args)]
struct SchemeArgs {
    /// Message bits per block; chosen from n when omitted.
    #[arg(long = "K")]
    k_bits: Option<u32>,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = MetricArg::Lz78)]
    metric: MetricArg,
    /// Deepest block length of the KT mixture.
    #[arg(long)]
    kt_kmax: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    noise: NoiseArgs,
    #[command(flatten)]
    scheme: SchemeArgs,
    #[arg(long, default_value_t = 1)]
    trials: usize,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    q: u16,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    /// Log-spaced grid `start:stop:points`.
    #[arg(long)]
    n_grid: String,
}

#[derive(Args)]
struct IfbArgs {
    /// JSON file with fields q, k, encode, decode.
    #[arg(long)]
    code: PathBuf,
    #[arg(long)]
    noise: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    b: usize,
    /// Monte Carlo trials; 0 averages over every message exactly.
    #[arg(long, default_value_t = 0)]
    trials: usize,
}

#[derive(Args)]
struct TestchannelArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    blocks: usize,
    #[arg(long, default_value_t = 2)]
    q: u32,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    noise: String,
    #[arg(long, default_value_t = 2)]
    q: u32,
    /// Comma-separated horizons.
    #[arg(long, value_delimiter = ',')]
    n_grid: Vec<usize>,
    #[command(flatten)]
    scheme: SchemeArgs,
    #[arg(long, default_value_t = 3)]
    trials: usize,
}

#[derive(Args)]
struct PlanArgs {
    /// Plan file; its `out` and `format` are overridden by the global flags.
    file: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::Invariant(_)) => ExitCode::from(3),
                Some(err) if err.is_validation() => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Simulate(a) => simulate(g, a),
        Command::Compress(a) => compress(g, a),
        Command::Bounds(a) => bounds(g, a),
        Command::IfbEval(a) => ifb_eval(g, a),
        Command::Testchannel(a) => testchannel(g, a),
        Command::Sweep(a) => sweep(g, a),
        Command::Plan(a) => plan(g, a),
    }
}

fn emit(g: &Global, text: &str) -> anyhow::Result<()> {
    match &g.out {
        Some(path) => write_atomic(path, text.as_bytes())
            .with_context(|| format!("writing {}", path.display())),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

fn hash_line<T: Serialize>(params: &T) -> String {
    let bytes = serde_json::to_vec(params).expect("parameters serialize");
    let hex: String = Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    format!("# plan_hash={hex}\n")
}

fn table<T: Serialize, P: Serialize>(g: &Global, params: &P, rows: &[T]) -> anyhow::Result<String> {
    match g.format {
        Format::Json => {
            let hash = hash_line(params);
            let value = serde_json::json!({ "plan_hash": hash.trim()["# plan_hash=".len()..], "rows": rows });
            Ok(serde_json::to_string_pretty(&value)? + "\n")
        }
        Format::Csv => {
            let mut out = hash_line(params).into_bytes();
            {
                let mut w = csv::Writer::from_writer(&mut out);
                for r in rows {
                    w.serialize(r)?;
                }
                w.flush()?;
            }
            Ok(String::from_utf8(out)?)
        }
    }
}

fn load_noise(arg: &str, q: u32, n: Option<usize>, seed: u64) -> anyhow::Result<SymbolSeq> {
    if Path::new(arg).is_file() {
        let z = read_noise_file(Path::new(arg))?;
        return Ok(match n {
            Some(n) if n > z.len() => {
                return Err(Error::LengthMismatch {
                    left: n,
                    right: z.len(),
                }
                .into())
            }
            Some(n) => z.prefix(n),
            None => z,
        });
    }
    let alphabet = Alphabet::new(q)?;
    let spec = NoiseSpec::parse(arg, alphabet)?;
    let Some(n) = n else {
        bail!(Error::InvalidParameter(
            "--n is required with a noise spec".into()
        ));
    };
    Ok(spec.generate(alphabet, n, seed)?)
}

fn metric(s: &SchemeArgs) -> Metric {
    match s.metric {
        MetricArg::Lz78 => Metric::Lz78,
        MetricArg::Kt => Metric::Kt { k_max: s.kt_kmax },
    }
}

/// `--K` if given, else the overhead-minimizing choice kept within the work budget.
fn resolve_k(s: &SchemeArgs, n: usize, q: u16, metric: Metric) -> u32 {
    s.k_bits.unwrap_or_else(|| {
        let dmax = match metric {
            Metric::Lz78 => lz78_max_gap(n) as f64,
            Metric::Kt { .. } => 0.0,
        };
        let mut k = choose_k(n, q, s.eps, dmax, K_CAP).k;
        while k > 1 && (n as u64) << k > WORK_BUDGET {
            k -= 1;
        }
        k
    })
}

fn simulate(g: &Global, a: &SimulateArgs) -> anyhow::Result<()> {
    let alphabet = Alphabet::new(a.noise.q)?;
    let noise = if Path::new(&a.noise.noise).is_file() {
        NoiseSpec::File {
            path: a.noise.noise.clone().into(),
        }
    } else {
        NoiseSpec::parse(&a.noise.noise, alphabet)?
    };
    let n = match (a.noise.n, &noise) {
        (Some(n), _) => n,
        (None, NoiseSpec::File { path }) => read_noise_file(path)?.len(),
        (None, _) => bail!(Error::InvalidParameter(
            "--n is required with a noise spec".into()
        )),
    };
    let m = metric(&a.scheme);
    let k = resolve_k(&a.scheme, n, alphabet.size(), m);
    let config = SchemeConfig::new(n, alphabet, k, a.scheme.eps, g.seed, m);
    let plan = ExperimentPlan {
        entries: vec![PlanEntry {
            config,
            noise,
            trials: a.trials,
        }],
        out: g.out.clone(),
        format: g.format.into(),
    };
    finish_plan(g, &plan)
}

fn finish_plan(g: &Global, plan: &ExperimentPlan) -> anyhow::Result<()> {
    let record = run_plan(plan, g.jobs)?;
    if plan.out.is_none() {
        emit(g, &record.render(plan.format)?)?;
    }
    let agg = &record.aggregate;
    eprintln!(
        "trials={} median_R_act={:.6} error_rate={:.4} floor_violations={}",
        agg.trials, agg.median_r_act, agg.error_rate, agg.floor_violations
    );
    if agg.floor_violations > 0 {
        bail!(Error::Invariant(format!(
            "{} error-free sessions fell below the rate floor",
            agg.floor_violations
        )));
    }
    Ok(())
}

fn plan(g: &Global, a: &PlanArgs) -> anyhow::Result<()> {
    let mut plan = ExperimentPlan::load(&a.file)
        .with_context(|| format!("reading plan {}", a.file.display()))?;
    if g.out.is_some() {
        plan.out = g.out.clone();
    }
    plan.format = g.format.into();
    finish_plan(g, &plan)
}

#[derive(Serialize)]
struct CompressReport {
    n: usize,
    q: u16,
    lz78_phrases: u32,
    l_s: u64,
    l_t: u64,
    rho78: f64,
    kt_k_max: usize,
    kt_bits: f64,
}

fn compress(g: &Global, a: &NoiseArgs) -> anyhow::Result<()> {
    let z = load_noise(&a.noise, a.q, a.n, g.seed)?;
    if z.is_empty() {
        bail!(Error::EmptySequence);
    }
    let mut lz = Lz78Coder::new(z.alphabet());
    lz.feed_all(z.as_slice());
    let s = lz.summary();
    let mut kt = KtMixture::for_horizon(z.alphabet(), z.len())?;
    kt.feed_all(z.as_slice());
    let report = CompressReport {
        n: z.len(),
        q: z.alphabet().size(),
        lz78_phrases: s.phrases,
        l_s: s.l_s,
        l_t: s.l_t,
        rho78: s.l_t as f64 / (z.len() as f64 * z.alphabet().log2()),
        kt_k_max: kt.k_max(),
        kt_bits: kt.code_length(),
    };
    emit(g, &(serde_json::to_string_pretty(&report)? + "\n"))
}

#[derive(Serialize)]
struct BoundsRow {
    n: f64,
    delta_minus: Option<f64>,
    delta_plus: Option<f64>,
    n_star_lower: f64,
    n_star_upper: f64,
}

fn parse_grid(s: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::InvalidParameter(format!("n grid {s:?} is not start:stop:points"));
    let [start, stop, points] = parts[..] else {
        bail!(bad())
    };
    let (start, stop): (f64, f64) = (
        start.parse().map_err(|_| bad())?,
        stop.parse().map_err(|_| bad())?,
    );
    let points: usize = points.parse().map_err(|_| bad())?;
    if !(start >= 1.0 && stop >= start && points >= 1) {
        bail!(bad());
    }
    if points == 1 {
        return Ok(vec![start]);
    }
    let step = (stop / start).ln() / (points - 1) as f64;
    Ok((0..points)
        .map(|i| start * (step * i as f64).exp())
        .collect())
}

fn bounds(g: &Global, a: &BoundsArgs) -> anyhow::Result<()> {
    let grid = parse_grid(&a.n_grid)?;
    let star = n_star_bounds(a.k, a.delta, a.q)?;
    let rows: Vec<BoundsRow> = grid
        .iter()
        .map(|&n| BoundsRow {
            n,
            delta_minus: delta_minus(n, a.k, a.q).ok(),
            delta_plus: delta_plus(n, a.k, a.q).ok(),
            n_star_lower: star.lower,
            n_star_upper: star.upper,
        })
        .collect();
    let params = serde_json::json!({ "k": a.k, "q": a.q, "delta": a.delta, "n_grid": a.n_grid });
    emit(g, &table(g, &params, &rows)?)
}

#[derive(Serialize)]
struct IfbReport {
    k: usize,
    b: usize,
    messages: usize,
    rate: f64,
    error: f64,
    mode: &'static str,
    collapsed_entropy: f64,
}

fn ifb_eval(g: &Global, a: &IfbArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&a.code)
        .with_context(|| format!("reading {}", a.code.display()))?;
    let code = BlockCode::from_json(&text)?;
    if code.k != a.k {
        bail!(Error::InvalidParameter(format!(
            "--k {} does not match the code's k {}",
            a.k, code.k
        )));
    }
    let z = read_noise_file(&a.noise)?;
    let mode = match a.trials {
        0 => EvalMode::Exhaustive,
        trials => EvalMode::MonteCarlo {
            trials,
            seed: g.seed,
        },
    };
    let error = iterated_mapping_eval(&code, &z, a.b, mode)?;
    let report = IfbReport {
        k: a.k,
        b: a.b,
        messages: code.messages(),
        rate: code.rate(),
        error,
        mode: if a.trials == 0 {
            "exhaustive"
        } else {
            "monte_carlo"
        },
        collapsed_entropy: collapsed_entropy(&z, a.k, a.b)?,
    };
    emit(g, &(serde_json::to_string_pretty(&report)? + "\n"))
}

fn testchannel(g: &Global, a: &TestchannelArgs) -> anyhow::Result<()> {
    let Some(out) = &g.out else {
        bail!(Error::InvalidParameter(
            "testchannel needs --out for the MODZ file".into()
        ));
    };
    let alphabet = Alphabet::new(a.q)?;
    let spec = NoiseSpec::TestChannel {
        k: a.k,
        d: a.d,
        seed: None,
    };
    let z = spec.generate(alphabet, a.k * a.blocks, g.seed)?;
    write_noise_file(out, &z)?;
    eprintln!("wrote {} symbols to {}", z.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct SweepParamsOut<'a> {
    q: u32,
    noise: String,
    n_grid: &'a [usize],
    k_bits: u32,
    eps: f64,
    trials: usize,
    seed: u64,
    metric: Metric,
}

fn sweep(g: &Global, a: &SweepArgs) -> anyhow::Result<()> {
    let alphabet = Alphabet::new(a.q)?;
    let noise = NoiseSpec::parse(&a.noise, alphabet)?;
    let m = metric(&a.scheme);
    let largest = a.n_grid.iter().copied().max().unwrap_or(1);
    let k = resolve_k(&a.scheme, largest, alphabet.size(), m);
    let params = SweepParams {
        alphabet,
        noise: noise.clone(),
        n_grid: a.n_grid.clone(),
        k_bits: k,
        epsilon: a.scheme.eps,
        trials: a.trials,
        seed: g.seed,
        metric: m,
    };
    let rows = sweep_rates(&params, g.jobs)?;
    let described = SweepParamsOut {
        q: a.q,
        noise: noise.to_string(),
        n_grid: &a.n_grid,
        k_bits: k,
        eps: a.scheme.eps,
        trials: a.trials,
        seed: g.seed,
        metric: m,
    };
    emit(g, &table(g, &described, &rows)?)?;
    let violations: usize = rows.iter().map(|r| r.floor_violations).sum();
    if violations > 0 {
        bail!(Error::Invariant(format!(
            "{violations} error-free sessions fell below the rate floor"
        )));
    }
    Ok(())
}
