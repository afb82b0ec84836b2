//! Command-line entry point: tuning, sampling, enumeration, verification,
//! fitting and diagram export, with reproducible seeding and
//! machine-readable output.
//!
//! Every run is a deterministic function of its resolved configuration and
//! seed; the full configuration is echoed into the output metadata. Numeric
//! flags accept scientific notation (`--steps 2e6`). An optional
//! `key = value` config file supplies defaults that explicit flags
//! override, and `PLANECURVE_OUT_DIR` relocates relative output paths.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use crate::chain_boltzmann::{self, BoltzmannParams};
use crate::chain_wanglandau::{self, WlParams};
use crate::combmap::CombMap;
use crate::fitting;
use crate::observables::{self, ObservableRecord, RecordSink};
use crate::oracle::{self, KernelKind};
use crate::rng::chain_rng;
use crate::stepping::MoveProbs;

const OUT_DIR_ENV: &str = "PLANECURVE_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFY_FAILED: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "planecurve", version, about = "Markov chain samplers for rooted plane curves")]
struct Cli {
    /// `key = value` config file; explicit flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tune Wang-Landau weights and write them to a g-file.
    Tune(TuneArgs),
    /// Sample with fixed Wang-Landau weights from a g-file.
    SampleWl(SampleWlArgs),
    /// Sample the Boltzmann chain at fugacity z.
    SampleBoltzmann(SampleBoltzmannArgs),
    /// Exhaustively enumerate rooted plane curves up to a size.
    Enumerate(EnumerateArgs),
    /// Verify chain kernels exactly on an enumerated state space.
    VerifyChain(VerifyChainArgs),
    /// Fit growth parameters to tuned weights over a window sweep.
    Fit(FitArgs),
    /// Sample shadows and export uniformly decorated knot diagrams.
    ExportDiagrams(ExportDiagramsArgs),
}

#[derive(Args, Debug)]
struct TuneArgs {
    #[arg(long)]
    max_size: Option<u32>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_parser = parse_count)]
    s0: Option<u64>,
    #[arg(long, value_parser = parse_count)]
    s1: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    g_out: Option<PathBuf>,
    /// Seconds between progress lines on stderr.
    #[arg(long)]
    progress_every: Option<u64>,
}

#[derive(Args, Debug)]
struct SampleWlArgs {
    #[arg(long)]
    g_in: Option<PathBuf>,
    #[arg(long, value_parser = parse_count)]
    steps: Option<u64>,
    #[arg(long, value_parser = parse_count)]
    interval: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<OutputFormat>,
    /// Independent chains with split seed streams, outputs concatenated.
    #[arg(long)]
    chains: Option<u32>,
}

#[derive(Args, Debug)]
struct SampleBoltzmannArgs {
    #[arg(long)]
    z: Option<f64>,
    #[arg(long)]
    p1: Option<f64>,
    #[arg(long)]
    p2: Option<f64>,
    #[arg(long)]
    p3: Option<f64>,
    #[arg(long)]
    max_size: Option<u32>,
    #[arg(long, value_parser = parse_count)]
    steps: Option<u64>,
    #[arg(long, value_parser = parse_count)]
    interval: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<OutputFormat>,
    #[arg(long)]
    chains: Option<u32>,
}

#[derive(Args, Debug)]
struct EnumerateArgs {
    #[arg(long)]
    max_size: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write one canonical code per rooted class.
    #[arg(long)]
    classes: bool,
}

#[derive(Args, Debug)]
struct VerifyChainArgs {
    #[arg(long)]
    max_size: Option<u32>,
    #[arg(long)]
    z: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Residual threshold for the balance and stationarity checks.
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    g_in: Option<PathBuf>,
    #[arg(long)]
    n_min: Option<u32>,
    /// Window upper ends to sweep, as `a..b` inclusive.
    #[arg(long)]
    n_max_sweep: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExportDiagramsArgs {
    #[arg(long)]
    g_in: Option<PathBuf>,
    #[arg(long, value_parser = parse_count)]
    count: Option<u64>,
    #[arg(long, value_parser = parse_count)]
    interval: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum OutputFormat {
    Csv,
    Jsonl,
}

impl OutputFormat {
    fn name(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Jsonl => "jsonl",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" => Ok(OutputFormat::Jsonl),
            other => Err(format!("unknown format {other:?} (expected csv or jsonl)")),
        }
    }
}

fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = s.parse().map_err(|e| format!("not a count: {e}"))?;
    if f >= 0.0 && f.fract() == 0.0 && f < 1.8e19 {
        Ok(f as u64)
    } else {
        Err(format!("{s:?} is not a non-negative integer"))
    }
}

/// Flat `key = value` configuration with `#` comments.
struct Config(HashMap<String, String>);

impl Config {
    fn load(path: Option<&Path>) -> Result<Self, String> {
        let mut map = HashMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| format!("config line {} is not key = value", lineno + 1))?;
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(Config(map))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, String>
    where
        T::Err: std::fmt::Display,
    {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| format!("config key {key:?}: {e}")),
        }
    }

    fn get_count(&self, key: &str) -> Result<Option<u64>, String> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => parse_count(raw).map(Some).map_err(|e| format!("config key {key:?}: {e}")),
        }
    }
}

fn out_path(p: &Path) -> PathBuf {
    if p.is_absolute() {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) => PathBuf::from(dir).join(p),
        None => p.to_path_buf(),
    }
}

fn wall_clock() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Run the CLI on the given argument list and return the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders help/version on stdout with exit 0; everything
            // else is a usage error on stderr with exit 1
            use clap::error::ErrorKind;
            let kind = e.kind();
            let _ = e.print();
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                EXIT_OK
            } else {
                EXIT_USAGE
            };
        }
    };
    let config = match Config::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let result = match cli.command {
        Command::Tune(args) => cmd_tune(args, &config),
        Command::SampleWl(args) => cmd_sample_wl(args, &config),
        Command::SampleBoltzmann(args) => cmd_sample_boltzmann(args, &config),
        Command::Enumerate(args) => cmd_enumerate(args, &config),
        Command::VerifyChain(args) => cmd_verify_chain(args, &config),
        Command::Fit(args) => cmd_fit(args, &config),
        Command::ExportDiagrams(args) => cmd_export_diagrams(args, &config),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn cmd_tune(args: TuneArgs, cfg: &Config) -> Result<i32, String> {
    let max_size = args
        .max_size
        .or(cfg.get("max-size")?)
        .ok_or("missing --max-size")?;
    let mut params = WlParams::new(max_size, args.seed.or(cfg.get("seed")?).unwrap_or(0));
    if let Some(v) = args.epsilon.or(cfg.get("epsilon")?) {
        params.epsilon = v;
    }
    if let Some(v) = args.delta.or(cfg.get("delta")?) {
        params.delta = v;
    }
    if let Some(v) = args.s0.or(cfg.get_count("s0")?) {
        params.s0 = v;
    }
    if let Some(v) = args.s1.or(cfg.get_count("s1")?) {
        params.s1 = v;
    }
    let g_out = out_path(
        &args
            .g_out
            .or(cfg.get("g-out")?)
            .ok_or("missing --g-out")?,
    );
    let progress_every = args.progress_every.or(cfg.get_count("progress-every")?).unwrap_or(5);

    eprintln!(
        "tuning: L={} epsilon={:e} delta={} s0={} s1={} seed={}",
        params.max_size, params.epsilon, params.delta, params.s0, params.s1, params.seed
    );
    let started = Instant::now();
    let mut last_report = Instant::now();
    let wl = chain_wanglandau::tune_with(
        &params,
        |state| {
            // each halving of f is a checkpoint; the g-file is reusable
            if let Err(e) = chain_wanglandau::write_g_file(&g_out, state) {
                eprintln!("warning: checkpoint write failed: {e}");
            }
        },
        |p| {
            if last_report.elapsed().as_secs() >= progress_every {
                last_report = Instant::now();
                eprintln!(
                    "  {:>12} steps  f=2^{:-3}  rounds={}  flatness={:.4}  n={}",
                    p.steps,
                    p.f.log2().round() as i64,
                    p.rounds_done,
                    p.flatness,
                    p.current_size
                );
            }
        },
    );
    chain_wanglandau::write_g_file(&g_out, &wl).map_err(|e| e.to_string())?;
    eprintln!(
        "tuned to f={:e} in {:.1}s; weights written to {}",
        wl.f,
        started.elapsed().as_secs_f64(),
        g_out.display()
    );
    Ok(EXIT_OK)
}

struct SampleSpec {
    steps: u64,
    interval: u64,
    chains: u32,
    seed: u64,
    out: PathBuf,
    format: OutputFormat,
}

fn sample_spec(
    steps: Option<u64>,
    interval: Option<u64>,
    chains: Option<u32>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    format: Option<OutputFormat>,
    cfg: &Config,
) -> Result<SampleSpec, String> {
    Ok(SampleSpec {
        steps: steps.or(cfg.get_count("steps")?).ok_or("missing --steps")?,
        interval: interval.or(cfg.get_count("interval")?).unwrap_or(1000),
        chains: chains.or(cfg.get("chains")?).unwrap_or(1),
        seed: seed.or(cfg.get("seed")?).unwrap_or(0),
        out: out_path(&out.or(cfg.get("out")?).ok_or("missing --out")?),
        format: format.or(cfg.get("format")?).unwrap_or(OutputFormat::Csv),
    })
}

fn cmd_sample_wl(args: SampleWlArgs, cfg: &Config) -> Result<i32, String> {
    let g_in: PathBuf = args.g_in.or(cfg.get("g-in")?).ok_or("missing --g-in")?;
    let spec = sample_spec(
        args.steps, args.interval, args.chains, args.seed, args.out, args.format, cfg,
    )?;
    let gfile = chain_wanglandau::read_g_file(&g_in).map_err(|e| e.to_string())?;
    let config_line = format!(
        "command=sample-wl g-in={} L={} steps={} interval={} chains={} seed={} format={}",
        g_in.display(),
        gfile.max_size,
        spec.steps,
        spec.interval,
        spec.chains,
        spec.seed,
        spec.format.name()
    );
    let mut sink = open_sink(&spec, &config_line)?;
    let probs = MoveProbs::default_mix();
    for chain_id in 0..spec.chains {
        chain_wanglandau::sample(
            &gfile.g,
            &probs,
            spec.seed,
            spec.steps,
            spec.interval,
            chain_id,
            &mut sink,
        );
    }
    sink.finish().map_err(|e| e.to_string())?;
    Ok(EXIT_OK)
}

fn cmd_sample_boltzmann(args: SampleBoltzmannArgs, cfg: &Config) -> Result<i32, String> {
    let spec = sample_spec(
        args.steps, args.interval, args.chains, args.seed, args.out, args.format, cfg,
    )?;
    let z = args.z.or(cfg.get("z")?).ok_or("missing --z")?;
    let max_size = match args.max_size.or(cfg.get("max-size")?) {
        Some(v) => Some(v),
        None => None,
    };
    let mut params = BoltzmannParams::new(z, max_size, spec.seed);
    if let Some(p1) = args.p1.or(cfg.get("p1")?) {
        params.p1 = p1;
    }
    if let Some(p2) = args.p2.or(cfg.get("p2")?) {
        params.p2 = p2;
    }
    if let Some(p3) = args.p3.or(cfg.get("p3")?) {
        params.p3 = p3;
    }
    let sum = params.p1 + params.p2 + params.p3;
    if (sum - 1.0).abs() > 1e-12 {
        params.reroot_every_step = false;
    }
    params.validate().map_err(|e| e.to_string())?;
    if params.z >= chain_boltzmann::Z_CRITICAL && params.max_size.is_none() {
        eprintln!(
            "warning: z = {} is at or above the growth-rate threshold {} with no size cap; \
             sampled sizes will drift upward without bound",
            params.z,
            chain_boltzmann::Z_CRITICAL
        );
    }
    let config_line = format!(
        "command=sample-boltzmann z={} p1={} p2={} p3={} reroot={} max-size={} steps={} interval={} chains={} seed={} format={}",
        params.z,
        params.p1,
        params.p2,
        params.p3,
        params.reroot_every_step,
        params.max_size.map_or("none".to_string(), |v| v.to_string()),
        spec.steps,
        spec.interval,
        spec.chains,
        spec.seed,
        spec.format.name()
    );
    let mut sink = open_sink(&spec, &config_line)?;
    for chain_id in 0..spec.chains {
        chain_boltzmann::run(&params, spec.steps, spec.interval, chain_id, &mut sink);
    }
    sink.finish().map_err(|e| e.to_string())?;
    Ok(EXIT_OK)
}

fn cmd_enumerate(args: EnumerateArgs, cfg: &Config) -> Result<i32, String> {
    let max_size = args.max_size.or(cfg.get("max-size")?).ok_or("missing --max-size")?;
    let table = oracle::enumerate_rooted_plane_curves(max_size).map_err(|e| e.to_string())?;
    let mut summary = String::new();
    writeln!(summary, "n  count  ratio").expect("string write");
    let counts = table.counts();
    for (i, (n, count)) in counts.iter().enumerate() {
        if i == 0 {
            writeln!(summary, "{n}  {count}").expect("string write");
        } else {
            let ratio = *count as f64 / counts[i - 1].1 as f64;
            writeln!(summary, "{n}  {count}  {ratio:.3}").expect("string write");
        }
    }
    print!("{summary}");
    if let Some(out) = args.out.or(cfg.get("out")?) {
        let path = out_path(&out);
        fs::write(&path, table.to_file_text(args.classes))
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        eprintln!("table written to {}", path.display());
    }
    Ok(EXIT_OK)
}

fn cmd_verify_chain(args: VerifyChainArgs, cfg: &Config) -> Result<i32, String> {
    let max_size = args.max_size.or(cfg.get("max-size")?).unwrap_or(3);
    let z = args.z.or(cfg.get("z")?).unwrap_or(0.05);
    let seed = args.seed.or(cfg.get("seed")?).unwrap_or(1);
    let tol = args.tolerance.or(cfg.get("tolerance")?).unwrap_or(1e-10);

    let mut all_ok = true;
    let mut check = |name: &str, ok: bool, detail: String| {
        println!("[{}] {name}: {detail}", if ok { "ok" } else { "FAIL" });
        all_ok &= ok;
    };

    let table = oracle::enumerate_rooted_plane_curves(max_size).map_err(|e| e.to_string())?;
    check(
        "enumeration",
        true,
        format!("{} rooted classes up to n = {max_size}", table.total()),
    );
    let closure = oracle::verify_bfs_closure(&table).map_err(|e| e.to_string())?;
    check("move closure", closure, "every move lands inside the table".into());
    if max_size <= 4 {
        let n_raw = 3.min(max_size);
        let raw = oracle::count_rooted_by_raw_generation(n_raw);
        check(
            "independent generation",
            raw == table.count(n_raw),
            format!("raw generation count at n = {n_raw}: {raw} vs {}", table.count(n_raw)),
        );
    }

    // Boltzmann kernel with the production mix
    let params = BoltzmannParams::new(z, Some(max_size), seed);
    let kernel = oracle::exact_kernel(&table, KernelKind::Boltzmann(&params))
        .map_err(|e| e.to_string())?;
    let row_err = kernel.row_sum_error();
    check("boltzmann rows", row_err < 1e-12, format!("max row-sum error {row_err:.3e}"));
    let pi = boltzmann_pi(&kernel.sizes, z);
    let db = oracle::detailed_balance_residual(&kernel, &pi);
    check("boltzmann detailed balance", db < tol, format!("z = {z}, residual {db:.3e}"));
    let st = oracle::stationary_distribution(&kernel, 1e-14, 200_000)
        .map_err(|e| e.to_string())?;
    let dist = l1_distance(&st, &pi);
    check("boltzmann stationary", dist < tol, format!("L1 distance to z^n law {dist:.3e}"));
    let self_loop = oracle::min_self_loop(&kernel);
    check("aperiodicity", self_loop > 0.0, format!("min self-loop {self_loop:.3e}"));

    // Wang-Landau kernel with an arbitrary seeded G
    let g = arbitrary_g(max_size, seed);
    let kernel = oracle::exact_kernel(
        &table,
        KernelKind::WangLandau { g: &g, probs: MoveProbs::default_mix() },
    )
    .map_err(|e| e.to_string())?;
    let pi = wl_pi(&kernel.sizes, &g);
    let db = oracle::detailed_balance_residual(&kernel, &pi);
    check("wang-landau detailed balance", db < tol, format!("residual {db:.3e}"));
    let st = oracle::stationary_distribution(&kernel, 1e-14, 200_000)
        .map_err(|e| e.to_string())?;
    let dist = l1_distance(&st, &pi);
    check("wang-landau stationary", dist < tol, format!("L1 distance {dist:.3e}"));

    Ok(if all_ok { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

pub(crate) fn boltzmann_pi(sizes: &[u32], z: f64) -> Vec<f64> {
    let mut pi: Vec<f64> = sizes.iter().map(|&n| z.powi(n as i32)).collect();
    let total: f64 = pi.iter().sum();
    for v in &mut pi {
        *v /= total;
    }
    pi
}

pub(crate) fn wl_pi(sizes: &[u32], g: &[f64]) -> Vec<f64> {
    let mut pi: Vec<f64> = sizes.iter().map(|&n| (-g[(n - 1) as usize]).exp()).collect();
    let total: f64 = pi.iter().sum();
    for v in &mut pi {
        *v /= total;
    }
    pi
}

pub(crate) fn arbitrary_g(max_size: u32, seed: u64) -> Vec<f64> {
    use rand::Rng;
    let mut rng = chain_rng(seed, 999);
    (0..max_size).map(|i| 2.0 * f64::from(i) + rng.random::<f64>() * 3.0).collect()
}

fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn cmd_fit(args: FitArgs, cfg: &Config) -> Result<i32, String> {
    let g_in: PathBuf = args.g_in.or(cfg.get("g-in")?).ok_or("missing --g-in")?;
    let n_min = args.n_min.or(cfg.get("n-min")?).unwrap_or(10);
    let gfile = chain_wanglandau::read_g_file(&g_in).map_err(|e| e.to_string())?;
    let sweep_raw = args.n_max_sweep.or(cfg.get("n-max-sweep")?);
    let (lo, hi) = match sweep_raw {
        Some(raw) => parse_range(&raw)?,
        None => ((n_min + 3).max(n_min + 3), gfile.max_size),
    };
    let mut out = String::from("n_max,mu,gamma,logC,rms\n");
    for n_max in lo..=hi {
        match fitting::fit_asymptotic(&gfile.g, gfile.ell, n_min, n_max) {
            Ok(fit) => {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    n_max, fit.mu, fit.gamma, fit.log_c, fit.rms_residual
                )
                .expect("string write");
            }
            Err(e) => return Err(format!("fit at n_max = {n_max}: {e}")),
        }
    }
    match args.out.or(cfg.get("out")?) {
        Some(path) => {
            let path = out_path(&path);
            fs::write(&path, out).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            eprintln!("fit sweep written to {}", path.display());
        }
        None => print!("{out}"),
    }
    Ok(EXIT_OK)
}

fn parse_range(raw: &str) -> Result<(u32, u32), String> {
    let (a, b) = raw
        .split_once("..")
        .ok_or_else(|| format!("range {raw:?} must look like a..b"))?;
    let lo: u32 = a.trim().parse().map_err(|e| format!("range start: {e}"))?;
    let hi: u32 = b.trim().parse().map_err(|e| format!("range end: {e}"))?;
    if lo > hi {
        return Err(format!("empty range {raw:?}"));
    }
    Ok((lo, hi))
}

fn cmd_export_diagrams(args: ExportDiagramsArgs, cfg: &Config) -> Result<i32, String> {
    let g_in: PathBuf = args.g_in.or(cfg.get("g-in")?).ok_or("missing --g-in")?;
    let count = args.count.or(cfg.get_count("count")?).ok_or("missing --count")?;
    let interval = args.interval.or(cfg.get_count("interval")?).unwrap_or(1000);
    let seed = args.seed.or(cfg.get("seed")?).unwrap_or(0);
    let out = out_path(&args.out.or(cfg.get("out")?).ok_or("missing --out")?);
    let gfile = chain_wanglandau::read_g_file(&g_in).map_err(|e| e.to_string())?;

    let probs = MoveProbs::default_mix();
    let gates_seed = seed;
    let mut map = CombMap::new_figure_eight();
    let mut rng = chain_rng(gates_seed, 0);
    let mut sign_rng = chain_rng(gates_seed, 1);
    let mut body = String::new();
    let wl = chain_wanglandau::WangLandauState {
        ell: 1,
        max_size: gfile.max_size,
        g: gfile.g.clone(),
        f: 0.0,
        h: vec![0; gfile.g.len()],
        s0: 1,
        s1: 1,
        delta: gfile.delta,
        epsilon: gfile.epsilon,
    };
    for _ in 0..count {
        for _ in 0..interval {
            chain_wanglandau::wl_step(&mut map, &wl, &probs, &mut rng);
        }
        let diagram = observables::assign_crossings(&map, &mut sign_rng);
        body.push_str(&observables::pd_code(&diagram).map_err(|e| e.to_string())?);
        body.push('\n');
    }
    let header = format!(
        "# planecurve {}\n# config = command=export-diagrams g-in={} count={} interval={} seed={}\n# wall_clock = {}\n",
        env!("CARGO_PKG_VERSION"),
        g_in.display(),
        count,
        interval,
        seed,
        wall_clock()
    );
    fs::write(&out, header + &body).map_err(|e| format!("cannot write {}: {e}", out.display()))?;
    eprintln!("{count} diagrams written to {}", out.display());
    Ok(EXIT_OK)
}

/// Record writer with the metadata preamble; CSV or JSONL.
struct FileSink {
    inner: io::BufWriter<fs::File>,
    format: OutputFormat,
}

fn open_sink(spec: &SampleSpec, config_line: &str) -> Result<FileSink, String> {
    let file = fs::File::create(&spec.out)
        .map_err(|e| format!("cannot create {}: {e}", spec.out.display()))?;
    let mut inner = io::BufWriter::new(file);
    let version = env!("CARGO_PKG_VERSION");
    let clock = wall_clock();
    match spec.format {
        OutputFormat::Csv => {
            write!(
                inner,
                "# planecurve {version}\n# config = {config_line}\n# seed = {}\n# wall_clock = {clock}\nchain_id,step,n,max_face,mean_v2,face_hist\n",
                spec.seed
            )
            .map_err(|e| e.to_string())?;
        }
        OutputFormat::Jsonl => {
            let meta = serde_json::json!({
                "meta": {
                    "version": version,
                    "config": config_line,
                    "seed": spec.seed,
                    "wall_clock": clock,
                }
            });
            writeln!(inner, "{meta}").map_err(|e| e.to_string())?;
        }
    }
    Ok(FileSink { inner, format: spec.format })
}

impl FileSink {
    fn finish(mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

impl RecordSink for FileSink {
    fn record(&mut self, rec: &ObservableRecord) {
        match self.format {
            OutputFormat::Csv => {
                writeln!(
                    self.inner,
                    "{},{},{},{},{},{}",
                    rec.chain_id,
                    rec.step,
                    rec.n,
                    rec.max_face,
                    rec.mean_v2_f64(),
                    rec.face_hist_cell()
                )
                .expect("record write");
            }
            OutputFormat::Jsonl => {
                let line = serde_json::to_string(rec).expect("record serialization");
                writeln!(self.inner, "{line}").expect("record write");
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_parser_accepts_scientific_notation() {
        assert_eq!(parse_count("1000").unwrap(), 1000);
        assert_eq!(parse_count("1e6").unwrap(), 1_000_000);
        assert_eq!(parse_count("2.5e3").unwrap(), 2500);
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
    }

    #[test]
    fn range_parser() {
        assert_eq!(parse_range("20..60").unwrap(), (20, 60));
        assert!(parse_range("60..20").is_err());
        assert!(parse_range("20").is_err());
    }
}
