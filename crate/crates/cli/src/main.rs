//! `fda2s` command-line front end.
//!
//! Exit codes: 0 on success, 2 for invalid flags or input, 3 when the input
//! yields nothing to work with (a record without waves).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use fda2s::io::{format_record, format_sample, format_spectrum, read_record, read_sample, read_text, write_text};
use fda2s::resampling::{quantile_table, spectral_mc_null, Method, ResamplingPlan, SpectralSimConfig, DEFAULT_PROBS};
use fda2s::rng::substream;
use fda2s::spectra::{
    nyquist_grid, simulate_gaussian, simulate_with_rng, torsethaugen_spectrum, ParzenEstimator, SpectralDensity,
    TorsethaugenParams, DEFAULT_SPECTRUM_POINTS,
};
use fda2s::waves::{build_wave_set, normalize_sample, segment_waves, RegistrationSpec, WaveSetSidecar};
use fda2s::{BasisSpec, Calibration, FunctionalSample};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Parser)]
#[command(name = "fda2s", version, about = "Two-sample tests for functional data and sea-wave records")]
struct Cli {
    /// JSON file with default values; a top-level object keyed by subcommand
    /// name, plus an optional top-level "seed". Flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a Gaussian sea-surface record from a two-peak wave spectrum.
    Simulate(SimulateArgs),
    /// Estimate spectral densities of records with a Parzen lag window.
    Spectrum(SpectrumArgs),
    /// Split a record into downcrossing waves, optionally registered to [0, 1].
    Segment(SegmentArgs),
    /// Run the Q_n two-sample test on two functional samples.
    Test(TestArgs),
    /// Tabulate empirical against chi-square quantiles of a null distribution.
    Quantiles(QuantilesArgs),
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct SimulateArgs {
    /// Significant wave height in metres.
    #[arg(long, allow_negative_numbers = true)]
    hs: Option<f64>,
    /// Peak period in seconds.
    #[arg(long, allow_negative_numbers = true)]
    tp: Option<f64>,
    /// Record length in seconds [default: 1800].
    #[arg(long)]
    duration: Option<f64>,
    /// Sampling rate in Hz [default: 1.28].
    #[arg(long)]
    fs: Option<f64>,
    /// Random seed; drawn from entropy and reported on stderr when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file [default: stdout].
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct SpectrumArgs {
    /// Record CSV; repeat to estimate several records on one grid.
    #[arg(long, required = false)]
    input: Vec<PathBuf>,
    /// Parzen window length in lags [default: 60].
    #[arg(long)]
    parzen: Option<usize>,
    /// Number of frequencies on [0, π·fs] [default: 257].
    #[arg(long)]
    points: Option<usize>,
    /// Write a functional-sample CSV (one spectrum per row) even for one input.
    #[arg(long)]
    as_sample: bool,
    /// Output file [default: stdout].
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct SegmentArgs {
    /// Record CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Register each wave onto a common grid over [0, 1].
    #[arg(long)]
    register: bool,
    /// Pin the registered upcrossing to 0.5.
    #[arg(long)]
    constrain_upcross: bool,
    /// Divide registered waves by the record's standard deviation.
    #[arg(long)]
    normalize: bool,
    /// Registration grid size [default: 101].
    #[arg(long)]
    grid: Option<usize>,
    /// Spline order of the common basis [default: 6].
    #[arg(long)]
    order: Option<usize>,
    /// Equidistant knots of the common basis [default: 61].
    #[arg(long)]
    knots: Option<usize>,
    /// Output CSV [default: stdout].
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Sidecar JSON [default: <output>.json when --output is given].
    #[arg(long)]
    sidecar: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct TestArgs {
    /// Functional-sample CSV of the first group.
    #[arg(long)]
    x: Option<PathBuf>,
    /// Functional-sample CSV of the second group.
    #[arg(long)]
    y: Option<PathBuf>,
    /// Projection functions, e.g. indicator:k=8, bspline:order=5,interior=7,
    /// trig:k=3,parts=both, pca:d=3,weights=joint.
    #[arg(long)]
    basis: Option<String>,
    /// asymptotic, permutation:B=1000 or spectral-mc:B=1000 [default: asymptotic].
    #[arg(long)]
    calibration: Option<String>,
    /// Resampling seed; drawn from entropy and reported when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Report JSON [default: stdout].
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct QuantilesArgs {
    /// File of null statistic values, one per line.
    #[arg(long, conflicts_with = "generate")]
    null_values: Option<PathBuf>,
    /// Degrees of freedom of the chi-square reference (with --null-values).
    #[arg(long)]
    k: Option<usize>,
    /// Generate the null by spectral Monte Carlo from simulated records.
    #[arg(long)]
    generate: bool,
    /// Comma-separated probabilities [default: 0.5,0.9,0.95,0.975,0.99].
    #[arg(long)]
    probs: Option<String>,
    /// Basis for --generate [default: indicator:k=8].
    #[arg(long)]
    basis: Option<String>,
    /// Curves in the first group for --generate [default: 10].
    #[arg(long)]
    m: Option<usize>,
    /// Curves in the second group for --generate [default: 10].
    #[arg(long)]
    n: Option<usize>,
    /// Monte Carlo replicates for --generate [default: 500].
    #[arg(long)]
    b: Option<usize>,
    /// Significant wave height for --generate [default: 2].
    #[arg(long)]
    hs: Option<f64>,
    /// Peak period for --generate [default: 4].
    #[arg(long)]
    tp: Option<f64>,
    /// Record length in seconds for --generate [default: 1800].
    #[arg(long)]
    duration: Option<f64>,
    /// Sampling rate for --generate [default: 1.28].
    #[arg(long)]
    fs: Option<f64>,
    /// Parzen window length for --generate [default: 60].
    #[arg(long)]
    parzen: Option<usize>,
    /// Seed for --generate; drawn from entropy and reported when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV [default: stdout].
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// Raised for empty results rather than bad input.
#[derive(Debug)]
struct Empty(String);

impl std::fmt::Display for Empty {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Empty {}

fn exit_code(err: &anyhow::Error) -> u8 {
    let empty = err.chain().any(|e| {
        e.is::<Empty>() || matches!(e.downcast_ref::<fda2s::Error>(), Some(fda2s::Error::NoWaves))
    });
    if empty {
        3
    } else {
        2
    }
}

/// Overlays the flags that were given on the config file's section.
/// Unset options and false switches leave the file's value in place.
fn merged<T: Serialize + DeserializeOwned>(flags: T, config: Option<&Value>, section: &str) -> anyhow::Result<T> {
    let Some(config) = config else {
        return Ok(flags);
    };
    let mut base = match config.get(section) {
        Some(Value::Object(map)) => map.clone(),
        Some(_) => bail!("config section '{section}' is not an object"),
        None => serde_json::Map::new(),
    };
    // A top-level seed applies to the commands that take one.
    if let (Some(seed), true) = (config.get("seed"), ["simulate", "test", "quantiles"].contains(&section)) {
        base.entry("seed").or_insert_with(|| seed.clone());
    }
    let Value::Object(given) = serde_json::to_value(&flags)? else {
        unreachable!("argument structs serialize to objects")
    };
    for (key, value) in given {
        let unset = value.is_null() || value == Value::Bool(false) || value == Value::Array(Vec::new());
        if !unset {
            base.insert(key, value);
        }
    }
    serde_json::from_value(Value::Object(base)).with_context(|| format!("config section '{section}'"))
}

fn seed_or_entropy(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed: {s}");
        s
    })
}

fn emit(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => write_text(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn require<T>(value: Option<T>, flag: &str) -> anyhow::Result<T> {
    value.ok_or_else(|| anyhow!("missing required --{flag}"))
}

fn simulate(a: SimulateArgs) -> anyhow::Result<()> {
    let params = TorsethaugenParams::new(require(a.hs, "hs")?, require(a.tp, "tp")?)?;
    let fs = a.fs.unwrap_or(1.28);
    let duration = a.duration.unwrap_or(1800.0);
    let grid = nyquist_grid(fs, DEFAULT_SPECTRUM_POINTS)?;
    let s = torsethaugen_spectrum(params, &grid)?;
    let seed = seed_or_entropy(a.seed);
    let rec = simulate_gaussian(&s, duration, fs, seed)?;
    emit(a.output.as_deref(), &format_record(&rec))
}

fn spectrum(a: SpectrumArgs) -> anyhow::Result<()> {
    if a.input.is_empty() {
        bail!("missing required --input");
    }
    let parzen = a.parzen.unwrap_or(60);
    let points = a.points.unwrap_or(DEFAULT_SPECTRUM_POINTS);
    let records = a
        .input
        .iter()
        .map(|p| read_record(p).with_context(|| p.display().to_string()))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let fs = records[0].fs;
    if let Some(r) = records.iter().find(|r| r.fs != fs) {
        bail!("all records need the same sampling rate ({fs} vs {})", r.fs);
    }
    let estimator = ParzenEstimator::new(fs, parzen, &nyquist_grid(fs, points)?)?;
    let spectra = records
        .iter()
        .zip(&a.input)
        .map(|(r, p)| estimator.estimate(r).with_context(|| p.display().to_string()))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let text = if spectra.len() == 1 && !a.as_sample {
        format_spectrum(&spectra[0])
    } else {
        let curves = spectra.iter().map(SpectralDensity::to_curve).collect();
        format_sample(&FunctionalSample::new(curves, "spectra")?)
    };
    emit(a.output.as_deref(), &text)
}

fn segment(a: SegmentArgs) -> anyhow::Result<()> {
    let input = require(a.input, "input")?;
    let rec = read_record(&input)?;
    let (text, sidecar) = if a.register {
        let spec = RegistrationSpec {
            n_grid: a.grid.unwrap_or(101),
            spline_order: a.order.unwrap_or(6),
            n_knots: a.knots.unwrap_or(61),
            constrain_upcross: a.constrain_upcross,
        };
        let set = build_wave_set(&rec, spec, "waves")?;
        let sample = if a.normalize {
            normalize_sample(&set.sample, &rec)?
        } else {
            set.sample.clone()
        };
        (format_sample(&sample), set.sidecar())
    } else {
        let waves = segment_waves(&rec)?;
        let mut text = String::from("t_start,t_end,period,interior_samples,upcross_fraction\n");
        for w in &waves {
            let up = w.upcross_fraction.map(|u| u.to_string()).unwrap_or_default();
            text.push_str(&format!(
                "{},{},{},{},{up}\n",
                w.t_start(),
                w.t_end(),
                w.period,
                w.interior_samples()
            ));
        }
        let std = rec.std_dev();
        let sidecar = WaveSetSidecar {
            n_waves: waves.len(),
            dropped: 0,
            periods: waves.iter().map(|w| w.period).collect(),
            record_std: std,
            hs_interval: 4.0 * std,
        };
        (text, sidecar)
    };
    emit(a.output.as_deref(), &text)?;
    let sidecar_path = a.sidecar.or_else(|| {
        a.output.as_ref().map(|o| {
            let mut p = o.clone().into_os_string();
            p.push(".json");
            PathBuf::from(p)
        })
    });
    if let Some(p) = sidecar_path {
        write_text(&p, &(serde_json::to_string_pretty(&sidecar)? + "\n"))?;
    }
    Ok(())
}

fn test(a: TestArgs) -> anyhow::Result<()> {
    let read = |p: PathBuf| read_sample(&p).with_context(|| p.display().to_string());
    let x = read(require(a.x, "x")?)?;
    let y = read(require(a.y, "y")?)?;
    let spec: BasisSpec = require(a.basis, "basis")?.parse()?;
    let calibration: Calibration = a.calibration.as_deref().unwrap_or("asymptotic").parse()?;
    let seed = match calibration {
        Calibration::Asymptotic => a.seed.unwrap_or(0),
        _ => seed_or_entropy(a.seed),
    };
    let result = fda2s::two_sample_test(&x, &y, &spec, &calibration, seed, true)?;
    emit(a.output.as_deref(), &(result.to_json() + "\n"))
}

fn parse_values(text: &str) -> fda2s::Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: f64 = t.parse().map_err(|_| fda2s::Error::Parse {
            line: i as u64 + 1,
            msg: format!("'{t}' is not a number"),
        })?;
        out.push(v);
    }
    Ok(out)
}

fn parse_probs(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| anyhow!("'{p}' is not a probability")))
        .collect()
}

fn quantiles(a: QuantilesArgs) -> anyhow::Result<()> {
    let probs = match &a.probs {
        Some(s) => parse_probs(s)?,
        None => DEFAULT_PROBS.to_vec(),
    };
    let (values, k) = match (&a.null_values, a.generate) {
        (Some(path), _) => (parse_values(&read_text(path)?)?, require(a.k, "k")?),
        (None, true) => {
            let spec: BasisSpec = a.basis.as_deref().unwrap_or("indicator:k=8").parse()?;
            let (m, n) = (a.m.unwrap_or(10), a.n.unwrap_or(10));
            let sim = SpectralSimConfig {
                duration: a.duration.unwrap_or(1800.0),
                fs: a.fs.unwrap_or(1.28),
                parzen_l: a.parzen.unwrap_or(60),
            };
            let params = TorsethaugenParams::new(a.hs.unwrap_or(2.0), a.tp.unwrap_or(4.0))?;
            let grid = nyquist_grid(sim.fs, DEFAULT_SPECTRUM_POINTS)?;
            let s = torsethaugen_spectrum(params, &grid)?;
            let estimator = ParzenEstimator::new(sim.fs, sim.parzen_l, &grid)?;
            let seed = seed_or_entropy(a.seed);
            // The observed spectra use a stream path no replicate index reaches.
            let observed = (0..m + n)
                .map(|i| {
                    let mut rng = substream(seed, &[u64::MAX, i as u64]);
                    estimator.estimate(&simulate_with_rng(&s, sim.duration, sim.fs, &mut rng)?)
                })
                .collect::<fda2s::Result<Vec<_>>>()?;
            let plan = ResamplingPlan::new(Method::SpectralMC, a.b.unwrap_or(500), seed, m, n)?;
            let null = spectral_mc_null(&observed[..m], &observed[m..], &sim, &spec, &plan)?;
            (null.values, spec.k())
        }
        (None, false) => bail!("give either --null-values FILE or --generate"),
    };
    if values.is_empty() {
        return Err(Empty("no null values".into()).into());
    }
    let table = quantile_table(&values, k, &probs)?;
    emit(a.output.as_deref(), &table.to_csv())
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("FDA2S_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| anyhow!("FDA2S_THREADS must be a positive integer, got '{v}'"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    let config: Option<Value> = match &cli.config {
        Some(p) => Some(serde_json::from_str(&read_text(p)?).with_context(|| p.display().to_string())?),
        None => None,
    };
    let c = config.as_ref();
    match cli.command {
        Command::Simulate(a) => simulate(merged(a, c, "simulate")?),
        Command::Spectrum(a) => spectrum(merged(a, c, "spectrum")?),
        Command::Segment(a) => segment(merged(a, c, "segment")?),
        Command::Test(a) => test(merged(a, c, "test")?),
        Command::Quantiles(a) => quantiles(merged(a, c, "quantiles")?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
