//! The `mo-pp` command line tool.
//!
//! Exit codes: 0 on success, 1 when a `rv check` or `converge` report does
//! not pass (the report is still written), 2 on configuration or input
//! errors.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::cone_space::SpaceDescriptor;
use crate::convergence::{
    complete_convergence_experiment, poisson_m_grid, tightness_diagnostic, ExperimentConfig,
    TightnessParams,
};
use crate::error::{invalid, Error, Result};
use crate::laplace::PrmMean;
use crate::measures::{Atom, AtomicMeasure, HomogeneousMeasure, TailSet};
use crate::mo_metric::{mo_distance, prohorov_distance};
use crate::prm::{
    map_prm, mark_prm, prm_ensemble, sample_prm, sample_prm_annuli, MarkKernel, MarkedMeasure,
    PrmSpec, Transform,
};
use crate::regvar::{rv_check, HeavyTailSampler, RadialLaw, RvCheckConfig, ScalingMode};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable capping the worker threads (0 = automatic).
pub const THREADS_ENV: &str = "MO_PP_THREADS";

#[derive(Parser, Debug, Serialize)]
#[command(name = "mo-pp", version, about = "Point processes, regular variation and M_O distances")]
struct Cli {
    /// Master seed for all random streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Sample, map and mark Poisson random measures.
    Prm {
        #[command(subcommand)]
        command: PrmCommand,
    },
    /// Prohorov and M_O distances between two atomic measures.
    Distance(DistanceArgs),
    /// Regular variation checks.
    Rv {
        #[command(subcommand)]
        command: RvCommand,
    },
    /// Convergence experiments.
    Converge {
        #[command(subcommand)]
        command: ConvergeCommand,
    },
    /// Tightness diagnostics for an ensemble of measures.
    Tightness(TightnessArgs),
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum PrmCommand {
    /// Draw one realization.
    Sample(SampleArgs),
    /// Apply a transformation to every atom.
    Map(MapArgs),
    /// Attach independent marks.
    Mark(MarkArgs),
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum RvCommand {
    /// Monte Carlo check of t P(X in b(t) A) -> mu(A).
    Check(RvArgs),
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ConvergeCommand {
    /// Complete convergence experiment from a JSON config.
    Complete(CompleteArgs),
}

#[derive(Args, Debug, Serialize)]
struct MeanArgs {
    /// Tail index of a one-sided mean measure on the line.
    #[arg(long, conflicts_with = "mean")]
    alpha: Option<f64>,
    /// Total angular weight for --alpha.
    #[arg(long, default_value_t = 1.0)]
    total_weight: f64,
    /// Mean measure JSON file.
    #[arg(long)]
    mean: Option<PathBuf>,
}

impl MeanArgs {
    fn resolve(&self) -> Result<HomogeneousMeasure> {
        match (&self.mean, self.alpha) {
            (Some(p), _) => read_json(p),
            (None, Some(a)) => HomogeneousMeasure::one_sided(a, self.total_weight),
            (None, None) => Err(invalid("one of --alpha or --mean is required")),
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct SampleArgs {
    #[command(flatten)]
    mean: MeanArgs,
    /// Truncation radius: no atoms closer to the cone.
    #[arg(long)]
    rmin: f64,
    /// Time horizon T for a process on [0, T] x S.
    #[arg(long)]
    horizon: Option<f64>,
    /// Build the realization ring by ring.
    #[arg(long)]
    rings: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ConeArg {
    Origin,
    Axes,
}

#[derive(Args, Debug, Serialize)]
struct InputArgs {
    /// Measure as JSON, or CSV with header `t?,x1..xd,w`.
    #[arg(long)]
    input: PathBuf,
    /// Cone for CSV input.
    #[arg(long, value_enum, default_value_t = ConeArg::Origin)]
    cone: ConeArg,
}

#[derive(Args, Debug, Serialize)]
struct MapArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Multiply every point by this factor.
    #[arg(long, conflicts_with = "power", required_unless_present = "power")]
    scale: Option<f64>,
    /// Raise the cone distance to this power, keeping the direction.
    #[arg(long)]
    power: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
struct MarkArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Bernoulli retention probability.
    #[arg(long, conflicts_with = "labels", required_unless_present = "labels")]
    q: Option<f64>,
    /// Labels of a discrete kernel.
    #[arg(long, value_delimiter = ',', requires = "probs")]
    labels: Option<Vec<String>>,
    /// Label probabilities.
    #[arg(long, value_delimiter = ',')]
    probs: Option<Vec<f64>>,
}

#[derive(Args, Debug, Serialize)]
struct DistanceArgs {
    /// First measure (JSON).
    #[arg(long)]
    a: PathBuf,
    /// Second measure (JSON).
    #[arg(long)]
    b: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum RadialArg {
    PurePareto,
    LogPerturbed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ScalingArg {
    Analytic,
    Quantile,
}

#[derive(Args, Debug, Serialize)]
struct RvArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = RadialArg::PurePareto)]
    radial: RadialArg,
    /// Exponent of the logarithmic factor.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    t_grid: Vec<f64>,
    /// Tail sets: a JSON array inline or a path to one.
    #[arg(long)]
    sets: String,
    /// `i:lambda` pairs comparing `lambda A_i` with `A_i`.
    #[arg(long, value_delimiter = ',')]
    ratio: Vec<String>,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, default_value_t = 100_000)]
    samples_per_rep: usize,
    #[arg(long, value_enum, default_value_t = ScalingArg::Analytic)]
    scaling: ScalingArg,
}

#[derive(Args, Debug, Serialize)]
struct CompleteArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct TightnessArgs {
    /// JSON array of measures; otherwise a PRM ensemble is sampled.
    #[arg(long, conflicts_with_all = ["alpha", "mean"])]
    input: Option<PathBuf>,
    #[command(flatten)]
    mean: MeanArgs,
    /// Truncation radius of the sampled ensemble.
    #[arg(long, default_value_t = 0.1)]
    rmin: f64,
    /// Size of the sampled ensemble.
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    r_grid: Vec<f64>,
    /// Mass bounds M_i.
    #[arg(long, value_delimiter = ',', conflicts_with = "m_level")]
    m_grid: Option<Vec<f64>>,
    /// Choose M_i as this quantile of the Poisson shell count.
    #[arg(long)]
    m_level: Option<f64>,
    #[arg(long)]
    box_bound: f64,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    #[arg(long, default_value_t = 1.0)]
    eps_prime: f64,
}

/// Runs the tool on `argv` (including the program name) and returns the
/// exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    match execute(&cli) {
        Ok(ok) => i32::from(!ok),
        Err(e) => {
            eprintln!("mo-pp: {e}");
            2
        }
    }
}

fn configure_threads() {
    let n = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if n > 0 {
        // fails only if the pool already exists, which is fine
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

enum Output {
    Json(Value),
    Text(String),
}

/// Returns whether the command's checks passed.
fn execute(cli: &Cli) -> Result<bool> {
    let seed = cli.seed.unwrap_or(0);
    let (out, ok) = match &cli.command {
        Command::Prm { command } => (prm(cli, command, seed)?, true),
        Command::Distance(a) => {
            no_csv(cli)?;
            let m = read_measure_json(&a.a)?;
            let n = read_measure_json(&a.b)?;
            let p = prohorov_distance(&m, &n)?;
            let d = mo_distance(&m, &n)?;
            let result = json!({"prohorov": p.value, "mo": d});
            (envelope(seed, json!(cli.command), result), true)
        }
        Command::Rv {
            command: RvCommand::Check(a),
        } => {
            no_csv(cli)?;
            let radial = match a.radial {
                RadialArg::PurePareto => RadialLaw::PurePareto,
                RadialArg::LogPerturbed => RadialLaw::LogPerturbed { gamma: a.gamma },
            };
            let sampler = HeavyTailSampler::one_sided(a.alpha, radial)?;
            let cfg = RvCheckConfig {
                t_grid: a.t_grid.clone(),
                tail_sets: parse_sets(&a.sets)?,
                ratio_pairs: a.ratio.iter().map(|s| parse_ratio(s)).collect::<Result<_>>()?,
                reps: a.reps,
                samples_per_rep: a.samples_per_rep,
                scaling: match a.scaling {
                    ScalingArg::Analytic => ScalingMode::Analytic,
                    ScalingArg::Quantile => ScalingMode::Quantile,
                },
                seed,
            };
            let rep = rv_check(&sampler, &sampler.limit_measure(), &cfg)?;
            let config = json!({"alpha": a.alpha, "radial": radial, "check": cfg});
            let pass = rep.pass;
            (envelope(seed, config, json!(rep)), pass)
        }
        Command::Converge {
            command: ConvergeCommand::Complete(a),
        } => {
            no_csv(cli)?;
            let mut cfg: ExperimentConfig = read_json(&a.config)?;
            let seed = cli.seed.unwrap_or(cfg.seed);
            cfg.seed = seed;
            let rep = complete_convergence_experiment(&cfg)?;
            let pass = rep.pass;
            (envelope(seed, json!(cfg), json!(rep)), pass)
        }
        Command::Tightness(a) => {
            no_csv(cli)?;
            (tightness(cli, a, seed)?, true)
        }
    };
    write_output(cli.out.as_deref(), &out)?;
    Ok(ok)
}

fn no_csv(cli: &Cli) -> Result<()> {
    if cli.format == Some(Format::Csv) {
        return Err(invalid("csv output is only available for prm subcommands"));
    }
    Ok(())
}

fn envelope(seed: u64, config: Value, result: Value) -> Output {
    Output::Json(json!({
        "tool": "mo-pp",
        "version": VERSION,
        "seed": seed,
        "config": config,
        "result": result,
    }))
}

fn prm(cli: &Cli, command: &PrmCommand, seed: u64) -> Result<Output> {
    let csv = cli.format != Some(Format::Json);
    let config = json!(command);
    match command {
        PrmCommand::Sample(a) => {
            let spec = PrmSpec::new(a.mean.resolve()?, a.rmin, a.horizon)?;
            let n = match a.rings {
                Some(j) => sample_prm_annuli(&spec, seed, j)?,
                None => sample_prm(&spec, seed),
            };
            if csv {
                Ok(Output::Text(measure_csv(&n)))
            } else {
                let result = json!({
                    "expected_count": spec.expected_count(),
                    "count": n.len(),
                    "measure": n,
                });
                Ok(envelope(seed, config, result))
            }
        }
        PrmCommand::Map(a) => {
            let n = read_measure(&a.input)?;
            let t = match (a.scale, a.power) {
                (Some(lambda), _) => Transform::ScaleBy { lambda },
                (None, Some(beta)) => Transform::NormPower { beta },
                (None, None) => return Err(invalid("one of --scale or --power is required")),
            };
            let m = map_prm(&n, t)?;
            if csv {
                Ok(Output::Text(measure_csv(&m)))
            } else {
                Ok(envelope(seed, config, json!({"transform": t, "measure": m})))
            }
        }
        PrmCommand::Mark(a) => {
            let n = read_measure(&a.input)?;
            let kernel = match (a.q, &a.labels, &a.probs) {
                (Some(q), _, _) => MarkKernel::bernoulli(q)?,
                (None, Some(l), Some(p)) => MarkKernel::discrete(l.clone(), p.clone())?,
                _ => return Err(invalid("one of --q or --labels with --probs is required")),
            };
            let marked = mark_prm(&n, &kernel, seed)?;
            if csv {
                Ok(Output::Text(marked_csv(&marked)))
            } else {
                Ok(envelope(seed, config, json!({"marked": marked})))
            }
        }
    }
}

fn tightness(cli: &Cli, a: &TightnessArgs, seed: u64) -> Result<Output> {
    let sampled_mean = if a.input.is_none() {
        Some(a.mean.resolve()?)
    } else {
        None
    };
    let ensemble: Vec<AtomicMeasure> = match (&a.input, &sampled_mean) {
        (Some(p), _) => read_json(p)?,
        (None, Some(mean)) => {
            let spec = PrmSpec::new(mean.clone(), a.rmin, None)?;
            prm_ensemble(&spec, seed, a.reps)
        }
        (None, None) => unreachable!("mean resolved above"),
    };
    let m_grid = match (&a.m_grid, a.m_level, &sampled_mean) {
        (Some(m), _, _) => m.clone(),
        (None, Some(level), Some(mean)) => {
            poisson_m_grid(&PrmMean::new(mean.clone(), None)?, &a.r_grid, level)?
        }
        (None, Some(_), None) => return Err(invalid("--m-level needs a sampled PRM ensemble")),
        (None, None, _) => return Err(invalid("one of --m-grid or --m-level is required")),
    };
    let params = TightnessParams {
        r_grid: a.r_grid.clone(),
        m_grid,
        box_bound: a.box_bound,
        eps: a.eps,
        eps_prime: a.eps_prime,
    };
    let table = tightness_diagnostic(&ensemble, &params)?;
    let config = json!({"command": cli.command, "params": params});
    Ok(envelope(seed, config, json!(table)))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn read_measure(a: &InputArgs) -> Result<AtomicMeasure> {
    let is_csv = a
        .input
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        parse_measure_csv(&read_text(&a.input)?, a.cone)
    } else {
        read_measure_json(&a.input)
    }
}

/// A measure JSON, or the output of `prm sample --format json`.
fn read_measure_json(path: &Path) -> Result<AtomicMeasure> {
    let mut v: Value = read_json(path)?;
    if let Some(inner) = v.pointer_mut("/result/measure") {
        v = inner.take();
    }
    serde_json::from_value(v).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn parse_sets(s: &str) -> Result<Vec<TailSet>> {
    let text = if s.trim_start().starts_with('[') {
        s.to_owned()
    } else {
        read_text(Path::new(s))?
    };
    serde_json::from_str(&text).map_err(|e| invalid(format!("tail sets: {e}")))
}

fn parse_ratio(s: &str) -> Result<(usize, f64)> {
    let bad = || invalid(format!("ratio must look like i:lambda, got {s:?}"));
    let (i, l) = s.split_once(':').ok_or_else(bad)?;
    Ok((i.trim().parse().map_err(|_| bad())?, l.trim().parse().map_err(|_| bad())?))
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_header(space: &SpaceDescriptor, mark: bool) -> String {
    let mut cols: Vec<String> = Vec::new();
    if space.has_time() {
        cols.push("t".into());
    }
    cols.extend((1..=space.dim()).map(|i| format!("x{i}")));
    cols.push("w".into());
    if mark {
        cols.push("mark".into());
    }
    cols.join(",")
}

fn atom_row(out: &mut String, a: &Atom, mark: Option<&str>) {
    let mut fields: Vec<String> = a.location.coords().iter().map(|&v| fmt_f64(v)).collect();
    fields.push(fmt_f64(a.weight));
    if let Some(m) = mark {
        fields.push(m.to_owned());
    }
    let _ = writeln!(out, "{}", fields.join(","));
}

fn measure_csv(m: &AtomicMeasure) -> String {
    let mut out = csv_header(&m.space(), false);
    out.push('\n');
    for a in m.atoms() {
        atom_row(&mut out, a, None);
    }
    out
}

fn marked_csv(m: &MarkedMeasure) -> String {
    let mut out = csv_header(&m.space, true);
    out.push('\n');
    for a in &m.atoms {
        atom_row(&mut out, &a.atom, Some(&m.labels[a.mark]));
    }
    out
}

fn parse_measure_csv(text: &str, cone: ConeArg) -> Result<AtomicMeasure> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| invalid("empty CSV input"))?
        .split(',')
        .map(str::trim)
        .collect();
    let time = header.first() == Some(&"t");
    let w_col = header
        .iter()
        .position(|&h| h == "w")
        .ok_or_else(|| invalid("CSV header needs a w column"))?;
    let dim = w_col - usize::from(time);
    let expected: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    if header[usize::from(time)..w_col] != expected.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        return Err(invalid("CSV header must be t?,x1..xd,w[,mark]"));
    }
    let base = match cone {
        ConeArg::Origin => SpaceDescriptor::euclidean_origin(dim)?,
        ConeArg::Axes => SpaceDescriptor::euclidean_axes(dim)?,
    };
    let space = if time { base.make_product_space()? } else { base };
    let atoms = lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != header.len() {
                return Err(invalid(format!("CSV row {} has {} fields", i + 2, f.len())));
            }
            let nums = f[..=w_col]
                .iter()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| invalid(format!("CSV row {}: bad number {v:?}", i + 2)))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(Atom::new(nums[..w_col].to_vec(), nums[w_col]))
        })
        .collect::<Result<Vec<_>>>()?;
    AtomicMeasure::new(space, atoms)
}

fn write_output(path: Option<&Path>, out: &Output) -> Result<()> {
    let bytes = match out {
        Output::Json(v) => {
            let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::InvalidInput(e.to_string()))?;
            s.push('\n');
            s
        }
        Output::Text(s) => s.clone(),
    };
    match path {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| invalid(format!("cannot write output: {e}")))
        }
        Some(p) => write_atomic(p, bytes.as_bytes()),
    }
}

/// Write to a temporary file in the target directory, then rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let fail = |e: std::io::Error| invalid(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}
