//! Command-line front end for the `kdfe` library: exact MISE evaluation,
//! bandwidth/order selection, mixture fitting, cdf estimation, and the
//! Monte Carlo study harness.
//!
//! Output conventions: tabular results go to stdout as headered CSV, single
//! selections and fits as pretty-printed JSON. Floats are printed with
//! Rust's shortest round-trip formatting, so reruns of a deterministic
//! command are byte-identical.

use std::fmt::Display;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use kdfe::bandwidth::{
    asymptotic_bandwidth, cv_bandwidth, minimize_h, minimize_h_r, nrr_bandwidth, plugin_select,
    r_max_for_n, BandwidthChoice, ComponentRule, DEFAULT_M_MAX,
};
use kdfe::emfit::select_m;
use kdfe::estimator::{rearrange, FittedCdf};
use kdfe::kernels::kernel_cdf;
use kdfe::mise::{exact_mise, relative_mise};
use kdfe::sim::{figure_data, log_spaced_counts, run_experiment, summarize, OrderSearch};
use kdfe::{
    catalog, ExperimentConfig, KernelSpec, MethodSpec, ModelCriterion, NormalMixture,
    ReferenceDistribution, CATALOG_IDS,
};

#[derive(Parser)]
#[command(
    name = "kdfe",
    version,
    about = "Exact MISE, bandwidth selection, and simulation tools for kernel distribution function estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact MISE of a kernel cdf estimator under a normal mixture.
    Mise(MiseArgs),
    /// Select a bandwidth (and kernel order) by one of the available rules.
    Bandwidth(BandwidthArgs),
    /// Fit a normal mixture to a sample by maximum likelihood (EM).
    Fit(FitArgs),
    /// Evaluate a kernel cdf estimate on a grid.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo comparison of estimators from a config file.
    Simulate(SimulateArgs),
    /// Deterministic relative-risk curves over a range of sample sizes.
    Figure(FigureArgs),
    /// List the built-in distributions, or tabulate a kernel cdf.
    Catalog(CatalogArgs),
}

#[derive(Args)]
struct MiseArgs {
    /// Catalog id (e.g. "mw3") or path to a mixture JSON file
    /// {"weights": [...], "means": [...], "sds": [...]}.
    #[arg(long)]
    mixture: String,
    /// Sample size.
    #[arg(long)]
    n: u64,
    /// Kernel half-order r >= 1, or "inf" for the sinc kernel.
    #[arg(long)]
    r: KernelSpec,
    /// Bandwidth: a single value or a grid "lo:hi:steps".
    #[arg(long)]
    h: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    /// Exact-risk minimizer under a known mixture (needs --mixture, --n).
    Oracle,
    /// Fit a mixture with AIC, minimize the exact risk under the fit.
    PluginAic,
    /// Fit a mixture with BIC, minimize the exact risk under the fit.
    PluginBic,
    /// Leave-one-out cross-validation (second-order kernel).
    Cv,
    /// Normal reference rule from spread estimates.
    Nrr,
    /// Asymptotically optimal bandwidth formula (needs --mixture, --n).
    Asymptotic,
}

#[derive(Args)]
struct BandwidthArgs {
    /// Sample file: one numeric value per line (optional header line).
    #[arg(long, conflicts_with = "mixture")]
    data: Option<PathBuf>,
    /// Catalog id or mixture JSON path, for rules that use a known truth.
    #[arg(long)]
    mixture: Option<String>,
    /// Sample size, required with --mixture.
    #[arg(long, conflicts_with = "data")]
    n: Option<u64>,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Cap on the kernel half-order searched (default: calibrated per-n).
    #[arg(long)]
    rmax: Option<u32>,
    /// Let order searches also consider the sinc kernel.
    #[arg(long)]
    include_inf: bool,
    /// Fix the kernel half-order (nrr, asymptotic, single-order oracle).
    #[arg(long, conflicts_with = "rmax")]
    r: Option<KernelSpec>,
    /// Cap on fitted mixture sizes for the plug-in rules.
    #[arg(long)]
    mmax: Option<u32>,
    /// EM restarts per mixture size for the plug-in rules.
    #[arg(long, default_value_t = 10)]
    restarts: u32,
    /// RNG seed for the plug-in EM fits.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CriterionArg {
    Aic,
    Bic,
}

impl From<CriterionArg> for ModelCriterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Aic => ModelCriterion::Aic,
            CriterionArg::Bic => ModelCriterion::Bic,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Sample file: one numeric value per line (optional header line).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    criterion: CriterionArg,
    /// Largest mixture size tried.
    #[arg(long, default_value_t = DEFAULT_M_MAX)]
    mmax: u32,
    /// EM restarts per mixture size.
    #[arg(long, default_value_t = 10)]
    restarts: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EstimateArgs {
    /// Sample file: one numeric value per line (optional header line).
    #[arg(long)]
    data: PathBuf,
    /// Bandwidth; 0 gives the raw empirical distribution function.
    #[arg(long)]
    h: f64,
    /// Kernel half-order r >= 1, or "inf" for the sinc kernel.
    #[arg(long)]
    r: KernelSpec,
    /// Evaluation grid "lo:hi:steps" (or a single point).
    #[arg(long, allow_hyphen_values = true)]
    grid: String,
    /// Sort the estimate into a valid cdf before output.
    #[arg(long)]
    rearrange: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment description JSON (see ExperimentConfig).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Ignore the config's scale-down factor and run every configured
    /// replication; prints a projected runtime before starting.
    #[arg(long)]
    full_scale: bool,
}

#[derive(Args)]
struct FigureArgs {
    /// Catalog id or mixture JSON path.
    #[arg(long)]
    mixture: String,
    /// Smallest sample size.
    #[arg(long)]
    nmin: u64,
    /// Largest sample size.
    #[arg(long)]
    nmax: u64,
    /// Number of log-spaced sample sizes.
    #[arg(long)]
    points: usize,
    /// Cap on the kernel half-order (default: calibrated per-n).
    #[arg(long)]
    rmax: Option<u32>,
}

#[derive(Args)]
struct CatalogArgs {
    /// Tabulate this kernel's cdf instead of listing distributions.
    #[arg(long, requires = "x")]
    kernel: Option<KernelSpec>,
    /// Evaluation points "lo:hi:steps" (or a single point).
    #[arg(long, requires = "kernel", allow_hyphen_values = true)]
    x: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Mise(a) => run_mise(a),
        Command::Bandwidth(a) => run_bandwidth(a),
        Command::Fit(a) => run_fit(a),
        Command::Estimate(a) => run_estimate(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Figure(a) => run_figure(a),
        Command::Catalog(a) => run_catalog(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Resolves a mixture argument: a catalog id first, then a JSON file path.
fn load_mixture(spec: &str) -> Result<NormalMixture> {
    if let Some(d) = catalog(spec) {
        return d
            .as_mixture()
            .cloned()
            .ok_or_else(|| anyhow!("catalog distribution '{spec}' is not a normal mixture"));
    }
    let path = Path::new(spec);
    if !path.exists() {
        bail!(
            "'{spec}' is neither a catalog id nor an existing file; known ids: {}",
            CATALOG_IDS.map(|(id, _)| id).join(", ")
        );
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {spec}"))?;
    serde_json::from_str(&text).with_context(|| format!("parsing mixture file {spec}"))
}

/// Parses sample text: one value per line, comma-separated cells allowed,
/// a single non-numeric header line skipped.
fn parse_sample(text: &str, origin: &str) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        for cell in line.split(',') {
            let cell = cell.trim();
            if cell.is_empty() {
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                Ok(v) => bail!("{origin}:{}: non-finite sample value {v}", i + 1),
                Err(_) if i == 0 => {
                    // Header line; discard anything parsed from it.
                    values.clear();
                    break;
                }
                Err(_) => bail!("{origin}:{}: cannot parse '{cell}' as a number", i + 1),
            }
        }
    }
    ensure!(!values.is_empty(), "{origin}: no sample values found");
    Ok(values)
}

fn read_sample(path: &Path) -> Result<Vec<f64>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_sample(&text, &path.display().to_string())
}

/// A bare number, or "lo:hi:steps" for `steps` evenly spaced points
/// including both ends.
fn parse_grid(s: &str) -> Result<Vec<f64>> {
    if !s.contains(':') {
        let v: f64 = s
            .parse()
            .map_err(|_| anyhow!("cannot parse '{s}' as a number or lo:hi:steps grid"))?;
        ensure!(v.is_finite(), "grid point must be finite, got {v}");
        return Ok(vec![v]);
    }
    let parts: Vec<&str> = s.split(':').collect();
    ensure!(parts.len() == 3, "grid spec must be lo:hi:steps, got '{s}'");
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| anyhow!("bad grid lower end '{}'", parts[0]))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| anyhow!("bad grid upper end '{}'", parts[1]))?;
    let steps: usize = parts[2]
        .parse()
        .map_err(|_| anyhow!("bad grid step count '{}'", parts[2]))?;
    ensure!(
        lo.is_finite() && hi.is_finite() && lo < hi,
        "grid needs finite lo < hi, got {lo}:{hi}"
    );
    ensure!(steps >= 2, "grid needs at least 2 steps, got {steps}");
    Ok((0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect())
}

/// Empty cell for `None`, plain `Display` otherwise.
fn cell<T: Display>(v: &Option<T>) -> String {
    v.as_ref().map(|v| v.to_string()).unwrap_or_default()
}

/// Quotes a CSV field if it contains a comma, quote, or newline.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Stable one-token label for a configured method, used in output tables.
fn method_label(m: &MethodSpec) -> String {
    fn rule(r: &ComponentRule) -> String {
        match r {
            ComponentRule::Aic => "aic".into(),
            ComponentRule::Bic => "bic".into(),
            ComponentRule::Fixed(m) => format!("m{m}"),
        }
    }
    match m {
        MethodSpec::Edf => "edf".into(),
        MethodSpec::Oracle { orders: OrderSearch::Joint } => "oracle_joint".into(),
        MethodSpec::Oracle { orders: OrderSearch::SecondOrder } => "oracle_r1".into(),
        MethodSpec::Cv => "cv".into(),
        MethodSpec::Nrr { kernel } => format!("nrr_{kernel}"),
        MethodSpec::Plugin { rule: r, orders: OrderSearch::Joint } => {
            format!("plugin_{}_joint", rule(r))
        }
        MethodSpec::Plugin { rule: r, orders: OrderSearch::SecondOrder } => {
            format!("plugin_{}_r1", rule(r))
        }
        MethodSpec::Parametric { rule: r } => format!("parametric_{}", rule(r)),
    }
}

fn run_mise(a: MiseArgs) -> Result<()> {
    let nm = load_mixture(&a.mixture)?;
    ensure!(a.n >= 1, "--n must be at least 1");
    let grid = parse_grid(&a.h)?;
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    writeln!(out, "h,isb,iv,mise,relative_mise")?;
    for &h in &grid {
        ensure!(h >= 0.0, "bandwidth must be >= 0, got {h}");
        let b = exact_mise(&nm, a.r, h, a.n)?;
        let rel = relative_mise(b.mise, &nm, a.n);
        writeln!(out, "{h},{},{},{},{rel}", b.isb, b.iv, b.mise)?;
    }
    out.flush()?;
    Ok(())
}

fn mixture_and_n(a: &BandwidthArgs) -> Result<(NormalMixture, u64)> {
    let spec = a
        .mixture
        .as_deref()
        .ok_or_else(|| anyhow!("this method needs --mixture and --n"))?;
    let n = a.n.ok_or_else(|| anyhow!("--n is required with --mixture"))?;
    ensure!(n >= 1, "--n must be at least 1");
    Ok((load_mixture(spec)?, n))
}

fn data_sample(a: &BandwidthArgs) -> Result<Vec<f64>> {
    let path = a
        .data
        .as_deref()
        .ok_or_else(|| anyhow!("this method needs --data <sample file>"))?;
    read_sample(path)
}

/// Linearly interpolated sample quartiles; sorts a copy of the input.
fn sample_quartiles(xs: &[f64]) -> (f64, f64) {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let idx = p * (s.len() - 1) as f64;
        let lo = idx.floor() as usize;
        let frac = idx - lo as f64;
        if lo + 1 < s.len() {
            s[lo] * (1.0 - frac) + s[lo + 1] * frac
        } else {
            s[lo]
        }
    };
    (q(0.25), q(0.75))
}

fn mle_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

fn run_bandwidth(a: BandwidthArgs) -> Result<()> {
    let choice = match a.method {
        MethodArg::Oracle => {
            let (nm, n) = mixture_and_n(&a)?;
            match a.r {
                Some(k) => minimize_h(&nm, k, n)?,
                None => {
                    let rmax = a.rmax.unwrap_or_else(|| r_max_for_n(n));
                    minimize_h_r(&nm, n, rmax, a.include_inf)?
                }
            }
        }
        MethodArg::PluginAic | MethodArg::PluginBic => {
            ensure!(
                a.r.is_none(),
                "the plug-in rule searches the order; cap it with --rmax instead of --r"
            );
            let sample = data_sample(&a)?;
            let n = sample.len() as u64;
            let rule = if matches!(a.method, MethodArg::PluginAic) {
                ComponentRule::Aic
            } else {
                ComponentRule::Bic
            };
            let rmax = a.rmax.unwrap_or_else(|| r_max_for_n(n));
            plugin_select(&sample, rule, rmax, a.include_inf, a.mmax, a.restarts, a.seed)?
        }
        MethodArg::Cv => {
            ensure!(
                a.r.is_none() || a.r == Some(KernelSpec::Finite(1)),
                "cross-validation is second-order only; drop --r"
            );
            let sample = data_sample(&a)?;
            cv_bandwidth(&sample, KernelSpec::Finite(1), None)?
        }
        MethodArg::Nrr => {
            let k = a.r.unwrap_or(KernelSpec::Finite(1));
            if let Some(path) = a.data.as_deref() {
                let sample = read_sample(path)?;
                let (q1, q3) = sample_quartiles(&sample);
                nrr_bandwidth(mle_sd(&sample), q3 - q1, sample.len() as u64, k)?
            } else {
                let (nm, n) = mixture_and_n(&a)?;
                let iqr = nm.quantile(0.75)? - nm.quantile(0.25)?;
                nrr_bandwidth(nm.sd(), iqr, n, k)?
            }
        }
        MethodArg::Asymptotic => {
            let (nm, n) = mixture_and_n(&a)?;
            match a.rmax {
                Some(cap) => {
                    ensure!(cap >= 1, "--rmax must be at least 1");
                    let mut best: Option<BandwidthChoice> = None;
                    for r in 1..=cap {
                        let c = asymptotic_bandwidth(&nm, KernelSpec::Finite(r), n)?;
                        let better = match (&best, c.predicted_mise) {
                            (None, _) => true,
                            (Some(b), Some(p)) => b.predicted_mise.map_or(true, |bp| p < bp),
                            (Some(_), None) => false,
                        };
                        if better {
                            best = Some(c);
                        }
                    }
                    best.expect("cap >= 1 always yields a candidate")
                }
                None => {
                    let k = a.r.unwrap_or(KernelSpec::Finite(1));
                    asymptotic_bandwidth(&nm, k, n)?
                }
            }
        }
    };
    println!("{}", serde_json::to_string_pretty(&choice)?);
    Ok(())
}

fn run_fit(a: FitArgs) -> Result<()> {
    let sample = read_sample(&a.data)?;
    let fit = select_m(&sample, a.mmax, a.criterion.into(), a.restarts, a.seed)?;
    println!("{}", serde_json::to_string_pretty(&fit)?);
    Ok(())
}

fn run_estimate(a: EstimateArgs) -> Result<()> {
    let sample = read_sample(&a.data)?;
    let fc = FittedCdf::new(sample, a.h, a.r)?;
    let grid = parse_grid(&a.grid)?;
    let values = if a.rearrange { rearrange(&fc, &grid)? } else { fc.eval_grid(&grid) };
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    writeln!(out, "x,fhat")?;
    for (x, v) in grid.iter().zip(&values) {
        writeln!(out, "{x},{v}")?;
    }
    out.flush()?;
    Ok(())
}

fn run_simulate(a: SimulateArgs) -> Result<()> {
    let raw = fs::read(&a.config)
        .with_context(|| format!("reading config {}", a.config.display()))?;
    let mut cfg: ExperimentConfig = serde_json::from_slice(&raw)
        .with_context(|| format!("parsing config {}", a.config.display()))?;
    if a.full_scale {
        cfg.scale = 1.0;
        let mut probe = cfg.clone();
        probe.replications = cfg.replications.min(3).max(2);
        let t0 = Instant::now();
        run_experiment(&probe)?;
        let per_rep = t0.elapsed().as_secs_f64() / probe.effective_replications() as f64;
        let projected = per_rep * cfg.effective_replications() as f64;
        eprintln!(
            "full scale: {} replications, projected runtime {:.1} min",
            cfg.effective_replications(),
            projected / 60.0
        );
    }
    let records = run_experiment(&cfg)?;
    let baseline = cfg
        .methods
        .iter()
        .position(|m| matches!(m, MethodSpec::Edf))
        .unwrap_or(0);
    let summaries = summarize(&records, &cfg.methods, baseline)?;
    let labels: Vec<String> = cfg.methods.iter().map(method_label).collect();

    fs::create_dir_all(&a.out)
        .with_context(|| format!("creating output dir {}", a.out.display()))?;

    let mut records_csv = String::from("replication,method,ise,h,r,m,error\n");
    for rec in &records {
        for (label, o) in labels.iter().zip(&rec.outcomes) {
            let error = o.error.as_deref().map(csv_field).unwrap_or_default();
            records_csv.push_str(&format!(
                "{},{label},{},{},{},{},{error}\n",
                rec.replication,
                cell(&o.ise),
                cell(&o.h),
                cell(&o.kernel),
                cell(&o.m),
            ));
        }
    }
    fs::write(a.out.join("records.csv"), records_csv)?;

    let mut summary_csv =
        String::from("method,used,mean_ise,baseline_mean_ise,relative_reduction_pct,p_value\n");
    for (label, s) in labels.iter().zip(&summaries) {
        summary_csv.push_str(&format!(
            "{label},{},{},{},{},{}\n",
            s.used, s.mean_ise, s.baseline_mean_ise, s.relative_reduction_pct, s.p_value
        ));
    }
    fs::write(a.out.join("summary.csv"), summary_csv)?;

    let digest = Sha256::digest(&raw);
    let config_sha256: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    let manifest = serde_json::json!({
        "seed": cfg.seed,
        "config_sha256": config_sha256,
        "effective_replications": cfg.effective_replications(),
        "baseline": labels[baseline],
        "versions": {
            "kdfe": kdfe::VERSION,
            "kdfe-cli": env!("CARGO_PKG_VERSION"),
        },
    });
    let mut manifest_text = serde_json::to_string_pretty(&manifest)?;
    manifest_text.push('\n');
    fs::write(a.out.join("manifest.json"), manifest_text)?;

    eprintln!(
        "wrote {}, {}, {}",
        a.out.join("records.csv").display(),
        a.out.join("summary.csv").display(),
        a.out.join("manifest.json").display()
    );
    Ok(())
}

fn run_figure(a: FigureArgs) -> Result<()> {
    let nm = load_mixture(&a.mixture)?;
    let grid = log_spaced_counts(a.nmin, a.nmax, a.points)?;
    let rows = figure_data(&nm, &grid, a.rmax, true)?;
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    writeln!(out, "n,rel_second_order,rel_sinc,rel_joint,r_star,rel_bound,rel_nrr")?;
    for r in &rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.n, r.rel_second_order, r.rel_sinc, r.rel_joint, r.kernel_star, r.rel_bound, r.rel_nrr
        )?;
    }
    out.flush()?;
    Ok(())
}

fn run_catalog(a: CatalogArgs) -> Result<()> {
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    if let (Some(k), Some(xspec)) = (a.kernel, a.x.as_deref()) {
        writeln!(out, "x,cdf")?;
        for x in parse_grid(xspec)? {
            writeln!(out, "{x},{}", kernel_cdf(k, x)?)?;
        }
        out.flush()?;
        return Ok(());
    }
    writeln!(out, "id,label,family,components,mean,sd")?;
    for (id, label) in CATALOG_IDS {
        let d = catalog(id).expect("catalog ids resolve");
        let family = match &d {
            ReferenceDistribution::NormalMixture(_) => "normal_mixture",
            ReferenceDistribution::Gamma { .. } => "gamma",
            ReferenceDistribution::StudentT { .. } => "student_t",
        };
        let components = d
            .as_mixture()
            .map(|nm| nm.num_components().to_string())
            .unwrap_or_default();
        writeln!(
            out,
            "{id},{},{family},{components},{},{}",
            csv_field(label),
            d.mean(),
            d.sd()?
        )?;
    }
    out.flush()?;
    Ok(())
}
