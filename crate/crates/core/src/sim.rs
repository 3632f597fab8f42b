//! Reproducible Monte-Carlo experiments comparing distribution-function
//! estimators, and the deterministic risk curves behind the figure data.
//!
//! [`run_experiment`] draws replications from a known truth, runs every
//! configured selector on each sample, and records per-replication
//! integrated squared errors. Replications use indexed RNG sub-streams of
//! the master seed, so results are bit-identical across runs and do not
//! depend on evaluation order. Selector failures (e.g. EM refusing a
//! sample) are recorded per replication, not fatal; [`summarize`] compares
//! methods pairwise over the replications where both succeeded, which is
//! exactly how fit-failure exclusions are handled.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bandwidth::{
    cv_bandwidth, minimize_h, minimize_h_r, nrr_bandwidth, r_max_for_n, BandwidthChoice,
    ComponentRule,
};
use crate::emfit::{self, MixtureFit, ModelCriterion};
use crate::error::{Error, Result};
use crate::estimator::{ise, ise_fn, FittedCdf};
use crate::kernels::KernelSpec;
use crate::mise::{exact_mise, mise_star, relative_mise};
use crate::mixture::{catalog, NormalMixture, ReferenceDistribution};
use crate::specfun::student_t_cdf;

/// Relative tolerance for the lower-bound quadrature in [`figure_data`].
const BOUND_REL_TOL: f64 = 1e-9;

/// The sampling distribution of an experiment: a catalog id or an inline
/// definition.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistributionSpec {
    Catalog(String),
    Inline(ReferenceDistribution),
}

impl DistributionSpec {
    pub fn resolve(&self) -> Result<ReferenceDistribution> {
        match self {
            DistributionSpec::Catalog(id) => catalog(id).ok_or_else(|| {
                Error::InvalidInput(format!("unknown catalog distribution '{id}'"))
            }),
            DistributionSpec::Inline(d) => {
                d.validate()?;
                Ok(d.clone())
            }
        }
    }
}

/// Which kernel orders a plug-in or oracle selector searches.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderSearch {
    /// Jointly optimize h and the kernel order up to the configured cap.
    #[default]
    Joint,
    /// Fix the second-order kernel (r = 1) and optimize h only.
    SecondOrder,
}

fn default_nrr_kernel() -> KernelSpec {
    KernelSpec::Finite(1)
}

/// One estimator/selector to run on every replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodSpec {
    /// The raw empirical distribution function (h = 0).
    Edf,
    /// Infeasible oracle: bandwidth (and order) minimizing the exact risk
    /// under the true distribution. Requires a normal-mixture truth.
    Oracle {
        #[serde(default)]
        orders: OrderSearch,
    },
    /// Least-squares cross-validation, second-order kernel.
    Cv,
    /// Normal reference rule from the sample's spread estimates.
    Nrr {
        #[serde(default = "default_nrr_kernel")]
        kernel: KernelSpec,
    },
    /// Fit a mixture, then minimize the exact risk under the fit.
    Plugin {
        rule: ComponentRule,
        #[serde(default)]
        orders: OrderSearch,
    },
    /// Use the fitted mixture cdf itself as the estimate.
    Parametric { rule: ComponentRule },
}

fn default_restarts() -> u32 {
    10
}

fn default_scale() -> f64 {
    1.0
}

/// A complete experiment description. Serializable so that a config file
/// plus the recorded versions reproduce a study exactly.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub distribution: DistributionSpec,
    pub n: u64,
    /// Replication count before scaling; full-scale studies use 10,000,
    /// the desk-scale default harness 500.
    pub replications: u64,
    /// Scale-down factor applied to `replications` (effective count is
    /// `max(2, round(replications * scale))`).
    #[serde(default = "default_scale")]
    pub scale: f64,
    pub seed: u64,
    pub methods: Vec<MethodSpec>,
    /// Cap on the searched kernel order; defaults to the calibrated
    /// per-sample-size cap.
    #[serde(default)]
    pub r_max: Option<u32>,
    /// Whether joint order searches also consider the sinc kernel.
    #[serde(default)]
    pub include_inf: bool,
    /// EM restarts per mixture size.
    #[serde(default = "default_restarts")]
    pub restarts: u32,
    /// Cap on fitted mixture sizes for AIC/BIC rules; defaults to the true
    /// component count plus four for mixture truths, 10 otherwise.
    #[serde(default)]
    pub m_max: Option<u32>,
    /// Apply the rearrangement correction before scoring kernel estimates.
    #[serde(default)]
    pub rearrange: bool,
}

impl ExperimentConfig {
    pub fn effective_replications(&self) -> u64 {
        ((self.replications as f64 * self.scale).round() as u64).max(2)
    }

    fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidInput("methods list is empty".into()));
        }
        if self.replications < 2 {
            return Err(Error::InvalidInput("need at least 2 replications".into()));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::InvalidInput(format!(
                "scale must be positive and finite, got {}",
                self.scale
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidInput("sample size n must be >= 1".into()));
        }
        Ok(())
    }
}

/// Outcome of one method on one replication. `ise` is absent exactly when
/// the selector failed on that sample, with the reason in `error`; those
/// replications drop out of any comparison involving the method.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub ise: Option<f64>,
    pub h: Option<f64>,
    pub kernel: Option<KernelSpec>,
    /// Mixture size used, for methods that fit one.
    pub m: Option<u32>,
    pub error: Option<String>,
}

/// Per-replication results, one outcome per configured method.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: u64,
    pub outcomes: Vec<MethodOutcome>,
}

/// One row of [`summarize`]'s output.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: MethodSpec,
    /// Replications where both this method and the baseline succeeded.
    pub used: usize,
    pub mean_ise: f64,
    pub baseline_mean_ise: f64,
    /// 100 (mean ISE / baseline mean ISE - 1), on the common replications.
    pub relative_reduction_pct: f64,
    /// Two-sided paired t-test p-value for equal ISE means.
    pub p_value: f64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// EM seed for a replication: a hash split of the master seed, so the EM
/// sub-streams (keyed by mixture size and restart) never collide with the
/// sampling streams.
fn rep_em_seed(master: u64, rep: u64) -> u64 {
    splitmix64(master ^ splitmix64(rep.wrapping_add(1)))
}

fn failed(err: impl ToString) -> MethodOutcome {
    MethodOutcome {
        ise: None,
        h: None,
        kernel: None,
        m: None,
        error: Some(err.to_string()),
    }
}

/// Linearly interpolated sample quartiles (sorted input).
fn sample_quartiles(xs: &[f64]) -> (f64, f64) {
    let q = |p: f64| {
        let idx = p * (xs.len() - 1) as f64;
        let lo = idx.floor() as usize;
        let frac = idx - lo as f64;
        if lo + 1 < xs.len() {
            xs[lo] * (1.0 - frac) + xs[lo + 1] * frac
        } else {
            xs[lo]
        }
    };
    (q(0.25), q(0.75))
}

fn mle_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

/// Scores a kernel estimate on this sample.
fn score_kernel(
    sample: &[f64],
    choice: &BandwidthChoice,
    truth: &ReferenceDistribution,
    rearrange: bool,
    m: Option<u32>,
) -> MethodOutcome {
    let fc = match FittedCdf::new(sample.to_vec(), choice.h, choice.kernel) {
        Ok(fc) => fc,
        Err(e) => return failed(e),
    };
    match ise(&fc, truth, rearrange) {
        Ok(v) => MethodOutcome {
            ise: Some(v),
            h: Some(choice.h),
            kernel: Some(choice.kernel),
            m,
            error: None,
        },
        Err(e) => failed(e),
    }
}

struct RepContext<'a> {
    truth: &'a ReferenceDistribution,
    sample: &'a [f64],
    n: u64,
    r_max: u32,
    include_inf: bool,
    m_max: u32,
    restarts: u32,
    em_seed: u64,
    rearrange: bool,
    /// Oracle choices are sample-independent; computed once per experiment.
    oracle: &'a HashMap<OrderSearch, std::result::Result<BandwidthChoice, String>>,
    /// Mixture fits shared across methods within the replication, so the
    /// plug-in and parametric variants of the same rule score one fit.
    fits: HashMap<ComponentRule, std::result::Result<MixtureFit, String>>,
}

impl<'a> RepContext<'a> {
    fn fit_for(&mut self, rule: ComponentRule) -> std::result::Result<MixtureFit, String> {
        let (m_max, restarts, seed) = (self.m_max, self.restarts, self.em_seed);
        let sample = self.sample;
        self.fits
            .entry(rule)
            .or_insert_with(|| {
                let res = match rule {
                    ComponentRule::Fixed(m) => emfit::em_fit(sample, m, restarts, seed),
                    ComponentRule::Aic => {
                        emfit::select_m(sample, m_max, ModelCriterion::Aic, restarts, seed)
                    }
                    ComponentRule::Bic => {
                        emfit::select_m(sample, m_max, ModelCriterion::Bic, restarts, seed)
                    }
                };
                res.map_err(|e| e.to_string())
            })
            .clone()
    }

    fn run(&mut self, spec: &MethodSpec) -> MethodOutcome {
        match spec {
            MethodSpec::Edf => {
                let choice = BandwidthChoice {
                    h: 0.0,
                    kernel: KernelSpec::Finite(1),
                    predicted_mise: None,
                    method: crate::bandwidth::SelectionMethod::ExactOracle,
                };
                // Rearrangement is a no-op for the already-monotone EDF;
                // score it raw so the baseline is the textbook EDF.
                score_kernel(self.sample, &choice, self.truth, false, None)
            }
            MethodSpec::Oracle { orders } => match &self.oracle[orders] {
                Ok(choice) => {
                    score_kernel(self.sample, choice, self.truth, self.rearrange, None)
                }
                Err(e) => failed(e),
            },
            MethodSpec::Cv => match cv_bandwidth(self.sample, KernelSpec::Finite(1), None) {
                Ok(choice) => {
                    score_kernel(self.sample, &choice, self.truth, self.rearrange, None)
                }
                Err(e) => failed(e),
            },
            MethodSpec::Nrr { kernel } => {
                let sd = mle_sd(self.sample);
                let (q1, q3) = sample_quartiles(self.sample);
                match nrr_bandwidth(sd, q3 - q1, self.n, *kernel) {
                    Ok(choice) => {
                        score_kernel(self.sample, &choice, self.truth, self.rearrange, None)
                    }
                    Err(e) => failed(e),
                }
            }
            MethodSpec::Plugin { rule, orders } => {
                let fit = match self.fit_for(*rule) {
                    Ok(f) => f,
                    Err(e) => return failed(e),
                };
                let searched = match orders {
                    OrderSearch::SecondOrder => {
                        minimize_h(&fit.mixture, KernelSpec::Finite(1), self.n)
                    }
                    OrderSearch::Joint => {
                        minimize_h_r(&fit.mixture, self.n, self.r_max, self.include_inf)
                    }
                };
                match searched {
                    Ok(choice) => score_kernel(
                        self.sample,
                        &choice,
                        self.truth,
                        self.rearrange,
                        Some(fit.m),
                    ),
                    Err(e) => failed(e),
                }
            }
            MethodSpec::Parametric { rule } => {
                let fit = match self.fit_for(*rule) {
                    Ok(f) => f,
                    Err(e) => return failed(e),
                };
                let (tlo, thi) = match self.truth.support() {
                    Ok(s) => s,
                    Err(e) => return failed(e),
                };
                let (flo, fhi) = fit.mixture.support();
                let pad = match self.truth.sd() {
                    Ok(sd) => 4.0 * sd,
                    Err(e) => return failed(e),
                };
                let mix = fit.mixture.clone();
                match ise_fn(
                    |x| mix.cdf(x),
                    self.truth,
                    tlo.min(flo) - pad,
                    thi.max(fhi) + pad,
                ) {
                    Ok(v) => MethodOutcome {
                        ise: Some(v),
                        h: None,
                        kernel: None,
                        m: Some(fit.m),
                        error: None,
                    },
                    Err(e) => failed(e),
                }
            }
        }
    }
}

/// Runs the experiment: per replication, draw a sample from the truth on an
/// indexed RNG sub-stream, run every configured method, and record the
/// outcomes. Deterministic given the config; method failures are recorded,
/// not raised.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ReplicationRecord>> {
    cfg.validate()?;
    let truth = cfg.distribution.resolve()?;
    let r_max = cfg.r_max.unwrap_or_else(|| r_max_for_n(cfg.n));
    let m_max = cfg.m_max.unwrap_or_else(|| match truth.as_mixture() {
        Some(nm) => nm.num_components() as u32 + 4,
        None => 10,
    });

    // Oracle selections depend only on the truth; resolve them up front.
    let mut oracle: HashMap<OrderSearch, std::result::Result<BandwidthChoice, String>> =
        HashMap::new();
    for spec in &cfg.methods {
        if let MethodSpec::Oracle { orders } = spec {
            oracle.entry(*orders).or_insert_with(|| match truth.as_mixture() {
                None => Err("oracle selection needs a normal-mixture truth".into()),
                Some(nm) => match orders {
                    OrderSearch::SecondOrder => minimize_h(nm, KernelSpec::Finite(1), cfg.n),
                    OrderSearch::Joint => minimize_h_r(nm, cfg.n, r_max, cfg.include_inf),
                }
                .map_err(|e| e.to_string()),
            });
        }
    }

    let reps = cfg.effective_replications();
    let mut records = Vec::with_capacity(reps as usize);
    for rep in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(rep);
        let mut sample = truth.sample(&mut rng, cfg.n as usize);
        sample.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let mut ctx = RepContext {
            truth: &truth,
            sample: &sample,
            n: cfg.n,
            r_max,
            include_inf: cfg.include_inf,
            m_max,
            restarts: cfg.restarts,
            em_seed: rep_em_seed(cfg.seed, rep),
            rearrange: cfg.rearrange,
            oracle: &oracle,
            fits: HashMap::new(),
        };
        let outcomes = cfg.methods.iter().map(|spec| ctx.run(spec)).collect();
        records.push(ReplicationRecord {
            replication: rep,
            outcomes,
        });
    }
    Ok(records)
}

/// Two-sided paired t-test p-value for equal means. Degenerate cases follow
/// the documented conventions: all differences zero gives p = 1, zero
/// variance with a nonzero mean difference gives p = 0.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Domain(format!(
            "paired samples must have equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Domain("paired t-test needs at least 2 pairs".into()));
    }
    let n = a.len() as f64;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Ok(if mean == 0.0 { 1.0 } else { 0.0 });
    }
    let t = mean / (var / n).sqrt();
    let tail = student_t_cdf(n - 1.0, -t.abs())?;
    Ok((2.0 * tail).min(1.0))
}

/// Summarizes records against a baseline method (an index into the
/// experiment's method list). Each comparison uses exactly the
/// replications where both methods produced an ISE, so selector failures
/// are excluded pairwise.
pub fn summarize(
    records: &[ReplicationRecord],
    methods: &[MethodSpec],
    baseline: usize,
) -> Result<Vec<MethodSummary>> {
    if records.len() < 2 {
        return Err(Error::InvalidInput("need at least 2 records".into()));
    }
    if baseline >= methods.len() {
        return Err(Error::InvalidInput(format!(
            "baseline index {baseline} out of range for {} methods",
            methods.len()
        )));
    }
    if records.iter().any(|r| r.outcomes.len() != methods.len()) {
        return Err(Error::InvalidInput(
            "records and method list have mismatched shapes".into(),
        ));
    }
    let mut rows = Vec::with_capacity(methods.len());
    for (i, method) in methods.iter().enumerate() {
        let mut mine = Vec::new();
        let mut base = Vec::new();
        for rec in records {
            if let (Some(x), Some(y)) = (rec.outcomes[i].ise, rec.outcomes[baseline].ise) {
                mine.push(x);
                base.push(y);
            }
        }
        if mine.len() < 2 {
            return Err(Error::FitFailure(format!(
                "method {i} has fewer than 2 replications in common with the baseline"
            )));
        }
        let mean = mine.iter().sum::<f64>() / mine.len() as f64;
        let bmean = base.iter().sum::<f64>() / base.len() as f64;
        rows.push(MethodSummary {
            method: method.clone(),
            used: mine.len(),
            mean_ise: mean,
            baseline_mean_ise: bmean,
            relative_reduction_pct: 100.0 * (mean / bmean - 1.0),
            p_value: paired_t_test(&mine, &base)?,
        });
    }
    Ok(rows)
}

/// One row of the deterministic risk-curve data: relative (to the EDF)
/// exact risks of the best second-order, best sinc, and best joint (h,
/// order) estimators, the joint optimizer's kernel, the infeasible lower
/// bound, and the second-order reference rule at the population spread.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FigureRow {
    pub n: u64,
    pub rel_second_order: f64,
    pub rel_sinc: f64,
    pub rel_joint: f64,
    pub kernel_star: KernelSpec,
    pub rel_bound: f64,
    pub rel_nrr: f64,
}

/// Exact relative-risk curves over a grid of sample sizes; no Monte Carlo
/// involved. `r_max = None` applies the calibrated per-n order cap.
pub fn figure_data(
    nm: &NormalMixture,
    n_grid: &[u64],
    r_max: Option<u32>,
    include_inf: bool,
) -> Result<Vec<FigureRow>> {
    if n_grid.is_empty() {
        return Err(Error::InvalidInput("sample-size grid is empty".into()));
    }
    let sigma = nm.sd();
    let iqr = nm.quantile(0.75)? - nm.quantile(0.25)?;
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let cap = r_max.unwrap_or_else(|| r_max_for_n(n));
        let c1 = minimize_h(nm, KernelSpec::Finite(1), n)?;
        let cinf = minimize_h(nm, KernelSpec::Infinite, n)?;
        let joint = minimize_h_r(nm, n, cap, include_inf)?;
        let bound = mise_star(nm, n, BOUND_REL_TOL)?;
        let nrr = nrr_bandwidth(sigma, iqr, n, KernelSpec::Finite(1))?;
        let nrr_mise = exact_mise(nm, KernelSpec::Finite(1), nrr.h, n)?.mise;
        rows.push(FigureRow {
            n,
            rel_second_order: relative_mise(c1.predicted_mise.unwrap(), nm, n),
            rel_sinc: relative_mise(cinf.predicted_mise.unwrap(), nm, n),
            rel_joint: relative_mise(joint.predicted_mise.unwrap(), nm, n),
            kernel_star: joint.kernel,
            rel_bound: relative_mise(bound, nm, n),
            rel_nrr: relative_mise(nrr_mise, nm, n),
        });
    }
    Ok(rows)
}

/// Log-spaced integer sample sizes from `nmin` to `nmax` inclusive,
/// deduplicated after rounding.
pub fn log_spaced_counts(nmin: u64, nmax: u64, points: usize) -> Result<Vec<u64>> {
    if nmin == 0 || nmax < nmin {
        return Err(Error::InvalidInput(format!(
            "invalid sample-size range [{nmin}, {nmax}]"
        )));
    }
    if points < 2 {
        return Err(Error::InvalidInput("need at least 2 grid points".into()));
    }
    let (la, lb) = ((nmin as f64).ln(), (nmax as f64).ln());
    let mut out: Vec<u64> = (0..points)
        .map(|i| {
            let t = i as f64 / (points - 1) as f64;
            (la + t * (lb - la)).exp().round() as u64
        })
        .collect();
    out.dedup();
    Ok(out)
}
