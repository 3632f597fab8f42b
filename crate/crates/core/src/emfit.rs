//! Maximum-likelihood fitting of finite normal mixtures by EM with random
//! restarts, and model-order selection by AIC or BIC.
//!
//! The fitter is deliberately plain: random initialization from the sample,
//! log-space E-step, closed-form M-step, a variance floor to catch the
//! usual likelihood degeneracy, and best-of-`restarts` selection by final
//! log-likelihood. Restarts are decorrelated through per-task ChaCha
//! sub-streams keyed by `(m, restart)`, so results do not depend on
//! evaluation order and identical `(sample, seed)` inputs reproduce the
//! fit bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::NormalMixture;

/// ln(2*pi)/2, the additive constant of the normal log-density.
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_741_8;

/// Convergence: relative change in log-likelihood between successive
/// iterations below this stops the restart.
const REL_LL_TOL: f64 = 1e-8;

/// Hard cap on EM iterations per restart.
const MAX_ITERATIONS: usize = 1000;

/// Component standard deviations are clamped at this multiple of the sample
/// standard deviation. A restart whose final parameters sit on the floor is
/// discarded: the clamp only exists to keep intermediate iterations alive,
/// and a floored optimum is the spurious-spike degeneracy, not a fit.
const SD_FLOOR_FACTOR: f64 = 1e-3;

/// Model-order selection criterion for [`select_m`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelCriterion {
    Aic,
    Bic,
}

/// A fitted normal mixture together with its fit diagnostics.
///
/// `aic = -2 loglik + 2(3m - 1)` and `bic = -2 loglik + ln(n)(3m - 1)`;
/// a mixture with `m` components has `3m - 1` free parameters because the
/// weights are constrained to sum to one.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MixtureFit {
    pub mixture: NormalMixture,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub m: u32,
    /// Whether the winning restart met the log-likelihood tolerance before
    /// the iteration cap.
    pub converged: bool,
    /// How many of the requested restarts produced a usable candidate
    /// (finite likelihood, no component stuck on the variance floor).
    pub restarts_used: u32,
}

/// Sample log-likelihood of `sample` under the mixture, computed in log
/// space so that far-out observations under narrow components do not
/// underflow to a spurious `-inf`.
pub fn log_likelihood(nm: &NormalMixture, sample: &[f64]) -> f64 {
    let k = nm.num_components();
    let mut log_w_sig: Vec<(f64, f64)> = Vec::with_capacity(k);
    for j in 0..k {
        let (w, _, sd) = nm.component(j);
        log_w_sig.push((w.ln() - sd.ln(), sd));
    }
    let mut ll = 0.0;
    for &x in sample {
        let mut best = f64::NEG_INFINITY;
        for j in 0..k {
            let (lw, sd) = log_w_sig[j];
            let z = (x - nm.means()[j]) / sd;
            let ld = lw - 0.5 * z * z - HALF_LN_2PI;
            if ld > best {
                best = ld;
            }
        }
        if best == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let mut acc = 0.0;
        for j in 0..k {
            let (lw, sd) = log_w_sig[j];
            let z = (x - nm.means()[j]) / sd;
            acc += (lw - 0.5 * z * z - HALF_LN_2PI - best).exp();
        }
        ll += best + acc.ln();
    }
    ll
}

/// Mean and maximum-likelihood (biased, divide-by-n) standard deviation.
fn sample_moments(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn validate_sample(sample: &[f64]) -> Result<()> {
    if sample.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 observations to fit a mixture, got {}",
            sample.len()
        )));
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(
            "sample contains non-finite values".into(),
        ));
    }
    Ok(())
}

/// Outcome of a single EM restart that did not fail.
struct Candidate {
    weights: Vec<f64>,
    means: Vec<f64>,
    sds: Vec<f64>,
    loglik: f64,
    converged: bool,
}

/// One EM run from a random start. Returns `None` when the restart fails:
/// non-finite likelihood, an effectively empty component, or final
/// parameters on the variance floor.
fn run_restart(sample: &[f64], m: usize, sd_hat: f64, rng: &mut ChaCha8Rng) -> Option<Candidate> {
    let n = sample.len();
    let nf = n as f64;
    let sd_floor = SD_FLOOR_FACTOR * sd_hat;
    let var_floor = sd_floor * sd_floor;

    // Means start at m distinct sample points (partial Fisher-Yates),
    // spreads at the sample sd, weights equal.
    let mut idx: Vec<usize> = (0..n).collect();
    for k in 0..m {
        let j = rng.gen_range(k..n);
        idx.swap(k, j);
    }
    let mut means: Vec<f64> = idx[..m].iter().map(|&i| sample[i]).collect();
    let mut sds = vec![sd_hat; m];
    let mut weights = vec![1.0 / m as f64; m];

    let mut resp = vec![0.0f64; n * m];
    let mut ll_prev = f64::NEG_INFINITY;
    let mut converged = false;
    let mut floored = false;

    for _ in 0..MAX_ITERATIONS {
        // E-step in log space; accumulates the log-likelihood as a by-product.
        let mut ll = 0.0;
        let log_w_sig: Vec<f64> = (0..m).map(|j| weights[j].ln() - sds[j].ln()).collect();
        for i in 0..n {
            let x = sample[i];
            let row = &mut resp[i * m..(i + 1) * m];
            let mut best = f64::NEG_INFINITY;
            for j in 0..m {
                let z = (x - means[j]) / sds[j];
                row[j] = log_w_sig[j] - 0.5 * z * z - HALF_LN_2PI;
                if row[j] > best {
                    best = row[j];
                }
            }
            if !best.is_finite() {
                return None;
            }
            let mut denom = 0.0;
            for g in row.iter_mut() {
                *g = (*g - best).exp();
                denom += *g;
            }
            for g in row.iter_mut() {
                *g /= denom;
            }
            ll += best + denom.ln();
        }
        if !ll.is_finite() {
            return None;
        }
        // EM never decreases the likelihood; tolerate only rounding slack.
        debug_assert!(
            ll_prev == f64::NEG_INFINITY || ll >= ll_prev - 1e-10 * (1.0 + ll_prev.abs()),
            "EM log-likelihood decreased: {ll_prev} -> {ll}"
        );
        if (ll - ll_prev).abs() < REL_LL_TOL * (1.0 + ll.abs()) {
            ll_prev = ll;
            converged = true;
            break;
        }
        ll_prev = ll;

        // M-step: exact weighted-moment updates, variances clamped below.
        floored = false;
        for j in 0..m {
            let mut nj = 0.0;
            let mut sx = 0.0;
            for i in 0..n {
                let g = resp[i * m + j];
                nj += g;
                sx += g * sample[i];
            }
            if nj < 1e-10 {
                return None;
            }
            let mu = sx / nj;
            let mut sv = 0.0;
            for i in 0..n {
                let d = sample[i] - mu;
                sv += resp[i * m + j] * d * d;
            }
            let mut var = sv / nj;
            if var < var_floor {
                var = var_floor;
                floored = true;
            }
            weights[j] = nj / nf;
            means[j] = mu;
            sds[j] = var.sqrt();
        }
    }

    if floored {
        return None;
    }
    Some(Candidate {
        weights,
        means,
        sds,
        loglik: ll_prev,
        converged,
    })
}

/// Fits an `m`-component normal mixture to `sample` by maximum likelihood.
///
/// Runs `restarts` independent EM chains from random initializations and
/// keeps the one with the highest final log-likelihood (ties go to the
/// earliest restart index). Each chain draws its initialization from a
/// `ChaCha8` stream keyed by `(m, restart)` on top of `seed`, so fits are
/// reproducible and restarts/model orders may be evaluated in any order.
///
/// A restart fails when its likelihood becomes non-finite, a component
/// loses all mass, or its final variances sit on the floor
/// `(1e-3 * sample sd)^2`; if every restart fails the whole fit fails.
pub fn em_fit(sample: &[f64], m: u32, restarts: u32, seed: u64) -> Result<MixtureFit> {
    validate_sample(sample)?;
    if m == 0 {
        return Err(Error::InvalidInput("component count m must be >= 1".into()));
    }
    if restarts == 0 {
        return Err(Error::InvalidInput("need at least one restart".into()));
    }
    if m as usize > sample.len() {
        return Err(Error::FitFailure(format!(
            "cannot place {m} components on {} observations",
            sample.len()
        )));
    }
    let (_, sd_hat) = sample_moments(sample);
    if sd_hat <= 0.0 {
        return Err(Error::FitFailure(
            "sample has zero variance; no nondegenerate mixture fits it".into(),
        ));
    }

    let mut best: Option<Candidate> = None;
    let mut usable = 0u32;
    for t in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((m as u64) << 32) | t as u64);
        if let Some(cand) = run_restart(sample, m as usize, sd_hat, &mut rng) {
            usable += 1;
            let better = match &best {
                None => true,
                Some(b) => cand.loglik > b.loglik,
            };
            if better {
                best = Some(cand);
            }
        }
    }
    let cand = best.ok_or_else(|| {
        Error::FitFailure(format!("all {restarts} EM restarts failed for m = {m}"))
    })?;

    // Responsibilities sum to one per observation only up to rounding;
    // normalize explicitly so the mixture invariant holds exactly.
    let wsum: f64 = cand.weights.iter().sum();
    let weights: Vec<f64> = cand.weights.iter().map(|w| w / wsum).collect();
    let mixture = NormalMixture::new(weights, cand.means, cand.sds)?;

    let n = sample.len() as f64;
    let params = (3 * m - 1) as f64;
    let aic = -2.0 * cand.loglik + 2.0 * params;
    let bic = -2.0 * cand.loglik + n.ln() * params;
    Ok(MixtureFit {
        mixture,
        loglik: cand.loglik,
        aic,
        bic,
        m,
        converged: cand.converged,
        restarts_used: usable,
    })
}

/// Fits mixtures of size 1..=`m_max` and returns the one minimizing the
/// chosen criterion (ties go to the smaller model).
///
/// The size scan truncates at the first `m` that fails to fit — larger
/// models only get harder to place — and selects among the sizes fitted so
/// far. If even `m = 1` fails, the selection fails.
pub fn select_m(
    sample: &[f64],
    m_max: u32,
    criterion: ModelCriterion,
    restarts: u32,
    seed: u64,
) -> Result<MixtureFit> {
    if m_max == 0 {
        return Err(Error::InvalidInput("m_max must be >= 1".into()));
    }
    let mut fits: Vec<MixtureFit> = Vec::new();
    for m in 1..=m_max {
        match em_fit(sample, m, restarts, seed) {
            Ok(f) => fits.push(f),
            Err(Error::FitFailure(_)) => break,
            Err(e) => return Err(e),
        }
    }
    let mut best: Option<MixtureFit> = None;
    for f in fits {
        let score = match criterion {
            ModelCriterion::Aic => f.aic,
            ModelCriterion::Bic => f.bic,
        };
        let better = match &best {
            None => true,
            Some(b) => {
                let bscore = match criterion {
                    ModelCriterion::Aic => b.aic,
                    ModelCriterion::Bic => b.bic,
                };
                score < bscore
            }
        };
        if better {
            best = Some(f);
        }
    }
    best.ok_or_else(|| Error::FitFailure("no mixture size could be fitted".into()))
}
