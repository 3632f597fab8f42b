//! Bandwidth and kernel-order selection.
//!
//! Four selectors share the [`BandwidthChoice`] result type: the exact-risk
//! oracle ([`minimize_h`], [`minimize_h_r`]), the normal-mixture plug-in
//! ([`plugin_select`]), least-squares cross-validation ([`cv_bandwidth`]),
//! and the normal reference rule ([`nrr_bandwidth`]). A small asymptotic
//! rule ([`asymptotic_bandwidth`]) rounds out the set for comparisons.
//!
//! The oracle minimizes the exact mixture risk over h by bracket expansion
//! plus golden-section refinement from several starting points, so it does
//! not depend on derivative formulas and treats the sinc kernel exactly like
//! the finite orders. h = 0 (the plain empirical distribution function) is
//! handled as an explicit boundary candidate.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::emfit::{self, ModelCriterion};
use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, MAX_ORDER};
use crate::mise;
use crate::mixture::NormalMixture;
use crate::specfun::normal_cdf;

/// Ratio of the interquartile range to the standard deviation of a normal
/// distribution: 2 Phi^{-1}(3/4).
pub const IQR_TO_SD: f64 = 1.348_979_500_392_163_5;

/// Default cap on the mixture size scanned by the plug-in selector when the
/// caller does not provide one.
pub const DEFAULT_M_MAX: u32 = 10;

/// (sqrt(5) - 1) / 2, the golden-section interior ratio.
const GOLDEN_RATIO_CONJ: f64 = 0.618_033_988_749_894_9;

/// Relative width tolerance on h for the oracle search.
const H_REL_TOL: f64 = 1e-8;

/// Multistart points for the oracle search, in units of the mixture sd.
const MULTISTARTS: [f64; 4] = [0.1, 0.5, 1.0, 2.0];

/// Bracket caps in units of the mixture sd.
const BRACKET_LO: f64 = 1e-7;
const BRACKET_HI: f64 = 256.0;

/// Risk improvements smaller than this relative margin count as ties, which
/// go to the smaller kernel order.
const TIE_REL: f64 = 1e-12;

/// Cross-validation search grid: 40 log-spaced bandwidths spanning
/// [0.05, 3] sample standard deviations.
const CV_GRID_LEN: usize = 40;
const CV_GRID_LO: f64 = 0.05;
const CV_GRID_HI: f64 = 3.0;

/// Relative tolerance of the golden refinement around the CV grid minimum.
const CV_REFINE_TOL: f64 = 1e-9;

/// Composite-Simpson interval count for the CV integral. Fixed so that CV
/// scores are bit-reproducible across runs and platforms.
const CV_SIMPSON_INTERVALS: usize = 2048;

/// The CV integral runs over the sample range padded by this many reference
/// bandwidths on each side.
const CV_WINDOW_PAD: f64 = 4.0;

/// How a bandwidth (and kernel order) was chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    ExactOracle,
    PluginAic,
    PluginBic,
    PluginTrueM,
    Cv,
    Nrr,
    Asymptotic,
}

/// Rule for choosing the mixture size inside the plug-in selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentRule {
    Aic,
    Bic,
    /// Use exactly this many components (e.g. the known true size).
    Fixed(u32),
}

/// A selected bandwidth: h >= 0 (h = 0 is the EDF), the kernel it belongs
/// to, and — for selectors that compute one — the risk predicted at the
/// selected point. CV and the reference rule make no risk prediction.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BandwidthChoice {
    pub h: f64,
    #[serde(rename = "r")]
    pub kernel: KernelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_mise: Option<f64>,
    pub method: SelectionMethod,
}

/// Search scheme used by [`minimize_h_r_with`]; the two must agree and the
/// cheaper warm-start scheme is the default.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchStrategy {
    /// Seed each order's search at the previous order's optimum, plus one
    /// fresh start as a guard against following a local valley.
    WarmStart,
    /// Full multistart at every order.
    FreshMultistart,
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidInput("sample size n must be >= 1".into()));
    }
    Ok(())
}

/// Golden-section minimization on [a, b], shrinking until the interval is
/// below `rel_tol` relative to its endpoints. Returns the best probed point
/// and its value. `f` values of +inf are handled (they simply lose every
/// comparison), so callers may map evaluation errors to +inf.
fn golden_min<F: FnMut(f64) -> f64>(f: &mut F, mut a: f64, mut b: f64, rel_tol: f64) -> (f64, f64) {
    debug_assert!(a <= b);
    let mut c = b - GOLDEN_RATIO_CONJ * (b - a);
    let mut d = a + GOLDEN_RATIO_CONJ * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if b - a <= rel_tol * a.abs().max(b.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN_RATIO_CONJ * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN_RATIO_CONJ * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Slides a geometric triple around `start` until the middle point is no
/// worse than both neighbours or a cap is reached, and returns the enclosing
/// interval for the refinement stage.
fn bracket_minimum<F: FnMut(f64) -> f64>(
    f: &mut F,
    start: f64,
    lo_cap: f64,
    hi_cap: f64,
) -> (f64, f64) {
    const GROW: f64 = 2.0;
    let mut m = start.clamp(lo_cap, hi_cap);
    let mut fm = f(m);
    let mut l = (m / GROW).max(lo_cap);
    let mut fl = f(l);
    let mut r = (m * GROW).min(hi_cap);
    let mut fr = f(r);
    while fr < fm && r < hi_cap {
        l = m;
        m = r;
        fm = fr;
        r = (r * GROW).min(hi_cap);
        fr = f(r);
    }
    while fl < fm && l > lo_cap {
        r = m;
        m = l;
        fm = fl;
        l = (l / GROW).max(lo_cap);
        fl = f(l);
    }
    (l, r)
}

/// Best interior minimum over the given starting points.
fn best_interior<F: FnMut(f64) -> f64>(
    f: &mut F,
    starts: &[f64],
    lo_cap: f64,
    hi_cap: f64,
) -> (f64, f64) {
    let mut best = (f64::NAN, f64::INFINITY);
    for &s in starts {
        let (lo, hi) = bracket_minimum(f, s, lo_cap, hi_cap);
        let (x, fx) = golden_min(f, lo, hi, H_REL_TOL);
        if fx < best.1 || (fx == best.1 && x < best.0) {
            best = (x, fx);
        }
    }
    best
}

/// Applies the boundary rule: an interior optimum must strictly beat the
/// EDF risk at h = 0, otherwise the EDF itself is returned.
fn finish_choice(h: f64, fh: f64, v0n: f64, k: KernelSpec) -> BandwidthChoice {
    if fh < v0n {
        BandwidthChoice {
            h,
            kernel: k,
            predicted_mise: Some(fh),
            method: SelectionMethod::ExactOracle,
        }
    } else {
        BandwidthChoice {
            h: 0.0,
            kernel: k,
            predicted_mise: Some(v0n),
            method: SelectionMethod::ExactOracle,
        }
    }
}

/// Exact-risk oracle bandwidth for a fixed kernel: minimizes the exact MISE
/// of the estimator under `nm` at sample size `n` over h, to 1e-8 relative
/// precision on h, via multistart bracket expansion and golden sections.
pub fn minimize_h(nm: &NormalMixture, k: KernelSpec, n: u64) -> Result<BandwidthChoice> {
    k.validate()?;
    check_n(n)?;
    let scale = nm.sd();
    let v0n = nm.v0() / n as f64;
    let mut f = |h: f64| match mise::exact_mise(nm, k, h, n) {
        Ok(b) => b.mise,
        Err(_) => f64::INFINITY,
    };
    let starts: Vec<f64> = MULTISTARTS.iter().map(|s| s * scale).collect();
    let (h, fh) = best_interior(&mut f, &starts, BRACKET_LO * scale, BRACKET_HI * scale);
    Ok(finish_choice(h, fh, v0n, k))
}

/// Joint (h, kernel-order) oracle: optimizes h for every finite order
/// 1..=r_max (and the sinc kernel when `include_inf` is set) and returns the
/// overall risk minimizer. Ties within a 1e-12 relative margin go to the
/// smaller order, so reported transitions between orders are genuine.
pub fn minimize_h_r(
    nm: &NormalMixture,
    n: u64,
    r_max: u32,
    include_inf: bool,
) -> Result<BandwidthChoice> {
    minimize_h_r_with(nm, n, r_max, include_inf, SearchStrategy::WarmStart)
}

/// [`minimize_h_r`] with an explicit search strategy. The warm-start and
/// fresh-multistart schemes must land on the same risk; exposing both keeps
/// that property testable.
pub fn minimize_h_r_with(
    nm: &NormalMixture,
    n: u64,
    r_max: u32,
    include_inf: bool,
    strategy: SearchStrategy,
) -> Result<BandwidthChoice> {
    if r_max == 0 || r_max > MAX_ORDER {
        return Err(Error::Domain(format!(
            "r_max must lie in 1..={MAX_ORDER}, got {r_max}"
        )));
    }
    check_n(n)?;
    let scale = nm.sd();
    let v0n = nm.v0() / n as f64;
    let lo_cap = BRACKET_LO * scale;
    let hi_cap = BRACKET_HI * scale;

    let mut best: Option<BandwidthChoice> = None;
    let mut prev_h: Option<f64> = None;
    for r in 1..=r_max {
        let k = KernelSpec::Finite(r);
        let mut f = |h: f64| match mise::exact_mise(nm, k, h, n) {
            Ok(b) => b.mise,
            Err(_) => f64::INFINITY,
        };
        // The optimal h drifts slowly with r, so the previous optimum is an
        // excellent seed; one fresh start guards against valley-following.
        let starts: Vec<f64> = match (strategy, prev_h) {
            (SearchStrategy::WarmStart, Some(hp)) if hp > 0.0 => vec![hp, scale],
            _ => MULTISTARTS.iter().map(|s| s * scale).collect(),
        };
        let (h, fh) = best_interior(&mut f, &starts, lo_cap, hi_cap);
        let cand = finish_choice(h, fh, v0n, k);
        if cand.h > 0.0 {
            prev_h = Some(cand.h);
        }
        best = Some(prefer(best, cand));
    }
    if include_inf {
        let cand = minimize_h(nm, KernelSpec::Infinite, n)?;
        best = Some(prefer(best, cand));
    }
    Ok(best.expect("r_max >= 1 guarantees at least one candidate"))
}

/// Keeps the incumbent unless the challenger improves the predicted risk by
/// more than the tie margin; candidates arrive in increasing kernel order.
fn prefer(best: Option<BandwidthChoice>, cand: BandwidthChoice) -> BandwidthChoice {
    match best {
        None => cand,
        Some(b) => {
            let fb = b.predicted_mise.expect("oracle candidates carry a risk");
            let fc = cand.predicted_mise.expect("oracle candidates carry a risk");
            if fc < fb * (1.0 - TIE_REL) {
                cand
            } else {
                b
            }
        }
    }
}

static H1_STAR_CACHE: OnceLock<Mutex<HashMap<(u32, u64), f64>>> = OnceLock::new();

/// Exact optimal bandwidth of the order-2r kernel for the standard normal
/// at sample size n, cached: the reference rule rescales this constant by
/// the target's spread.
fn h1_star(r: u32, n: u64) -> Result<f64> {
    let cache = H1_STAR_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&h) = cache.lock().unwrap().get(&(r, n)) {
        return Ok(h);
    }
    let h = minimize_h(&NormalMixture::standard_normal(), KernelSpec::Finite(r), n)?.h;
    cache.lock().unwrap().insert((r, n), h);
    Ok(h)
}

/// Normal reference rule: h = min(sigma, IQR/1.349) times the exact
/// standard-normal optimum for the kernel. For the sinc kernel the
/// standard-normal optimum is 1/sqrt(ln(n+1)) in closed form. The inputs
/// may be population values (when the target is known) or sample estimates.
pub fn nrr_bandwidth(sigma_f: f64, iqr_f: f64, n: u64, k: KernelSpec) -> Result<BandwidthChoice> {
    k.validate()?;
    check_n(n)?;
    if !(sigma_f.is_finite() && sigma_f > 0.0) {
        return Err(Error::InvalidInput(format!(
            "scale sigma must be positive and finite, got {sigma_f}"
        )));
    }
    if !(iqr_f.is_finite() && iqr_f > 0.0) {
        return Err(Error::InvalidInput(format!(
            "interquartile range must be positive and finite, got {iqr_f}"
        )));
    }
    let spread = sigma_f.min(iqr_f / IQR_TO_SD);
    let h = match k {
        KernelSpec::Infinite => spread / ((n as f64 + 1.0).ln()).sqrt(),
        KernelSpec::Finite(r) => spread * h1_star(r, n)?,
    };
    Ok(BandwidthChoice {
        h,
        kernel: k,
        predicted_mise: None,
        method: SelectionMethod::Nrr,
    })
}

fn require_second_order(k: KernelSpec) -> Result<()> {
    if k != KernelSpec::Finite(1) {
        return Err(Error::Domain(
            "cross-validation is defined for the second-order kernel (r = 1)".into(),
        ));
    }
    Ok(())
}

fn sorted_sample(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 observations, got {}",
            sample.len()
        )));
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(
            "sample contains non-finite values".into(),
        ));
    }
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(xs)
}

fn mle_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

/// The leave-one-out criterion at a single bandwidth, for the second-order
/// kernel: CV(h) = n^{-1} sum_i int {1[X_i <= x] - F_{-i}(x; h)}^2 dx.
///
/// In expectation CV(h) equals the exact risk at sample size n-1 plus a
/// constant not depending on h, which is what makes its minimizer a risk
/// estimate. The integral runs over the sample range padded by
/// 4 max(3 sd, h) and uses the same fixed Simpson rule as the minimizer, so
/// scores are comparable across h on the default search range and
/// bit-reproducible.
pub fn cv_score(sample: &[f64], k: KernelSpec, h: f64) -> Result<f64> {
    require_second_order(k)?;
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bandwidth must be positive and finite, got {h}"
        )));
    }
    let xs = sorted_sample(sample)?;
    let h_ref = (CV_GRID_HI * mle_sd(&xs)).max(h);
    let lo = xs[0] - CV_WINDOW_PAD * h_ref;
    let hi = xs[xs.len() - 1] + CV_WINDOW_PAD * h_ref;
    Ok(cv_integral(&xs, h, lo, hi))
}

/// Composite-Simpson evaluation of the CV integrand on [lo, hi].
///
/// With S = sum_j G_j, A = sum_{X_j <= x} G_j, Q = sum_j G_j^2 and E the
/// count of observations at or below x, expanding the leave-one-out square
/// gives, per abscissa,
///   E - 2 (E S - A)/(n-1) + ((n-2) S^2 + Q)/(n-1)^2,
/// which costs O(n) instead of the naive O(n^2).
fn cv_integral(xs: &[f64], h: f64, lo: f64, hi: f64) -> f64 {
    let n = xs.len();
    let nf = n as f64;
    let nm1 = nf - 1.0;
    let m = CV_SIMPSON_INTERVALS;
    let dx = (hi - lo) / m as f64;
    let mut acc = 0.0;
    for p in 0..=m {
        let x = lo + p as f64 * dx;
        let cnt = xs.partition_point(|&v| v <= x);
        let mut s = 0.0;
        let mut q = 0.0;
        let mut a = 0.0;
        for (i, &xi) in xs.iter().enumerate() {
            let g = normal_cdf((x - xi) / h);
            s += g;
            q += g * g;
            if i < cnt {
                a += g;
            }
        }
        let e = cnt as f64;
        let val = e - 2.0 * (e * s - a) / nm1 + ((nf - 2.0) * s * s + q) / (nm1 * nm1);
        let w = if p == 0 || p == m {
            1.0
        } else if p % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * val;
    }
    acc * dx / 3.0 / nf
}

/// Cross-validation bandwidth for the second-order kernel: evaluates the
/// leave-one-out criterion on a bandwidth grid (by default 40 log-spaced
/// points on [0.05, 3] sample standard deviations), then golden-refines
/// inside the cell around the grid minimizer.
pub fn cv_bandwidth(sample: &[f64], k: KernelSpec, grid: Option<&[f64]>) -> Result<BandwidthChoice> {
    require_second_order(k)?;
    let xs = sorted_sample(sample)?;
    let sd = mle_sd(&xs);
    let grid_vec: Vec<f64> = match grid {
        Some(g) => {
            if g.is_empty() {
                return Err(Error::InvalidInput("bandwidth grid is empty".into()));
            }
            if g.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
                return Err(Error::InvalidInput(
                    "bandwidth grid entries must be positive and finite".into(),
                ));
            }
            if g.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidInput(
                    "bandwidth grid must be strictly increasing".into(),
                ));
            }
            g.to_vec()
        }
        None => {
            if sd <= 0.0 {
                return Err(Error::InvalidInput(
                    "sample has zero variance; no bandwidth scale to search".into(),
                ));
            }
            let ratio = CV_GRID_HI / CV_GRID_LO;
            (0..CV_GRID_LEN)
                .map(|i| {
                    CV_GRID_LO * sd * ratio.powf(i as f64 / (CV_GRID_LEN - 1) as f64)
                })
                .collect()
        }
    };

    // One fixed window for the whole search keeps the scores comparable.
    let h_ref = *grid_vec.last().unwrap();
    let lo = xs[0] - CV_WINDOW_PAD * h_ref;
    let hi = xs[xs.len() - 1] + CV_WINDOW_PAD * h_ref;
    let mut f = |h: f64| cv_integral(&xs, h, lo, hi);

    let scores: Vec<f64> = grid_vec.iter().map(|&h| f(h)).collect();
    let mut imin = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s < scores[imin] {
            imin = i;
        }
    }
    let bl = grid_vec[imin.saturating_sub(1)];
    let bh = grid_vec[(imin + 1).min(grid_vec.len() - 1)];
    let (hr, fr) = golden_min(&mut f, bl, bh, CV_REFINE_TOL);
    let h = if fr <= scores[imin] { hr } else { grid_vec[imin] };
    Ok(BandwidthChoice {
        h,
        kernel: k,
        predicted_mise: None,
        method: SelectionMethod::Cv,
    })
}

/// Plug-in selector: fit a normal mixture to the sample (size chosen by
/// `m_rule`, capped at `m_max`, default 10), treat the fit as the truth, and
/// run the joint (h, order) oracle at the sample's n. `restarts` and `seed`
/// control the EM stage exactly as in [`emfit::em_fit`].
pub fn plugin_select(
    sample: &[f64],
    m_rule: ComponentRule,
    r_max: u32,
    include_inf: bool,
    m_max: Option<u32>,
    restarts: u32,
    seed: u64,
) -> Result<BandwidthChoice> {
    let fit = match m_rule {
        ComponentRule::Fixed(m) => emfit::em_fit(sample, m, restarts, seed)?,
        ComponentRule::Aic => emfit::select_m(
            sample,
            m_max.unwrap_or(DEFAULT_M_MAX),
            ModelCriterion::Aic,
            restarts,
            seed,
        )?,
        ComponentRule::Bic => emfit::select_m(
            sample,
            m_max.unwrap_or(DEFAULT_M_MAX),
            ModelCriterion::Bic,
            restarts,
            seed,
        )?,
    };
    let choice = minimize_h_r(&fit.mixture, sample.len() as u64, r_max, include_inf)?;
    let method = match m_rule {
        ComponentRule::Aic => SelectionMethod::PluginAic,
        ComponentRule::Bic => SelectionMethod::PluginBic,
        ComponentRule::Fixed(_) => SelectionMethod::PluginTrueM,
    };
    Ok(BandwidthChoice { method, ..choice })
}

/// Asymptotically optimal bandwidth (finite orders only; the sinc kernel
/// has no such power-law expansion).
pub fn asymptotic_bandwidth(nm: &NormalMixture, k: KernelSpec, n: u64) -> Result<BandwidthChoice> {
    check_n(n)?;
    match k {
        KernelSpec::Infinite => Err(Error::Domain(
            "the asymptotic expansion covers finite-order kernels only".into(),
        )),
        KernelSpec::Finite(r) => {
            k.validate()?;
            let h = mise::asymptotic_opt_bandwidth(nm, r, n)?;
            let am = mise::asymptotic_mise(nm, r, h, n)?;
            // The truncated expansion can go nonpositive far from its
            // validity range; report no prediction rather than a bogus one.
            let predicted_mise = if am > 0.0 { Some(am) } else { None };
            Ok(BandwidthChoice {
                h,
                kernel: k,
                predicted_mise,
                method: SelectionMethod::Asymptotic,
            })
        }
    }
}

/// Largest kernel order worth searching at sample size n: interpolates
/// linearly in ln n between calibrated anchors (50, 8), (100, 9), (200, 10),
/// (400, 13), extends the last slope beyond, and clamps to [8, MAX_ORDER].
pub fn r_max_for_n(n: u64) -> u32 {
    const ANCHORS: [(f64, f64); 4] = [(50.0, 8.0), (100.0, 9.0), (200.0, 10.0), (400.0, 13.0)];
    if n <= 50 {
        return 8;
    }
    let x = (n as f64).ln();
    let seg = |i: usize| {
        let (n0, y0) = ANCHORS[i];
        let (n1, y1) = ANCHORS[i + 1];
        y0 + (y1 - y0) * (x - n0.ln()) / (n1.ln() - n0.ln())
    };
    let y = if n <= 100 {
        seg(0)
    } else if n <= 200 {
        seg(1)
    } else {
        seg(2)
    };
    (y.round() as u32).clamp(8, MAX_ORDER)
}
