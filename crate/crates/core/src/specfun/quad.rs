//! Adaptive Gauss-Kronrod quadrature: 15-point Kronrod / 7-point Gauss
//! pairs with error-driven interval bisection. An infinite upper limit is
//! mapped onto (0, 1) through t = lo + u/(1-u).

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Kronrod-15 abscissae on [-1, 1], positive half.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

/// Kronrod-15 weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// Gauss-7 weights for the odd-indexed abscissae of `XGK`.
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    /// Estimated absolute error bound.
    pub error: f64,
    pub evaluations: usize,
}

/// QUADPACK error rescaling: sharpen the raw |K15 - G7| difference using
/// the integral of |f - mean|, with a floor at 50 eps times the L1 mass.
fn rescale_error(err: f64, result_abs: f64, result_asc: f64) -> f64 {
    let mut err = err.abs();
    if result_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / result_asc).powf(1.5);
        err = if scale < 1.0 { result_asc * scale } else { result_asc };
    }
    let min_err = 50.0 * f64::EPSILON * result_abs;
    if result_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) && min_err > err {
        err = min_err;
    }
    err
}

/// One K15/G7 evaluation over [a, b]. Returns (integral, error, |f| mass).
fn qk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let f_center = f(center);
    let mut result_gauss = WG[3] * f_center;
    let mut result_kronrod = WGK[7] * f_center;
    let mut result_abs = result_kronrod.abs();
    let mut fv = [0.0f64; 15];
    fv[7] = f_center;

    for j in 0..7 {
        let abscissa = half * XGK[j];
        let f1 = f(center - abscissa);
        let f2 = f(center + abscissa);
        fv[j] = f1;
        fv[14 - j] = f2;
        let fsum = f1 + f2;
        result_kronrod += WGK[j] * fsum;
        result_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            result_gauss += WG[j / 2] * fsum;
        }
    }

    let mean = 0.5 * result_kronrod;
    let mut result_asc = 0.0;
    for j in 0..8 {
        result_asc += WGK[j]
            * if j == 7 {
                (fv[7] - mean).abs()
            } else {
                (fv[j] - mean).abs() + (fv[14 - j] - mean).abs()
            };
    }

    let value = result_kronrod * half;
    let err = rescale_error(
        (result_kronrod - result_gauss) * half,
        result_abs * half.abs(),
        result_asc * half.abs(),
    );
    (value, err, result_abs * half.abs())
}

struct Interval {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

/// Adaptive quadrature of `f` over [lo, hi] with `hi = f64::INFINITY`
/// allowed. Stops once the error estimate drops below
/// max(abs_tol, rel_tol * |value|); exceeding the subdivision budget yields
/// `Error::Accuracy` carrying the best estimate.
pub fn gauss_kronrod(
    f: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<QuadResult> {
    gauss_kronrod_with_limit(f, lo, hi, rel_tol, abs_tol, 10_000)
}

pub fn gauss_kronrod_with_limit(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> Result<QuadResult> {
    if !lo.is_finite() {
        return Err(Error::InvalidInput(format!("gauss_kronrod: lower limit {lo} must be finite")));
    }
    if hi.is_nan() || (hi.is_finite() && hi < lo) {
        return Err(Error::InvalidInput(format!("gauss_kronrod: bad limits [{lo}, {hi}]")));
    }
    if hi == lo {
        return Ok(QuadResult { value: 0.0, error: 0.0, evaluations: 0 });
    }

    let mut evaluations = 0usize;
    // Semi-infinite limits are folded to u in (0, 1): t = lo + u/(1-u),
    // dt = du/(1-u)^2. Kronrod nodes are interior, so u = 1 is never hit.
    let infinite = hi == f64::INFINITY;
    let mut g = |u: f64| -> f64 {
        evaluations += 1;
        if infinite {
            let om = 1.0 - u;
            f(lo + u / om) / (om * om)
        } else {
            f(u)
        }
    };
    let (a0, b0) = if infinite { (0.0, 1.0) } else { (lo, hi) };

    let (value, error, _) = qk15(&mut g, a0, b0);
    let mut total_value = value;
    let mut total_error = error;
    let mut heap = BinaryHeap::new();
    heap.push(Interval { a: a0, b: b0, value, error });

    while total_error > abs_tol.max(rel_tol * total_value.abs()) {
        if heap.len() >= max_intervals {
            return Err(Error::Accuracy {
                estimate: total_value,
                error: total_error,
                message: format!("subdivision budget of {max_intervals} intervals exhausted"),
            });
        }
        let worst = match heap.pop() {
            Some(w) if w.error > 0.0 && w.b - w.a > f64::EPSILON * (w.a.abs() + w.b.abs()) => w,
            _ => {
                return Err(Error::Accuracy {
                    estimate: total_value,
                    error: total_error,
                    message: "interval too small to subdivide further".to_string(),
                })
            }
        };
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1, _) = qk15(&mut g, worst.a, mid);
        let (v2, e2, _) = qk15(&mut g, mid, worst.b);
        total_value += v1 + v2 - worst.value;
        total_error += e1 + e2 - worst.error;
        heap.push(Interval { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Interval { a: mid, b: worst.b, value: v2, error: e2 });
    }

    Ok(QuadResult { value: total_value, error: total_error, evaluations })
}
