//! Finite normal mixtures: moments, density/cdf, reproducible sampling,
//! the pairwise Gaussian functionals entering the exact risk formulas, and
//! the built-in catalog of test-bed distributions.

use crate::error::{Error, Result};
use crate::specfun::{self, normal_cdf, normal_pdf, normal_quantile, phi_deriv};
use rand::distributions::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Wire format for mixtures: `{"weights": [...], "means": [...], "sds": [...]}`.
#[derive(Serialize, Deserialize)]
struct MixtureSpec {
    weights: Vec<f64>,
    means: Vec<f64>,
    sds: Vec<f64>,
}

/// A finite normal mixture with positive weights summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureSpec", into = "MixtureSpec")]
pub struct NormalMixture {
    weights: Vec<f64>,
    means: Vec<f64>,
    sds: Vec<f64>,
}

impl TryFrom<MixtureSpec> for NormalMixture {
    type Error = Error;
    fn try_from(s: MixtureSpec) -> Result<Self> {
        NormalMixture::new(s.weights, s.means, s.sds)
    }
}

impl From<NormalMixture> for MixtureSpec {
    fn from(nm: NormalMixture) -> Self {
        MixtureSpec { weights: nm.weights, means: nm.means, sds: nm.sds }
    }
}

impl NormalMixture {
    /// Validates component counts, positivity, and unit total weight
    /// (within 1e-12, then renormalized exactly).
    pub fn new(weights: Vec<f64>, means: Vec<f64>, sds: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() || weights.len() != sds.len() {
            return Err(Error::InvalidInput(format!(
                "mixture needs equal-length nonempty parameter vectors, got {}/{}/{}",
                weights.len(),
                means.len(),
                sds.len()
            )));
        }
        for (j, ((&w, &mu), &sd)) in weights.iter().zip(&means).zip(&sds).enumerate() {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidInput(format!("component {j}: weight {w} must be > 0")));
            }
            if !mu.is_finite() {
                return Err(Error::InvalidInput(format!("component {j}: mean {mu} not finite")));
            }
            if !(sd > 0.0 && sd.is_finite()) {
                return Err(Error::InvalidInput(format!("component {j}: sd {sd} must be > 0")));
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("mixture weights sum to {total}, not 1")));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(NormalMixture { weights, means, sds })
    }

    pub fn standard_normal() -> Self {
        NormalMixture { weights: vec![1.0], means: vec![0.0], sds: vec![1.0] }
    }

    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn sds(&self) -> &[f64] {
        &self.sds
    }

    /// (weight, mean, sd) of component `j`.
    pub fn component(&self, j: usize) -> (f64, f64, f64) {
        (self.weights[j], self.means[j], self.sds[j])
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.means).map(|(w, mu)| w * mu).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        let second: f64 = self
            .weights
            .iter()
            .zip(&self.means)
            .zip(&self.sds)
            .map(|((w, mu), sd)| w * (sd * sd + mu * mu))
            .sum();
        second - mean * mean
    }

    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.sds)
            .map(|((w, mu), sd)| w * normal_pdf((x - mu) / sd) / sd)
            .sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.sds)
            .map(|((w, mu), sd)| w * normal_cdf((x - mu) / sd))
            .sum()
    }

    /// Interval carrying all but ~1e-30 of the mass:
    /// [min_j(mu_j - 12 sd_j), max_j(mu_j + 12 sd_j)].
    pub fn support(&self) -> (f64, f64) {
        let lo = self
            .means
            .iter()
            .zip(&self.sds)
            .map(|(mu, sd)| mu - 12.0 * sd)
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .means
            .iter()
            .zip(&self.sds)
            .map(|(mu, sd)| mu + 12.0 * sd)
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Quantile by bisection on the cdf, then Newton polishing.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile: p = {p} outside (0, 1)")));
        }
        let (mut lo, mut hi) = self.support();
        // widen until the cdf brackets p (support covers (1e-30, 1-1e-30))
        while self.cdf(lo) > p {
            lo -= 1.0 + (hi - lo);
        }
        while self.cdf(hi) < p {
            hi += 1.0 + (hi - lo);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-13 * (1.0 + mid.abs()) {
                break;
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..3 {
            let d = self.pdf(x);
            if d > 1e-300 {
                x -= (self.cdf(x) - p) / d;
            }
        }
        Ok(x)
    }

    /// One draw: component picked by cumulative weight inversion, deviate
    /// by quantile inversion of an open-interval uniform. Both stages use
    /// the supplied generator only, so streams replay identically.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.sample(Open01);
        let mut j = self.weights.len() - 1;
        let mut cum = 0.0;
        for (idx, &w) in self.weights.iter().enumerate() {
            cum += w;
            if u < cum {
                j = idx;
                break;
            }
        }
        let v: f64 = rng.sample(Open01);
        self.means[j] + self.sds[j] * normal_quantile(v).expect("Open01 is inside (0, 1)")
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.draw(rng)).collect()
    }

    /// V0 = integral of F(1-F), the n-scaled MISE of the empirical cdf.
    pub fn v0(&self) -> f64 {
        self.u_func(0.0, 0)
    }

    /// U(h; q) = sum_ij w_i w_j [s phi(d/s) + d Phi(d/s)] with
    /// d = mu_i - mu_j and s = sqrt(sd_i^2 + sd_j^2 + q h^2).
    pub fn u_func(&self, h: f64, q: u32) -> f64 {
        debug_assert!(h >= 0.0 && q <= 2);
        let qh2 = q as f64 * h * h;
        let mut tot = 0.0;
        for i in 0..self.weights.len() {
            for j in 0..self.weights.len() {
                let s = (self.sds[i] * self.sds[i] + self.sds[j] * self.sds[j] + qh2).sqrt();
                let d = self.means[i] - self.means[j];
                tot += self.weights[i]
                    * self.weights[j]
                    * (s * normal_pdf(d / s) + d * normal_cdf(d / s));
            }
        }
        tot
    }

    /// V(h; p, q) = h^{2p} sum_ij w_i w_j s^{1-2p} phi^(2p-2)((mu_j-mu_i)/s),
    /// the Gaussian-pair functional of the exact risk expansion; p = 0 goes
    /// through the second antiderivative phi^(-2) and reproduces U(h; q).
    pub fn v_func(&self, h: f64, p: u32, q: u32) -> f64 {
        debug_assert!(h >= 0.0 && q <= 2);
        if h == 0.0 {
            return if p == 0 { self.u_func(0.0, q) } else { 0.0 };
        }
        let qh2 = q as f64 * h * h;
        let deriv_order = 2 * p as i32 - 2;
        let mut tot = 0.0;
        for i in 0..self.weights.len() {
            for j in 0..self.weights.len() {
                let s = (self.sds[i] * self.sds[i] + self.sds[j] * self.sds[j] + qh2).sqrt();
                // s^{1-2p} h^{2p} regrouped as s (h/s)^{2p} to keep the
                // intermediate magnitudes bounded for large p
                let scale = s * (h / s).powi(2 * p as i32);
                tot += self.weights[i]
                    * self.weights[j]
                    * scale
                    * phi_deriv(deriv_order, (self.means[j] - self.means[i]) / s);
            }
        }
        tot
    }

    /// |phi_f(t)|^2, the absolute square of the characteristic function.
    pub fn abs_cf_squared(&self, t: f64) -> f64 {
        let mut tot = 0.0;
        for i in 0..self.weights.len() {
            for j in 0..self.weights.len() {
                let var = self.sds[i] * self.sds[i] + self.sds[j] * self.sds[j];
                let d = self.means[i] - self.means[j];
                tot += self.weights[i] * self.weights[j] * (d * t).cos() * (-0.5 * var * t * t).exp();
            }
        }
        tot
    }

    /// R(F^(2r)) = -sum_ij w_i w_j s^{1-4r} phi^(4r-2)((mu_i-mu_j)/s),
    /// the squared-derivative roughness driving the asymptotic ISB.
    pub fn roughness_2r(&self, r: u32) -> Result<f64> {
        if r == 0 || r > crate::kernels::MAX_ORDER {
            return Err(Error::Domain(format!(
                "roughness_2r: r = {r} outside 1..={}",
                crate::kernels::MAX_ORDER
            )));
        }
        let mut tot = 0.0;
        for i in 0..self.weights.len() {
            for j in 0..self.weights.len() {
                let s = (self.sds[i] * self.sds[i] + self.sds[j] * self.sds[j]).sqrt();
                let d = (self.means[i] - self.means[j]) / s;
                tot -= self.weights[i]
                    * self.weights[j]
                    * s.powi(1 - 4 * r as i32)
                    * phi_deriv(4 * r as i32 - 2, d);
            }
        }
        if !(tot.is_finite() && tot > 0.0) {
            return Err(Error::Precision(format!(
                "roughness_2r overflowed or lost positivity at r = {r}: {tot}"
            )));
        }
        Ok(tot)
    }
}

/// Distribution families the simulation harness can draw truth from.
///
/// Parameters arriving through deserialization are unchecked until
/// [`ReferenceDistribution::validate`]; the evaluation methods expect valid
/// parameters and panic otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ReferenceDistribution {
    NormalMixture(NormalMixture),
    Gamma { shape: f64, scale: f64 },
    StudentT { dof: f64 },
}

impl From<NormalMixture> for ReferenceDistribution {
    fn from(nm: NormalMixture) -> Self {
        ReferenceDistribution::NormalMixture(nm)
    }
}

impl ReferenceDistribution {
    pub fn validate(&self) -> Result<()> {
        match self {
            ReferenceDistribution::NormalMixture(_) => Ok(()), // checked at construction
            ReferenceDistribution::Gamma { shape, scale } => {
                if shape.is_finite() && *shape > 0.0 && scale.is_finite() && *scale > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidInput(format!("gamma(shape {shape}, scale {scale})")))
                }
            }
            ReferenceDistribution::StudentT { dof } => {
                if dof.is_finite() && *dof > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidInput(format!("student_t(dof {dof})")))
                }
            }
        }
    }

    pub fn as_mixture(&self) -> Option<&NormalMixture> {
        match self {
            ReferenceDistribution::NormalMixture(nm) => Some(nm),
            _ => None,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            ReferenceDistribution::NormalMixture(nm) => nm.pdf(x),
            ReferenceDistribution::Gamma { shape, scale } => {
                if x <= 0.0 {
                    return 0.0;
                }
                let y = x / scale;
                ((shape - 1.0) * y.ln() - y - specfun::ln_gamma(*shape)).exp() / scale
            }
            ReferenceDistribution::StudentT { dof } => {
                let norm = specfun::gamma_ratio(0.5 * (dof + 1.0), 0.5 * dof)
                    / (dof * std::f64::consts::PI).sqrt();
                norm * (1.0 + x * x / dof).powf(-0.5 * (dof + 1.0))
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            ReferenceDistribution::NormalMixture(nm) => nm.cdf(x),
            ReferenceDistribution::Gamma { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    specfun::reg_lower_gamma(*shape, x / scale).expect("validated gamma parameters")
                }
            }
            ReferenceDistribution::StudentT { dof } => {
                specfun::student_t_cdf(*dof, x).expect("validated dof")
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ReferenceDistribution::NormalMixture(nm) => nm.mean(),
            ReferenceDistribution::Gamma { shape, scale } => shape * scale,
            ReferenceDistribution::StudentT { .. } => 0.0,
        }
    }

    /// Errors for Student t with dof <= 2, where the variance diverges.
    pub fn sd(&self) -> Result<f64> {
        match self {
            ReferenceDistribution::NormalMixture(nm) => Ok(nm.sd()),
            ReferenceDistribution::Gamma { shape, scale } => Ok(shape.sqrt() * scale),
            ReferenceDistribution::StudentT { dof } => {
                if *dof > 2.0 {
                    Ok((dof / (dof - 2.0)).sqrt())
                } else {
                    Err(Error::Domain(format!("student_t(dof {dof}) has no finite variance")))
                }
            }
        }
    }

    /// Integration range holding essentially all the mass: mixtures use
    /// their component envelope, Gamma (0, mean + 12 sd), Student t
    /// +/- 12 sd.
    pub fn support(&self) -> Result<(f64, f64)> {
        match self {
            ReferenceDistribution::NormalMixture(nm) => Ok(nm.support()),
            ReferenceDistribution::Gamma { .. } => Ok((0.0, self.mean() + 12.0 * self.sd()?)),
            ReferenceDistribution::StudentT { .. } => {
                let b = 12.0 * self.sd()?;
                Ok((-b, b))
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        match self {
            ReferenceDistribution::NormalMixture(nm) => nm.sample(rng, n),
            ReferenceDistribution::Gamma { shape, scale } => {
                (0..n).map(|_| draw_gamma(rng, *shape, *scale)).collect()
            }
            ReferenceDistribution::StudentT { dof } => (0..n)
                .map(|_| {
                    let z = draw_standard_normal(rng);
                    let g = draw_gamma(rng, 0.5 * dof, 2.0);
                    z / (g / dof).sqrt()
                })
                .collect(),
        }
    }
}

fn draw_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    normal_quantile(u).expect("Open01 is inside (0, 1)")
}

/// Marsaglia-Tsang squeeze sampler; shape < 1 is boosted through the
/// Gamma(shape + 1) power identity.
fn draw_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, scale: f64) -> f64 {
    debug_assert!(shape > 0.0 && scale > 0.0);
    if shape < 1.0 {
        let boosted = draw_gamma(rng, shape + 1.0, scale);
        let u: f64 = rng.sample(Open01);
        return boosted * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let z = draw_standard_normal(rng);
        let t = 1.0 + c * z;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u: f64 = rng.sample(Open01);
        let z2 = z * z;
        if u < 1.0 - 0.0331 * z2 * z2 || u.ln() < 0.5 * z2 + d * (1.0 - v + v.ln()) {
            return d * v * scale;
        }
    }
}

/// Catalog ids and display labels, in catalog order.
pub const CATALOG_IDS: [(&str, &str); 18] = [
    ("mw1", "Gaussian"),
    ("mw2", "Skewed unimodal"),
    ("mw3", "Strongly skewed"),
    ("mw4", "Kurtotic unimodal"),
    ("mw5", "Outlier"),
    ("mw6", "Bimodal"),
    ("mw7", "Separated bimodal"),
    ("mw8", "Skewed bimodal"),
    ("mw9", "Trimodal"),
    ("mw10", "Claw"),
    ("mw11", "Double claw"),
    ("mw12", "Asymmetric claw"),
    ("mw13", "Asymmetric double claw"),
    ("mw14", "Smooth comb"),
    ("mw15", "Discrete comb"),
    ("gamma21", "Gamma(2, 1)"),
    ("t3", "Student t, 3 dof"),
    ("t4", "Student t, 4 dof"),
];

/// Look up a test-bed distribution by id ("mw1".."mw15", "gamma21", "t3",
/// "t4"). Mixture parameters follow Marron & Wand (1992), Table 1.
pub fn catalog(id: &str) -> Option<ReferenceDistribution> {
    let mix = |w: Vec<f64>, m: Vec<f64>, s: Vec<f64>| {
        Some(ReferenceDistribution::NormalMixture(
            NormalMixture::new(w, m, s).expect("catalog parameters are valid"),
        ))
    };
    match id {
        "mw1" => mix(vec![1.0], vec![0.0], vec![1.0]),
        "mw2" => mix(
            vec![0.2, 0.2, 0.6],
            vec![0.0, 0.5, 13.0 / 12.0],
            vec![1.0, 2.0 / 3.0, 5.0 / 9.0],
        ),
        "mw3" => {
            let (mut w, mut m, mut s) = (vec![], vec![], vec![]);
            for l in 0..8 {
                let g = (2.0f64 / 3.0).powi(l);
                w.push(0.125);
                m.push(3.0 * (g - 1.0));
                s.push(g);
            }
            mix(w, m, s)
        }
        "mw4" => mix(vec![2.0 / 3.0, 1.0 / 3.0], vec![0.0, 0.0], vec![1.0, 0.1]),
        "mw5" => mix(vec![0.1, 0.9], vec![0.0, 0.0], vec![1.0, 0.1]),
        "mw6" => mix(vec![0.5, 0.5], vec![-1.0, 1.0], vec![2.0 / 3.0, 2.0 / 3.0]),
        "mw7" => mix(vec![0.5, 0.5], vec![-1.5, 1.5], vec![0.5, 0.5]),
        "mw8" => mix(vec![0.75, 0.25], vec![0.0, 1.5], vec![1.0, 1.0 / 3.0]),
        "mw9" => mix(
            vec![0.45, 0.45, 0.1],
            vec![-1.2, 1.2, 0.0],
            vec![0.6, 0.6, 0.25],
        ),
        "mw10" => {
            let (mut w, mut m, mut s) = (vec![0.5], vec![0.0], vec![1.0]);
            for l in 0..5 {
                w.push(0.1);
                m.push(l as f64 / 2.0 - 1.0);
                s.push(0.1);
            }
            mix(w, m, s)
        }
        "mw11" => {
            let (mut w, mut m, mut s) =
                (vec![0.49, 0.49], vec![-1.0, 1.0], vec![2.0 / 3.0, 2.0 / 3.0]);
            for l in 0..7 {
                w.push(1.0 / 350.0);
                m.push((l as f64 - 3.0) / 2.0);
                s.push(0.01);
            }
            mix(w, m, s)
        }
        "mw12" => {
            let (mut w, mut m, mut s) = (vec![0.5], vec![0.0], vec![1.0]);
            for l in -2..=2i32 {
                w.push(2f64.powi(1 - l) / 31.0);
                m.push(l as f64 + 0.5);
                s.push(2f64.powi(-l) / 10.0);
            }
            mix(w, m, s)
        }
        "mw13" => {
            let (mut w, mut m, mut s) =
                (vec![0.46, 0.46], vec![-1.0, 1.0], vec![2.0 / 3.0, 2.0 / 3.0]);
            for l in 1..=3 {
                w.push(1.0 / 300.0);
                m.push(-l as f64 / 2.0);
                s.push(0.01);
            }
            for l in 1..=3 {
                w.push(7.0 / 300.0);
                m.push(l as f64 / 2.0);
                s.push(0.07);
            }
            mix(w, m, s)
        }
        "mw14" => {
            let (mut w, mut m, mut s) = (vec![], vec![], vec![]);
            for l in 0..6i32 {
                w.push(2f64.powi(5 - l) / 63.0);
                m.push((65.0 - 96.0 * 0.5f64.powi(l)) / 21.0);
                s.push(32.0 / 63.0 / 2f64.powi(l));
            }
            mix(w, m, s)
        }
        "mw15" => {
            let (mut w, mut m, mut s) = (vec![], vec![], vec![]);
            for l in 0..3 {
                w.push(2.0 / 7.0);
                m.push((12.0 * l as f64 - 15.0) / 7.0);
                s.push(2.0 / 7.0);
            }
            for l in 8..=10 {
                w.push(1.0 / 21.0);
                m.push(2.0 * l as f64 / 7.0);
                s.push(1.0 / 21.0);
            }
            mix(w, m, s)
        }
        "gamma21" => Some(ReferenceDistribution::Gamma { shape: 2.0, scale: 1.0 }),
        "t3" => Some(ReferenceDistribution::StudentT { dof: 3.0 }),
        "t4" => Some(ReferenceDistribution::StudentT { dof: 4.0 }),
        _ => None,
    }
}
