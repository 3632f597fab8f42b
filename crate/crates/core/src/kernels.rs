//! Gaussian-based kernels of arbitrary even order and the infinite-order
//! sinc kernel.
//!
//! The order-2r Gaussian-based kernel has density
//! `g_{2r} = sum_{s<r} (-1)^s/(2^s s!) phi^(2s)` and integrated kernel
//! `G_{2r}(x) = Phi(x) + P_{r}(x) phi(x)` for a polynomial `P_r` of degree
//! 2r-3. `r = 1` is the plain Gaussian kernel; higher `r` trades bias order
//! for negative side lobes (the densities take negative values and the
//! integrated kernels leave [0, 1], which is expected and harmless here).
//! The sinc kernel is the `r -> infinity` limit with integrated kernel
//! `1/2 + Si(x)/pi`.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::specfun::{
    kummer_m_recurrence, normal_cdf, normal_pdf, odd_factorial, phi_deriv, sine_integral,
    SQRT_2PI, SQRT_PI,
};

/// Largest supported order parameter r (kernel order 2r = 30). Beyond this
/// the exact-risk series and the factorial scalings stop being representable
/// cleanly in f64, and nothing in the experiments needs more.
pub const MAX_ORDER: u32 = 15;

/// Correction terms in `G_{2r}` decay like `phi(x)`; beyond this point the
/// integrated kernel is `Phi(x)` to far below f64 resolution, and skipping
/// the series also avoids overflowing the raw Kummer sums at huge `|x|`.
pub const CDF_TAIL_CUTOFF: f64 = 40.0;

/// Kernel identifier: a Gaussian-based kernel with order parameter `r`
/// (kernel order 2r), or the infinite-order sinc kernel.
///
/// Serializes as the bare integer `r` or the string `"inf"`, and parses
/// from the same forms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KernelSpec {
    Finite(u32),
    Infinite,
}

impl KernelSpec {
    pub fn validate(self) -> Result<()> {
        match self {
            KernelSpec::Finite(r) if r == 0 || r > MAX_ORDER => Err(Error::Domain(format!(
                "kernel order parameter r={r} outside 1..={MAX_ORDER}"
            ))),
            _ => Ok(()),
        }
    }

    /// Order parameter for finite kernels, `None` for the sinc kernel.
    pub fn order(self) -> Option<u32> {
        match self {
            KernelSpec::Finite(r) => Some(r),
            KernelSpec::Infinite => None,
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Finite(r) => write!(f, "{r}"),
            KernelSpec::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("sinc") {
            return Ok(KernelSpec::Infinite);
        }
        let r: u32 = t
            .parse()
            .map_err(|_| Error::InvalidInput(format!("kernel spec {s:?}: expected 1..={MAX_ORDER} or \"inf\"")))?;
        let k = KernelSpec::Finite(r);
        k.validate()?;
        Ok(k)
    }
}

impl Serialize for KernelSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            KernelSpec::Finite(r) => serializer.serialize_u32(*r),
            KernelSpec::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for KernelSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct KernelVisitor;

        impl<'de> Visitor<'de> for KernelVisitor {
            type Value = KernelSpec;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "an integer in 1..={MAX_ORDER} or the string \"inf\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<KernelSpec, E> {
                let r = u32::try_from(v).map_err(|_| E::custom("kernel order out of range"))?;
                let k = KernelSpec::Finite(r);
                k.validate().map_err(E::custom)?;
                Ok(k)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<KernelSpec, E> {
                let r = u32::try_from(v).map_err(|_| E::custom("kernel order out of range"))?;
                self.visit_u64(r as u64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<KernelSpec, E> {
                v.parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_any(KernelVisitor)
    }
}

fn check_order(r: u32) -> Result<()> {
    KernelSpec::Finite(r).validate()
}

/// Kernel density `g_{2r}(x)`: the truncated derivative series
/// `sum_{s<r} (-1)^s/(2^s s!) phi^(2s)(x)`.
pub fn g2r(r: u32, x: f64) -> Result<f64> {
    check_order(r)?;
    let mut tot = normal_pdf(x);
    let mut coef = 1.0;
    for s in 1..r {
        coef /= -2.0 * s as f64;
        tot += coef * phi_deriv(2 * s as i32, x);
    }
    Ok(tot)
}

/// Integrated kernel `G_{2r}(x)`.
///
/// Evaluated through the confluent-hypergeometric form
/// `Phi(x) + x/sqrt(2 pi) * sum_{s=1}^{r-1} R'_s M(s + 1/2, 3/2, -x^2/2)`
/// with `R'_1 = 1/2`, `R'_{s+1} = R'_s (s + 1/2)/(s + 1)`, which stays
/// stable in `x` where the raw Hermite partial sums would cancel.
pub fn g2r_cdf(r: u32, x: f64) -> Result<f64> {
    check_order(r)?;
    if r == 1 || x.abs() > CDF_TAIL_CUTOFF {
        return Ok(normal_cdf(x));
    }
    let chain = kummer_m_recurrence(1.5, 1.5, -0.5 * x * x, (r - 2) as usize)?;
    let mut sum = 0.0;
    let mut rp = 0.5;
    for (k, m) in chain.iter().enumerate() {
        sum += rp * m;
        let s = (k + 1) as f64;
        rp *= (s + 0.5) / (s + 1.0);
    }
    Ok(normal_cdf(x) + x / SQRT_2PI * sum)
}

fn rescale_factor(r: u32) -> Result<f64> {
    check_order(r)?;
    if r < 2 {
        return Err(Error::Domain(
            "rescaled kernels are defined for r >= 2 only".into(),
        ));
    }
    Ok(((2 * r - 2) as f64).sqrt())
}

/// Rescaled kernel density `g*_{2r}(x) = g_{2r}(x/sqrt(2r-2))/sqrt(2r-2)`,
/// which keeps the effective support comparable across orders (r >= 2).
pub fn g2r_rescaled(r: u32, x: f64) -> Result<f64> {
    let c = rescale_factor(r)?;
    Ok(g2r(r, x / c)? / c)
}

/// Rescaled integrated kernel `G*_{2r}(x) = G_{2r}(x/sqrt(2r-2))` (r >= 2).
pub fn g2r_cdf_rescaled(r: u32, x: f64) -> Result<f64> {
    let c = rescale_factor(r)?;
    g2r_cdf(r, x / c)
}

/// Integrated sinc kernel `1/2 + Si(x)/pi`.
pub fn sinc_cdf(x: f64) -> f64 {
    0.5 + sine_integral(x) / std::f64::consts::PI
}

/// Integrated kernel for any [`KernelSpec`] (unrescaled).
pub fn kernel_cdf(k: KernelSpec, x: f64) -> Result<f64> {
    match k {
        KernelSpec::Finite(r) => g2r_cdf(r, x),
        KernelSpec::Infinite => Ok(sinc_cdf(x)),
    }
}

/// First non-vanishing moment `mu_{2r}(g_{2r}) = (-1)^{r-1} (2r-1)!!`.
pub fn kernel_moment_2r(r: u32) -> Result<f64> {
    check_order(r)?;
    let sign = if r % 2 == 1 { 1.0 } else { -1.0 };
    Ok(sign * odd_factorial(2 * r as i64))
}

/// Variance-reduction constant `psi_1` entering the O(h/n) term of the
/// risk expansion: `C(r)/sqrt(pi)` for the finite kernels, `1/pi` for sinc.
pub fn psi1(k: KernelSpec) -> Result<f64> {
    match k {
        KernelSpec::Finite(r) => Ok(crate::mise::c_of_r(r)?.value / SQRT_PI),
        KernelSpec::Infinite => Ok(std::f64::consts::FRAC_1_PI),
    }
}
