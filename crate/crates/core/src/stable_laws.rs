//! Stable characteristic functions in the `(β, A1, A2)` form, a
//! Chambers-Mallows-Stuck sampler, and the scenery laws built on them.

use crate::error::{Error, Result};
use crate::rng::open_unit;
use crate::special::{cos_tail_integral, polylog_cos, zeta};
use num_complex::Complex64;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Zipf};
use std::f64::consts::PI;

/// Largest `k` of the truncated Zipf law.
pub const ZIPF_CUTOFF: f64 = 1e9;

const SKEW_SLACK: f64 = 1e-12;

/// Parameters of the stable law with CF `exp(-|u|^β (A1 + i A2 sgn u))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableCfParams {
    pub beta: f64,
    pub a1: f64,
    pub a2: f64,
}

impl StableCfParams {
    pub fn new(beta: f64, a1: f64, a2: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 2.0) {
            return Err(Error::InvalidParams(format!("stability index must lie in (0, 2], got {beta}")));
        }
        if !(a1 > 0.0 && a1.is_finite()) {
            return Err(Error::InvalidParams(format!("A1 must be positive and finite, got {a1}")));
        }
        if !a2.is_finite() {
            return Err(Error::InvalidParams(format!("A2 must be finite, got {a2}")));
        }
        let ratio = (a2 / a1).abs();
        let ok = if beta == 1.0 {
            a2 == 0.0
        } else if beta == 2.0 {
            ratio <= SKEW_SLACK
        } else {
            ratio <= (0.5 * PI * beta).tan().abs() * (1.0 + SKEW_SLACK)
        };
        if !ok {
            return Err(Error::InvalidParams(format!(
                "|A2/A1| = {ratio} exceeds the admissible skew for β = {beta}"
            )));
        }
        Ok(Self { beta, a1, a2 })
    }

    pub fn symmetric(beta: f64, a1: f64) -> Result<Self> {
        Self::new(beta, a1, 0.0)
    }

    /// `A1 + i A2 sgn(u)` for `u > 0` when `positive`, else its conjugate.
    pub fn weight(&self, positive: bool) -> Complex64 {
        Complex64::new(self.a1, if positive { self.a2 } else { -self.a2 })
    }

    pub fn cf(&self, u: f64) -> Complex64 {
        if u == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        (-self.weight(u > 0.0) * u.abs().powf(self.beta)).exp()
    }

    /// The law of `-ξ`.
    pub fn negated(&self) -> Self {
        Self { a2: -self.a2, ..*self }
    }
}

/// Stable law in the sampler's `(α, b, σ)` parametrization (CF
/// `exp(-σ^α |t|^α (1 - i b sgn(t) tan(πα/2)))`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmsParameters {
    pub alpha: f64,
    pub skew: f64,
    pub scale: f64,
}

pub fn to_cms_parameters(params: &StableCfParams) -> Result<CmsParameters> {
    let p = StableCfParams::new(params.beta, params.a1, params.a2)?;
    let scale = p.a1.powf(1.0 / p.beta);
    let skew = if p.beta == 1.0 || p.beta == 2.0 {
        0.0
    } else {
        (-p.a2 / (p.a1 * (0.5 * PI * p.beta).tan())).clamp(-1.0, 1.0)
    };
    Ok(CmsParameters { alpha: p.beta, skew, scale })
}

/// Sampler with the trigonometric constants of the transform precomputed.
#[derive(Debug, Clone, Copy)]
pub enum StableSampler {
    Gaussian { sd: f64 },
    Cauchy { scale: f64 },
    Cms { alpha: f64, shift: f64, factor: f64, scale: f64 },
}

impl StableSampler {
    pub fn new(params: &StableCfParams) -> Result<Self> {
        let cms = to_cms_parameters(params)?;
        Ok(match cms.alpha {
            a if a == 2.0 => StableSampler::Gaussian { sd: (2.0 * params.a1).sqrt() },
            a if a == 1.0 => StableSampler::Cauchy { scale: params.a1 },
            alpha => {
                let zeta = cms.skew * (0.5 * PI * alpha).tan();
                StableSampler::Cms {
                    alpha,
                    shift: zeta.atan() / alpha,
                    factor: (1.0 + zeta * zeta).powf(0.5 / alpha),
                    scale: cms.scale,
                }
            }
        })
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            StableSampler::Gaussian { sd } => {
                // Box-Muller, one branch used.
                let u1 = open_unit(rng.next_u64());
                let u2 = open_unit(rng.next_u64());
                sd * (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
            }
            StableSampler::Cauchy { scale } => scale * (PI * (open_unit(rng.next_u64()) - 0.5)).tan(),
            StableSampler::Cms { alpha, shift, factor, scale } => {
                let v = PI * (open_unit(rng.next_u64()) - 0.5);
                let w = -open_unit(rng.next_u64()).ln();
                let arg = alpha * (v + shift);
                let x = factor * arg.sin() / v.cos().powf(1.0 / alpha)
                    * ((v - arg).cos() / w).powf((1.0 - alpha) / alpha);
                scale * x
            }
        }
    }
}

pub fn sample_stable<R: RngCore + ?Sized>(params: &StableCfParams, rng: &mut R) -> Result<f64> {
    Ok(StableSampler::new(params)?.sample(rng))
}

/// Scenery distributions with closed-form characteristic functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SceneryLaw {
    ExactStable(StableCfParams),
    Rademacher,
    Gaussian { variance: f64 },
    /// `P(ξ = ±k) ∝ k^{-s}` for `1 ≤ k ≤ 10^9`.
    LatticeZipf { tail_exponent: f64 },
}

impl SceneryLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SceneryLaw::ExactStable(p) => StableCfParams::new(p.beta, p.a1, p.a2).map(|_| ()),
            SceneryLaw::Rademacher => Ok(()),
            SceneryLaw::Gaussian { variance } if variance > 0.0 && variance.is_finite() => Ok(()),
            SceneryLaw::Gaussian { variance } => {
                Err(Error::InvalidParams(format!("Gaussian variance must be positive, got {variance}")))
            }
            SceneryLaw::LatticeZipf { tail_exponent: s } if s > 1.0 && s < 3.0 => Ok(()),
            SceneryLaw::LatticeZipf { tail_exponent: s } => {
                Err(Error::InvalidParams(format!("Zipf scenery tail exponent must lie in (1, 3), got {s}")))
            }
        }
    }

    pub fn is_lattice(&self) -> bool {
        matches!(self, SceneryLaw::Rademacher | SceneryLaw::LatticeZipf { .. })
    }

    /// Stability index of the limit law.
    pub fn index(&self) -> f64 {
        match *self {
            SceneryLaw::ExactStable(p) => p.beta,
            SceneryLaw::Rademacher | SceneryLaw::Gaussian { .. } => 2.0,
            SceneryLaw::LatticeZipf { tail_exponent } => (tail_exponent - 1.0).min(2.0),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match self {
            SceneryLaw::ExactStable(p) => p.a2 == 0.0,
            _ => true,
        }
    }

    pub fn negated(&self) -> Self {
        match *self {
            SceneryLaw::ExactStable(p) => SceneryLaw::ExactStable(p.negated()),
            other => other,
        }
    }

    pub fn cf(&self, u: f64) -> Complex64 {
        match *self {
            SceneryLaw::ExactStable(p) => p.cf(u),
            SceneryLaw::Rademacher => Complex64::new(u.cos(), 0.0),
            SceneryLaw::Gaussian { variance } => Complex64::new((-0.5 * variance * u * u).exp(), 0.0),
            SceneryLaw::LatticeZipf { tail_exponent } => Complex64::new(zipf_cf(tail_exponent, u), 0.0),
        }
    }

    pub fn sampler(&self) -> Result<ScenerySampler> {
        self.validate()?;
        Ok(match *self {
            SceneryLaw::ExactStable(p) => ScenerySampler::Stable(StableSampler::new(&p)?),
            SceneryLaw::Rademacher => ScenerySampler::Rademacher,
            SceneryLaw::Gaussian { variance } => ScenerySampler::Stable(StableSampler::Gaussian { sd: variance.sqrt() }),
            SceneryLaw::LatticeZipf { tail_exponent } => ScenerySampler::Zipf(
                Zipf::new(ZIPF_CUTOFF, tail_exponent).map_err(|e| Error::InvalidParams(e.to_string()))?,
            ),
        })
    }
}

/// Ready-to-draw form of a [`SceneryLaw`].
#[derive(Debug, Clone, Copy)]
pub enum ScenerySampler {
    Stable(StableSampler),
    Rademacher,
    Zipf(Zipf<f64>),
}

impl ScenerySampler {
    pub fn sample<R: RngCore>(&self, rng: &mut R) -> f64 {
        match self {
            ScenerySampler::Stable(s) => s.sample(rng),
            ScenerySampler::Rademacher => {
                if rng.next_u64() >> 63 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            ScenerySampler::Zipf(z) => {
                let k = z.sample(rng);
                if rng.random::<bool>() {
                    k
                } else {
                    -k
                }
            }
        }
    }
}

/// CF of the symmetric Zipf law truncated at [`ZIPF_CUTOFF`].
///
/// The untruncated sum `Σ cos(ku)/k^s` has a closed expansion; the part
/// beyond the cutoff is replaced by the midpoint integral
/// `∫_{N+1/2}^∞ cos(ux) x^{-s} dx`, whose error is `O(N^{-s-1})`.
pub fn zipf_cf(s: f64, u: f64) -> f64 {
    if u == 0.0 {
        return 1.0;
    }
    let edge = ZIPF_CUTOFF + 0.5;
    let tail_mass = edge.powf(1.0 - s) / (s - 1.0);
    let mut ur = u.rem_euclid(2.0 * PI);
    if ur > PI {
        ur = 2.0 * PI - ur;
    }
    if ur == 0.0 {
        return 1.0;
    }
    let tail = ur.powf(s - 1.0) * cos_tail_integral(s, ur * edge);
    (polylog_cos(s, ur) - tail) / (zeta(s) - tail_mass)
}

/// Max over `u_grid` of `|empirical CF - closed-form CF|` from `samples`
/// draws of `law`.
pub fn empirical_cf_check<R: RngCore>(law: &SceneryLaw, u_grid: &[f64], samples: usize, rng: &mut R) -> Result<f64> {
    if samples < 10_000 {
        return Err(Error::InvalidParams(format!("empirical CF check needs at least 1e4 samples, got {samples}")));
    }
    let sampler = law.sampler()?;
    let mut sums = vec![Complex64::new(0.0, 0.0); u_grid.len()];
    for _ in 0..samples {
        let x = sampler.sample(rng);
        for (s, &u) in sums.iter_mut().zip(u_grid) {
            *s += Complex64::from_polar(1.0, u * x);
        }
    }
    let n = samples as f64;
    Ok(sums
        .iter()
        .zip(u_grid)
        .map(|(s, &u)| if u == 0.0 { 0.0 } else { (s / n - law.cf(u)).norm() })
        .fold(0.0, f64::max))
}
