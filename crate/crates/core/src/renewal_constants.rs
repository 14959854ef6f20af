//! Exponents and limit constants of the renewal asymptotics: `δ`, `c`, `C`,
//! `C_0, C_1, C_2, D_1, D_2`, the Fourier constants `c±`, the local-time
//! moment `E[|L|_β^{-1/δ}]`, and the two oscillatory integrals behind them.

use crate::error::{Error, Result};
use crate::quadrature::integrate;
use crate::rng::replica_rng;
use crate::special::{gamma, oscillatory_tail};
use crate::stable_laws::StableCfParams;
use crate::stats::{reduce_replicas, Estimate, MeanVar};
use crate::walk_paths::{b_norm, pow_table, Occupation, WalkModel};
use num_complex::Complex64;
use std::f64::consts::PI;

/// `δ = 1 - 1/α + 1/(αβ)`.
pub fn delta_exponent(alpha: f64, beta: f64) -> f64 {
    1.0 - 1.0 / alpha + 1.0 / (alpha * beta)
}

/// `c = (π a_0)^{1-β} Γ(β + 1)`.
pub fn c_const(a0: f64, beta: f64) -> f64 {
    (PI * a0).powf(1.0 - beta) * gamma(beta + 1.0)
}

/// `C = Γ(1/(δβ)) E[|L|_β^{-1/δ}] / (δβ)`.
pub fn big_c(delta: f64, beta: f64, l_moment: f64) -> f64 {
    let k = 1.0 / (delta * beta);
    k * gamma(k) * l_moment
}

/// Everything the limit constants depend on for one `(α, β, A1, A2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeConstants {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub params: StableCfParams,
    /// `E[|L|_β^{-1/δ}]`, needed for `α > 1`, `β ≠ 1`.
    pub l_moment: Option<Estimate>,
    /// Cauchy scale of the walk, `α = 1` only.
    pub a0: Option<f64>,
    /// `(π a_0)^{1-β} Γ(β+1)`, `α = 1` only.
    pub c: Option<f64>,
}

impl RegimeConstants {
    pub fn new(alpha: f64, params: StableCfParams, l_moment: Option<Estimate>, a0: Option<f64>) -> Result<Self> {
        if !(alpha >= 1.0 && alpha <= 2.0) {
            return Err(Error::InvalidParams(format!("walk index α must lie in [1, 2], got {alpha}")));
        }
        let beta = params.beta;
        if let Some(m) = l_moment {
            if !(m.value > 0.0 && m.value.is_finite()) {
                return Err(Error::InvalidParams(format!("E[|L|^(-1/δ)] must be positive, got {}", m.value)));
            }
        }
        let (a0, c) = if alpha == 1.0 {
            let a0 = a0.ok_or_else(|| Error::InvalidParams("α = 1 needs the walk scale a0".into()))?;
            if !(a0 > 0.0) {
                return Err(Error::InvalidParams(format!("a0 must be positive, got {a0}")));
            }
            (Some(a0), Some(c_const(a0, beta)))
        } else {
            (None, None)
        };
        Ok(Self { alpha, beta, delta: delta_exponent(alpha, beta), params, l_moment, a0, c })
    }

    /// `C` of the `α > 1`, `β ≠ 1` asymptotics, if the moment is known.
    pub fn big_c(&self) -> Option<f64> {
        if self.alpha > 1.0 && self.beta != 1.0 {
            self.l_moment.map(|m| big_c(self.delta, self.beta, m.value))
        } else {
            None
        }
    }

    fn modulus(&self) -> f64 {
        self.params.a1.hypot(self.params.a2)
    }

    fn skew_angle(&self) -> f64 {
        (self.params.a2 / self.params.a1).atan()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TheoremConstant {
    /// Transient, `α > 1`, `β < 1`.
    C0,
    /// Recurrent, `α > 1`, `β > 1`.
    C1,
    /// `β = 1`.
    C2,
    /// `α = 1`, `β ∈ (1, 2)`.
    D1,
    /// `α = 1`, `β = 2`, symmetric scenery.
    D2,
}

pub fn limit_constant(kind: TheoremConstant, k: &RegimeConstants) -> Result<f64> {
    let (alpha, beta, delta) = (k.alpha, k.beta, k.delta);
    let mismatch = |what: &str| Err(Error::Regime(format!("{kind:?} needs {what}, got α = {alpha}, β = {beta}")));
    let l_moment = || {
        k.l_moment
            .map(|m| m.value)
            .ok_or_else(|| Error::Regime(format!("{kind:?} needs E[|L|^(-1/δ)]")))
    };
    let c = || k.c.ok_or_else(|| Error::Regime(format!("{kind:?} needs c (α = 1)")));
    match kind {
        TheoremConstant::C0 | TheoremConstant::C1 => {
            let transient = kind == TheoremConstant::C0;
            if alpha <= 1.0 || (transient && beta >= 1.0) || (!transient && beta <= 1.0) {
                return mismatch(if transient { "α > 1, β < 1" } else { "α > 1, β > 1" });
            }
            let gap = if transient { delta - 1.0 } else { 1.0 - delta };
            let k_db = 1.0 / (delta * beta);
            Ok(gamma(k_db) * gamma(2.0 - 1.0 / delta) * l_moment()?
                / (PI * beta * gap * k.modulus().powf(k_db))
                * ((0.5 * PI - k.skew_angle() / beta) / delta).sin())
        }
        TheoremConstant::C2 => {
            if beta != 1.0 {
                return mismatch("β = 1");
            }
            Ok(1.0 / (PI * k.params.a1))
        }
        TheoremConstant::D1 => {
            if alpha != 1.0 || !(beta > 1.0 && beta < 2.0) {
                return mismatch("α = 1, β ∈ (1, 2)");
            }
            Ok(gamma(2.0 - beta) / (PI * c()? * (beta - 1.0) * k.modulus()) * (0.5 * PI * beta - k.skew_angle()).sin())
        }
        TheoremConstant::D2 => {
            if alpha != 1.0 || beta != 2.0 {
                return mismatch("α = 1, β = 2");
            }
            Ok(1.0 / (2.0 * k.params.a1 * c()?))
        }
    }
}

/// `(c⁺, c⁻)` for `δ > 1`:
/// `2 Γ(1 - 1/δ) |A|^{-1/(δβ)} sin((π/2 ± arctan(A2/A1)/β) / δ)`.
pub fn c_plus_minus(delta: f64, beta: f64, params: &StableCfParams) -> Result<(f64, f64)> {
    if !(delta > 1.0) {
        return Err(Error::Regime(format!("c± are defined for δ > 1 only, got δ = {delta}")));
    }
    let scale = 2.0 * gamma(1.0 - 1.0 / delta) / params.a1.hypot(params.a2).powf(1.0 / (delta * beta));
    let phi = (params.a2 / params.a1).atan() / beta;
    Ok((
        scale * ((0.5 * PI + phi) / delta).sin(),
        scale * ((0.5 * PI - phi) / delta).sin(),
    ))
}

/// Estimates of `E[(b_n V_n^{-1/β})^{1/δ}]` at each `n` in `ns`, all taken
/// from prefixes of the same paths.
pub fn l_moment_estimates(walk: &WalkModel, beta: f64, ns: &[usize], reps: usize, seed: u64) -> Result<Vec<Estimate>> {
    let alpha = walk.alpha();
    if alpha <= 1.0 {
        return Err(Error::Regime("the local-time moment estimator needs α > 1".into()));
    }
    if !(beta > 0.0 && beta <= 2.0) {
        return Err(Error::InvalidParams(format!("β must lie in (0, 2], got {beta}")));
    }
    if ns.is_empty() || ns.iter().any(|&n| n < 1 << 10) || reps < 500 {
        return Err(Error::InvalidParams(format!("need every n ≥ 1024 and reps ≥ 500, got {ns:?}, {reps}")));
    }
    let mut sorted = ns.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let n_max = *sorted.last().unwrap_or(&0);
    let delta = delta_exponent(alpha, beta);
    let norms: Vec<f64> = sorted.iter().map(|&n| b_norm(alpha, beta, n as f64)).collect::<Result<_>>()?;
    let powers = pow_table(beta, n_max);
    let stepper = walk.stepper()?;

    let acc = reduce_replicas(
        reps,
        || vec![MeanVar::default(); sorted.len()],
        |range, acc| {
            let mut occ = Occupation::for_walk(walk, n_max);
            for r in range {
                let mut rng = replica_rng(seed, r as u64);
                occ.clear();
                let (mut pos, mut v, mut next) = (0i64, 0.0, 0usize);
                for k in 1..=n_max {
                    pos += stepper.step(&mut rng);
                    let c = occ.bump(pos) as usize;
                    v += powers[c + 1] - powers[c];
                    if k == sorted[next] {
                        acc[next].push((norms[next] * v.powf(-1.0 / beta)).powf(1.0 / delta));
                        next += 1;
                    }
                }
            }
        },
    );
    let by_n: Vec<Estimate> = acc.iter().map(MeanVar::estimate).collect();
    Ok(ns.iter().map(|n| by_n[sorted.binary_search(n).unwrap_or(0)]).collect())
}

pub fn l_moment_estimate(walk: &WalkModel, beta: f64, n: usize, reps: usize, seed: u64) -> Result<Estimate> {
    Ok(l_moment_estimates(walk, beta, &[n], reps, seed)?[0])
}

/// The two kernels `∫_0^∞ (1 - e^{-it}) t^{-s} dt` appear with
/// `s = 1/δ` and `s = β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OscillatoryKind {
    DeltaKernel(f64),
    BetaKernel(f64),
}

impl OscillatoryKind {
    pub fn exponent(&self) -> f64 {
        match *self {
            OscillatoryKind::DeltaKernel(d) => 1.0 / d,
            OscillatoryKind::BetaKernel(b) => b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatoryIntegral {
    pub closed_form: Complex64,
    pub quadrature: Complex64,
    /// Quadrature error estimate plus the integration-by-parts remainder.
    pub quadrature_error: f64,
}

/// `Γ(2 - s) e^{iπ(s-1)/2} / (s - 1)`.
///
/// For `s ∈ (1, 2)` this is the convergent integral
/// `∫_0^∞ (1 - e^{-it}) t^{-s} dt`. For `s ∈ (0, 1)` the constant part
/// diverges and the value is the analytic continuation in `s`, which
/// equals `-∫_0^∞ e^{-it} t^{-s} dt`.
pub fn oscillatory_closed_form(s: f64) -> Complex64 {
    gamma(2.0 - s) / (s - 1.0) * Complex64::from_polar(1.0, 0.5 * PI * (s - 1.0))
}

/// Closed form and quadrature of the oscillatory kernel; fails hard if the
/// two differ by more than `tol`.
///
/// `[0, 1]` is integrated after `t = u^p`, which makes the integrand
/// smooth at 0; `[1, T]` by Gauss-Kronrod panels; `[T, ∞)` by repeated
/// integration by parts.
pub fn oscillatory_integral(kind: OscillatoryKind, tol: f64) -> Result<OscillatoryIntegral> {
    let s = kind.exponent();
    if !(s > 0.0 && s < 2.0) || s == 1.0 {
        return Err(Error::Domain(format!("oscillatory kernel exponent must lie in (0, 1) ∪ (1, 2), got {s}")));
    }
    let closed_form = oscillatory_closed_form(s);
    let convergent = s > 1.0;
    // 1 - e^{-it} without cancellation, or -e^{-it} on the continued branch.
    let kernel = move |t: f64| -> Complex64 {
        if convergent {
            let h = (0.5 * t).sin();
            Complex64::new(2.0 * h * h, t.sin())
        } else {
            -Complex64::from_polar(1.0, -t)
        }
    };
    let p = if convergent { 1.0 / (2.0 - s) } else { 1.0 / (1.0 - s) };
    let near = integrate(
        |u: f64| {
            if u == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let t = u.powf(p);
            kernel(t) * t.powf(-s) * p * u.powf(p - 1.0)
        },
        0.0,
        1.0,
        tol * 1e-3,
        0.0,
        2000,
    )?;
    let t_end = 1.0 + 200.0 * PI;
    let mut breaks = vec![1.0];
    let mut x = 1.0;
    while x < t_end {
        x = (x + PI).min(t_end);
        breaks.push(x);
    }
    let middle = crate::quadrature::integrate_from(&|t: f64| kernel(t) * t.powf(-s), &breaks, tol * 1e-3, 0.0, 20_000)?;
    let (osc, remainder) = oscillatory_tail(s, t_end);
    // ∫_T^∞ e^{-it} t^{-s} dt is the conjugate of ∫_T^∞ e^{it} t^{-s} dt.
    let far = if convergent {
        Complex64::new(t_end.powf(1.0 - s) / (s - 1.0), 0.0) - osc.conj()
    } else {
        -osc.conj()
    };
    let quadrature = near.value + middle.value + far;
    let quadrature_error = near.error + middle.error + remainder;
    let difference = (quadrature - closed_form).norm();
    if difference > tol {
        return Err(Error::Disagreement {
            difference,
            tolerance: tol,
            context: format!("oscillatory kernel with exponent {s}"),
        });
    }
    Ok(OscillatoryIntegral { closed_form, quadrature, quadrature_error })
}
