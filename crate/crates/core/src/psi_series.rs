//! `ψ(t) = Σ_n E[exp(-|t|^β V_n (A1 + i A2 sgn t))]`: Monte Carlo with a
//! certified truncation bound, the `β = 1` closed form, and the small-`t`
//! equivalents `γ(t)`.

use crate::error::{Error, Result};
use crate::renewal_constants::{delta_exponent, RegimeConstants};
use crate::rng::replica_rng;
use crate::stable_laws::StableCfParams;
use crate::stats::{reduce_replicas, ComplexEstimate, ComplexMeanVar};
use crate::walk_paths::{pow_table, Occupation, WalkModel};
use num_complex::Complex64;
use statrs::function::gamma::{gamma, gamma_ur};

/// Hard cap on the number of series terms.
pub const N_MAX_CAP: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeKind {
    /// `α > 1`, `β ≠ 1`: `γ(t) = C |t|^{-1/δ} (A1 + i A2 sgn t)^{-1/(δβ)}`.
    PowerLaw,
    /// `β = 1`: `γ(t) = 1 / (A1 |t|)`.
    Cauchy,
    /// `α = 1`, `β ∈ (1, 2]`: logarithmic correction.
    LogCorrected,
}

/// `(α, β, A1, A2)` with whichever of `C` or `c` the regime needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiRegime {
    pub alpha: f64,
    pub params: StableCfParams,
    pub c_const: Option<f64>,
    pub big_c: Option<f64>,
    kind: RegimeKind,
}

impl PsiRegime {
    pub fn new(alpha: f64, params: StableCfParams, c_const: Option<f64>, big_c: Option<f64>) -> Result<Self> {
        let beta = params.beta;
        if !(alpha >= 1.0 && alpha <= 2.0) {
            return Err(Error::InvalidParams(format!("α must lie in [1, 2], got {alpha}")));
        }
        let kind = if beta == 1.0 {
            RegimeKind::Cauchy
        } else if alpha > 1.0 {
            match big_c {
                Some(c) if c > 0.0 && c.is_finite() => RegimeKind::PowerLaw,
                _ => return Err(Error::InvalidParams("α > 1, β ≠ 1 needs a positive C".into())),
            }
        } else if beta > 1.0 {
            match c_const {
                Some(c) if c > 0.0 && c.is_finite() => RegimeKind::LogCorrected,
                _ => return Err(Error::InvalidParams("α = 1 needs a positive c".into())),
            }
        } else {
            return Err(Error::Regime(format!("no ψ asymptotics for α = 1, β = {beta} < 1")));
        };
        Ok(Self { alpha, params, c_const, big_c, kind })
    }

    pub fn from_constants(k: &RegimeConstants) -> Result<Self> {
        Self::new(k.alpha, k.params, k.c, k.big_c())
    }

    pub fn kind(&self) -> RegimeKind {
        self.kind
    }

    pub fn beta(&self) -> f64 {
        self.params.beta
    }

    pub fn delta(&self) -> f64 {
        delta_exponent(self.alpha, self.params.beta)
    }
}

/// `1 / (e^{A1 |t|} - 1)`.
pub fn psi_closed_beta1(a1: f64, t: f64) -> Result<f64> {
    if t == 0.0 || !t.is_finite() {
        return Err(Error::Domain(format!("ψ has a pole at t = 0 (got t = {t})")));
    }
    if !(a1 > 0.0) {
        return Err(Error::InvalidParams(format!("A1 must be positive, got {a1}")));
    }
    Ok(1.0 / (a1 * t.abs()).exp_m1())
}

/// `Σ_{n > n_max} exp(-A1 |t|^β n^{min(1, β)})`, bounding `|ψ - ψ_{n_max}|`.
///
/// Geometric for `β ≥ 1`; for `β < 1` the sum is bounded by the integral
/// `∫_{n_max}^∞ e^{-k x^β} dx = Γ(1/β, k n_max^β) / (β k^{1/β})`.
pub fn tail_bound(a1: f64, beta: f64, t: f64, n_max: usize) -> f64 {
    let k = a1 * t.abs().powf(beta);
    if beta >= 1.0 {
        (-k * (n_max as f64 + 1.0)).exp() / -(-k).exp_m1()
    } else {
        let a = 1.0 / beta;
        let x = k * (n_max as f64).powf(beta);
        gamma(a) * gamma_ur(a, x) / (beta * k.powf(a))
    }
}

/// Smallest `n_max` whose tail bound is below `tol`.
pub fn choose_n_max(a1: f64, beta: f64, t: f64, tol: f64) -> Result<usize> {
    if !(tol > 0.0) || t == 0.0 {
        return Err(Error::InvalidParams(format!("need tol > 0 and t ≠ 0, got ({tol}, {t})")));
    }
    let mut hi = 1usize;
    while tail_bound(a1, beta, t, hi) > tol {
        hi *= 2;
        if hi > N_MAX_CAP {
            return Err(Error::Truncation { bound: tail_bound(a1, beta, t, N_MAX_CAP), tolerance: tol });
        }
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if tail_bound(a1, beta, t, mid) > tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// `Σ_n exp(-A1 |t|^β n^{min(1,β)})`, the envelope of `|ψ(t)|`.
pub fn psi_envelope(a1: f64, beta: f64, t: f64) -> f64 {
    tail_bound(a1, beta, t, 0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiEstimate {
    pub t: f64,
    pub value: ComplexEstimate,
    /// Certified bound on the omitted terms `n > n_max`.
    pub trunc_bound: f64,
    pub n_max: usize,
}

/// Monte Carlo of the truncated series at every `t` in `ts`, sharing the
/// walk paths: each replica walks `n_max` steps once and accumulates
/// `exp(-|t|^β V_n w)` for all `t`, with `V_n` updated incrementally.
///
/// `n_max` is the largest of the per-`t` choices of [`choose_n_max`] for
/// `tol`, unless `n_max` is given, in which case its bound must be `≤ tol`.
pub fn psi_mc_grid(
    params: &StableCfParams,
    walk: &WalkModel,
    ts: &[f64],
    reps: usize,
    n_max: Option<usize>,
    tol: f64,
    seed: u64,
) -> Result<Vec<PsiEstimate>> {
    let beta = params.beta;
    if ts.is_empty() || ts.iter().any(|&t| t == 0.0 || !t.is_finite()) {
        return Err(Error::Domain(format!("ψ needs finite nonzero t, got {ts:?}")));
    }
    if reps == 0 {
        return Err(Error::InvalidParams("reps must be positive".into()));
    }
    let required = ts.iter().map(|&t| choose_n_max(params.a1, beta, t, tol)).collect::<Result<Vec<_>>>()?;
    let n_max = match n_max {
        Some(n) => {
            for &t in ts {
                let b = tail_bound(params.a1, beta, t, n);
                if b > tol {
                    return Err(Error::Truncation { bound: b, tolerance: tol });
                }
            }
            n
        }
        None => required.iter().copied().max().unwrap_or(1),
    };
    let scales: Vec<f64> = ts.iter().map(|t| t.abs().powf(beta)).collect();
    let powers = pow_table(beta, n_max);
    let stepper = walk.stepper()?;
    let skewed = params.a2 != 0.0;

    let acc = reduce_replicas(
        reps,
        || vec![ComplexMeanVar::default(); ts.len()],
        |range, acc| {
            let mut occ = Occupation::for_walk(walk, n_max);
            let mut sums = vec![Complex64::new(0.0, 0.0); ts.len()];
            for r in range {
                let mut rng = replica_rng(seed, r as u64);
                occ.clear();
                sums.iter_mut().for_each(|s| *s = Complex64::new(0.0, 0.0));
                let mut pos = 0i64;
                let mut v = 0.0;
                for k in 1..=n_max {
                    pos += stepper.step(&mut rng);
                    let c = occ.bump(pos) as usize;
                    v += powers[c + 1] - powers[c];
                    let mut largest = 0.0f64;
                    for (s, &sc) in sums.iter_mut().zip(&scales) {
                        let x = sc * v;
                        let m = (-params.a1 * x).exp();
                        *s += if skewed {
                            Complex64::from_polar(m, -params.a2 * x)
                        } else {
                            Complex64::new(m, 0.0)
                        };
                        largest = largest.max(m);
                    }
                    // Terms decrease along the path (V_n increases), so the
                    // rest of this path contributes at most largest·(n_max-k).
                    if largest * ((n_max - k) as f64) < 1e-17 * sums.iter().map(|s| s.norm()).fold(f64::MAX, f64::min) {
                        break;
                    }
                }
                for (a, s) in acc.iter_mut().zip(&sums) {
                    a.push(*s);
                }
            }
        },
    );
    Ok(ts
        .iter()
        .zip(acc)
        .map(|(&t, a)| {
            let mut value = a.estimate();
            if t < 0.0 {
                value.value = value.value.conj();
            }
            PsiEstimate { t, value, trunc_bound: tail_bound(params.a1, beta, t, n_max), n_max }
        })
        .collect())
}

/// Single-`t` form of [`psi_mc_grid`].
pub fn psi_mc(params: &StableCfParams, walk: &WalkModel, t: f64, reps: usize, n_max: Option<usize>, tol: f64, seed: u64) -> Result<PsiEstimate> {
    Ok(psi_mc_grid(params, walk, &[t], reps, n_max, tol, seed)?[0])
}

/// `γ(t)` of the regime, principal branch for complex powers.
pub fn gamma_asym(regime: &PsiRegime, t: f64) -> Result<Complex64> {
    if t == 0.0 || !t.is_finite() {
        return Err(Error::Domain(format!("γ needs finite t ≠ 0, got {t}")));
    }
    let p = regime.params;
    let w = p.weight(t > 0.0);
    let at = t.abs();
    match regime.kind {
        RegimeKind::Cauchy => Ok(Complex64::new(1.0 / (p.a1 * at), 0.0)),
        RegimeKind::PowerLaw => {
            let delta = regime.delta();
            let c = regime.big_c.unwrap_or(f64::NAN);
            Ok(c * at.powf(-1.0 / delta) * w.powf(-1.0 / (delta * p.beta)))
        }
        RegimeKind::LogCorrected => {
            if at >= 1.0 {
                return Err(Error::Domain(format!("the α = 1 equivalent needs |t| < 1, got {t}")));
            }
            let beta = p.beta;
            let log = -(beta * at.ln());
            let c = regime.c_const.unwrap_or(f64::NAN);
            Ok(log.powf(1.0 - beta) / (c * at.powf(beta) * w))
        }
    }
}

/// `γ'(t)`, using `γ(-t) = conj γ(t)`.
pub fn gamma_asym_derivative(regime: &PsiRegime, t: f64) -> Result<Complex64> {
    if t < 0.0 {
        return Ok(-gamma_asym_derivative(regime, -t)?.conj());
    }
    let g = gamma_asym(regime, t)?;
    Ok(match regime.kind {
        RegimeKind::Cauchy => -g / t,
        RegimeKind::PowerLaw => -g / (regime.delta() * t),
        RegimeKind::LogCorrected => {
            let beta = regime.beta();
            let log = -(beta * t.ln());
            -g * (beta / t) * ((1.0 - beta) / log + 1.0)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiRatio {
    pub t: f64,
    pub psi: PsiEstimate,
    pub gamma: Complex64,
    pub ratio: Complex64,
    /// `(max stderr + truncation bound) / |γ|`.
    pub ratio_err: f64,
}

/// `ψ̂(t) / γ(t)` on `t_grid ⊂ (0, 1/2]`.
pub fn psi_ratio_diagnostic(regime: &PsiRegime, walk: &WalkModel, t_grid: &[f64], reps: usize, tol: f64, seed: u64) -> Result<Vec<PsiRatio>> {
    if t_grid.iter().any(|&t| !(t > 0.0 && t <= 0.5)) {
        return Err(Error::Domain(format!("the ratio diagnostic takes t in (0, 0.5], got {t_grid:?}")));
    }
    let est = psi_mc_grid(&regime.params, walk, t_grid, reps, None, tol, seed)?;
    est.into_iter()
        .map(|psi| {
            let gamma = gamma_asym(regime, psi.t)?;
            Ok(PsiRatio {
                t: psi.t,
                psi,
                gamma,
                ratio: psi.value.value / gamma,
                ratio_err: (psi.value.stderr_max() + psi.trunc_bound) / gamma.norm(),
            })
        })
        .collect()
}
