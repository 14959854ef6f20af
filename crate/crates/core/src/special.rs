//! Special functions: Lambert W, the inverse of `y ↦ e^y / y`, the Riemann
//! zeta function on the real line, cosine polylogarithms, and the weight
//! functions `w̃_p` together with their Laplace transforms.

use crate::error::{Error, Result};
use crate::quadrature;
use num_complex::Complex64;
use std::f64::consts::{E, PI};

pub use statrs::function::gamma::{gamma, ln_gamma};

const MAX_ITER: usize = 200;

/// Principal branch of the Lambert function on `[0, ∞)`: the `w ≥ 0` with
/// `w e^w = x`.
///
/// Newton from `ln(1 + x)` (an upper bound of `w`), on `w e^w - x` for
/// `x ≤ 1` and on the better-scaled `w + ln w - ln x` above; any step that
/// leaves the bracket is replaced by bisection.
pub fn lambert_w(x: f64) -> Result<f64> {
    if !(x >= 0.0) || x.is_infinite() {
        return Err(Error::Domain(format!("lambert_w needs a finite x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let log_x = x.ln();
    let mut lo = 0.0_f64;
    // nudged so that rounding cannot put the root outside the bracket
    let mut hi = x.ln_1p() * (1.0 + 4.0 * f64::EPSILON);
    let mut w = hi;
    for _ in 0..MAX_ITER {
        let (g, dg) = if x <= 1.0 {
            let ew = w.exp();
            (w * ew - x, ew * (1.0 + w))
        } else {
            (w + w.ln() - log_x, 1.0 + 1.0 / w)
        };
        if g == 0.0 {
            return Ok(w);
        }
        if g > 0.0 {
            hi = w;
        } else {
            lo = w;
        }
        let mut next = w - g / dg;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - w).abs() <= 2.0 * f64::EPSILON * next.abs() || hi - lo <= f64::EPSILON * hi {
            return Ok(next);
        }
        w = next;
    }
    Ok(w)
}

/// Inverse of `y ↦ e^y / y` on `[1, ∞)`, defined for `x ≥ e`.
///
/// Newton on `y - ln y - ln x` from `ln x + ln ln x`, guarded by the bracket
/// `[1, 2 ln x + 2]` with bisection fallback.
pub fn delta_inv(x: f64) -> Result<f64> {
    if !(x >= E) || x.is_infinite() {
        return Err(Error::Domain(format!("delta_inv needs a finite x >= e, got {x}")));
    }
    if x == E {
        return Ok(1.0);
    }
    let log_x = x.ln();
    let mut lo = 1.0_f64;
    let mut hi = 2.0 * log_x + 2.0;
    let mut y = (log_x + log_x.ln()).clamp(lo, hi);
    for _ in 0..MAX_ITER {
        let g = y - y.ln() - log_x;
        if g == 0.0 {
            return Ok(y);
        }
        if g > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let dg = 1.0 - 1.0 / y;
        let mut next = if dg > 0.0 { y - g / dg } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= 2.0 * f64::EPSILON * next || hi - lo <= 2.0 * f64::EPSILON * hi {
            return Ok(next);
        }
        y = next;
    }
    Ok(y)
}

const BERNOULLI_2J: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// Riemann zeta on the real line (`x ≠ 1`).
///
/// Euler-Maclaurin with 16 head terms for `x ≥ 1/2`; the functional
/// equation below that.
pub fn zeta(x: f64) -> f64 {
    if x == 1.0 {
        return f64::INFINITY;
    }
    if x == 0.0 {
        return -0.5;
    }
    if x < 0.5 {
        let s = 1.0 - x;
        return 2f64.powf(x) * PI.powf(x - 1.0) * (0.5 * PI * x).sin() * gamma(s) * zeta(s);
    }
    const N: f64 = 16.0;
    let mut sum: f64 = (1..16).map(|k| (k as f64).powf(-x)).sum();
    sum += N.powf(1.0 - x) / (x - 1.0) + 0.5 * N.powf(-x);
    // B_{2j}/(2j)! * x(x+1)...(x+2j-2) * N^{-x-2j+1}
    let mut rising = x;
    let mut fact = 2.0;
    let mut npow = N.powf(-x - 1.0);
    for (j, b) in BERNOULLI_2J.iter().enumerate() {
        sum += b / fact * rising * npow;
        let k = 2.0 * (j as f64 + 1.0);
        rising *= (x + k - 1.0) * (x + k);
        fact *= (k + 1.0) * (k + 2.0);
        npow /= N * N;
    }
    sum
}

/// `Γ(1 - s) cos(π (1 - s) / 2)`, continued through the removable
/// singularity at `s = 2`.
fn gamma_cos(s: f64) -> f64 {
    if (s - 2.0).abs() < 1e-12 {
        return -0.5 * PI;
    }
    gamma(1.0 - s) * (0.5 * PI * (1.0 - s)).cos()
}

/// `Σ_{k≥1} cos(k u) / k^s` for `s ∈ (1, 3)`, i.e. the real part of the
/// polylogarithm `Li_s(e^{iu})`.
///
/// Uses the expansion about `u = 0`, valid for `|u| < 2π` after reducing
/// `u` to `[-π, π]`; the `ζ(s - 2j)` series converges like `4^{-j}` there.
pub fn polylog_cos(s: f64, u: f64) -> f64 {
    let mut u = u.rem_euclid(2.0 * PI);
    if u > PI {
        u = 2.0 * PI - u;
    }
    if u == 0.0 {
        return zeta(s);
    }
    if (s - 2.0).abs() < 1e-12 {
        return PI * PI / 6.0 - 0.5 * PI * u + 0.25 * u * u;
    }
    let mut sum = gamma(1.0 - s) * (0.5 * PI * (s - 1.0)).cos() * u.powf(s - 1.0);
    let mut term = 1.0;
    for j in 0..60 {
        let add = zeta(s - 2.0 * j as f64) * term;
        sum += add;
        if j > 2 && add.abs() < 1e-18 * sum.abs() {
            break;
        }
        let k = 2.0 * j as f64;
        term *= -u * u / ((k + 1.0) * (k + 2.0));
    }
    sum
}

/// `∫_{y0}^∞ e^{i y} y^{-s} dy` for `y0 > 0`, `s > 0`, by repeated
/// integration by parts. Returns the value and a bound on the remainder
/// (`|f^{(K-1)}(y0)|` after `K` terms).
pub fn oscillatory_tail(s: f64, y0: f64) -> (Complex64, f64) {
    let phase = Complex64::from_polar(1.0, y0);
    let mut sum = Complex64::new(0.0, 0.0);
    // k-th term: i^{k+1} f^{(k)}(y0), f^{(k)} = (-1)^k (s)_k y0^{-s-k}
    let mut deriv = y0.powf(-s);
    let mut ipow = Complex64::i();
    let mut prev = f64::INFINITY;
    for k in 0..64 {
        let mag = deriv.abs();
        if mag > prev {
            break;
        }
        sum += ipow * deriv;
        prev = mag;
        deriv *= -(s + k as f64) / y0;
        ipow *= Complex64::i();
        if deriv.abs() < 1e-18 * sum.norm() {
            prev = deriv.abs();
            break;
        }
    }
    (phase * sum, prev)
}

/// `∫_{y0}^∞ cos(y) y^{-s} dy` for `s ∈ (1, 3)`, `y0 > 0`.
pub fn cos_tail_integral(s: f64, y0: f64) -> f64 {
    if y0 > 20.0 {
        return oscillatory_tail(s, y0).0.re;
    }
    // Continued value of ∫_0^∞ minus the termwise-integrated head.
    let mut head = 0.0;
    let mut term = 1.0;
    for j in 0..80 {
        let e = 2.0 * j as f64 + 1.0 - s;
        let add = term * y0.powf(e) / e;
        head += add;
        if j > 4 && add.abs() < 1e-18 * head.abs().max(1e-300) {
            break;
        }
        let k = 2.0 * j as f64;
        term *= -1.0 / ((k + 1.0) * (k + 2.0));
    }
    gamma_cos(s) - head
}

/// `w̃_0(t)`: the Jacobian `dx/dt` of `t = x (ln x)^{β-1}`.
///
/// For `β > 1` it is expressed with Lambert W; for `β < 1` with
/// [`delta_inv`], and vanishes below `t = (e / (1 - β))^{1-β}`.
pub fn w_tilde_0(beta: f64, t: f64) -> Result<f64> {
    if beta == 1.0 || !(beta > 0.0) || beta > 2.0 {
        return Err(Error::Domain(format!("w_tilde needs beta in (0, 1) ∪ (1, 2], got {beta}")));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("w_tilde needs t >= 0, got {t}")));
    }
    if beta > 1.0 {
        let b1 = beta - 1.0;
        let w = lambert_w(t.powf(1.0 / b1) / b1)?;
        Ok(b1.powf(1.0 - beta) * w.powf(2.0 - beta) / (1.0 + w))
    } else {
        let b1 = 1.0 - beta;
        if t < w_tilde_cutoff(beta) {
            return Ok(0.0);
        }
        let x = (b1 * t.powf(1.0 / b1)).max(E);
        let d = delta_inv(x)?;
        if d <= 1.0 {
            return Ok(f64::INFINITY);
        }
        Ok(d.powf(2.0 - beta) * b1.powf(b1) / (d - 1.0))
    }
}

/// Left end of the support of `w̃_0` for `β < 1` (0 for `β > 1`).
pub fn w_tilde_cutoff(beta: f64) -> f64 {
    if beta < 1.0 {
        (E / (1.0 - beta)).powf(1.0 - beta)
    } else {
        0.0
    }
}

/// `w̃_p(t) = w̃_0(t) t^p`.
pub fn w_tilde(p: f64, beta: f64, t: f64) -> Result<f64> {
    let w0 = w_tilde_0(beta, t)?;
    Ok(if w0 == 0.0 { 0.0 } else { w0 * t.powf(p) })
}

/// Laplace transform `∫_0^∞ e^{-z t} w̃_p(t) dt`, `Re z > 0`, by adaptive
/// Gauss-Kronrod on geometrically growing panels.
///
/// For `β < 1` the integrand has an inverse square-root singularity at the
/// cutoff; the first panel is integrated in `v` with `t = t0 + v²`.
pub fn laplace_w_tilde(p: f64, beta: f64, z: Complex64, rel_tol: f64) -> Result<Complex64> {
    if !(p >= 0.0) {
        return Err(Error::Domain(format!("laplace_w_tilde needs p >= 0, got {p}")));
    }
    if !(z.re > 0.0) {
        return Err(Error::Domain(format!("laplace_w_tilde needs Re z > 0, got {z}")));
    }
    w_tilde_0(beta, 1.0)?;
    let integrand = |t: f64| -> Complex64 {
        match w_tilde(p, beta, t) {
            Ok(w) if w != 0.0 => (-z * t).exp() * w,
            _ => Complex64::new(0.0, 0.0),
        }
    };
    let t0 = w_tilde_cutoff(beta);
    let scale = 1.0 / z.re;
    let t_end = t0 + (90.0 + 10.0 * p) * scale;

    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    let first = 1.0_f64.min(t_end - t0);
    if beta < 1.0 {
        let g = |v: f64| integrand(t0 + v * v) * (2.0 * v);
        let r = quadrature::integrate(g, 0.0, first.sqrt(), 0.0, rel_tol * 0.1, 4000);
        let r = r?;
        total += r.value;
        err += r.error;
    } else {
        let r = quadrature::integrate(integrand, 0.0, first, 0.0, rel_tol * 0.1, 4000)?;
        total += r.value;
        err += r.error;
    }
    let mut breaks = vec![t0 + first];
    let mut x = first;
    while t0 + x < t_end {
        x *= 2.0;
        breaks.push((t0 + x).min(t_end));
    }
    if breaks.len() > 1 {
        let r = quadrature::integrate_from(&integrand, &breaks, 0.0, rel_tol * 0.5, 20_000)?;
        total += r.value;
        err += r.error;
    }
    // Beyond t_end the factor e^{-Re z t} is below e^{-90}.
    let tail = (-(z.re) * t_end).exp() * w_tilde(p, beta, t_end)?.abs() * 2.0 * scale;
    err += tail;
    if err > rel_tol * total.norm() {
        return Err(Error::Quadrature {
            estimate: err,
            tolerance: rel_tol * total.norm(),
            context: format!("Laplace transform of w̃_{p} (β = {beta}) at z = {z}"),
        });
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambert_defining_values() {
        assert_eq!(lambert_w(0.0).unwrap(), 0.0);
        assert!((lambert_w(E).unwrap() - 1.0).abs() < 1e-15);
        assert!(lambert_w(-1.0).is_err());
        assert!(lambert_w(f64::NAN).is_err());
    }

    #[test]
    fn lambert_round_trip_on_a_log_grid() {
        // x = 1e-8 used to start Newton below the root: ln(1 + x) rounds down there.
        for i in 0..=600 {
            let x = 10f64.powf(-300.0 + i as f64);
            let w = lambert_w(x).unwrap();
            assert!((w * w.exp() - x).abs() <= 1e-12 * x, "x = {x:e}");
        }
        for i in 0..=1600 {
            let x = 10f64.powf(-8.0 + i as f64 / 100.0);
            let w = lambert_w(x).unwrap();
            assert!((w * w.exp() - x).abs() <= 1e-12 * x, "x = {x:e}");
        }
    }

    #[test]
    fn omega_constant_matches_newton_oracle() {
        // Plain Newton on y e^y - 1 from y = 0.5, run to a fixed point.
        let mut y: f64 = 0.5;
        for _ in 0..50 {
            y -= (y * y.exp() - 1.0) / ((1.0 + y) * y.exp());
        }
        let w = lambert_w(1.0).unwrap();
        assert!((w - y).abs() < 1e-15);
        assert!((w - 0.567_143_290_409_783_8).abs() < 1e-15);
    }

    #[test]
    fn delta_defining_values() {
        assert_eq!(delta_inv(E).unwrap(), 1.0);
        assert!((delta_inv(E * E / 2.0).unwrap() - 2.0).abs() < 1e-13);
        assert!(delta_inv(2.0).is_err());
        assert!(delta_inv(E * (1.0 + 1e-12)).unwrap() >= 1.0);
    }

    #[test]
    fn zeta_known_values() {
        assert!((zeta(2.0) - PI * PI / 6.0).abs() < 1e-14);
        assert!((zeta(3.0) - 1.202_056_903_159_594_2).abs() < 1e-14);
        assert!((zeta(0.5) + 1.460_354_508_809_586_8).abs() < 1e-13);
        assert!((zeta(-1.0) + 1.0 / 12.0).abs() < 1e-14);
        assert!(zeta(-2.0).abs() < 1e-14);
        assert!((zeta(-3.0) - 1.0 / 120.0).abs() < 1e-14);
        assert!((zeta(1.5) - 2.612_375_348_685_488).abs() < 1e-13);
    }

    #[test]
    fn polylog_cos_matches_direct_sum() {
        for &(s, u) in &[(2.5, 1.0), (1.7, 2.0), (2.2, -0.4), (2.0, 1.3), (2.9, 3.0)] {
            let direct: f64 = (1..2_000_000).map(|k| (k as f64 * u).cos() / (k as f64).powf(s)).sum();
            let tail_bound = 2.0 * 2e6f64.powf(-s) / (0.5 * u).sin().abs();
            let v = polylog_cos(s, u);
            assert!((v - direct).abs() < tail_bound + 1e-12, "s={s} u={u}: {v} vs {direct}");
        }
        assert!((polylog_cos(2.5, 0.0) - zeta(2.5)).abs() < 1e-15);
    }

    #[test]
    fn cos_tail_branches_agree() {
        // Series and asymptotic branches on either side of the switch.
        for &s in &[1.3, 2.0, 2.6] {
            let a = cos_tail_integral(s, 20.0);
            let b = oscillatory_tail(s, 20.0).0.re;
            assert!((a - b).abs() < 1e-8, "s={s}: {a} vs {b}");
        }
    }

    #[test]
    fn oscillatory_tail_matches_quadrature() {
        // ∫_5^∞ e^{iy} y^{-1.5} dy = ∫_5^{5+200π} + tail at 5+200π
        let s = 1.5;
        let end = 5.0 + 200.0 * PI;
        let head = crate::quadrature::integrate(|y| Complex64::from_polar(y.powf(-s), y), 5.0, end, 1e-13, 0.0, 5000).unwrap();
        let (far, _) = oscillatory_tail(s, end);
        let (direct, bound) = oscillatory_tail(s, 5.0);
        assert!((head.value + far - direct).norm() < 1e-3 + bound);
    }

    #[test]
    fn w_tilde_is_positive_on_support() {
        for &beta in &[0.3, 0.5, 0.9, 1.2, 1.5, 2.0] {
            let t0 = w_tilde_cutoff(beta);
            for k in 0..40 {
                let t = t0 + 1e-6 + 10f64.powf(-3.0 + 0.3 * k as f64);
                let w = w_tilde_0(beta, t).unwrap();
                assert!(w > 0.0 && w.is_finite(), "beta={beta} t={t} w={w}");
            }
        }
        assert_eq!(w_tilde_0(0.5, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn w_tilde_is_the_jacobian_of_the_substitution() {
        // dx/dt with t(x) = x (ln x)^{β-1}: dt/dx = (ln x)^{β-2} (ln x + β - 1).
        for &beta in &[0.5, 1.5, 2.0] {
            for &x in &[3.0f64, 10.0, 1e3, 1e7] {
                let lx = x.ln();
                let t = x * lx.powf(beta - 1.0);
                let dtdx = lx.powf(beta - 2.0) * (lx + beta - 1.0);
                let w = w_tilde_0(beta, t).unwrap();
                assert!((w * dtdx - 1.0).abs() < 1e-10, "beta={beta} x={x}");
            }
        }
    }

    #[test]
    fn w_tilde_large_t_equivalent() {
        let t: f64 = 1e8;
        let r = w_tilde(0.0, 1.5, t).unwrap() / t.ln().powf(-0.5);
        assert!((r - 1.0).abs() < 0.15, "{r}");
    }

    #[test]
    fn laplace_matches_x_substitution_route() {
        // L(w̃_p)(z) = ∫ e^{-z τ(x)} τ(x)^p dx with τ(x) = x (ln x)^{β-1}.
        for &(p, beta) in &[(0.0, 1.5), (1.0, 0.5), (0.0, 2.0), (1.0, 2.0)] {
            let z = Complex64::new(0.01, 0.003);
            let l = laplace_w_tilde(p, beta, z, 1e-9).unwrap();
            let x0 = if beta < 1.0 { (1.0 - beta).exp() } else { 1.0 };
            let f = |x: f64| {
                let tau = x * x.ln().powf(beta - 1.0);
                (-z * tau).exp() * tau.powf(p)
            };
            let mut breaks = vec![x0];
            let mut w = 1.0;
            while w < 1e5 {
                breaks.push(x0 + w);
                w *= 2.0;
            }
            let r = crate::quadrature::integrate_from(&f, &breaks, 1e-12, 1e-11, 20_000).unwrap();
            assert!((r.value - l).norm() < 1e-7 * l.norm(), "p={p} beta={beta}: {l} vs {}", r.value);
        }
    }

    #[test]
    fn laplace_rejects_bad_arguments() {
        assert!(laplace_w_tilde(0.0, 1.0, Complex64::new(1.0, 0.0), 1e-8).is_err());
        assert!(laplace_w_tilde(0.0, 1.5, Complex64::new(-1.0, 0.0), 1e-8).is_err());
        assert!(laplace_w_tilde(-1.0, 1.5, Complex64::new(1.0, 0.0), 1e-8).is_err());
    }
}
