//! Potential kernels of the random walk in random scenery: the recurrent
//! kernel `K_{n,a}(h) = Σ_{k≤n} {E h(Z_k) - E h(Z_k - a)}` (direct and
//! Fourier routes), the transient sum `Σ_n E h(Z_n - a)`, and weighted
//! fits of their growth in `a`.

use crate::error::{Error, Result};
use crate::quadrature::gk15_nodes;
use crate::renewal_constants::delta_exponent;
use crate::rng::{derive_key, replica_rng};
use crate::rwrs::{Scenery, SceneryModel};
use crate::stable_laws::SceneryLaw;
use crate::stats::{reduce_replicas, Estimate, MeanVar, Merge};
use crate::walk_paths::{pow_table, Occupation, Stepper, WalkModel};
use num_complex::Complex64;
use rustc_hash::FxHashMap;
use std::f64::consts::PI;

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
/// Label mixed into the replica seed for the scenery field.
const SCENERY_LABEL: u64 = 0x5ce9_e7f1;

/// Function `h` with its Fourier transform `ĥ(t) = ∫ h(x) e^{-itx} dx`
/// (a sum over ℤ for lattice functions).
#[derive(Debug, Clone)]
pub enum TestFunction {
    /// `h = 1_{0}` on ℤ; `ĥ ≡ 1`.
    DiracAtZero,
    /// `max(0, 1 - |x|)`; `ĥ(t) = (sin(t/2) / (t/2))²`.
    Triangle,
    /// `e^{-x²/2}`; `ĥ(t) = √(2π) e^{-t²/2}`.
    Gaussian,
    Custom(CustomTest),
}

/// User-supplied test function; must ship its own transform and integral.
#[derive(Debug, Clone)]
pub struct CustomTest {
    pub name: String,
    pub h: fn(f64) -> f64,
    pub hat_h: fn(f64) -> Complex64,
    pub hat_h_prime: Option<fn(f64) -> Complex64>,
    pub integral: f64,
    pub lattice: bool,
    pub even: bool,
}

impl TestFunction {
    pub fn name(&self) -> &str {
        match self {
            TestFunction::DiracAtZero => "dirac",
            TestFunction::Triangle => "triangle",
            TestFunction::Gaussian => "gaussian",
            TestFunction::Custom(c) => &c.name,
        }
    }

    #[inline]
    pub fn h(&self, x: f64) -> f64 {
        match self {
            TestFunction::DiracAtZero => {
                if x == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Triangle => (1.0 - x.abs()).max(0.0),
            TestFunction::Gaussian => {
                if x.abs() > 40.0 {
                    0.0
                } else {
                    (-0.5 * x * x).exp()
                }
            }
            TestFunction::Custom(c) => (c.h)(x),
        }
    }

    pub fn hat(&self, t: f64) -> Complex64 {
        match self {
            TestFunction::DiracAtZero => Complex64::new(1.0, 0.0),
            TestFunction::Triangle => Complex64::new(sinc_half(t).powi(2), 0.0),
            TestFunction::Gaussian => Complex64::new(SQRT_2PI * (-0.5 * t * t).exp(), 0.0),
            TestFunction::Custom(c) => (c.hat_h)(t),
        }
    }

    pub fn hat_prime(&self, t: f64) -> Option<Complex64> {
        match self {
            TestFunction::DiracAtZero => None,
            TestFunction::Triangle => {
                let x = 0.5 * t;
                let d = if x.abs() < 1e-4 {
                    -x / 3.0 * (1.0 - x * x / 10.0)
                } else {
                    (x * x.cos() - x.sin()) / (x * x)
                };
                // d/dt sinc(t/2)² = sinc(t/2) · sinc'(t/2)
                Some(Complex64::new(sinc_half(t) * d, 0.0))
            }
            TestFunction::Gaussian => Some(Complex64::new(-t * SQRT_2PI * (-0.5 * t * t).exp(), 0.0)),
            TestFunction::Custom(c) => c.hat_h_prime.map(|f| f(t)),
        }
    }

    pub fn integral(&self) -> f64 {
        match self {
            TestFunction::DiracAtZero | TestFunction::Triangle => 1.0,
            TestFunction::Gaussian => SQRT_2PI,
            TestFunction::Custom(c) => c.integral,
        }
    }

    pub fn is_lattice(&self) -> bool {
        match self {
            TestFunction::DiracAtZero => true,
            TestFunction::Custom(c) => c.lattice,
            _ => false,
        }
    }

    pub fn is_even(&self) -> bool {
        match self {
            TestFunction::Custom(c) => c.even,
            _ => true,
        }
    }

    /// `ĥ` is C¹ with `ĥ`, `ĥ'` integrable.
    pub fn in_h1(&self) -> bool {
        !self.is_lattice() && self.hat_prime(0.0).is_some()
    }

    /// `|ĥ(t)|` is bounded by this for `|t| ≥ t0`, integrated over `[t0, ∞)`.
    fn hat_tail_mass(&self, t0: f64) -> f64 {
        match self {
            TestFunction::DiracAtZero => 0.0,
            TestFunction::Triangle => 4.0 / t0,
            TestFunction::Gaussian => PI * libm_erfc(t0 / 2f64.sqrt()),
            TestFunction::Custom(_) => f64::INFINITY,
        }
    }
}

fn sinc_half(t: f64) -> f64 {
    let x = 0.5 * t;
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

fn libm_erfc(x: f64) -> f64 {
    statrs::function::erf::erfc(x)
}

/// A kernel value with its statistical and truncation errors kept apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEstimate {
    pub value: f64,
    pub stat_err: f64,
    /// Truncation in `n` (doubling change or extrapolated tail) or in the
    /// `t`-quadrature.
    pub trunc_err: f64,
    pub a: f64,
    pub n: usize,
}

impl KernelEstimate {
    pub fn total_err(&self) -> f64 {
        self.stat_err + self.trunc_err
    }
}

/// Scenery values seen along one path.
enum SiteValues {
    Dense { offset: i64, values: Vec<f64>, stamp: Vec<u32>, generation: u32 },
    Sparse(FxHashMap<i64, f64>),
}

impl SiteValues {
    fn for_walk(walk: &WalkModel, n: usize) -> Self {
        if walk.is_nearest_neighbour() {
            SiteValues::Dense { offset: n as i64, values: vec![0.0; 2 * n + 1], stamp: vec![0; 2 * n + 1], generation: 0 }
        } else {
            SiteValues::Sparse(FxHashMap::default())
        }
    }

    fn reset(&mut self) {
        match self {
            SiteValues::Dense { stamp, generation, .. } => {
                *generation = generation.wrapping_add(1);
                if *generation == 0 {
                    stamp.iter_mut().for_each(|s| *s = 0);
                    *generation = 1;
                }
            }
            SiteValues::Sparse(m) => m.clear(),
        }
    }

    #[inline]
    fn get<S: Scenery>(&mut self, site: i64, scenery: &S) -> f64 {
        match self {
            SiteValues::Dense { offset, values, stamp, generation } => {
                let i = (site + *offset) as usize;
                if stamp[i] != *generation {
                    stamp[i] = *generation;
                    values[i] = scenery.value(site);
                }
                values[i]
            }
            SiteValues::Sparse(m) => *m.entry(site).or_insert_with(|| scenery.value(site)),
        }
    }
}

/// Generates `Z_1, ..., Z_n` of replica `r`: walk from `replica_rng(seed, r)`,
/// scenery field keyed by `derive_key(seed ^ label, r)`.
struct PathRunner {
    walk: WalkModel,
    stepper: Stepper,
    base: SceneryModel,
    seed: u64,
    n: usize,
}

impl PathRunner {
    fn new(walk: &WalkModel, law: &SceneryLaw, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams("n must be positive".into()));
        }
        Ok(Self { walk: *walk, stepper: walk.stepper()?, base: SceneryModel::new(*law, 0)?, seed, n })
    }

    fn buffers(&self) -> SiteValues {
        SiteValues::for_walk(&self.walk, self.n)
    }

    #[inline]
    fn run<F: FnMut(usize, f64)>(&self, r: usize, cache: &mut SiteValues, mut f: F) {
        let mut rng = replica_rng(self.seed, r as u64);
        let scenery = self.base.reseeded(derive_key(self.seed ^ SCENERY_LABEL, r as u64));
        cache.reset();
        let (mut pos, mut z) = (0i64, 0.0);
        for k in 1..=self.n {
            pos += self.stepper.step(&mut rng);
            z += cache.get(pos, &scenery);
            f(k, z);
        }
    }
}

/// `Z_1, ..., Z_n` of replica `r` exactly as the direct estimators see it.
pub fn rwrs_path(walk: &WalkModel, law: &SceneryLaw, n: usize, seed: u64, r: usize) -> Result<Vec<f64>> {
    let runner = PathRunner::new(walk, law, n, seed)?;
    let mut cache = runner.buffers();
    let mut out = Vec::with_capacity(n);
    runner.run(r, &mut cache, |_, z| out.push(z));
    Ok(out)
}

fn check_domain(law: &SceneryLaw, h: &TestFunction, a: &[f64]) -> Result<()> {
    law.validate()?;
    if h.is_lattice() != law.is_lattice() {
        return Err(Error::Domain(format!(
            "{} test function with {} scenery",
            if h.is_lattice() { "lattice" } else { "continuum" },
            if law.is_lattice() { "lattice" } else { "non-lattice" }
        )));
    }
    if h.is_lattice() && a.iter().any(|x| x.fract() != 0.0) {
        return Err(Error::Domain(format!("lattice kernels need integer shifts, got {a:?}")));
    }
    Ok(())
}

#[derive(Clone)]
struct PerShift {
    full: Vec<MeanVar>,
    half: Vec<MeanVar>,
}

impl Merge for PerShift {
    fn merge_from(&mut self, other: Self) {
        self.full.merge_from(other.full);
        self.half.merge_from(other.half);
    }
}

/// Direct Monte Carlo of `K_{n,a}(h)` for every `a` in `a_grid`, with
/// `h(Z_k)` and `h(Z_k - a)` taken from the same replica and all `k ≤ n`
/// from one path. `trunc_err` is `|K_{n,a} - K_{n/2,a}|`.
pub fn k_na_direct_grid(
    walk: &WalkModel,
    law: &SceneryLaw,
    h: &TestFunction,
    n: usize,
    a_grid: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<KernelEstimate>> {
    check_domain(law, h, a_grid)?;
    if reps < 1000 {
        return Err(Error::InvalidParams(format!("k_na_direct needs reps ≥ 1000, got {reps}")));
    }
    let runner = PathRunner::new(walk, law, n, seed)?;
    let m = a_grid.len();
    let half = n / 2;
    let acc = reduce_replicas(
        reps,
        || PerShift { full: vec![MeanVar::default(); m], half: vec![MeanVar::default(); m] },
        |range, acc| {
            let mut cache = runner.buffers();
            let mut sums = vec![0.0; m];
            for r in range {
                sums.iter_mut().for_each(|s| *s = 0.0);
                runner.run(r, &mut cache, |k, z| {
                    let h0 = h.h(z);
                    for (s, &a) in sums.iter_mut().zip(a_grid) {
                        if a != 0.0 {
                            *s += h0 - h.h(z - a);
                        }
                    }
                    if k == half {
                        for (acc, s) in acc.half.iter_mut().zip(&sums) {
                            acc.push(*s);
                        }
                    }
                });
                for (acc, s) in acc.full.iter_mut().zip(&sums) {
                    acc.push(*s);
                }
            }
        },
    );
    Ok(a_grid
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let full = acc.full[i].estimate();
            let trunc_err = if half > 0 { (full.value - acc.half[i].mean()).abs() } else { 0.0 };
            KernelEstimate { value: full.value, stat_err: full.stderr, trunc_err, a, n }
        })
        .collect())
}

pub fn k_na_direct(walk: &WalkModel, law: &SceneryLaw, h: &TestFunction, n: usize, a: f64, reps: usize, seed: u64) -> Result<KernelEstimate> {
    Ok(k_na_direct_grid(walk, law, h, n, &[a], reps, seed)?[0])
}

/// Node layout for the `t`-integral of [`k_na_fourier`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSpec {
    /// Upper end of `t` (ignored in the lattice case, where it is π).
    pub t_max: f64,
    /// Uniform GK15 panels in the substituted variable.
    pub panels: usize,
    /// Extra dyadic breakpoints towards `t = 0`.
    pub dyadic_levels: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self { t_max: 12.0, panels: 48, dyadic_levels: 12 }
    }
}

/// Fourier route for `K_{n,a}(h)`:
/// `(1/π) Re ∫_0^T ĥ(t) Ψ̂_n(t) (1 - e^{-ita}) dt` with
/// `Ψ̂_n(t) = Σ_{k≤n} E[e^{itZ_k}]` estimated by the conditional product
/// formula on shared walk paths.
///
/// The integral is taken in `s` with `t = s^p`, `p = 1/(2 - 1/δ)`, which
/// flattens the `|t|^{1-1/δ}` behaviour at 0. Each replica yields a full
/// quadrature value, so `stat_err` is their standard error; `trunc_err` is
/// the Kronrod-Gauss difference plus a bound on `∫_T^∞`.
/// For `(α, β) = (1, 2)` only the even form with `1 - cos(ta)` is used.
pub fn k_na_fourier(
    walk: &WalkModel,
    law: &SceneryLaw,
    h: &TestFunction,
    n: usize,
    a: f64,
    reps: usize,
    spec: &QuadSpec,
    seed: u64,
) -> Result<KernelEstimate> {
    check_domain(law, h, &[a])?;
    if reps < 100 || n == 0 || spec.panels == 0 {
        return Err(Error::InvalidParams(format!("k_na_fourier needs n ≥ 1, reps ≥ 100 and panels ≥ 1, got ({n}, {reps}, {})", spec.panels)));
    }
    let alpha = walk.alpha();
    let beta = law.index();
    let even_form = alpha == 1.0 && beta == 2.0;
    if even_form && !(h.is_even() && law.is_symmetric()) {
        return Err(Error::Regime("the (α, β) = (1, 2) kernel needs an even h and a symmetric scenery".into()));
    }
    let t_max = if h.is_lattice() { PI } else { spec.t_max };
    let p = if h.is_lattice() { 1.0 } else { 1.0 / (2.0 - 1.0 / delta_exponent(alpha, beta)) };
    let s_max = t_max.powf(1.0 / p);

    let mut breaks: Vec<f64> = (0..=spec.panels).map(|j| s_max * j as f64 / spec.panels as f64).collect();
    let first = breaks[1];
    breaks.extend((1..=spec.dyadic_levels).map(|j| first * 0.5f64.powi(j as i32)));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    // Per node: t, Kronrod and Gauss weights including the Jacobian and the
    // deterministic factor ĥ(t)(1 - e^{-ita}) / π.
    let mut ts = Vec::new();
    let mut wk = Vec::new();
    let mut wg = Vec::new();
    for w in breaks.windows(2) {
        for (s, k, g) in gk15_nodes(w[0], w[1]) {
            let t = s.powf(p);
            let jac = p * s.powf(p - 1.0);
            let shift = if even_form {
                Complex64::new(1.0 - (t * a).cos(), 0.0)
            } else {
                Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -t * a)
            };
            let factor = h.hat(t) * shift * jac / PI;
            ts.push(t);
            wk.push(factor * k);
            wg.push(factor * g);
        }
    }

    let stepper = walk.stepper()?;
    let nodes = ts.len();
    let stable = match law {
        SceneryLaw::ExactStable(params) => Some(*params),
        SceneryLaw::Gaussian { variance } => Some(crate::stable_laws::StableCfParams::symmetric(2.0, 0.5 * variance)?),
        _ => None,
    };
    let powers = stable.map(|p| pow_table(p.beta, n));
    let scaled_t: Vec<f64> = ts.iter().map(|t| t.powf(beta)).collect();

    #[derive(Clone, Default)]
    struct Pair(MeanVar, MeanVar);
    impl Merge for Pair {
        fn merge_from(&mut self, o: Self) {
            self.0.merge(&o.0);
            self.1.merge(&o.1);
        }
    }

    let acc = reduce_replicas(reps, Pair::default, |range, acc| {
        let mut occ = Occupation::for_walk(walk, n);
        let mut psi = vec![Complex64::new(0.0, 0.0); nodes];
        let mut v_path = vec![0.0; n];
        let mut prod = vec![Complex64::new(1.0, 0.0); nodes];
        let mut zeros = vec![0u32; nodes];
        for r in range {
            let mut rng = replica_rng(seed, r as u64);
            occ.clear();
            psi.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
            let mut pos = 0i64;
            if let (Some(params), Some(powers)) = (stable, powers.as_ref()) {
                // Π φ(t N(y)) = exp(-|t|^β V_k w) for stable sceneries.
                let mut v = 0.0;
                for slot in v_path.iter_mut() {
                    pos += stepper.step(&mut rng);
                    let c = occ.bump(pos) as usize;
                    v += powers[c + 1] - powers[c];
                    *slot = v;
                }
                let w = params.weight(true);
                for (j, x) in psi.iter_mut().enumerate() {
                    for &v in &v_path {
                        let e = scaled_t[j] * v;
                        let m = (-w.re * e).exp();
                        if m == 0.0 {
                            break;
                        }
                        *x += Complex64::from_polar(m, -w.im * e);
                    }
                }
            } else {
                // Running product over sites; exact zeros of φ are counted
                // separately so that factors can be swapped out by division.
                prod.iter_mut().for_each(|x| *x = Complex64::new(1.0, 0.0));
                zeros.iter_mut().for_each(|z| *z = 0);
                for _ in 0..n {
                    pos += stepper.step(&mut rng);
                    let c = occ.bump(pos) as f64;
                    for j in 0..nodes {
                        let t = ts[j];
                        if c > 0.0 {
                            let old = law.cf(t * c);
                            if old.norm() < 1e-300 {
                                zeros[j] -= 1;
                            } else {
                                prod[j] /= old;
                            }
                        }
                        let new = law.cf(t * (c + 1.0));
                        if new.norm() < 1e-300 {
                            zeros[j] += 1;
                        } else {
                            prod[j] *= new;
                        }
                        if zeros[j] == 0 {
                            psi[j] += prod[j];
                        }
                    }
                }
            }
            let mut qk = 0.0;
            let mut qg = 0.0;
            for j in 0..nodes {
                let x = if even_form { Complex64::new(psi[j].re, 0.0) } else { psi[j] };
                qk += (wk[j] * x).re;
                qg += (wg[j] * x).re;
            }
            acc.0.push(qk);
            acc.1.push(qg);
        }
    });

    let value = acc.0.mean();
    let quad_err = (value - acc.1.mean()).abs();
    // |Ψ̂_n(t)| ≤ n, and ≤ Σ_k exp(-A1 |t|^β k^{min(1,β)}) for stable sceneries.
    let tail = if h.is_lattice() {
        0.0
    } else {
        let envelope = match stable {
            Some(p) => crate::psi_series::psi_envelope(p.a1, p.beta, t_max).min(n as f64),
            None => n as f64,
        };
        2.0 * envelope * h.hat_tail_mass(t_max) / PI
    };
    Ok(KernelEstimate { value, stat_err: acc.0.stderr(), trunc_err: quad_err + tail, a, n })
}

/// `Σ_{n≥1} E h(Z_n - a)` in the transient regime `β < 1`, for each `a`.
///
/// The sum up to `n_max` is direct Monte Carlo. The terms decay like
/// `n^{-δ}` once `n^δ ≫ |a|`, so the rest is extrapolated from the block
/// `(n_max/2, n_max]` as `q̂ n_max / (δ - 1)`, where `q̂` is the block mean
/// of `E h(Z_n - a) (n / n_max)^δ`. The extrapolated tail is included in
/// `value` and reported as `trunc_err`.
pub fn k_transient_sum(
    walk: &WalkModel,
    law: &SceneryLaw,
    h: &TestFunction,
    a_grid: &[f64],
    n_max: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<KernelEstimate>> {
    let params = match law {
        SceneryLaw::ExactStable(p) => *p,
        _ => return Err(Error::InvalidParams("the transient kernel needs an exactly stable scenery".into())),
    };
    if params.beta >= 1.0 {
        return Err(Error::Regime(format!(
            "recurrent regime (β = {} ≥ 1): the series diverges, use the recurrent kernel",
            params.beta
        )));
    }
    if !h.in_h1() {
        return Err(Error::Domain(format!("{} is not in H1 (ĥ must be C¹ with ĥ, ĥ' integrable)", h.name())));
    }
    check_domain(law, h, a_grid)?;
    if reps < 1000 || n_max < 2 {
        return Err(Error::InvalidParams(format!("need reps ≥ 1000 and n_max ≥ 2, got ({reps}, {n_max})")));
    }
    let delta = delta_exponent(walk.alpha(), params.beta);
    let runner = PathRunner::new(walk, law, n_max, seed)?;
    let m = a_grid.len();
    let block_start = n_max / 2 + 1;
    let block_len = (n_max - block_start + 1) as f64;
    let tail_factor = n_max as f64 / (delta - 1.0) / block_len;
    let weights: Vec<f64> = (0..=n_max).map(|k| (k as f64 / n_max as f64).powf(delta)).collect();

    let acc = reduce_replicas(
        reps,
        || PerShift { full: vec![MeanVar::default(); m], half: vec![MeanVar::default(); m] },
        |range, acc| {
            let mut cache = runner.buffers();
            let mut sums = vec![0.0; m];
            let mut block = vec![0.0; m];
            for r in range {
                sums.iter_mut().for_each(|s| *s = 0.0);
                block.iter_mut().for_each(|s| *s = 0.0);
                runner.run(r, &mut cache, |k, z| {
                    for i in 0..m {
                        let v = h.h(z - a_grid[i]);
                        if v != 0.0 {
                            sums[i] += v;
                            if k >= block_start {
                                block[i] += v * weights[k];
                            }
                        }
                    }
                });
                for i in 0..m {
                    let tail = block[i] * tail_factor;
                    acc.full[i].push(sums[i] + tail);
                    acc.half[i].push(tail);
                }
            }
        },
    );
    Ok(a_grid
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let e = acc.full[i].estimate();
            KernelEstimate { value: e.value, stat_err: e.stderr, trunc_err: acc.half[i].mean().abs(), a, n: n_max }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitModel {
    /// `K ≈ L a^e`; `e` is fitted and also held at the expected value.
    PowerLaw { expected_exponent: f64 },
    /// `K ≈ L ln a + b`.
    LogLaw,
    /// `K (ln a^β)^{β-1} / a^{β-1} ≈ L`.
    LogPowerLaw { beta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub model: FitModel,
    /// Fitted exponent (power law) or `ln a` coefficient (log law).
    pub slope: Option<Estimate>,
    /// The constant multiplying the model's `a`-dependence.
    pub level: Estimate,
    /// Power law only: `L` with the exponent held at its expected value.
    pub level_at_expected: Option<Estimate>,
    /// Reduced χ² of the free fit.
    pub chi2_per_dof: f64,
    pub points: usize,
}

/// Smallest `a_max / a_min` accepted by [`renewal_fit`].
pub const MIN_FIT_SPAN: f64 = 8.0;

/// Weighted least squares `y = c0 + c1 x`; returns `(c0, c1, se0, se1, χ²)`.
fn wls(x: &[f64], y: &[f64], sigma: &[f64]) -> (f64, f64, f64, f64, f64) {
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&xi, &yi), &si) in x.iter().zip(y).zip(sigma) {
        let w = 1.0 / (si * si);
        s += w;
        sx += w * xi;
        sy += w * yi;
        sxx += w * xi * xi;
        sxy += w * xi * yi;
    }
    let d = s * sxx - sx * sx;
    let c1 = (s * sxy - sx * sy) / d;
    let c0 = (sxx * sy - sx * sxy) / d;
    let chi2 = x.iter().zip(y).zip(sigma).map(|((&xi, &yi), &si)| ((yi - c0 - c1 * xi) / si).powi(2)).sum();
    (c0, c1, (sxx / d).sqrt(), (s / d).sqrt(), chi2)
}

fn weighted_mean(y: &[f64], sigma: &[f64]) -> Estimate {
    let w: Vec<f64> = sigma.iter().map(|s| 1.0 / (s * s)).collect();
    let sw: f64 = w.iter().sum();
    Estimate { value: y.iter().zip(&w).map(|(y, w)| y * w).sum::<f64>() / sw, stderr: sw.powf(-0.5) }
}

/// Fit the growth of a kernel in `a`, each point weighted by its total
/// error (a tiny floor keeps exact synthetic data usable).
pub fn renewal_fit(samples: &[KernelEstimate], model: FitModel) -> Result<FitReport> {
    let mut a: Vec<f64> = samples.iter().map(|s| s.a).collect();
    a.sort_by(f64::total_cmp);
    a.dedup();
    if a.len() < 4 {
        return Err(Error::Fit(format!("need at least 4 distinct a values, got {}", a.len())));
    }
    if !(a[0] > 1.0) || a[a.len() - 1] / a[0] < MIN_FIT_SPAN {
        return Err(Error::Fit(format!(
            "a values must exceed 1 and span a factor ≥ {MIN_FIT_SPAN}, got [{}, {}]",
            a[0],
            a[a.len() - 1]
        )));
    }
    let floor = |s: &KernelEstimate| s.total_err().max(1e-12 * s.value.abs()).max(1e-300);
    let n = samples.len();
    let dof = (n as f64 - 2.0).max(1.0);
    match model {
        FitModel::PowerLaw { expected_exponent } => {
            if samples.iter().any(|s| !(s.value > 0.0)) {
                return Err(Error::Fit("power-law fit needs positive kernel values".into()));
            }
            let x: Vec<f64> = samples.iter().map(|s| s.a.ln()).collect();
            let y: Vec<f64> = samples.iter().map(|s| s.value.ln()).collect();
            let sig: Vec<f64> = samples.iter().map(|s| floor(s) / s.value).collect();
            let (c0, c1, se0, se1, chi2) = wls(&x, &y, &sig);
            let level = c0.exp();
            let scaled: Vec<f64> = samples.iter().map(|s| s.value / s.a.powf(expected_exponent)).collect();
            let scaled_sig: Vec<f64> = samples.iter().map(|s| floor(s) / s.a.powf(expected_exponent)).collect();
            Ok(FitReport {
                model,
                slope: Some(Estimate { value: c1, stderr: se1 }),
                level: Estimate { value: level, stderr: level * se0 },
                level_at_expected: Some(weighted_mean(&scaled, &scaled_sig)),
                chi2_per_dof: chi2 / dof,
                points: n,
            })
        }
        FitModel::LogLaw => {
            let x: Vec<f64> = samples.iter().map(|s| s.a.ln()).collect();
            let y: Vec<f64> = samples.iter().map(|s| s.value).collect();
            let sig: Vec<f64> = samples.iter().map(floor).collect();
            let (c0, c1, se0, se1, chi2) = wls(&x, &y, &sig);
            Ok(FitReport {
                model,
                slope: Some(Estimate { value: c0, stderr: se0 }),
                level: Estimate { value: c1, stderr: se1 },
                level_at_expected: None,
                chi2_per_dof: chi2 / dof,
                points: n,
            })
        }
        FitModel::LogPowerLaw { beta } => {
            let g = |a: f64| (beta * a.ln()).powf(beta - 1.0) / a.powf(beta - 1.0);
            let y: Vec<f64> = samples.iter().map(|s| s.value * g(s.a)).collect();
            let sig: Vec<f64> = samples.iter().map(|s| floor(s) * g(s.a)).collect();
            let level = weighted_mean(&y, &sig);
            let chi2: f64 = y.iter().zip(&sig).map(|(y, s)| ((y - level.value) / s).powi(2)).sum();
            Ok(FitReport { model, slope: None, level, level_at_expected: None, chi2_per_dof: chi2 / (n as f64 - 1.0), points: n })
        }
    }
}
