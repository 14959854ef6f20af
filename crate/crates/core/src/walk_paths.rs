//! Lattice walks, their local times `N_n(y)`, the functional
//! `V_n = Σ_y N_n(y)^β`, and the normalizations `b_n`.

use crate::error::{Error, Result};
use crate::rng::{derive_key, open_unit, replica_rng};
use crate::stats::{reduce_replicas, Estimate, Merge};
use rand::{Rng, RngCore, SeedableRng};
use rand_distr::{Distribution, Zipf};
use rustc_hash::FxHashMap;

/// Largest jump of the Zipf walk.
pub const ZIPF_WALK_CUTOFF: f64 = 1e9;

/// Integer step laws in the normal domain of attraction of a symmetric
/// `α`-stable law, `α ∈ [1, 2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WalkModel {
    SimpleSymmetric,
    LazySymmetric { hold_prob: f64 },
    /// `P(X = ±k) ∝ k^{-s}`, `1 ≤ k ≤ 10^9`, `s ∈ [2, 3)`; `α = s - 1`.
    LatticeZipf { tail_exponent: f64 },
}

impl WalkModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            WalkModel::SimpleSymmetric => Ok(()),
            WalkModel::LazySymmetric { hold_prob } if (0.0..1.0).contains(&hold_prob) => Ok(()),
            WalkModel::LazySymmetric { hold_prob } => {
                Err(Error::InvalidParams(format!("hold probability must lie in [0, 1), got {hold_prob}")))
            }
            WalkModel::LatticeZipf { tail_exponent: s } if (2.0..3.0).contains(&s) => Ok(()),
            WalkModel::LatticeZipf { tail_exponent: s } => Err(Error::InvalidParams(format!(
                "Zipf walk tail exponent must lie in [2, 3) so that α ∈ [1, 2), got {s}"
            ))),
        }
    }

    pub fn alpha(&self) -> f64 {
        match *self {
            WalkModel::SimpleSymmetric | WalkModel::LazySymmetric { .. } => 2.0,
            WalkModel::LatticeZipf { tail_exponent } => tail_exponent - 1.0,
        }
    }

    /// Steps move by at most one site.
    pub fn is_nearest_neighbour(&self) -> bool {
        !matches!(self, WalkModel::LatticeZipf { .. })
    }

    /// The step law as `(step, probability)` pairs, if finitely supported.
    pub fn finite_support(&self) -> Option<Vec<(i64, f64)>> {
        match *self {
            WalkModel::SimpleSymmetric => Some(vec![(-1, 0.5), (1, 0.5)]),
            WalkModel::LazySymmetric { hold_prob: p } if p == 0.0 => Some(vec![(-1, 0.5), (1, 0.5)]),
            WalkModel::LazySymmetric { hold_prob: p } => Some(vec![(-1, 0.5 * (1.0 - p)), (0, p), (1, 0.5 * (1.0 - p))]),
            WalkModel::LatticeZipf { .. } => None,
        }
    }

    pub fn stepper(&self) -> Result<Stepper> {
        self.validate()?;
        Ok(match *self {
            WalkModel::SimpleSymmetric => Stepper::Simple,
            WalkModel::LazySymmetric { hold_prob } => Stepper::Lazy { hold_prob },
            WalkModel::LatticeZipf { tail_exponent } => Stepper::Zipf(
                Zipf::new(ZIPF_WALK_CUTOFF, tail_exponent).map_err(|e| Error::InvalidParams(e.to_string()))?,
            ),
        })
    }
}

/// Ready-to-draw step law.
#[derive(Debug, Clone, Copy)]
pub enum Stepper {
    Simple,
    Lazy { hold_prob: f64 },
    Zipf(Zipf<f64>),
}

impl Stepper {
    #[inline]
    pub fn step<R: RngCore + ?Sized>(&self, rng: &mut R) -> i64 {
        match self {
            Stepper::Simple => {
                if rng.next_u32() >> 31 == 0 {
                    1
                } else {
                    -1
                }
            }
            Stepper::Lazy { hold_prob } => {
                let u = open_unit(rng.next_u64());
                if u < *hold_prob {
                    0
                } else if u < 0.5 * (1.0 + hold_prob) {
                    1
                } else {
                    -1
                }
            }
            Stepper::Zipf(z) => {
                let k = z.sample(rng) as i64;
                if rng.next_u32() >> 31 == 0 {
                    k
                } else {
                    -k
                }
            }
        }
    }
}

/// Where the steps of a simulated walk come from.
pub enum StepSource<'a, R: RngCore> {
    Random(&'a mut R),
    /// A fixed step sequence, for hand-traced examples.
    Forced(&'a [i64]),
}

/// Sparse local times of one path, `S_0` excluded.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LocalTimeTable {
    counts: FxHashMap<i64, u64>,
    n: u64,
    position: i64,
    min: i64,
    max: i64,
}

impl LocalTimeTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(sites: usize) -> Self {
        Self {
            counts: FxHashMap::with_capacity_and_hasher(sites, Default::default()),
            ..Self::default()
        }
    }

    /// Build directly from site counts (position is left at 0).
    pub fn from_counts<I: IntoIterator<Item = (i64, u64)>>(counts: I) -> Self {
        let mut t = Self::new();
        for (y, c) in counts {
            if c > 0 {
                *t.counts.entry(y).or_insert(0) += c;
                t.n += c;
            }
        }
        t
    }

    /// Move by `step` and count the new site; returns its count before the visit.
    #[inline]
    pub fn visit(&mut self, step: i64) -> u64 {
        self.position += step;
        self.n += 1;
        self.min = self.min.min(self.position);
        self.max = self.max.max(self.position);
        let c = self.counts.entry(self.position).or_insert(0);
        *c += 1;
        *c - 1
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn position(&self) -> i64 {
        self.position
    }

    /// Number of distinct sites visited at times `1..=n`.
    pub fn range(&self) -> usize {
        self.counts.len()
    }

    /// Extreme positions of `S_0, ..., S_n`.
    pub fn span(&self) -> (i64, i64) {
        (self.min, self.max)
    }

    pub fn count(&self, site: i64) -> u64 {
        self.counts.get(&site).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        self.counts.iter().map(|(&y, &c)| (y, c))
    }

    /// Occupied sites in increasing order (for reproducible iteration).
    pub fn sorted(&self) -> Vec<(i64, u64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_unstable();
        v
    }

    pub fn v_beta(&self, beta: f64) -> f64 {
        v_beta(self, beta)
    }
}

/// `V_n = Σ_y N_n(y)^β`, summed in site order.
pub fn v_beta(table: &LocalTimeTable, beta: f64) -> f64 {
    table.sorted().into_iter().map(|(_, c)| (c as f64).powf(beta)).sum()
}

/// `V_n` maintained along a path: a visit to a site seen `N` times adds
/// `(N+1)^β - N^β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunningV {
    beta: f64,
    value: f64,
}

impl RunningV {
    pub fn new(beta: f64) -> Self {
        Self { beta, value: 0.0 }
    }

    #[inline]
    pub fn update(&mut self, previous_count: u64) -> f64 {
        self.value += match self.beta {
            b if b == 1.0 => 1.0,
            b if b == 2.0 => (2 * previous_count + 1) as f64,
            b => ((previous_count + 1) as f64).powf(b) - (previous_count as f64).powf(b),
        };
        self.value
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

/// Table of `k^β` for `k = 0..=n`; turns the running update into lookups.
pub fn pow_table(beta: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| (k as f64).powf(beta)).collect()
}

/// Visit counter used in the Monte Carlo loops: a dense window for
/// nearest-neighbour walks (cleared through the list of touched sites),
/// a hash map otherwise.
#[derive(Debug, Clone)]
pub enum Occupation {
    Dense { offset: i64, counts: Vec<u32>, touched: Vec<usize> },
    Sparse(FxHashMap<i64, u32>),
}

impl Occupation {
    pub fn for_walk(model: &WalkModel, n: usize) -> Self {
        if model.is_nearest_neighbour() {
            Occupation::Dense {
                offset: n as i64,
                counts: vec![0; 2 * n + 1],
                touched: Vec::with_capacity(n),
            }
        } else {
            Occupation::Sparse(FxHashMap::with_capacity_and_hasher(n, Default::default()))
        }
    }

    /// Count a visit to `site`; returns the count before it.
    #[inline]
    pub fn bump(&mut self, site: i64) -> u32 {
        match self {
            Occupation::Dense { offset, counts, touched } => {
                let i = (site + *offset) as usize;
                let c = counts[i];
                if c == 0 {
                    touched.push(i);
                }
                counts[i] = c + 1;
                c
            }
            Occupation::Sparse(m) => {
                let c = m.entry(site).or_insert(0);
                *c += 1;
                *c - 1
            }
        }
    }

    /// Visit the positive counts.
    pub fn for_each_count<F: FnMut(u32)>(&self, mut f: F) {
        match self {
            Occupation::Dense { counts, touched, .. } => touched.iter().for_each(|&i| f(counts[i])),
            Occupation::Sparse(m) => m.values().for_each(|&c| f(c)),
        }
    }

    pub fn clear(&mut self) {
        match self {
            Occupation::Dense { counts, touched, .. } => {
                for &i in touched.iter() {
                    counts[i] = 0;
                }
                touched.clear();
            }
            Occupation::Sparse(m) => m.clear(),
        }
    }
}

/// Run `n ≥ 1` steps from `S_0 = 0` and return the local times at times `1..=n`.
pub fn simulate_local_times<R: RngCore>(model: &WalkModel, n: usize, source: StepSource<'_, R>) -> Result<LocalTimeTable> {
    if n == 0 {
        return Err(Error::InvalidParams("a walk needs at least one step".into()));
    }
    let mut table = LocalTimeTable::with_capacity(n.min(1 << 16));
    match source {
        StepSource::Random(rng) => {
            let stepper = model.stepper()?;
            for _ in 0..n {
                table.visit(stepper.step(rng));
            }
        }
        StepSource::Forced(steps) => {
            if steps.len() < n {
                return Err(Error::InvalidParams(format!("{} forced steps supplied, {n} needed", steps.len())));
            }
            for &s in &steps[..n] {
                table.visit(s);
            }
        }
    }
    Ok(table)
}

/// `b_n = n^δ` for `α > 1`, `n^{1/β} (ln n)^{1 - 1/β}` for `α = 1`.
pub fn b_norm(alpha: f64, beta: f64, n: f64) -> Result<f64> {
    if !(alpha >= 1.0 && alpha <= 2.0) || !(beta > 0.0 && beta <= 2.0) {
        return Err(Error::InvalidParams(format!("need α ∈ [1, 2], β ∈ (0, 2], got ({alpha}, {beta})")));
    }
    if alpha == 1.0 {
        if n < 2.0 {
            return Err(Error::Domain(format!("b_n at α = 1 needs n ≥ 2, got {n}")));
        }
        return Ok(n.powf(1.0 / beta) * n.ln().powf(1.0 - 1.0 / beta));
    }
    if !(n >= 1.0) {
        return Err(Error::Domain(format!("b_n needs n ≥ 1, got {n}")));
    }
    let delta = 1.0 - 1.0 / alpha + 1.0 / (alpha * beta);
    Ok(n.powf(delta))
}

/// Result of [`estimate_a0`].
#[derive(Debug, Clone, PartialEq)]
pub struct A0Fit {
    pub a0: Estimate,
    /// `sqrt(Σ r²/Σ y²)` of the fit through the origin.
    pub relative_residual: f64,
    pub t_grid: Vec<f64>,
}

#[derive(Clone)]
struct Scaled(Vec<f64>);

impl Merge for Scaled {
    fn merge_from(&mut self, other: Self) {
        self.0.extend(other.0);
    }
}

/// Estimate the scale `a_0` of the Cauchy limit of `S_n / n` by regressing
/// `-ln mean cos(t S_n / n)` on `t` through the origin, with a bootstrap
/// standard error.
///
/// Fails when the relative residual exceeds `max_residual` (the points do
/// not lie on a line, e.g. an `α = 2` walk) or when the slope is not
/// three standard errors away from zero.
pub fn estimate_a0(model: &WalkModel, n: usize, reps: usize, seed: u64, max_residual: f64) -> Result<A0Fit> {
    if n < 1 || reps < 100 {
        return Err(Error::InvalidParams(format!("estimate_a0 needs n ≥ 1 and reps ≥ 100, got ({n}, {reps})")));
    }
    let stepper = model.stepper()?;
    let t_grid: Vec<f64> = (1..=15).map(|k| 0.1 * k as f64).collect();
    let scaled = reduce_replicas(
        reps,
        || Scaled(Vec::new()),
        |range, acc| {
            for r in range {
                let mut rng = replica_rng(seed, r as u64);
                let mut s = 0i64;
                for _ in 0..n {
                    s += stepper.step(&mut rng);
                }
                acc.0.push(s as f64 / n as f64);
            }
        },
    )
    .0;
    let cosines: Vec<Vec<f64>> = scaled.iter().map(|x| t_grid.iter().map(|t| (t * x).cos()).collect()).collect();

    let fit = |idx: &mut dyn Iterator<Item = usize>| -> (f64, f64) {
        let mut sums = vec![0.0; t_grid.len()];
        let mut m = 0usize;
        for i in idx {
            for (s, c) in sums.iter_mut().zip(&cosines[i]) {
                *s += c;
            }
            m += 1;
        }
        let ys: Vec<f64> = sums.iter().map(|s| -(s / m as f64).max(1e-300).ln()).collect();
        let stt: f64 = t_grid.iter().map(|t| t * t).sum();
        let slope = t_grid.iter().zip(&ys).map(|(t, y)| t * y).sum::<f64>() / stt;
        let rss: f64 = t_grid.iter().zip(&ys).map(|(t, y)| (y - slope * t).powi(2)).sum();
        let syy: f64 = ys.iter().map(|y| y * y).sum();
        (slope, (rss / syy.max(1e-300)).sqrt())
    };
    let (a0, resid) = fit(&mut (0..reps));

    let mut boot = rand_chacha::ChaCha8Rng::seed_from_u64(derive_key(seed, 0xa0));
    let mut slopes = Vec::with_capacity(200);
    for _ in 0..200 {
        let mut idx = (0..reps).map(|_| boot.random_range(0..reps));
        slopes.push(fit(&mut idx).0);
    }
    let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
    let se = (slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (slopes.len() - 1) as f64).sqrt();

    if !(resid <= max_residual) {
        return Err(Error::Fit(format!(
            "-ln|CF| is not linear in t (relative residual {resid:.3e} > {max_residual:.3e}); the walk is not in the α = 1 regime"
        )));
    }
    if !(a0 > 3.0 * se) {
        return Err(Error::Fit(format!("a0 = {a0:.3e} is not significant (stderr {se:.3e})")));
    }
    Ok(A0Fit { a0: Estimate { value: a0, stderr: se }, relative_residual: resid, t_grid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;

    fn no_rng() -> StepSource<'static, ChaCha8Rng> {
        StepSource::Forced(&[])
    }

    #[test]
    fn forced_trace() {
        let t = simulate_local_times(&WalkModel::SimpleSymmetric, 3, StepSource::<ChaCha8Rng>::Forced(&[1, -1, 1])).unwrap();
        assert_eq!(t.sorted(), vec![(0, 1), (1, 2)]);
        assert_eq!(t.n(), 3);
        assert_eq!(t.v_beta(2.0), 5.0);
        assert_eq!(t.v_beta(1.0), 3.0);
        assert!(simulate_local_times(&WalkModel::SimpleSymmetric, 0, no_rng()).is_err());
    }

    #[test]
    fn two_step_paths_visit_two_sites() {
        for a in [-1, 1] {
            for b in [-1, 1] {
                let t = simulate_local_times(&WalkModel::SimpleSymmetric, 2, StepSource::<ChaCha8Rng>::Forced(&[a, b])).unwrap();
                assert_eq!(t.range(), 2);
                assert!(t.iter().all(|(_, c)| c == 1));
            }
        }
    }

    #[test]
    fn b_norm_values() {
        assert!((b_norm(2.0, 2.0, 16.0).unwrap() - 8.0).abs() < 1e-12);
        assert!((b_norm(1.0, 2.0, 100.0).unwrap() - 21.459_660_262_893_472).abs() < 1e-9);
        assert!((b_norm(1.0, 1.0, 37.0).unwrap() - 37.0).abs() < 1e-12);
        assert!(b_norm(1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn running_v_matches_recompute() {
        let mut rng = replica_rng(3, 0);
        let stepper = WalkModel::SimpleSymmetric.stepper().unwrap();
        for &beta in &[0.5, 1.0, 1.5, 2.0] {
            let mut t = LocalTimeTable::new();
            let mut v = RunningV::new(beta);
            for _ in 0..1_000_000 {
                v.update(t.visit(stepper.step(&mut rng)));
            }
            let exact = t.v_beta(beta);
            assert!((v.value() - exact).abs() <= 1e-10 * exact, "β={beta}");
        }
    }

    #[test]
    fn occupation_dense_and_sparse_agree() {
        let mut d = Occupation::for_walk(&WalkModel::SimpleSymmetric, 10);
        let mut s = Occupation::Sparse(Default::default());
        for &site in &[1, 2, 1, 0, -1, 0, 1] {
            assert_eq!(d.bump(site), s.bump(site));
        }
        d.clear();
        assert_eq!(d.bump(1), 0);
    }

    #[test]
    fn a0_for_cauchy_zipf_walk() {
        let fit = estimate_a0(&WalkModel::LatticeZipf { tail_exponent: 2.0 }, 2000, 20_000, 11, 0.05).unwrap();
        let target = 3.0 / std::f64::consts::PI;
        assert!((fit.a0.value - target).abs() < 3.0 * fit.a0.stderr + 0.005, "{fit:?}");
        let again = estimate_a0(&WalkModel::LatticeZipf { tail_exponent: 2.0 }, 2000, 20_000, 11, 0.05).unwrap();
        assert_eq!(fit, again);
    }

    #[test]
    fn a0_rejects_gaussian_walk() {
        assert!(estimate_a0(&WalkModel::SimpleSymmetric, 2000, 5000, 1, 0.05).is_err());
    }

    #[test]
    fn zipf_walk_range_restriction() {
        assert!(WalkModel::LatticeZipf { tail_exponent: 1.5 }.validate().is_err());
        assert!(WalkModel::LatticeZipf { tail_exponent: 3.0 }.validate().is_err());
        assert_eq!(WalkModel::LatticeZipf { tail_exponent: 2.5 }.alpha(), 1.5);
    }

    #[test]
    fn lazy_walk_step_frequencies() {
        let s = WalkModel::LazySymmetric { hold_prob: 0.3 }.stepper().unwrap();
        let mut rng = replica_rng(1, 1);
        let n = 100_000;
        let holds = (0..n).filter(|_| s.step(&mut rng) == 0).count() as f64 / n as f64;
        assert!((holds - 0.3).abs() < 5.0 * (0.21f64 / n as f64).sqrt());
    }
}
