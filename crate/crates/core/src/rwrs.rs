//! `Z_n = Σ_y ξ_y N_n(y)` and three routes to `E[e^{itZ_n}]`: plain Monte
//! Carlo, the conditional product formula averaged over walks, and exact
//! enumeration of short paths.

use crate::error::{Error, Result};
use crate::rng::{derive_key, replica_rng, SiteRng};
use crate::stable_laws::{SceneryLaw, ScenerySampler};
use crate::stats::{reduce_replicas, ComplexEstimate, ComplexMeanVar};
use crate::walk_paths::{LocalTimeTable, Occupation, WalkModel};
use num_complex::Complex64;

/// Largest `n` accepted by [`exact_cf_small`].
pub const ENUMERATION_MAX_STEPS: usize = 12;

/// A scenery field `y ↦ ξ_y`.
pub trait Scenery {
    fn value(&self, site: i64) -> f64;
}

/// Storage-free scenery: `ξ_y` is drawn from a counter stream keyed by
/// `(seed, y)`, so every lookup of a site returns the same value.
#[derive(Debug, Clone)]
pub struct SceneryModel {
    law: SceneryLaw,
    seed: u64,
    sampler: ScenerySampler,
}

impl SceneryModel {
    pub fn new(law: SceneryLaw, seed: u64) -> Result<Self> {
        Ok(Self { law, seed, sampler: law.sampler()? })
    }

    pub fn law(&self) -> &SceneryLaw {
        &self.law
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Same law, independent field.
    pub fn reseeded(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

impl Scenery for SceneryModel {
    #[inline]
    fn value(&self, site: i64) -> f64 {
        self.sampler.sample(&mut SiteRng::new(self.seed, site))
    }
}

/// `Z_n` together with the local times it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct RwrsSample {
    pub z: f64,
    pub table: LocalTimeTable,
    /// `V_n` at the scenery's stability index.
    pub v_beta: f64,
}

/// `Z_n = Σ_y ξ_y N_n(y)` over the occupied sites, in site order.
pub fn sample_z<S: Scenery>(table: &LocalTimeTable, scenery: &S, beta: f64) -> Result<RwrsSample> {
    if table.n() == 0 {
        return Err(Error::InvalidParams("Z_n needs a nonempty local time table".into()));
    }
    let z = table.sorted().into_iter().map(|(y, c)| scenery.value(y) * c as f64).sum();
    Ok(RwrsSample { z, table: table.clone(), v_beta: table.v_beta(beta) })
}

/// `E[e^{itZ_n} | walk] = Π_y φ_ξ(t N_n(y))`.
pub fn conditional_cf<F: Fn(f64) -> Complex64>(table: &LocalTimeTable, scenery_cf: F, t: f64) -> Complex64 {
    if t == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    table
        .sorted()
        .into_iter()
        .fold(Complex64::new(1.0, 0.0), |acc, (_, c)| acc * scenery_cf(t * c as f64))
}

/// Rao-Blackwellized estimate of `E[e^{itZ_n}]`: the mean over `reps` walks
/// of [`conditional_cf`]. The scenery is never sampled.
pub fn mc_char_fn(walk: &WalkModel, law: &SceneryLaw, n: usize, t: f64, reps: usize, seed: u64) -> Result<ComplexEstimate> {
    if reps < 100 || n == 0 {
        return Err(Error::InvalidParams(format!("mc_char_fn needs n ≥ 1 and reps ≥ 100, got ({n}, {reps})")));
    }
    law.validate()?;
    let stepper = walk.stepper()?;
    let acc = reduce_replicas(reps, ComplexMeanVar::default, |range, acc| {
        let mut occ = Occupation::for_walk(walk, n);
        for r in range {
            let mut rng = replica_rng(seed, r as u64);
            let mut pos = 0i64;
            occ.clear();
            for _ in 0..n {
                pos += stepper.step(&mut rng);
                occ.bump(pos);
            }
            let mut prod = Complex64::new(1.0, 0.0);
            occ.for_each_count(|c| prod *= law.cf(t * c as f64));
            acc.push(prod);
        }
    });
    Ok(acc.estimate())
}

/// Plain estimate of `E[e^{itZ_n}]` from jointly sampled walks and
/// sceneries; kept as a reference for the conditional estimator.
pub fn naive_char_fn(walk: &WalkModel, law: &SceneryLaw, n: usize, t: f64, reps: usize, seed: u64) -> Result<ComplexEstimate> {
    if reps < 100 || n == 0 {
        return Err(Error::InvalidParams(format!("naive_char_fn needs n ≥ 1 and reps ≥ 100, got ({n}, {reps})")));
    }
    let stepper = walk.stepper()?;
    let base = SceneryModel::new(*law, 0)?;
    let acc = reduce_replicas(reps, ComplexMeanVar::default, |range, acc| {
        for r in range {
            let mut rng = replica_rng(seed, r as u64);
            let scenery = base.reseeded(derive_key(seed, r as u64));
            let mut pos = 0i64;
            let mut z = 0.0;
            for _ in 0..n {
                pos += stepper.step(&mut rng);
                z += scenery.value(pos);
            }
            acc.push(Complex64::from_polar(1.0, t * z));
        }
    });
    Ok(acc.estimate())
}

/// Visit every path of a finitely supported walk of length `n`, passing
/// its probability and the dense visit counts (index `y + n`).
pub fn for_each_path<F: FnMut(f64, &[u32])>(walk: &WalkModel, n: usize, mut f: F) -> Result<()> {
    let support = walk
        .finite_support()
        .ok_or_else(|| Error::InvalidParams("path enumeration needs a finitely supported step law".into()))?;
    if n > ENUMERATION_MAX_STEPS {
        return Err(Error::CostGuard(format!("enumeration limited to n ≤ {ENUMERATION_MAX_STEPS}, got {n}")));
    }
    let max_step = support.iter().map(|(s, _)| s.unsigned_abs()).max().unwrap_or(0) as usize;
    let width = n * max_step;
    let mut counts = vec![0u32; 2 * width + 1];

    fn descend<F: FnMut(f64, &[u32])>(
        support: &[(i64, f64)],
        left: usize,
        pos: usize,
        prob: f64,
        counts: &mut [u32],
        f: &mut F,
    ) {
        if left == 0 {
            f(prob, counts);
            return;
        }
        for &(s, p) in support {
            let next = (pos as i64 + s) as usize;
            counts[next] += 1;
            descend(support, left - 1, next, prob * p, counts, f);
            counts[next] -= 1;
        }
    }
    descend(&support, n, width, 1.0, &mut counts, &mut f);
    Ok(())
}

/// Exact `E[e^{itZ_n}]` for `n ≤ 12` by enumerating all step sequences.
pub fn exact_cf_small(walk: &WalkModel, law: &SceneryLaw, n: usize, t: f64) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::InvalidParams("exact_cf_small needs n ≥ 1".into()));
    }
    let mut total = Complex64::new(0.0, 0.0);
    for_each_path(walk, n, |prob, counts| {
        let mut prod = Complex64::new(1.0, 0.0);
        for &c in counts.iter().filter(|&&c| c > 0) {
            prod *= law.cf(t * c as f64);
        }
        total += prob * prod;
    })?;
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable_laws::StableCfParams;
    use crate::walk_paths::{simulate_local_times, StepSource};
    use rand_chacha::ChaCha8Rng;

    struct Fixed(Vec<(i64, f64)>);

    impl Scenery for Fixed {
        fn value(&self, site: i64) -> f64 {
            self.0.iter().find(|(y, _)| *y == site).map(|(_, v)| *v).unwrap_or(0.0)
        }
    }

    struct Scaled<'a, S>(&'a S, f64);

    impl<S: Scenery> Scenery for Scaled<'_, S> {
        fn value(&self, site: i64) -> f64 {
            self.1 * self.0.value(site)
        }
    }

    fn table(counts: &[(i64, u64)]) -> LocalTimeTable {
        LocalTimeTable::from_counts(counts.iter().copied())
    }

    #[test]
    fn hand_computed_z() {
        let s = sample_z(&table(&[(1, 2), (0, 1)]), &Fixed(vec![(0, 2.0), (1, -1.0)]), 2.0).unwrap();
        assert_eq!(s.z, 0.0);
        assert_eq!(s.v_beta, 5.0);
        assert!(sample_z(&LocalTimeTable::new(), &Fixed(vec![]), 2.0).is_err());
    }

    #[test]
    fn single_step_z_is_the_visited_value() {
        let sc = SceneryModel::new(SceneryLaw::Gaussian { variance: 1.0 }, 5).unwrap();
        let t = simulate_local_times(&WalkModel::SimpleSymmetric, 1, StepSource::<ChaCha8Rng>::Forced(&[-1])).unwrap();
        assert_eq!(sample_z(&t, &sc, 2.0).unwrap().z, sc.value(-1));
        assert_eq!(sc.value(-1), sc.value(-1));
    }

    #[test]
    fn z_scales_linearly() {
        let sc = SceneryModel::new(SceneryLaw::ExactStable(StableCfParams::new(1.5, 1.0, 0.3).unwrap()), 8).unwrap();
        let mut rng = replica_rng(1, 2);
        let t = simulate_local_times(&WalkModel::SimpleSymmetric, 500, StepSource::Random(&mut rng)).unwrap();
        let z = sample_z(&t, &sc, 1.5).unwrap().z;
        let z4 = sample_z(&t, &Scaled(&sc, 4.0), 1.5).unwrap().z;
        assert_eq!(z4, 4.0 * z);
    }

    #[test]
    fn conditional_cf_hand_value() {
        let c = conditional_cf(&table(&[(1, 2), (0, 1)]), |u| Complex64::new(u.cos(), 0.0), std::f64::consts::PI);
        assert!((c - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        assert_eq!(conditional_cf(&table(&[(3, 4)]), |u| Complex64::new(u.cos(), 0.0), 0.0), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn exact_small_cases() {
        let w = WalkModel::SimpleSymmetric;
        let l = SceneryLaw::Rademacher;
        for &t in &[0.3, 1.0, 2.2] {
            assert!((exact_cf_small(&w, &l, 1, t).unwrap().re - t.cos()).abs() < 1e-15);
            assert!((exact_cf_small(&w, &l, 2, t).unwrap().re - t.cos().powi(2)).abs() < 1e-15);
        }
        assert!(exact_cf_small(&w, &l, 13, 1.0).is_err());
        assert!(exact_cf_small(&WalkModel::LatticeZipf { tail_exponent: 2.5 }, &l, 3, 1.0).is_err());
    }

    #[test]
    fn mc_matches_enumeration() {
        let w = WalkModel::SimpleSymmetric;
        let l = SceneryLaw::Rademacher;
        let exact = exact_cf_small(&w, &l, 6, 0.7).unwrap();
        let est = mc_char_fn(&w, &l, 6, 0.7, 100_000, 3).unwrap();
        assert!((est.value.re - exact.re).abs() < 5.0 * est.stderr_re.max(1e-12));
        assert!(est.value.norm() <= 1.0 + 3.0 * est.stderr_max());
        assert_eq!(est, mc_char_fn(&w, &l, 6, 0.7, 100_000, 3).unwrap());
    }

    #[test]
    fn conditional_estimator_beats_naive() {
        let w = WalkModel::SimpleSymmetric;
        let l = SceneryLaw::Rademacher;
        let rb = mc_char_fn(&w, &l, 100, 0.3, 20_000, 4).unwrap();
        let naive = naive_char_fn(&w, &l, 100, 0.3, 20_000, 4).unwrap();
        assert!(rb.stderr_re <= naive.stderr_re && rb.stderr_im <= naive.stderr_im);
        assert!((rb.value.re - naive.value.re).abs() < 4.0 * naive.stderr_re);
    }

    #[test]
    fn symmetric_case_has_real_cf() {
        let law = SceneryLaw::ExactStable(StableCfParams::symmetric(1.2, 1.0).unwrap());
        let est = mc_char_fn(&WalkModel::LazySymmetric { hold_prob: 0.2 }, &law, 50, 0.4, 10_000, 6).unwrap();
        assert!(est.value.im.abs() <= 3.0 * est.stderr_im.max(1e-15));
    }

    #[test]
    fn lazy_walk_enumeration_probabilities_sum_to_one() {
        let mut total = 0.0;
        for_each_path(&WalkModel::LazySymmetric { hold_prob: 0.25 }, 7, |p, c| {
            assert_eq!(c.iter().sum::<u32>(), 7);
            total += p;
        })
        .unwrap();
        assert!((total - 1.0).abs() < 1e-14);
    }
}
