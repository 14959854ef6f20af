use rwrs_core::renewal_constants::l_moment_estimates;
use rwrs_core::rng::replica_rng;
use rwrs_core::stats::{reduce_replicas, MeanVar};
use rwrs_core::walk_paths::{b_norm, pow_table, Occupation, WalkModel};

/// Mean of `V_n^{1/β} / b_n` at each `n`, from prefixes of shared paths.
fn normalized_v(walk: &WalkModel, beta: f64, ns: &[usize], reps: usize, seed: u64) -> Vec<MeanVar> {
    let n_max = *ns.last().unwrap();
    let powers = pow_table(beta, n_max);
    let stepper = walk.stepper().unwrap();
    reduce_replicas(reps, || vec![MeanVar::new(); ns.len()], |range, acc| {
        let mut occ = Occupation::for_walk(walk, n_max);
        for r in range {
            let mut rng = replica_rng(seed, r as u64);
            occ.clear();
            let (mut pos, mut v, mut next) = (0i64, 0.0, 0);
            for k in 1..=n_max {
                pos += stepper.step(&mut rng);
                let c = occ.bump(pos) as usize;
                v += powers[c + 1] - powers[c];
                if k == ns[next] {
                    acc[next].push(v.powf(1.0 / beta) / b_norm(walk.alpha(), beta, k as f64).unwrap());
                    next += 1;
                }
            }
        }
    })
}

#[test]
fn v_normalization_is_stable_under_dyadic_growth() {
    // Independent replica sets for the two n so the standard errors combine.
    let small = normalized_v(&WalkModel::SimpleSymmetric, 2.0, &[1 << 12], 2000, 101);
    let large = normalized_v(&WalkModel::SimpleSymmetric, 2.0, &[1 << 14], 2000, 202);
    let (a, b) = (small[0].estimate(), large[0].estimate());
    assert!((a.value - b.value).abs() < 3.0 * a.stderr.hypot(b.stderr), "{a:?} vs {b:?}");
}

#[test]
fn l_moment_is_stable_under_dyadic_growth() {
    let a = l_moment_estimates(&WalkModel::SimpleSymmetric, 2.0, &[1 << 12], 2000, 7).unwrap()[0];
    let b = l_moment_estimates(&WalkModel::SimpleSymmetric, 2.0, &[1 << 14], 2000, 8).unwrap()[0];
    assert!(a.value > 0.0 && a.value.is_finite());
    assert!((a.value - b.value).abs() < 3.0 * a.stderr.hypot(b.stderr), "{a:?} vs {b:?}");
}
