//! Acceptance suite: one PASS/FAIL line per criterion, at the stated
//! tolerances. Run with `cargo test -p rwrs-cli --test acceptance`.

use num_complex::Complex64;
use rwrs_cli::{run_with_threads, to_csv_string, ExperimentConfig};
use rwrs_core::psi_series::{psi_closed_beta1, psi_mc_grid};
use rwrs_core::renewal_constants::{oscillatory_integral, OscillatoryKind};
use rwrs_core::rng::replica_rng;
use rwrs_core::rwrs::{conditional_cf, exact_cf_small};
use rwrs_core::special::{delta_inv, gamma, lambert_w, laplace_w_tilde};
use rwrs_core::stable_laws::{SceneryLaw, StableCfParams};
use rwrs_core::walk_paths::{simulate_local_times, StepSource, WalkModel};
use std::time::{Duration, Instant};

struct Report {
    failures: Vec<u32>,
}

impl Report {
    fn line(&mut self, id: u32, pass: bool, elapsed: Duration, budget: Duration, detail: String) {
        let in_time = elapsed <= budget;
        let ok = pass && in_time;
        if !ok {
            self.failures.push(id);
        }
        println!(
            "criterion {id:>2}: {} | {detail} | {:.2} s (budget {} s{})",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", exceeded" }
        );
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn criterion_1(rep: &mut Report) {
    let start = Instant::now();
    let ts = [0.1, 0.5, 1.0, 2.0];
    let mut worst = 0.0f64;
    let mut pass = true;
    for a1 in [0.5, 1.0, 2.0] {
        let p = StableCfParams::symmetric(1.0, a1).unwrap();
        let est = psi_mc_grid(&p, &WalkModel::SimpleSymmetric, &ts, 100, None, 1e-13, 11).unwrap();
        for e in est {
            let exact = psi_closed_beta1(a1, e.t).unwrap();
            let err = (e.value.value - Complex64::new(exact, 0.0)).norm();
            let allowed = 1e-10 * exact + e.trunc_bound;
            worst = worst.max(err / exact);
            pass &= err <= allowed && e.value.stderr_max() == 0.0;
        }
    }
    rep.line(1, pass, start.elapsed(), secs(1), format!("max relative error {worst:.2e} (allowed 1e-10 + truncation bound)"));
}

fn criterion_2(rep: &mut Report) {
    let start = Instant::now();
    let walk = WalkModel::SimpleSymmetric;
    let law = SceneryLaw::Rademacher;
    let ts: Vec<f64> = (1..=20).map(|i| 0.17 * i as f64 - 0.4).collect();
    let mut worst = 0.0f64;
    for n in 1..=10usize {
        let paths: Vec<_> = (0..1u32 << n)
            .map(|bits| {
                let steps: Vec<i64> = (0..n).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect();
                simulate_local_times::<rwrs_core::rng::ReplicaRng>(&walk, n, StepSource::Forced(&steps)).unwrap()
            })
            .collect();
        for &t in &ts {
            let avg: Complex64 = paths.iter().map(|p| conditional_cf(p, |u| law.cf(u), t)).sum::<Complex64>() / paths.len() as f64;
            worst = worst.max((avg - exact_cf_small(&walk, &law, n, t).unwrap()).norm());
        }
    }
    rep.line(2, worst <= 1e-12, start.elapsed(), secs(60), format!("max |enumerated average - exact| = {worst:.2e} over n <= 10, 20 t (tol 1e-12)"));
}

fn criterion_3(rep: &mut Report) {
    let start = Instant::now();
    let walks = [
        WalkModel::SimpleSymmetric,
        WalkModel::LazySymmetric { hold_prob: 0.3 },
        WalkModel::LatticeZipf { tail_exponent: 2.5 },
    ];
    let n = 1000usize;
    let nf = n as f64;
    let (mut partition, mut bounds, mut checked) = (0u64, 0u64, 0u64);
    for (w, walk) in walks.iter().enumerate() {
        for (b, beta) in [0.25, 0.5, 1.0, 1.5, 2.0].into_iter().enumerate() {
            for r in 0..10_000u64 {
                let mut rng = replica_rng(0xc3 + (w * 16 + b) as u64, r);
                let t = simulate_local_times(walk, n, StepSource::Random(&mut rng)).unwrap();
                partition += (t.iter().map(|(_, c)| c).sum::<u64>() != n as u64) as u64;
                let v = t.v_beta(beta);
                let (lo, hi) = if beta <= 1.0 { (nf.powf(beta), nf) } else { (nf, nf.powf(beta)) };
                bounds += !(lo <= v && v <= hi) as u64;
                checked += 1;
            }
        }
    }
    rep.line(
        3,
        partition == 0 && bounds == 0,
        start.elapsed(),
        secs(60),
        format!("{checked} paths (n = {n}, 3 walks x 5 betas): {partition} partition and {bounds} bound violations"),
    );
}

fn criterion_4(rep: &mut Report) {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut pass = true;
    for s in [0.2, 0.5, 0.8, 1.2, 1.5, 1.8] {
        for kind in [OscillatoryKind::BetaKernel(s), OscillatoryKind::DeltaKernel(1.0 / s)] {
            match oscillatory_integral(kind, 1e-6) {
                Ok(o) => worst = worst.max((o.quadrature - o.closed_form).norm()),
                Err(e) => {
                    println!("    {kind:?}: {e}");
                    pass = false;
                }
            }
        }
    }
    pass &= worst <= 1e-6;
    rep.line(4, pass, start.elapsed(), secs(10), format!("max |closed form - quadrature| = {worst:.2e} over s in {{0.2,0.5,0.8,1.2,1.5,1.8}} (tol 1e-6)"));
}

fn criterion_5(rep: &mut Report) {
    let start = Instant::now();
    let mut w_err = 0.0f64;
    let mut d_err = 0.0f64;
    for i in 0..=200 {
        let x = 10f64.powf(-8.0 + 16.0 * i as f64 / 200.0);
        let w = lambert_w(x).unwrap();
        w_err = w_err.max((w * w.exp() - x).abs() / x);
        let y = std::f64::consts::E * 10f64.powf(12.0 * i as f64 / 200.0);
        let d = delta_inv(y).unwrap();
        d_err = d_err.max((d.exp() / d - y).abs() / y);
    }
    let u = 1e-6f64;
    let mut pass = w_err <= 1e-12 && d_err <= 1e-12;
    let mut ratios = Vec::new();
    let mut differences = Vec::new();
    for p in [0.0, 1.0] {
        for beta in [0.5, 1.5, 2.0] {
            let l = laplace_w_tilde(p, beta, Complex64::new(u, 0.0), 1e-10).unwrap().re;
            let scaled = u.powf(p + 1.0) * l;
            let target = gamma(p + 1.0) * (-u.ln()).powf(1.0 - beta);
            let ratio = scaled / target;
            pass &= (ratio - 1.0).abs() <= 0.1;
            ratios.push(format!("(p={p},b={beta}) {ratio:.4}"));
            differences.push(format!("(p={p},b={beta}) {:.4}", scaled - target));
        }
    }
    rep.line(
        5,
        pass,
        start.elapsed(),
        secs(10),
        format!("round trips W {w_err:.1e}, Delta {d_err:.1e} (tol 1e-12); Tauberian ratios at u=1e-6 (band 10%): {}", ratios.join(", ")),
    );
    println!("    info: difference form u^(p+1) L(w_p)(u) - Gamma(p+1)(-ln u)^(1-b): {}", differences.join(", "));
}

const C6: &str = "kind = psi-ratio\nbeta = 2\nt_grid = 0.2, 0.1, 0.05\nreps = 20000\nl_moment_n = 8192\nl_moment_reps = 2000\ntolerance = 0.15\nseed = 6\n";
const C7: &str = "kind = kernel-recurrent\nbeta = 2\nh = gaussian\na_grid = 25, 50, 100, 200, 400\nn = 4096\nreps = 100000\nl_moment_n = 8192\nl_moment_reps = 2000\nslope_tol = 0.1\nlevel_tol = 0.3\nlevel_gate = soft\nseed = 7\n";
const C8: &str = "kind = kernel-recurrent\nbeta = 1\na1 = 1\nh = gaussian\na_grid = 20, 40, 80, 160, 320, 640\nn = 16384\nreps = 100000\nlevel_tol = 0.15\nseed = 8\n";
const C9: &str = "kind = kernel-transient\nbeta = 0.5\nh = gaussian\na_grid = 50, 100, 200, 400\nn_max = 4096\nreps = 100000\nl_moment_n = 8192\nl_moment_reps = 2000\nslope_tol = 0.12\nlevel_tol = 0.4\nlevel_gate = soft\nseed = 9\n";
const C10: &str = "kind = psi-ratio\nmode = derivative\nbeta = 0.5\nt_grid = 0.2, 0.1\nreps = 20000\nl_moment_n = 8192\nl_moment_reps = 2000\nratio_min = 0.5\nratio_max = 2\nseed = 10\n";

/// Runs a config on one thread and again on four; returns whether the two
/// CSVs are byte-identical.
fn experiment(rep: &mut Report, id: u32, text: &str, budget: Duration) -> bool {
    let cfg = ExperimentConfig::parse(text).expect("acceptance config");
    let start = Instant::now();
    let first = run_with_threads(&cfg, 1);
    let elapsed = start.elapsed();
    let first = match first {
        Ok(o) => o,
        Err(e) => {
            rep.line(id, false, elapsed, budget, format!("error: {e:#}"));
            return false;
        }
    };
    let notes: Vec<&str> = first.verdict.notes.iter().map(String::as_str).collect();
    rep.line(id, first.verdict.pass, elapsed, budget, notes.join("; "));
    let again = run_with_threads(&cfg, 4).expect("second run");
    to_csv_string(&first.rows).unwrap() == to_csv_string(&again.rows).unwrap()
}

fn main() {
    let mut rep = Report { failures: Vec::new() };
    criterion_1(&mut rep);
    criterion_2(&mut rep);
    criterion_3(&mut rep);
    criterion_4(&mut rep);
    criterion_5(&mut rep);
    let start = Instant::now();
    let mut identical = Vec::new();
    for (id, text, budget) in [(6, C6, 600), (7, C7, 1800), (8, C8, 1200), (9, C9, 1800), (10, C10, 600)] {
        identical.push((id, experiment(&mut rep, id, text, secs(budget))));
    }
    let mismatched: Vec<u32> = identical.iter().filter(|(_, same)| !same).map(|(id, _)| *id).collect();
    rep.line(
        11,
        mismatched.is_empty(),
        Duration::ZERO,
        Duration::ZERO,
        format!(
            "threads 1 vs 4 CSV byte-identical for criteria 6-10{} (total {:.0} s for both runs)",
            if mismatched.is_empty() { String::new() } else { format!(", mismatch in {mismatched:?}") },
            start.elapsed().as_secs_f64()
        ),
    );
    if rep.failures.is_empty() {
        println!("acceptance: all criteria PASS");
    } else {
        println!("acceptance: FAIL in {:?}", rep.failures);
        std::process::exit(1);
    }
}
