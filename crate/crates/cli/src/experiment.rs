//! Dispatch from a configuration to the estimators, predictions and verdict.

use crate::config::{ExperimentConfig, ExperimentKind, Gate, KernelMethod, PsiMode};
use crate::output::ResultRow;
use anyhow::{anyhow, bail, Context, Result};
use num_complex::Complex64;
use rwrs_core::kernel_estimator::{k_na_direct_grid, k_na_fourier, k_transient_sum, renewal_fit, FitModel, FitReport, KernelEstimate};
use rwrs_core::psi_series::{gamma_asym_derivative, psi_mc_grid, psi_ratio_diagnostic, PsiRegime, RegimeKind};
use rwrs_core::renewal_constants::{
    c_plus_minus, l_moment_estimate, limit_constant, oscillatory_integral, OscillatoryKind, RegimeConstants, TheoremConstant,
};
use rwrs_core::rng::{derive_key, replica_rng};
use rwrs_core::stable_laws::{empirical_cf_check, SceneryLaw, StableCfParams};
use rwrs_core::stats::with_threads;
use rwrs_core::walk_paths::estimate_a0;
use rwrs_core::Error as CoreError;

const L_MOMENT_STREAM: u64 = 1;
const MAIN_STREAM: u64 = 2;
const A0_STREAM: u64 = 3;
const SAMPLER_STREAM: u64 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub pass: bool,
    /// Human-readable gate results, one per line.
    pub notes: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Self { pass: true, notes: Vec::new() }
    }

    fn gate(&mut self, ok: bool, hard: bool, note: String) {
        let tag = match (ok, hard) {
            (true, _) => "ok",
            (false, true) => "FAIL",
            (false, false) => "soft-miss",
        };
        self.notes.push(format!("[{tag}] {note}"));
        if hard && !ok {
            self.pass = false;
        }
    }

    fn info(&mut self, note: String) {
        self.notes.push(format!("[info] {note}"));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub rows: Vec<ResultRow>,
    pub verdict: Verdict,
}

/// Run `cfg` on `threads` workers (0 = rayon default). Results do not
/// depend on `threads`.
pub fn run_with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<Outcome> {
    with_threads(threads, || run_experiment(cfg))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.kind {
        ExperimentKind::SamplerCheck => sampler_check(cfg),
        ExperimentKind::Constants => constants(cfg),
        ExperimentKind::PsiRatio => match cfg.mode {
            PsiMode::Value => psi_ratio(cfg),
            PsiMode::Derivative => psi_derivative(cfg),
        },
        ExperimentKind::KernelRecurrent | ExperimentKind::KernelTransient => kernel(cfg),
    }
}

fn stable_params(cfg: &ExperimentConfig) -> Result<StableCfParams> {
    Ok(match cfg.scenery {
        SceneryLaw::ExactStable(p) => p,
        _ => StableCfParams::new(cfg.beta, cfg.a1, cfg.a2)?,
    })
}

/// Constants of the configured regime, estimating `E[|L|^(-1/δ)]` or `a0`
/// when the regime needs them.
pub fn regime_constants(cfg: &ExperimentConfig) -> Result<RegimeConstants> {
    let params = stable_params(cfg)?;
    let l_moment = if cfg.alpha > 1.0 && cfg.beta != 1.0 {
        Some(
            l_moment_estimate(&cfg.walk, cfg.beta, cfg.l_moment_n, cfg.l_moment_reps, derive_key(cfg.seed, L_MOMENT_STREAM))
                .context("estimating E[|L|^(-1/δ)]")?,
        )
    } else {
        None
    };
    let a0 = if cfg.alpha == 1.0 {
        Some(match cfg.a0 {
            Some(a0) => a0,
            None => estimate_a0(&cfg.walk, cfg.a0_n, cfg.a0_reps, derive_key(cfg.seed, A0_STREAM), 0.05)?.a0.value,
        })
    } else {
        None
    };
    Ok(RegimeConstants::new(cfg.alpha, params, l_moment, a0)?)
}

fn sampler_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let bound = 5.0 / (cfg.reps as f64).sqrt();
    let mut verdict = Verdict::new();
    let mut rows = Vec::new();
    for &u in &cfg.t_grid {
        let mut rng = replica_rng(derive_key(cfg.seed, SAMPLER_STREAM), 0);
        let dev = empirical_cf_check(&cfg.scenery, &[u], cfg.reps, &mut rng)?;
        verdict.gate(dev <= bound, true, format!("u = {u}: |empirical - closed form| = {dev:.3e} (bound {bound:.3e})"));
        rows.push(ResultRow::real("sampler-check", u, dev, 0.0, 0.0, bound));
    }
    Ok(Outcome { rows, verdict })
}

fn constants(cfg: &ExperimentConfig) -> Result<Outcome> {
    let k = regime_constants(cfg)?;
    let nan = f64::NAN;
    let mut rows = vec![ResultRow::real("delta", 0.0, k.delta, 0.0, 0.0, nan)];
    let mut verdict = Verdict::new();
    if let Some(m) = k.l_moment {
        rows.push(ResultRow::real("l-moment", 0.0, m.value, m.stderr, 0.0, nan));
    }
    if let Some(a0) = k.a0 {
        rows.push(ResultRow::real("a0", 0.0, a0, 0.0, 0.0, nan));
        rows.push(ResultRow::real("c", 0.0, k.c.unwrap_or(nan), 0.0, 0.0, nan));
    }
    if let Some((kind, _)) = theorem_for(cfg) {
        rows.push(ResultRow::real(format!("{kind:?}"), 0.0, limit_constant(kind, &k)?, 0.0, 0.0, nan));
    }
    if k.delta > 1.0 {
        let (cp, cm) = c_plus_minus(k.delta, k.beta, &k.params)?;
        rows.push(ResultRow::real("c-plus", 0.0, cp, 0.0, 0.0, nan));
        rows.push(ResultRow::real("c-minus", 0.0, cm, 0.0, 0.0, nan));
    }
    let mut kernels = Vec::new();
    if k.delta != 1.0 {
        kernels.push(("osc-delta", OscillatoryKind::DeltaKernel(k.delta)));
    }
    if k.beta != 1.0 && k.beta < 2.0 {
        kernels.push(("osc-beta", OscillatoryKind::BetaKernel(k.beta)));
    }
    for (label, kind) in kernels {
        let s = kind.exponent();
        match oscillatory_integral(kind, cfg.tolerance) {
            Ok(o) => {
                let diff = (o.quadrature - o.closed_form).norm();
                verdict.gate(true, true, format!("{label} (s = {s}): |quadrature - closed form| = {diff:.3e}"));
                rows.push(ResultRow {
                    regime: label.into(),
                    a: s,
                    estimate_re: o.quadrature.re,
                    estimate_im: o.quadrature.im,
                    stat_err: 0.0,
                    trunc_err: o.quadrature_error,
                    predicted: o.closed_form.re,
                    ratio: o.quadrature.re / o.closed_form.re,
                });
            }
            Err(CoreError::Disagreement { difference, tolerance, .. }) => {
                verdict.gate(false, true, format!("{label} (s = {s}): disagreement {difference:.3e} > {tolerance:.1e}"));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Outcome { rows, verdict })
}

fn psi_label(regime: &PsiRegime) -> &'static str {
    match regime.kind() {
        RegimeKind::PowerLaw => "psi-power-law",
        RegimeKind::Cauchy => "psi-cauchy",
        RegimeKind::LogCorrected => "psi-log-corrected",
    }
}

fn psi_regime(cfg: &ExperimentConfig, verdict: &mut Verdict) -> Result<PsiRegime> {
    let k = regime_constants(cfg)?;
    if let (Some(m), Some(c)) = (k.l_moment, k.big_c()) {
        verdict.info(format!("E[|L|^(-1/δ)] = {:.6} ± {:.2e}, C = {c:.6}", m.value, m.stderr));
    }
    Ok(PsiRegime::from_constants(&k)?)
}

fn psi_ratio(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut verdict = Verdict::new();
    let regime = psi_regime(cfg, &mut verdict)?;
    let label = psi_label(&regime);
    let ratios = psi_ratio_diagnostic(&regime, &cfg.walk, &cfg.t_grid, cfg.reps, cfg.trunc_tol, derive_key(cfg.seed, MAIN_STREAM))?;
    let mut rows = Vec::new();
    for r in &ratios {
        rows.push(ResultRow {
            regime: label.into(),
            a: r.t,
            estimate_re: r.psi.value.value.re,
            estimate_im: r.psi.value.value.im,
            stat_err: r.psi.value.stderr_max(),
            trunc_err: r.psi.trunc_bound,
            predicted: r.gamma.re,
            ratio: r.ratio.re,
        });
        verdict.info(format!("t = {}: ψ/γ = {:.5} ± {:.1e} (n_max = {})", r.t, r.ratio.re, r.ratio_err, r.psi.n_max));
    }
    let mut by_t: Vec<_> = ratios.iter().collect();
    by_t.sort_by(|x, y| y.t.total_cmp(&x.t));
    for w in by_t.windows(2) {
        let (big, small) = (w[0], w[1]);
        let (d_big, d_small) = ((big.ratio - 1.0).norm(), (small.ratio - 1.0).norm());
        let noise = 3.0 * big.ratio_err.hypot(small.ratio_err);
        verdict.gate(
            d_small <= d_big + noise,
            true,
            format!("trend: |ratio-1| {d_big:.4} at t = {} -> {d_small:.4} at t = {} (noise allowance {noise:.1e})", big.t, small.t),
        );
    }
    if let Some(last) = by_t.last() {
        let d = (last.ratio - 1.0).norm();
        verdict.gate(d <= cfg.tolerance, true, format!("|ratio-1| = {d:.4} at t = {} (band {})", last.t, cfg.tolerance));
    }
    Ok(Outcome { rows, verdict })
}

/// Central differences of ψ̂ at `t(1 ± fd_step)` on shared paths against `γ'(t)`.
fn psi_derivative(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut verdict = Verdict::new();
    let regime = psi_regime(cfg, &mut verdict)?;
    let label = format!("{}-derivative", psi_label(&regime));
    let nodes: Vec<f64> = cfg.t_grid.iter().flat_map(|&t| [t * (1.0 - cfg.fd_step), t * (1.0 + cfg.fd_step)]).collect();
    let est = psi_mc_grid(&regime.params, &cfg.walk, &nodes, cfg.reps, cfg.n_max, cfg.trunc_tol, derive_key(cfg.seed, MAIN_STREAM))?;
    let mut rows = Vec::new();
    for (i, &t) in cfg.t_grid.iter().enumerate() {
        let (lo, hi) = (&est[2 * i], &est[2 * i + 1]);
        let h = 2.0 * t * cfg.fd_step;
        let d: Complex64 = (hi.value.value - lo.value.value) / h;
        let g = gamma_asym_derivative(&regime, t)?;
        let ratio = (d / g).re;
        rows.push(ResultRow {
            regime: label.clone(),
            a: t,
            estimate_re: d.re,
            estimate_im: d.im,
            stat_err: (hi.value.stderr_max() + lo.value.stderr_max()) / h,
            trunc_err: (hi.trunc_bound + lo.trunc_bound) / h,
            predicted: g.re,
            ratio,
        });
        verdict.gate(
            ratio >= cfg.ratio_min && ratio <= cfg.ratio_max,
            true,
            format!("t = {t}: ψ'/γ' = {ratio:.4} (band [{}, {}])", cfg.ratio_min, cfg.ratio_max),
        );
    }
    Ok(Outcome { rows, verdict })
}

/// Theorem constant and fit model of the configured kernel regime.
fn theorem_for(cfg: &ExperimentConfig) -> Option<(TheoremConstant, FitModel)> {
    let (alpha, beta) = (cfg.alpha, cfg.beta);
    let delta = rwrs_core::renewal_constants::delta_exponent(alpha, beta);
    if beta == 1.0 {
        Some((TheoremConstant::C2, FitModel::LogLaw))
    } else if alpha > 1.0 {
        let kind = if beta > 1.0 { TheoremConstant::C1 } else { TheoremConstant::C0 };
        Some((kind, FitModel::PowerLaw { expected_exponent: 1.0 / delta - 1.0 }))
    } else if beta > 1.0 && beta < 2.0 {
        Some((TheoremConstant::D1, FitModel::LogPowerLaw { beta }))
    } else if beta == 2.0 {
        Some((TheoremConstant::D2, FitModel::LogPowerLaw { beta }))
    } else {
        None
    }
}

/// `a`-dependence multiplying the limit constant.
fn growth(model: FitModel, a: f64) -> f64 {
    match model {
        FitModel::PowerLaw { expected_exponent } => a.powf(expected_exponent),
        FitModel::LogLaw => a.ln(),
        FitModel::LogPowerLaw { beta } => a.powf(beta - 1.0) / (beta * a.ln()).powf(beta - 1.0),
    }
}

fn kernel(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (kind, model) = theorem_for(cfg).ok_or_else(|| anyhow!("no renewal theorem for α = {}, β = {}", cfg.alpha, cfg.beta))?;
    if kind == TheoremConstant::D2 && !(cfg.h.is_even() && cfg.scenery.is_symmetric()) {
        bail!("the (α, β) = (1, 2) kernel needs an even h and a symmetric scenery");
    }
    let mut verdict = Verdict::new();
    let k = regime_constants(cfg)?;
    if let Some(m) = k.l_moment {
        verdict.info(format!("E[|L|^(-1/δ)] = {:.6} ± {:.2e}", m.value, m.stderr));
    }
    let level = limit_constant(kind, &k)? * cfg.h.integral();
    let seed = derive_key(cfg.seed, MAIN_STREAM);
    let estimates: Vec<KernelEstimate> = match (cfg.kind, cfg.method) {
        (ExperimentKind::KernelTransient, _) => {
            k_transient_sum(&cfg.walk, &cfg.scenery, &cfg.h, &cfg.a_grid, cfg.n_max.unwrap_or(cfg.n), cfg.reps, seed)?
        }
        (_, KernelMethod::Direct) => k_na_direct_grid(&cfg.walk, &cfg.scenery, &cfg.h, cfg.n, &cfg.a_grid, cfg.reps, seed)?,
        (_, KernelMethod::Fourier) => cfg
            .a_grid
            .iter()
            .map(|&a| k_na_fourier(&cfg.walk, &cfg.scenery, &cfg.h, cfg.n, a, cfg.reps, &cfg.quad, seed))
            .collect::<std::result::Result<_, _>>()?,
    };
    let label = format!("{kind:?}");
    let mut rows: Vec<ResultRow> = estimates
        .iter()
        .map(|e| ResultRow::real(label.clone(), e.a, e.value, e.stat_err, e.trunc_err, level * growth(model, e.a)))
        .collect();
    let fit = renewal_fit(&estimates, model)?;
    fit_rows(&fit, level, cfg, &mut rows, &mut verdict);
    Ok(Outcome { rows, verdict })
}

fn fit_rows(fit: &FitReport, level: f64, cfg: &ExperimentConfig, rows: &mut Vec<ResultRow>, verdict: &mut Verdict) {
    let nan = f64::NAN;
    if let (FitModel::PowerLaw { expected_exponent }, Some(slope)) = (fit.model, fit.slope) {
        rows.push(ResultRow::real("fit-slope", nan, slope.value, slope.stderr, 0.0, expected_exponent));
        if let Some(tol) = cfg.slope_tol {
            let d = (slope.value - expected_exponent).abs();
            verdict.gate(
                d <= tol,
                true,
                format!("slope {:.4} ± {:.4} vs {expected_exponent:.4} (|diff| {d:.4}, band {tol})", slope.value, slope.stderr),
            );
        }
    }
    let measured = fit.level_at_expected.unwrap_or(fit.level);
    rows.push(ResultRow::real("fit-level", nan, measured.value, measured.stderr, 0.0, level));
    let rel = (measured.value / level - 1.0).abs();
    verdict.gate(
        rel <= cfg.level_tol,
        cfg.level_gate == Gate::Hard,
        format!(
            "level {:.5} ± {:.5} vs predicted {level:.5} (relative {rel:.3}, band {}); χ²/dof = {:.2}",
            measured.value, measured.stderr, cfg.level_tol, fit.chi2_per_dof
        ),
    );
}

/// Refit the per-`a` rows of a kernel CSV. The predicted constant is read
/// back from the `predicted` column.
pub fn refit(cfg: &ExperimentConfig, rows: &[ResultRow]) -> Result<Outcome> {
    let (_, model) = theorem_for(cfg).ok_or_else(|| anyhow!("no renewal theorem for α = {}, β = {}", cfg.alpha, cfg.beta))?;
    let points: Vec<&ResultRow> = rows.iter().filter(|r| !r.is_fit_summary()).collect();
    if points.is_empty() {
        bail!("no kernel rows to fit");
    }
    let level = points[0].predicted / growth(model, points[0].a);
    let estimates: Vec<KernelEstimate> = points
        .iter()
        .map(|r| KernelEstimate { value: r.estimate_re, stat_err: r.stat_err, trunc_err: r.trunc_err, a: r.a, n: cfg.n })
        .collect();
    let fit = renewal_fit(&estimates, model)?;
    let mut out: Vec<ResultRow> = points.into_iter().cloned().collect();
    let mut verdict = Verdict::new();
    fit_rows(&fit, level, cfg, &mut out, &mut verdict);
    Ok(Outcome { rows: out, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::output::to_csv_string;

    #[test]
    fn thread_count_does_not_change_the_csv() {
        let cfg = ExperimentConfig::parse("kind = kernel-recurrent\nbeta = 2\na_grid = 2, 4, 8, 16\nn = 64\nreps = 1500\nl_moment_n = 1024\nl_moment_reps = 500\n").unwrap();
        let one = to_csv_string(&run_with_threads(&cfg, 1).unwrap().rows).unwrap();
        let three = to_csv_string(&run_with_threads(&cfg, 3).unwrap().rows).unwrap();
        assert_eq!(one, three);
    }

    #[test]
    fn beta_one_psi_rows_use_the_closed_form_regime() {
        let cfg = ExperimentConfig::parse("kind = psi-ratio\nbeta = 1\nt_grid = 0.01, 0.1\nreps = 10\ntrunc_tol = 1e-12\ntolerance = 0.01\n").unwrap();
        let out = run_experiment(&cfg).unwrap();
        assert!(out.verdict.pass, "{:?}", out.verdict);
        assert_eq!(out.rows[0].regime, "psi-cauchy");
        assert_eq!(out.rows[0].estimate_im, 0.0);
    }

    #[test]
    fn constants_report_c2_and_the_beta_kernel() {
        let cfg = ExperimentConfig::parse("kind = constants\nbeta = 1\na1 = 2\ntolerance = 1e-6\n").unwrap();
        let out = run_experiment(&cfg).unwrap();
        let c2 = out.rows.iter().find(|r| r.regime == "C2").unwrap();
        assert!((c2.estimate_re - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
        assert!(out.verdict.pass);
    }

    #[test]
    fn refit_reproduces_the_kernel_fit() {
        let cfg = ExperimentConfig::parse("kind = kernel-recurrent\nbeta = 2\na_grid = 2, 4, 8, 16\nn = 64\nreps = 1000\nl_moment_n = 1024\nl_moment_reps = 500\nslope_tol = 10\nlevel_tol = 10\n").unwrap();
        let out = run_experiment(&cfg).unwrap();
        let again = refit(&cfg, &out.rows).unwrap();
        assert_eq!(to_csv_string(&out.rows).unwrap(), to_csv_string(&again.rows).unwrap());
    }
}
