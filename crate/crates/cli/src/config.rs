//! Flat `key = value` experiment configuration.

use anyhow::{anyhow, bail, Context, Result};
use rwrs_core::kernel_estimator::{QuadSpec, TestFunction};
use rwrs_core::stable_laws::{SceneryLaw, StableCfParams};
use rwrs_core::walk_paths::WalkModel;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    PsiRatio,
    KernelRecurrent,
    KernelTransient,
    Constants,
    SamplerCheck,
}

impl ExperimentKind {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "psi-ratio" => Self::PsiRatio,
            "kernel-recurrent" => Self::KernelRecurrent,
            "kernel-transient" => Self::KernelTransient,
            "constants" => Self::Constants,
            "sampler-check" => Self::SamplerCheck,
            _ => bail!("unknown experiment kind '{s}' (psi-ratio, kernel-recurrent, kernel-transient, constants, sampler-check)"),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::PsiRatio => "psi-ratio",
            Self::KernelRecurrent => "kernel-recurrent",
            Self::KernelTransient => "kernel-transient",
            Self::Constants => "constants",
            Self::SamplerCheck => "sampler-check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelMethod {
    Direct,
    Fourier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsiMode {
    Value,
    Derivative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Hard,
    Soft,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub walk: WalkModel,
    pub alpha: f64,
    pub beta: f64,
    pub a1: f64,
    pub a2: f64,
    pub scenery: SceneryLaw,
    pub h: TestFunction,
    pub a_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub n: usize,
    pub n_max: Option<usize>,
    pub reps: usize,
    pub seed: u64,
    pub threads: Option<usize>,
    /// Verdict band; its meaning depends on the experiment.
    pub tolerance: f64,
    /// Truncation tolerance for ψ series and quadrature.
    pub trunc_tol: f64,
    pub l_moment_n: usize,
    pub l_moment_reps: usize,
    pub a0: Option<f64>,
    pub a0_n: usize,
    pub a0_reps: usize,
    pub method: KernelMethod,
    pub quad: QuadSpec,
    pub mode: PsiMode,
    pub fd_step: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub slope_tol: Option<f64>,
    pub level_tol: f64,
    pub level_gate: Gate,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "kind", "walk", "alpha", "beta", "a1", "a2", "scenery", "h", "a_grid", "t_grid", "n", "n_max", "reps", "seed",
    "threads", "tolerance", "trunc_tol", "l_moment_n", "l_moment_reps", "a0", "a0_n", "a0_reps", "method", "t_max",
    "panels", "dyadic_levels", "mode", "fd_step", "ratio_min", "ratio_max", "slope_tol", "level_tol", "level_gate",
    "input", "out",
];

struct Fields(BTreeMap<String, (usize, String)>);

impl Fields {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.0.remove(key)
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| anyhow!("line {line}: field `{key}`: cannot parse '{v}': {e}")),
        }
    }

    fn or<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    fn list(&mut self, key: &str) -> Result<Vec<f64>> {
        match self.take(key) {
            None => Ok(Vec::new()),
            Some((line, v)) => v
                .split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| anyhow!("line {line}: field `{key}`: '{x}': {e}")))
                .collect(),
        }
    }

    fn with<T>(&mut self, key: &str, f: impl FnOnce(&str) -> Result<T>) -> Result<Option<T>> {
        self.take(key)
            .map(|(line, v)| f(&v).with_context(|| format!("line {line}: field `{key}`")))
            .transpose()
    }
}

/// `name` or `name:parameter`.
fn split_param(s: &str) -> Result<(&str, Option<f64>)> {
    match s.split_once(':') {
        None => Ok((s, None)),
        Some((k, p)) => Ok((k, Some(p.trim().parse::<f64>().map_err(|e| anyhow!("parameter '{p}': {e}"))?))),
    }
}

fn parse_walk(s: &str) -> Result<WalkModel> {
    let w = match split_param(s)? {
        ("simple", None) => WalkModel::SimpleSymmetric,
        ("lazy", Some(h)) => WalkModel::LazySymmetric { hold_prob: h },
        ("zipf", Some(s)) => WalkModel::LatticeZipf { tail_exponent: s },
        _ => bail!("unknown walk '{s}' (simple, lazy:<hold>, zipf:<s>)"),
    };
    w.validate()?;
    Ok(w)
}

fn parse_h(s: &str) -> Result<TestFunction> {
    Ok(match s {
        "gaussian" => TestFunction::Gaussian,
        "triangle" => TestFunction::Triangle,
        "dirac" => TestFunction::DiracAtZero,
        _ => bail!("unknown test function '{s}' (gaussian, triangle, dirac)"),
    })
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`, got '{line}'", i + 1))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                bail!("line {}: unknown key `{k}`", i + 1);
            }
            if map.insert(k.to_string(), (i + 1, v.to_string())).is_some() {
                bail!("line {}: duplicate key `{k}`", i + 1);
            }
        }
        let mut f = Fields(map);
        let kind = f.with("kind", ExperimentKind::parse)?.ok_or_else(|| anyhow!("missing required field `kind`"))?;
        let walk = f.with("walk", parse_walk)?.unwrap_or(WalkModel::SimpleSymmetric);
        let alpha = walk.alpha();
        if let Some(a) = f.parsed::<f64>("alpha")? {
            if a != alpha {
                bail!("field `alpha`: {a} does not match the walk's index {alpha}");
            }
        }
        let a1 = f.or("a1", 1.0)?;
        let a2 = f.or("a2", 0.0)?;
        let beta_key = f.parsed::<f64>("beta")?;
        let scenery_spec = f.take("scenery");
        let scenery = match scenery_spec.as_ref().map(|(_, s)| split_param(s)).transpose()? {
            None | Some(("stable", None)) => {
                let beta = beta_key.ok_or_else(|| anyhow!("field `beta` is required for a stable scenery"))?;
                SceneryLaw::ExactStable(StableCfParams::new(beta, a1, a2).context("fields `beta`, `a1`, `a2`")?)
            }
            Some(("rademacher", None)) => SceneryLaw::Rademacher,
            Some(("gaussian", v)) => SceneryLaw::Gaussian { variance: v.unwrap_or(1.0) },
            Some(("zipf", Some(s))) => SceneryLaw::LatticeZipf { tail_exponent: s },
            Some(_) => bail!(
                "field `scenery`: unknown law '{}' (stable, rademacher, gaussian[:var], zipf:<s>)",
                scenery_spec.map(|x| x.1).unwrap_or_default()
            ),
        };
        scenery.validate().context("field `scenery`")?;
        let beta = scenery.index();
        if let Some(b) = beta_key {
            if b != beta {
                bail!("field `beta`: {b} does not match the scenery index {beta}");
            }
        }
        let (a1, a2) = match scenery {
            SceneryLaw::ExactStable(p) => (p.a1, p.a2),
            SceneryLaw::Gaussian { variance } => (0.5 * variance, 0.0),
            _ => (a1, a2),
        };
        let h = f.with("h", parse_h)?.unwrap_or(TestFunction::Gaussian);
        let method = f
            .with("method", |s| match s {
                "direct" => Ok(KernelMethod::Direct),
                "fourier" => Ok(KernelMethod::Fourier),
                _ => bail!("expected direct or fourier, got '{s}'"),
            })?
            .unwrap_or(KernelMethod::Direct);
        let mode = f
            .with("mode", |s| match s {
                "value" => Ok(PsiMode::Value),
                "derivative" => Ok(PsiMode::Derivative),
                _ => bail!("expected value or derivative, got '{s}'"),
            })?
            .unwrap_or(PsiMode::Value);
        let level_gate = f
            .with("level_gate", |s| match s {
                "hard" => Ok(Gate::Hard),
                "soft" => Ok(Gate::Soft),
                _ => bail!("expected hard or soft, got '{s}'"),
            })?
            .unwrap_or(Gate::Hard);
        let default_quad = QuadSpec::default();
        let cfg = Self {
            kind,
            walk,
            alpha,
            beta,
            a1,
            a2,
            scenery,
            h,
            a_grid: f.list("a_grid")?,
            t_grid: f.list("t_grid")?,
            n: f.or("n", 1024)?,
            n_max: f.parsed("n_max")?,
            reps: f.or("reps", 10_000)?,
            seed: f.or("seed", 1)?,
            threads: f.parsed("threads")?,
            tolerance: f.or("tolerance", 0.1)?,
            trunc_tol: f.or("trunc_tol", 1e-3)?,
            l_moment_n: f.or("l_moment_n", 1 << 13)?,
            l_moment_reps: f.or("l_moment_reps", 2000)?,
            a0: f.parsed("a0")?,
            a0_n: f.or("a0_n", 2000)?,
            a0_reps: f.or("a0_reps", 20_000)?,
            method,
            quad: QuadSpec {
                t_max: f.or("t_max", default_quad.t_max)?,
                panels: f.or("panels", default_quad.panels)?,
                dyadic_levels: f.or("dyadic_levels", default_quad.dyadic_levels)?,
            },
            mode,
            fd_step: f.or("fd_step", 0.05)?,
            ratio_min: f.or("ratio_min", 0.5)?,
            ratio_max: f.or("ratio_max", 2.0)?,
            slope_tol: f.parsed("slope_tol")?,
            level_tol: f.or("level_tol", 0.3)?,
            level_gate,
            input: f.parsed::<String>("input")?.map(PathBuf::from),
            out: f.parsed::<String>("out")?.map(PathBuf::from),
        };
        debug_assert!(f.0.is_empty(), "unconsumed keys {:?}", f.0.keys());
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            bail!("field `reps` must be positive");
        }
        if self.n == 0 {
            bail!("field `n` must be positive");
        }
        if !(self.fd_step > 0.0 && self.fd_step < 0.5) {
            bail!("field `fd_step` must lie in (0, 0.5), got {}", self.fd_step);
        }
        if !(self.ratio_min > 0.0 && self.ratio_min < self.ratio_max) {
            bail!("fields `ratio_min`, `ratio_max` must satisfy 0 < min < max");
        }
        let needs = |grid: &Vec<f64>, key: &str| {
            if grid.is_empty() {
                Err(anyhow!("field `{key}` is required for {}", self.kind.name()))
            } else {
                Ok(())
            }
        };
        match self.kind {
            ExperimentKind::PsiRatio | ExperimentKind::SamplerCheck => needs(&self.t_grid, "t_grid")?,
            ExperimentKind::KernelRecurrent => {
                needs(&self.a_grid, "a_grid")?;
                if self.beta < 1.0 {
                    bail!("transient regime: use kernel-transient (β = {} < 1)", self.beta);
                }
            }
            ExperimentKind::KernelTransient => {
                needs(&self.a_grid, "a_grid")?;
                if self.beta >= 1.0 {
                    bail!("recurrent regime: use kernel-recurrent (β = {} ≥ 1)", self.beta);
                }
            }
            ExperimentKind::Constants => {}
        }
        Ok(())
    }
}
