//! Noisy quadratic model: `L(x) = ½ (x - c)ᵀ A (x - c)` with `c ~ N(0, Σ)`,
//! diagonal `A` and `Σ`, optimized by plain gradient descent.
//!
//! Besides the simulator this module evaluates the closed-form steady state
//! of the descent chain (limiting step inner product, squared step norm,
//! their ratio and the per-coordinate variance) and a Monte Carlo estimator
//! of the same quantities.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::angular_velocity::{cosine_between, VelocityTracker};
use crate::error::{check_dim, LabError, Result};
use crate::params::{dot, seeded_rng, LabRng, ParamVector};
use crate::unified_momentum::GradientOracle;

/// Diagonal noisy quadratic model with a fixed learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NqmConfig {
    /// Diagonal of the curvature matrix `A`.
    pub a: Vec<f64>,
    /// Diagonal of the noise covariance `Σ`.
    pub sigma2: Vec<f64>,
    pub alpha: f64,
}

impl NqmConfig {
    pub fn new(a: Vec<f64>, sigma2: Vec<f64>, alpha: f64) -> Result<Self> {
        let cfg = Self { a, sigma2, alpha };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `a_i = i/10` for `i = 1..=200`, unit noise.
    pub fn standard(alpha: f64) -> Result<Self> {
        Self::linear(200, 0.1, 1.0, alpha)
    }

    /// `a_i = a_scale · i` for `i = 1..=dim` with a common noise variance.
    pub fn linear(dim: usize, a_scale: f64, sigma2: f64, alpha: f64) -> Result<Self> {
        let a = (1..=dim).map(|i| a_scale * i as f64).collect();
        Self::new(a, vec![sigma2; dim], alpha)
    }

    /// Random contraction-valid model: `α ∈ [0.05, 0.5)`, every `α a_i` in
    /// `[0.3, 0.95)` and `σ_i² ∈ [0.5, 2)`.
    pub fn random_contraction(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(LabError::Argument("dimension must be >= 1".into()));
        }
        let mut rng = seeded_rng(seed);
        let alpha = rng.random_range(0.05..0.5);
        let a = (0..dim).map(|_| rng.random_range(0.3..0.95) / alpha).collect();
        let sigma2 = (0..dim).map(|_| rng.random_range(0.5..2.0)).collect();
        Self::new(a, sigma2, alpha)
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn max_curvature(&self) -> f64 {
        self.a.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_curvature(&self) -> f64 {
        self.a.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `α·max a < 1`: every coordinate map `x ↦ (1 - α a_i) x` is a
    /// non-negative contraction. The steady-state angle bracket is only
    /// guaranteed in this regime.
    pub fn is_contraction(&self) -> bool {
        self.alpha * self.max_curvature() < 1.0
    }

    /// Checks the model itself plus stability of descent, `0 < α·max a < 2`.
    pub fn validate(&self) -> Result<()> {
        if self.a.is_empty() {
            return Err(LabError::Config("curvature vector is empty".into()));
        }
        check_dim(self.a.len(), self.sigma2.len())?;
        if self.a.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(LabError::Config("curvatures must be positive".into()));
        }
        if self.sigma2.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(LabError::Config("noise variances must be >= 0".into()));
        }
        self.validate_rate(self.alpha)
    }

    pub(crate) fn validate_rate(&self, alpha: f64) -> Result<()> {
        let am = alpha * self.max_curvature();
        if !(alpha > 0.0 && am < 2.0) {
            return Err(LabError::Config(format!(
                "learning rate {alpha} unstable: alpha * max a = {am} must lie in (0, 2)"
            )));
        }
        Ok(())
    }

    /// Slowest-mode burn-in: `10 / (α · min a)` iterations, rounded up.
    pub fn default_burn_in(&self) -> usize {
        (10.0 / (self.alpha * self.min_curvature())).ceil() as usize
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let mut cfg = self.clone();
        cfg.alpha = alpha;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Noise-free loss `½ Σ a_i x_i²` (the stochastic loss minus its noise floor).
pub fn nqm_loss(cfg: &NqmConfig, x: &[f64]) -> f64 {
    0.5 * cfg.a.iter().zip(x).map(|(a, x)| a * x * x).sum::<f64>()
}

/// Iterate of the descent chain with its own random stream.
#[derive(Debug, Clone)]
pub struct NqmState {
    pub x: ParamVector,
    pub t: u64,
    rng: LabRng,
}

impl NqmState {
    pub fn new(cfg: &NqmConfig, x0: ParamVector, seed: u64) -> Result<Self> {
        check_dim(cfg.dim(), x0.dim())?;
        Ok(Self {
            x: x0,
            t: 0,
            rng: seeded_rng(seed),
        })
    }

    pub fn at_origin(cfg: &NqmConfig, seed: u64) -> Self {
        Self {
            x: ParamVector::zeros(cfg.dim()),
            t: 0,
            rng: seeded_rng(seed),
        }
    }

    /// One descent step at `cfg.alpha`; returns the step `x_{t+1} - x_t`.
    pub fn step(&mut self, cfg: &NqmConfig) -> ParamVector {
        self.step_with_rate(cfg, cfg.alpha)
    }

    /// One descent step `x ← x - α A (x - c)`. Exactly `d` normals are drawn
    /// per call, so two chains sharing a seed see the same noise sequence
    /// whatever their learning rates.
    pub fn step_with_rate(&mut self, cfg: &NqmConfig, alpha: f64) -> ParamVector {
        let mut step = ParamVector::zeros(cfg.dim());
        for i in 0..cfg.dim() {
            let z: f64 = self.rng.sample(StandardNormal);
            let c = cfg.sigma2[i].sqrt() * z;
            let s = -alpha * cfg.a[i] * (self.x[i] - c);
            self.x[i] += s;
            step[i] = s;
        }
        self.t += 1;
        step
    }
}

/// Advances the chain one iteration.
pub fn nqm_step(cfg: &NqmConfig, state: &mut NqmState) -> ParamVector {
    state.step(cfg)
}

/// Closed-form steady state of the descent chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NqmOracle {
    /// Limit of `E⟨s_t, s_{t+1}⟩`.
    pub i_star: f64,
    /// Limit of `E‖s_t‖²`.
    pub n_star: f64,
    /// `i_star / n_star`, the approximate limiting cosine.
    pub c_star: f64,
    /// Limit of `E[x_i²]` per coordinate.
    pub v_star: Vec<f64>,
    pub angle_star: f64,
}

pub fn nqm_oracle(cfg: &NqmConfig) -> Result<NqmOracle> {
    cfg.validate()?;
    if cfg.sigma2.iter().all(|&s| s == 0.0) {
        return Err(LabError::DegenerateNoise);
    }
    let alpha = cfg.alpha;
    let mut cube = 0.0;
    let mut square = 0.0;
    let mut v_star = Vec::with_capacity(cfg.dim());
    for (&a, &s2) in cfg.a.iter().zip(&cfg.sigma2) {
        let denom = 2.0 - alpha * a;
        cube += a * a * a * s2 / denom;
        square += a * a * s2 / denom;
        v_star.push(alpha * a * s2 / denom);
    }
    let i_star = -alpha.powi(3) * cube;
    let n_star = 2.0 * alpha * alpha * square;
    let c_star = i_star / n_star;
    Ok(NqmOracle {
        i_star,
        n_star,
        c_star,
        v_star,
        angle_star: c_star.clamp(-1.0, 1.0).acos().to_degrees(),
    })
}

/// Monte Carlo tail averages of the descent chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalLimits {
    /// Mean of `⟨s_t, s_{t+1}⟩`.
    pub i_hat: f64,
    /// Mean of `‖s_t‖²`.
    pub n_hat: f64,
    /// `i_hat / n_hat`, the estimator matching the oracle's cosine.
    pub c_hat: f64,
    /// Direct mean of `cos∠(s_t, s_{t+1})`.
    pub cos_mean: f64,
    /// Mean of `x_i²` per coordinate over the sampled iterates.
    pub second_moment: Vec<f64>,
}

/// Runs `burn_in` steps from the origin, then averages over `samples`
/// consecutive step pairs.
pub fn nqm_empirical_limits(
    cfg: &NqmConfig,
    burn_in: usize,
    samples: usize,
    seed: u64,
) -> Result<EmpiricalLimits> {
    nqm_empirical_limits_from(cfg, ParamVector::zeros(cfg.dim()), burn_in, samples, seed)
}

pub fn nqm_empirical_limits_from(
    cfg: &NqmConfig,
    x0: ParamVector,
    burn_in: usize,
    samples: usize,
    seed: u64,
) -> Result<EmpiricalLimits> {
    cfg.validate()?;
    if samples == 0 {
        return Err(LabError::Argument("samples must be >= 1".into()));
    }
    let mut state = NqmState::new(cfg, x0, seed)?;
    for _ in 0..burn_in {
        state.step(cfg);
    }
    let d = cfg.dim();
    let mut inner = 0.0;
    let mut sq = 0.0;
    let mut cos = 0.0;
    let mut second = vec![0.0; d];
    let mut prev = state.step(cfg);
    for _ in 0..samples {
        for (m, x) in second.iter_mut().zip(state.x.iter()) {
            *m += x * x;
        }
        let next = state.step(cfg);
        inner += dot(&prev, &next);
        sq += dot(&prev, &prev);
        cos += cosine_between(&prev, &next)?;
        prev = next;
    }
    let n = samples as f64;
    let i_hat = inner / n;
    let n_hat = sq / n;
    Ok(EmpiricalLimits {
        i_hat,
        n_hat,
        c_hat: i_hat / n_hat,
        cos_mean: cos / n,
        second_moment: second.into_iter().map(|m| m / n).collect(),
    })
}

/// One row of a descent curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    /// Iterations completed.
    pub t: u64,
    /// Noise-free loss at the iterate.
    pub loss: f64,
    /// Windowed mean angle between consecutive steps, degrees; absent until
    /// two steps exist.
    pub omega: Option<f64>,
    /// Rate used for the step that produced this iterate.
    pub alpha: f64,
}

/// Fixed-rate descent curve with a `window`-iteration velocity average.
pub fn simulate_curve(
    cfg: &NqmConfig,
    x0: ParamVector,
    iterations: u64,
    window: usize,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    cfg.validate()?;
    let mut state = NqmState::new(cfg, x0, seed)?;
    let mut tracker = VelocityTracker::new(window)?;
    let mut curve = Vec::with_capacity(iterations as usize);
    for t in 1..=iterations {
        let step = state.step(cfg);
        tracker.observe_step(step)?;
        curve.push(CurvePoint {
            t,
            loss: nqm_loss(cfg, &state.x),
            omega: tracker.window_average().ok().map(|a| a.value()),
            alpha: cfg.alpha,
        });
    }
    Ok(curve)
}

/// Gradient oracle view of the model: `∇ = A (x - c)` with fresh `c` per call.
#[derive(Debug, Clone)]
pub struct NqmProblem {
    pub cfg: NqmConfig,
}

impl GradientOracle for NqmProblem {
    fn dim(&self) -> usize {
        self.cfg.dim()
    }

    fn gradient(&mut self, x: &[f64], rng: &mut LabRng, grad: &mut [f64]) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        check_dim(self.dim(), grad.len())?;
        for i in 0..self.dim() {
            let z: f64 = rng.sample(StandardNormal);
            grad[i] = self.cfg.a[i] * (x[i] - self.cfg.sigma2[i].sqrt() * z);
        }
        Ok(())
    }

    fn loss(&self, x: &[f64]) -> f64 {
        nqm_loss(&self.cfg, x)
    }
}
