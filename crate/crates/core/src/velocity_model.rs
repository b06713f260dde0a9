//! Analytic angular-velocity model for a fixed learning rate,
//!
//! ```text
//! v_α(t) = (π/2)(1 + εα)(1 - 1/(γα(t + 1/(γα))))
//! ```
//!
//! and the idealized scheduler that drops the rate once `v'_α` falls to a
//! threshold `τ_i = min(τ0, γα̂_i/2)`. Angles here are radians.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::unified_momentum::{DecayLaw, PiecewiseSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityModelParams {
    /// Asymptote factor.
    pub epsilon: f64,
    /// Curvature factor.
    pub gamma: f64,
    /// Upper bound on admissible learning rates.
    pub alpha_max: f64,
}

impl VelocityModelParams {
    pub fn new(epsilon: f64, gamma: f64, alpha_max: f64) -> Result<Self> {
        if !(alpha_max > 0.0 && alpha_max.is_finite()) {
            return Err(LabError::Config("alpha_max must be > 0".into()));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(LabError::Config("gamma must be > 0".into()));
        }
        // ε = 0 is admitted: it pins every asymptote to π/2.
        if !(epsilon >= 0.0 && epsilon < 1.0 / (3.0 * alpha_max)) {
            return Err(LabError::Config(format!(
                "epsilon {epsilon} outside [0, 1/(3 alpha_max))"
            )));
        }
        Ok(Self {
            epsilon,
            gamma,
            alpha_max,
        })
    }

    fn check(&self, alpha: f64, t: f64) -> Result<()> {
        if !(alpha > 0.0 && alpha <= self.alpha_max) {
            return Err(LabError::Argument(format!(
                "learning rate {alpha} outside (0, {}]",
                self.alpha_max
            )));
        }
        if !(t >= 0.0) {
            return Err(LabError::Argument(format!("time {t} must be >= 0")));
        }
        Ok(())
    }

    /// `lim_{t→∞} v_α(t) = (π/2)(1 + εα)`.
    pub fn asymptote(&self, alpha: f64) -> f64 {
        0.5 * PI * (1.0 + self.epsilon * alpha)
    }

    /// Lower drop-gap constant `(√π - 1)/γ`.
    pub fn kappa1(&self) -> f64 {
        (PI.sqrt() - 1.0) / self.gamma
    }

    /// Upper drop-gap constant `(1/γ)·√(2π/(3τ0))`.
    pub fn kappa2(&self, tau0: f64) -> f64 {
        (2.0 * PI / (3.0 * tau0)).sqrt() / self.gamma
    }
}

/// Model angular velocity after `t` iterations at rate `alpha`.
pub fn v(params: &VelocityModelParams, alpha: f64, t: f64) -> Result<f64> {
    params.check(alpha, t)?;
    // 1 - 1/(γα(t + 1/γα)) rewritten so that t = 0 gives exactly 0.
    let g = params.gamma * alpha * t;
    Ok(params.asymptote(alpha) * g / (g + 1.0))
}

/// `v'_α(t) = π(1 + εα) / (2γα (t + 1/(γα))²)`.
pub fn v_prime(params: &VelocityModelParams, alpha: f64, t: f64) -> Result<f64> {
    params.check(alpha, t)?;
    let ga = params.gamma * alpha;
    let shifted = t + 1.0 / ga;
    Ok(PI * (1.0 + params.epsilon * alpha) / (2.0 * ga * shifted * shifted))
}

/// Derivative threshold `τ_i = min(τ0, γα̂_i/2)`.
pub fn drop_threshold(params: &VelocityModelParams, alpha: f64, tau0: f64) -> f64 {
    tau0.min(params.gamma * alpha / 2.0)
}

fn check_tau0(tau0: f64) -> Result<()> {
    if tau0 > 0.0 && tau0 < 2.0 {
        Ok(())
    } else {
        Err(LabError::Argument(format!("tau0 {tau0} outside (0, 2)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DropGap {
    /// Root of `v'_α(k) = τ`.
    pub continuous: f64,
    /// `max(1, ceil(continuous))`, the gap of the discrete loop.
    pub integer: u64,
    pub tau: f64,
}

/// Closed-form iterations spent at rate `alpha` before the derivative of the
/// model velocity reaches the drop threshold:
/// `k = (γα)^{-1/2} [√(π(1+εα)/(2τ)) - (γα)^{-1/2}]`.
pub fn drop_gap(params: &VelocityModelParams, alpha: f64, tau0: f64) -> Result<DropGap> {
    params.check(alpha, 0.0)?;
    check_tau0(tau0)?;
    let tau = drop_threshold(params, alpha, tau0);
    let inv_sqrt = (params.gamma * alpha).sqrt().recip();
    let continuous =
        inv_sqrt * ((PI * (1.0 + params.epsilon * alpha) / (2.0 * tau)).sqrt() - inv_sqrt);
    Ok(DropGap {
        continuous,
        integer: (continuous.ceil() as u64).max(1),
        tau,
    })
}

/// Configuration of the idealized (derivative-threshold) scheduler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxDropConfig {
    pub tau0: f64,
    /// Phase learning rates `α̂_0, ..., α̂_{n-1}`.
    pub alphas: Vec<f64>,
}

impl ApproxDropConfig {
    pub fn new(tau0: f64, alphas: Vec<f64>) -> Result<Self> {
        check_tau0(tau0)?;
        if alphas.is_empty() {
            return Err(LabError::Argument("at least one phase required".into()));
        }
        if alphas.iter().any(|&a| !(a > 0.0)) {
            return Err(LabError::Config("phase rates must be positive".into()));
        }
        if alphas.windows(2).any(|w| w[1] > w[0]) {
            return Err(LabError::Config("phase rates must be non-increasing".into()));
        }
        Ok(Self { tau0, alphas })
    }

    pub fn from_law(tau0: f64, law: DecayLaw, n: usize) -> Result<Self> {
        Self::new(tau0, law.rates(n))
    }

    pub fn phases(&self) -> usize {
        self.alphas.len()
    }
}

/// Partition produced by the idealized scheduler.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhasePlan {
    pub alphas: Vec<f64>,
    /// Integer gaps observed in the discrete loop.
    pub gaps: Vec<u64>,
    /// Closed-form gaps before rounding.
    pub continuous_gaps: Vec<f64>,
    /// `t_0 = 0, ..., t_n = T`.
    pub boundaries: Vec<u64>,
    pub total: u64,
    /// `(√π - 1)/γ`.
    pub kappa1: f64,
    /// `(1/γ)√(2π/(3τ0))`.
    pub kappa2: f64,
    /// `min_i k_i α̂_i` over the integer gaps.
    pub measured_kappa1: f64,
    /// `max_i k_i α̂_i` over the integer gaps.
    pub measured_kappa2: f64,
}

impl PhasePlan {
    pub fn continuous_total(&self) -> f64 {
        self.continuous_gaps.iter().sum()
    }

    pub fn to_schedule(&self) -> Result<PiecewiseSchedule> {
        PiecewiseSchedule::new(self.alphas.clone(), self.gaps.clone())
    }
}

/// Steps the discrete loop: at every iteration `t` evaluate `v'` at the
/// phase-local time `t - t_i` and start a new phase as soon as it is at or
/// below `τ_i`.
pub fn simulate_algorithm2(params: &VelocityModelParams, cfg: &ApproxDropConfig) -> Result<PhasePlan> {
    let n = cfg.phases();
    let mut boundaries = vec![0u64];
    let mut continuous_gaps = Vec::with_capacity(n);
    let mut phase = 0usize;
    let mut phase_start = 0u64;
    let mut t = 0u64;
    while phase < n {
        let alpha = cfg.alphas[phase];
        let tau = drop_threshold(params, alpha, cfg.tau0);
        if v_prime(params, alpha, (t - phase_start) as f64)? <= tau {
            continuous_gaps.push(drop_gap(params, alpha, cfg.tau0)?.continuous);
            phase += 1;
            phase_start = t;
            boundaries.push(t);
        }
        t += 1;
    }
    let gaps: Vec<u64> = boundaries.windows(2).map(|w| w[1] - w[0]).collect();
    let products = gaps.iter().zip(&cfg.alphas).map(|(&k, &a)| k as f64 * a);
    let (measured_kappa1, measured_kappa2) = products.fold(
        (f64::INFINITY, f64::NEG_INFINITY),
        |(lo, hi), p| (lo.min(p), hi.max(p)),
    );
    Ok(PhasePlan {
        alphas: cfg.alphas.clone(),
        total: *boundaries.last().unwrap(),
        gaps,
        continuous_gaps,
        boundaries,
        kappa1: params.kappa1(),
        kappa2: params.kappa2(cfg.tau0),
        measured_kappa1,
        measured_kappa2,
    })
}

/// Total-iteration sandwich `κ1 n(n+3)/2 ≤ T ≤ κ2 n(n+3)/2` for the
/// `(i+2)^{-1}` decay law. The sums are exact for every `n ≥ 1`.
pub fn lemma1_bounds(kappa1: f64, kappa2: f64, n: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(LabError::Argument("n must be >= 1".into()));
    }
    let m = (n * (n + 3)) as f64 / 2.0;
    Ok((kappa1 * m, kappa2 * m))
}
