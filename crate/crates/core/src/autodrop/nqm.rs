//! Iteration-level drop rule on the noisy quadratic model.
//!
//! The angle between consecutive descent steps is averaged over a sliding
//! window; whenever that average moves by less than `delta_threshold`
//! degrees between two consecutive iterations the rate is multiplied by
//! `rho`, down to `alpha_min`. There is no drop delay and no parameter
//! averaging in this variant. After a drop the window is emptied so the
//! next test compares averages taken entirely at the new rate.

use serde::{Deserialize, Serialize};

use crate::angular_velocity::VelocityTracker;
use crate::error::{check_dim, LabError, Result};
use crate::noisy_quadratic::{nqm_loss, CurvePoint, NqmConfig, NqmState};
use crate::params::ParamVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NqmAutoDropConfig {
    pub alpha0: f64,
    pub alpha_min: f64,
    pub rho: f64,
    /// Iterations per velocity average.
    pub window: usize,
    /// Saturation test on the change of the windowed average, degrees.
    pub delta_threshold: f64,
}

impl Default for NqmAutoDropConfig {
    fn default() -> Self {
        Self {
            alpha0: 0.06,
            alpha_min: 0.001,
            rho: 0.5,
            window: 20,
            delta_threshold: 0.01,
        }
    }
}

impl NqmAutoDropConfig {
    pub fn validate(&self, model: &NqmConfig) -> Result<()> {
        if !(self.alpha_min > 0.0 && self.alpha_min <= self.alpha0) {
            return Err(LabError::Config("need 0 < alpha_min <= alpha0".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(LabError::Config("rho must lie in (0, 1)".into()));
        }
        if self.window == 0 {
            return Err(LabError::Config("window must be >= 1".into()));
        }
        if !(self.delta_threshold >= 0.0) {
            return Err(LabError::Config("delta_threshold must be >= 0".into()));
        }
        model.validate_rate(self.alpha0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NqmAutoDropRun {
    pub curve: Vec<CurvePoint>,
    /// Iterations after which the rate was lowered.
    pub drop_iterations: Vec<u64>,
}

impl NqmAutoDropRun {
    pub fn final_alpha(&self) -> f64 {
        self.curve.last().map_or(f64::NAN, |p| p.alpha)
    }
}

/// Runs `iterations` descent steps on `model` (its own `alpha` is ignored),
/// lowering the rate on velocity saturation.
pub fn autodrop_nqm_experiment(
    model: &NqmConfig,
    cfg: &NqmAutoDropConfig,
    x0: ParamVector,
    iterations: u64,
    seed: u64,
) -> Result<NqmAutoDropRun> {
    cfg.validate(model)?;
    check_dim(model.dim(), x0.dim())?;
    let mut state = NqmState::new(model, x0, seed)?;
    let mut tracker = VelocityTracker::new(cfg.window)?;
    let mut alpha = cfg.alpha0;
    let mut prev_avg: Option<f64> = None;
    let mut curve = Vec::with_capacity(iterations as usize);
    let mut drop_iterations = Vec::new();
    for t in 0..iterations {
        let step = state.step_with_rate(model, alpha);
        tracker.observe_step(step)?;
        let omega = tracker.window_average().ok().map(|a| a.value());
        curve.push(CurvePoint {
            t: t + 1,
            loss: nqm_loss(model, &state.x),
            omega,
            alpha,
        });
        if !tracker.is_full() || alpha <= cfg.alpha_min {
            continue;
        }
        let avg = omega.expect("full window has an average");
        match prev_avg {
            Some(before) if (avg - before).abs() < cfg.delta_threshold => {
                alpha = cfg.alpha_min.max(cfg.rho * alpha);
                drop_iterations.push(t + 1);
                tracker.clear_window();
                prev_avg = None;
            }
            _ => prev_avg = Some(avg),
        }
    }
    Ok(NqmAutoDropRun {
        curve,
        drop_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_single_coordinate_drops_every_check() {
        let model = NqmConfig::new(vec![1.0], vec![0.0], 0.1).unwrap();
        let cfg = NqmAutoDropConfig {
            alpha0: 0.5,
            alpha_min: 0.05,
            window: 5,
            ..Default::default()
        };
        let run = autodrop_nqm_experiment(&model, &cfg, vec![1.0].into(), 200, 0).unwrap();
        assert!(run.curve.iter().filter_map(|p| p.omega).all(|w| w == 0.0));
        // 0.5 → 0.25 → 0.125 → 0.0625 → 0.05
        assert_eq!(run.drop_iterations.len(), 4);
        // first check needs the window full (6 steps) plus one more average
        assert_eq!(run.drop_iterations[0], 7);
        assert_eq!(run.final_alpha(), 0.05);
    }

    #[test]
    fn rejects_bad_config() {
        let model = NqmConfig::standard(0.01).unwrap();
        let cfg = NqmAutoDropConfig {
            alpha0: 0.2,
            ..Default::default()
        };
        assert!(autodrop_nqm_experiment(&model, &cfg, ParamVector::zeros(200), 10, 0).is_err());
        let cfg = NqmAutoDropConfig {
            window: 0,
            ..Default::default()
        };
        assert!(autodrop_nqm_experiment(&model, &cfg, ParamVector::zeros(200), 10, 0).is_err());
    }
}
