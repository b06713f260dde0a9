//! Automatic learning-rate drop driven by angular-velocity saturation.
//!
//! Once per epoch the scheduler measures the angle between the last two
//! epoch steps. When it changes by less than the threshold `θ` between two
//! epochs the scheduler keeps the rate for `n_d` more epochs, accumulating a
//! linearly weighted average of the epoch-end parameters, then replaces the
//! parameters with that average, multiplies the rate by `ρ` (floored at
//! `alpha_min`) and divides `θ` by `ρ` (capped at `theta_max`).
//!
//! The weights `2k/((n_d+1) n_d)` are triangular, not exponential, even
//! though the averaging step is often described as an exponential average.

pub mod nqm;

use serde::{Deserialize, Serialize};

use crate::angular_velocity::VelocityTracker;
use crate::error::{check_dim, LabError, Result};
use crate::params::ParamVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoDropConfig {
    pub alpha0: f64,
    pub alpha_min: f64,
    /// Initial velocity-change threshold, degrees.
    pub theta0: f64,
    /// Threshold ceiling, degrees.
    pub theta_max: f64,
    pub rho: f64,
    /// Drop delay in epochs.
    pub n_d: usize,
    /// Extra epochs after a completed drop during which detection stays
    /// disarmed. Not part of the original scheme; 0 disables it.
    #[serde(default)]
    pub cooldown_epochs: usize,
}

impl AutoDropConfig {
    pub const RECOMMENDED_ALPHA_MIN: f64 = 1e-4;
    pub const RECOMMENDED_THETA0: f64 = 0.01;
    pub const RECOMMENDED_THETA_MAX: f64 = 1.0;
    pub const RECOMMENDED_N_D: usize = 20;

    /// Recommended defaults; `alpha0` and `rho` come from the baseline
    /// schedule being replaced.
    pub fn recommended(alpha0: f64, rho: f64) -> Result<Self> {
        let cfg = Self {
            alpha0,
            alpha_min: Self::RECOMMENDED_ALPHA_MIN,
            theta0: Self::RECOMMENDED_THETA0,
            theta_max: Self::RECOMMENDED_THETA_MAX,
            rho,
            n_d: Self::RECOMMENDED_N_D,
            cooldown_epochs: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_min > 0.0 && self.alpha_min <= self.alpha0 && self.alpha0.is_finite()) {
            return Err(LabError::Config("need 0 < alpha_min <= alpha0".into()));
        }
        if !(self.theta0 > 0.0 && self.theta0 <= self.theta_max && self.theta_max.is_finite()) {
            return Err(LabError::Config("need 0 < theta0 <= theta_max".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(LabError::Config("drop factor rho must lie in (0, 1)".into()));
        }
        if self.n_d == 0 {
            return Err(LabError::Config("drop delay n_d must be >= 1".into()));
        }
        Ok(())
    }
}

/// Outcome of one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochDecision {
    pub alpha_for_next_epoch: f64,
    /// Averaged parameters to install before the next epoch; present
    /// exactly when the averaging window closed this epoch.
    pub params_override: Option<ParamVector>,
    pub dropped: bool,
    /// Angle between this epoch's step and the previous one, degrees.
    pub omega: Option<f64>,
}

/// Flat record of every scheduler field, for checkpointing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoDropSnapshot {
    pub alpha: f64,
    pub theta: f64,
    pub t: u64,
    pub omega: Option<f64>,
    pub prev_omega: Option<f64>,
    pub drop_pending: bool,
    pub k: usize,
    pub z: Vec<f64>,
    pub last_params: Vec<f64>,
    pub prev_step: Option<Vec<f64>>,
    pub last_drop_epoch: Option<u64>,
    pub drops: u64,
}

/// Mutable scheduler state.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoDrop {
    cfg: AutoDropConfig,
    alpha: f64,
    theta: f64,
    /// Completed epochs.
    t: u64,
    omega: Option<f64>,
    prev_omega: Option<f64>,
    drop_pending: bool,
    z: ParamVector,
    k: usize,
    /// Parameters at the start of the current epoch.
    last_params: ParamVector,
    tracker: VelocityTracker,
    last_drop_epoch: Option<u64>,
    drops: u64,
}

impl AutoDrop {
    pub fn new(cfg: AutoDropConfig, x0: ParamVector) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            alpha: cfg.alpha0,
            theta: cfg.theta0,
            t: 0,
            omega: None,
            prev_omega: None,
            drop_pending: false,
            z: ParamVector::zeros(x0.dim()),
            k: 0,
            last_params: x0,
            tracker: VelocityTracker::new(1)?,
            last_drop_epoch: None,
            drops: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &AutoDropConfig {
        &self.cfg
    }

    /// Learning rate for the upcoming epoch.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn epoch(&self) -> u64 {
        self.t
    }

    pub fn drop_pending(&self) -> bool {
        self.drop_pending
    }

    pub fn averaging_count(&self) -> usize {
        self.k
    }

    pub fn drops(&self) -> u64 {
        self.drops
    }

    fn armed(&self) -> bool {
        match self.last_drop_epoch {
            Some(e) if self.cfg.cooldown_epochs > 0 => {
                self.t > e + self.cfg.cooldown_epochs as u64
            }
            _ => true,
        }
    }

    /// Feeds the parameters reached at the end of an epoch.
    pub fn observe(&mut self, epoch_end_params: &ParamVector) -> Result<EpochDecision> {
        check_dim(self.last_params.dim(), epoch_end_params.dim())?;
        self.t += 1;
        let omega = self
            .tracker
            .observe(epoch_end_params, &self.last_params)?
            .map(|a| a.value());
        self.prev_omega = self.omega;
        self.omega = omega;

        // Two angles exist from the third epoch on.
        if let (Some(now), Some(before)) = (self.omega, self.prev_omega) {
            if self.t > 2 && !self.drop_pending && self.armed() && (now - before).abs() < self.theta
            {
                self.drop_pending = true;
                self.z.fill(0.0);
                self.k = 0;
            }
        }

        let mut decision = EpochDecision {
            alpha_for_next_epoch: self.alpha,
            params_override: None,
            dropped: false,
            omega,
        };
        let mut next_start = epoch_end_params.clone();
        if self.drop_pending {
            self.k += 1;
            self.z.axpy(self.k as f64, epoch_end_params)?;
            if self.k >= self.cfg.n_d {
                let n_d = self.cfg.n_d as f64;
                let scale = 2.0 / ((n_d + 1.0) * n_d);
                let averaged: ParamVector = self.z.iter().map(|v| v * scale).collect();
                self.alpha = self.cfg.alpha_min.max(self.cfg.rho * self.alpha);
                self.theta = self.cfg.theta_max.min(self.theta / self.cfg.rho);
                self.drop_pending = false;
                self.k = 0;
                self.z.fill(0.0);
                self.last_drop_epoch = Some(self.t);
                self.drops += 1;
                next_start = averaged.clone();
                decision.params_override = Some(averaged);
                decision.dropped = true;
                decision.alpha_for_next_epoch = self.alpha;
            }
        }
        self.last_params = next_start;
        Ok(decision)
    }

    pub fn snapshot(&self) -> AutoDropSnapshot {
        AutoDropSnapshot {
            alpha: self.alpha,
            theta: self.theta,
            t: self.t,
            omega: self.omega,
            prev_omega: self.prev_omega,
            drop_pending: self.drop_pending,
            k: self.k,
            z: self.z.to_vec(),
            last_params: self.last_params.to_vec(),
            prev_step: self.tracker.previous_step().map(|s| s.to_vec()),
            last_drop_epoch: self.last_drop_epoch,
            drops: self.drops,
        }
    }

    pub fn restore(cfg: AutoDropConfig, snap: AutoDropSnapshot) -> Result<Self> {
        cfg.validate()?;
        let dim = snap.last_params.len();
        check_dim(dim, snap.z.len())?;
        if !(cfg.alpha_min..=cfg.alpha0).contains(&snap.alpha)
            || !(cfg.theta0..=cfg.theta_max).contains(&snap.theta)
            || snap.k > cfg.n_d
            || (!snap.drop_pending && snap.k != 0)
        {
            return Err(LabError::Config("snapshot violates scheduler invariants".into()));
        }
        let mut tracker = VelocityTracker::new(1)?;
        if let Some(step) = snap.prev_step {
            check_dim(dim, step.len())?;
            tracker.observe_step(step.into())?;
        }
        Ok(Self {
            cfg,
            alpha: snap.alpha,
            theta: snap.theta,
            t: snap.t,
            omega: snap.omega,
            prev_omega: snap.prev_omega,
            drop_pending: snap.drop_pending,
            z: snap.z.into(),
            k: snap.k,
            last_params: snap.last_params.into(),
            tracker,
            last_drop_epoch: snap.last_drop_epoch,
            drops: snap.drops,
        })
    }
}

/// Triangular weights `2k/((n_d+1) n_d)`, `k = 1..=n_d`.
pub fn triangular_weights(n_d: usize) -> Vec<f64> {
    let n = n_d as f64;
    (1..=n_d).map(|k| 2.0 * k as f64 / ((n + 1.0) * n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n_d: usize) -> AutoDropConfig {
        AutoDropConfig {
            alpha0: 0.1,
            alpha_min: 0.001,
            theta0: 0.01,
            theta_max: 1.0,
            rho: 0.5,
            n_d,
            cooldown_epochs: 0,
        }
    }

    /// Epoch-end snapshots moving along a straight line: every ω is 0°.
    fn line(t: usize) -> ParamVector {
        vec![t as f64, 2.0 * t as f64].into()
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(3);
        assert!(c.validate().is_ok());
        c.alpha_min = 0.2;
        assert!(c.validate().is_err());
        let mut c = cfg(0);
        assert!(c.validate().is_err());
        c = cfg(3);
        c.rho = 1.0;
        assert!(c.validate().is_err());
        c = cfg(3);
        c.theta0 = 2.0;
        assert!(c.validate().is_err());
        let r = AutoDropConfig::recommended(0.1, 0.1).unwrap();
        assert_eq!((r.alpha_min, r.theta0, r.theta_max, r.n_d), (1e-4, 0.01, 1.0, 20));
    }

    #[test]
    fn triangular_average_of_window() {
        // Straight-line snapshots: detection fires at the third epoch, whose
        // end point is x = 1, so the window sees x = 1, 2, 3.
        let mut ad = AutoDrop::new(cfg(3), vec![-2.0].into()).unwrap();
        let mut out = None;
        for x in [-1.0, 0.0, 1.0, 2.0, 3.0] {
            let d = ad.observe(&vec![x].into()).unwrap();
            if d.dropped {
                out = d.params_override;
            }
        }
        // z = 1·1 + 2·2 + 3·3 = 14, override = 2·14/(4·3)
        assert!((out.unwrap()[0] - 7.0 / 3.0).abs() < 1e-15);

        let w: f64 = [1.0, 2.0, 3.0]
            .iter()
            .zip(triangular_weights(3))
            .map(|(x, w)| x * w)
            .sum();
        assert!((w - 7.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn detection_needs_three_epochs() {
        let mut ad = AutoDrop::new(cfg(2), line(0)).unwrap();
        let d1 = ad.observe(&line(1)).unwrap();
        assert_eq!(d1.omega, None);
        let d2 = ad.observe(&line(2)).unwrap();
        assert!(d2.omega.unwrap() < 1e-6);
        assert!(!ad.drop_pending());
        ad.observe(&line(3)).unwrap();
        assert!(ad.drop_pending());
        assert_eq!(ad.averaging_count(), 1);
    }

    #[test]
    fn drop_completes_after_delay() {
        let n_d = 4;
        let mut ad = AutoDrop::new(cfg(n_d), line(0)).unwrap();
        let mut dropped_at = None;
        for e in 1..=20 {
            let d = ad.observe(&line(e)).unwrap();
            if d.dropped {
                dropped_at = Some(e);
                assert_eq!(d.alpha_for_next_epoch, 0.05);
                assert!(d.params_override.is_some());
                break;
            }
            assert!(d.params_override.is_none());
        }
        assert_eq!(dropped_at, Some(2 + n_d));
        assert_eq!(ad.theta(), 0.02);
    }

    #[test]
    fn floor_and_ceiling() {
        let mut c = cfg(1);
        c.alpha0 = c.alpha_min;
        c.theta_max = 0.03;
        let mut ad = AutoDrop::new(c, line(0)).unwrap();
        for e in 1..=10 {
            ad.observe(&line(e)).unwrap();
        }
        assert!(ad.drops() >= 3);
        assert_eq!(ad.alpha(), ad.config().alpha_min);
        assert_eq!(ad.theta(), 0.03);
    }

    #[test]
    fn cooldown_delays_rearm() {
        let mut c = cfg(1);
        c.cooldown_epochs = 3;
        let mut ad = AutoDrop::new(c, line(0)).unwrap();
        let drops: Vec<usize> = (1..=12)
            .filter(|&e| ad.observe(&line(e)).unwrap().dropped)
            .collect();
        assert_eq!(drops, vec![3, 7, 11]);
    }

    #[test]
    fn dimension_mismatch() {
        let mut ad = AutoDrop::new(cfg(2), vec![0.0, 0.0].into()).unwrap();
        assert!(matches!(
            ad.observe(&vec![1.0].into()),
            Err(LabError::Dimension { .. })
        ));
    }

    #[test]
    fn snapshot_round_trip_resumes_identically() {
        let mut a = AutoDrop::new(cfg(3), line(0)).unwrap();
        for e in 1..=4 {
            a.observe(&line(e)).unwrap();
        }
        let mut b = AutoDrop::restore(cfg(3), a.snapshot()).unwrap();
        assert_eq!(a.snapshot(), b.snapshot());
        for e in 5..=12 {
            let x: ParamVector = vec![e as f64, (e * e) as f64].into();
            assert_eq!(a.observe(&x).unwrap(), b.observe(&x).unwrap());
        }
        let mut bad = a.snapshot();
        bad.k = 2;
        bad.drop_pending = false;
        assert!(AutoDrop::restore(cfg(3), bad).is_err());
    }
}
