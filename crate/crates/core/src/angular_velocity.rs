//! Angle between consecutive parameter steps and its windowed average.
//!
//! The angular velocity of epoch (or iteration) `i` is the angle between the
//! step `s_i = x_{i+1} - x_i` and the previous step `s_{i-1}`, in degrees.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, LabError, Result};
use crate::params::{dot, norm, ParamVector};

/// An angle in degrees, always within `[0, 180]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AngleDegrees(f64);

impl AngleDegrees {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=180.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(LabError::Argument(format!(
                "angle {value} outside [0, 180] degrees"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for AngleDegrees {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}°", self.0)
    }
}

/// Cosine of the angle between two vectors, clamped to `[-1, 1]`; 0 when
/// either vector is zero.
pub fn cosine_between(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    let (na, nb) = norms(a, b)?;
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot(a, b) / na / nb).clamp(-1.0, 1.0))
}

fn norms(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let (na, nb) = (norm(a), norm(b));
    if na.is_finite() && nb.is_finite() {
        Ok((na, nb))
    } else {
        Err(LabError::NonFinite("angle of non-finite step".into()))
    }
}

/// Angle between two step vectors.
///
/// Equal to `acos(a·b / (‖a‖‖b‖))`, evaluated as `2·atan2(‖â - b̂‖, ‖â + b̂‖)`
/// on the unit vectors, which stays accurate near 0° and 180° where `acos`
/// loses half the significant digits.
///
/// A zero step has no direction and is reported as 90° (zero cosine), so a
/// scheduler fed a stalled epoch keeps running.
pub fn angle_between(a: &[f64], b: &[f64]) -> Result<AngleDegrees> {
    check_dim(a.len(), b.len())?;
    let (na, nb) = norms(a, b)?;
    if na == 0.0 || nb == 0.0 {
        log::debug!("zero-length step vector; reporting 90 degrees");
        return Ok(AngleDegrees(90.0));
    }
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (u, v) = (x / na, y / nb);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    let radians = 2.0 * diff.sqrt().atan2(sum.sqrt());
    Ok(AngleDegrees(radians.to_degrees().clamp(0.0, 180.0)))
}

/// Sliding state producing per-step angles from consecutive parameter
/// snapshots, with a bounded averaging window.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityTracker {
    prev_step: Option<ParamVector>,
    window: VecDeque<f64>,
    capacity: usize,
}

impl VelocityTracker {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(LabError::Argument("velocity window must be >= 1".into()));
        }
        Ok(Self {
            prev_step: None,
            window: VecDeque::with_capacity(window),
            capacity: window,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.window.len() == self.capacity
    }

    pub fn previous_step(&self) -> Option<&ParamVector> {
        self.prev_step.as_ref()
    }

    /// Records the step `new_params - old_params`. Returns the angle to the
    /// previous step, or `None` on the very first step.
    pub fn observe(
        &mut self,
        new_params: &[f64],
        old_params: &[f64],
    ) -> Result<Option<AngleDegrees>> {
        check_dim(new_params.len(), old_params.len())?;
        let step: ParamVector = new_params
            .iter()
            .zip(old_params)
            .map(|(n, o)| n - o)
            .collect();
        self.observe_step(step)
    }

    /// Same as [`observe`](Self::observe) for an already formed step.
    pub fn observe_step(&mut self, step: ParamVector) -> Result<Option<AngleDegrees>> {
        let angle = match &self.prev_step {
            None => None,
            Some(prev) => {
                check_dim(prev.dim(), step.dim())?;
                let angle = angle_between(&step, prev)?;
                if self.window.len() == self.capacity {
                    self.window.pop_front();
                }
                self.window.push_back(angle.value());
                Some(angle)
            }
        };
        self.prev_step = Some(step);
        Ok(angle)
    }

    /// Mean of the angles currently in the window.
    pub fn window_average(&self) -> Result<AngleDegrees> {
        if self.window.is_empty() {
            return Err(LabError::NotReady);
        }
        let mean = self.window.iter().sum::<f64>() / self.window.len() as f64;
        Ok(AngleDegrees(mean.clamp(0.0, 180.0)))
    }

    /// Forgets the stored angles but keeps the last step, so the next
    /// observation still yields an angle.
    pub fn clear_window(&mut self) {
        self.window.clear();
    }

    pub fn reset(&mut self) {
        self.window.clear();
        self.prev_step = None;
    }
}
