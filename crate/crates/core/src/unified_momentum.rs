//! Unified momentum update and piecewise-constant learning-rate schedules.
//!
//! ```text
//! y_{t+1}   = x_t - α_t g_t
//! y^s_{t+1} = x_t - s α_t g_t
//! x_{t+1}   = y_{t+1} + β (y^s_{t+1} - y^s_t)
//! ```
//!
//! `s = 0` is heavy-ball momentum, `s = 1` Nesterov, and `s = 1/(1-β)`
//! collapses to plain descent with rate `α/(1-β)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, LabError, Result};
use crate::params::{seeded_rng, LabRng, ParamVector};

/// Supplier of (stochastic) gradients. Noise is the oracle's business; the
/// optimizer only hands over the random stream.
pub trait GradientOracle {
    fn dim(&self) -> usize;

    fn gradient(&mut self, x: &[f64], rng: &mut LabRng, grad: &mut [f64]) -> Result<()>;

    /// Loss reported on trajectories (noise-free where the problem has one).
    fn loss(&self, x: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UmConfig {
    pub beta: f64,
    /// Unification factor.
    pub s: f64,
}

impl UmConfig {
    pub fn new(beta: f64, s: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta) {
            return Err(LabError::Config(format!("beta {beta} outside [0, 1)")));
        }
        if !(s >= 0.0 && s.is_finite()) {
            return Err(LabError::Config(format!("unification factor {s} must be >= 0")));
        }
        Ok(Self { beta, s })
    }

    pub fn heavy_ball(beta: f64) -> Result<Self> {
        Self::new(beta, 0.0)
    }

    pub fn nesterov(beta: f64) -> Result<Self> {
        Self::new(beta, 1.0)
    }

    pub fn gradient_descent(beta: f64) -> Result<Self> {
        Self::new(beta, 1.0 / (1.0 - beta))
    }
}

/// Optimizer state; starts with `y_0 = y^s_0 = x_0` (zero momentum).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UmState {
    pub x: ParamVector,
    pub y: ParamVector,
    pub y_s: ParamVector,
    pub t: u64,
}

impl UmState {
    pub fn new(x0: ParamVector) -> Self {
        Self {
            y: x0.clone(),
            y_s: x0.clone(),
            x: x0,
            t: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    /// Moves the iterate to `x`, translating `y` and `y^s` by the same
    /// displacement so the carried velocity is preserved and the jump itself
    /// is not mistaken for momentum.
    pub fn set_params(&mut self, x: ParamVector) -> Result<()> {
        check_dim(self.dim(), x.dim())?;
        for i in 0..x.dim() {
            let shift = x[i] - self.x[i];
            self.y[i] += shift;
            self.y_s[i] += shift;
        }
        self.x = x;
        Ok(())
    }
}

pub fn um_step(cfg: &UmConfig, state: &mut UmState, grad: &[f64], alpha: f64) -> Result<()> {
    check_dim(state.dim(), grad.len())?;
    if !(alpha > 0.0) {
        return Err(LabError::Argument(format!("learning rate {alpha} must be > 0")));
    }
    for i in 0..state.dim() {
        let x = state.x[i];
        let y_new = x - alpha * grad[i];
        let y_s_new = x - cfg.s * alpha * grad[i];
        state.x[i] = y_new + cfg.beta * (y_s_new - state.y_s[i]);
        state.y[i] = y_new;
        state.y_s[i] = y_s_new;
    }
    state.t += 1;
    Ok(())
}

/// Reference decay laws for the phase learning rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayLaw {
    /// `α̂_i = (i+2)^{-1}`.
    #[default]
    InverseLinear,
    /// `α̂_i = (i+1)^{-2/3}`.
    TwoThirds,
}

impl DecayLaw {
    pub fn rate(self, phase: i64) -> f64 {
        match self {
            DecayLaw::InverseLinear => 1.0 / (phase + 2) as f64,
            DecayLaw::TwoThirds => ((phase + 1) as f64).powf(-2.0 / 3.0),
        }
    }

    /// Rates for phases `0..n`.
    pub fn rates(self, n: usize) -> Vec<f64> {
        (0..n as i64).map(|i| self.rate(i)).collect()
    }
}

/// Piecewise-constant schedule: rate `alphas[i]` for `gaps[i]` iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseSchedule {
    alphas: Vec<f64>,
    gaps: Vec<u64>,
    /// Rate of the virtual phase `-1`.
    alpha_prev: f64,
    boundaries: Vec<u64>,
}

impl PiecewiseSchedule {
    pub const DEFAULT_ALPHA_PREV: f64 = 1.0;

    pub fn new(alphas: Vec<f64>, gaps: Vec<u64>) -> Result<Self> {
        Self::with_alpha_prev(alphas, gaps, Self::DEFAULT_ALPHA_PREV)
    }

    pub fn with_alpha_prev(alphas: Vec<f64>, gaps: Vec<u64>, alpha_prev: f64) -> Result<Self> {
        if alphas.is_empty() {
            return Err(LabError::Argument("schedule needs at least one phase".into()));
        }
        check_dim(alphas.len(), gaps.len())?;
        if alphas.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return Err(LabError::Config("phase rates must lie in (0, 1)".into()));
        }
        if !(alpha_prev > 0.0 && alpha_prev.is_finite()) {
            return Err(LabError::Config("previous-phase rate must be > 0".into()));
        }
        // Strictly decreasing until a floor; once two phases tie, all later
        // phases must tie as well.
        let mut floored = false;
        for w in alphas.windows(2) {
            if w[1] > w[0] || (floored && w[1] != w[0]) {
                return Err(LabError::Config(
                    "phase rates must decrease strictly until a constant floor".into(),
                ));
            }
            floored |= w[1] == w[0];
        }
        if gaps.contains(&0) {
            return Err(LabError::Config("phase gaps must be >= 1".into()));
        }
        let mut boundaries = Vec::with_capacity(gaps.len() + 1);
        let mut t = 0u64;
        boundaries.push(t);
        for &k in &gaps {
            t += k;
            boundaries.push(t);
        }
        Ok(Self {
            alphas,
            gaps,
            alpha_prev,
            boundaries,
        })
    }

    /// `n` phases at the law's rates, phase `i` lasting `ceil(kappa / α̂_i)`
    /// iterations, so `k_i α̂_i ≥ kappa` holds by construction.
    pub fn from_law(law: DecayLaw, n: usize, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(LabError::Argument("kappa must be > 0".into()));
        }
        let alphas = law.rates(n);
        let gaps = alphas.iter().map(|a| (kappa / a).ceil() as u64).collect();
        Self::new(alphas, gaps)
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn gaps(&self) -> &[u64] {
        &self.gaps
    }

    pub fn alpha_prev(&self) -> f64 {
        self.alpha_prev
    }

    /// `t_0 = 0 < t_1 < ... < t_n = T`.
    pub fn boundaries(&self) -> &[u64] {
        &self.boundaries
    }

    pub fn phases(&self) -> usize {
        self.alphas.len()
    }

    pub fn total(&self) -> u64 {
        *self.boundaries.last().unwrap()
    }

    /// Phase index containing iteration `t`, or `None` past the end.
    pub fn phase_at(&self, t: u64) -> Option<usize> {
        if t >= self.total() {
            return None;
        }
        Some(self.boundaries.partition_point(|&b| b <= t) - 1)
    }

    pub fn alpha_at(&self, t: u64) -> Option<f64> {
        self.phase_at(t).map(|i| self.alphas[i])
    }
}

/// Outcome of checking a schedule against the drop-gap constraints
/// `α̂_i ≤ law(i)`, `k_i α̂_i ≥ κ1`, `k_i α̂_i α̂_{i-1} ≤ κ2 / (i+1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleReport {
    pub satisfies_decay: bool,
    /// Largest admissible κ1: `min_i k_i α̂_i`.
    pub kappa1_max: f64,
    /// Smallest admissible κ2: `max_i k_i α̂_i α̂_{i-1} (i+1)`.
    pub kappa2_min: f64,
    pub feasible: bool,
    pub law: DecayLaw,
}

pub fn validate_schedule(sched: &PiecewiseSchedule) -> Result<ScheduleReport> {
    validate_schedule_with_law(sched, DecayLaw::InverseLinear)
}

pub fn validate_schedule_with_law(
    sched: &PiecewiseSchedule,
    law: DecayLaw,
) -> Result<ScheduleReport> {
    let gaps: Vec<f64> = sched.gaps.iter().map(|&k| k as f64).collect();
    validate_gaps(&sched.alphas, &gaps, sched.alpha_prev, law)
}

/// Same checks on real-valued gaps, e.g. the continuous drop gaps of the
/// velocity model before rounding.
pub fn validate_gaps(
    alphas: &[f64],
    gaps: &[f64],
    alpha_prev: f64,
    law: DecayLaw,
) -> Result<ScheduleReport> {
    if alphas.is_empty() {
        return Err(LabError::Argument("schedule needs at least one phase".into()));
    }
    check_dim(alphas.len(), gaps.len())?;
    let mut satisfies_decay = true;
    let mut kappa1_max = f64::INFINITY;
    let mut kappa2_min = f64::NEG_INFINITY;
    let mut prev = alpha_prev;
    for (i, (&a, &k)) in alphas.iter().zip(gaps).enumerate() {
        satisfies_decay &= a <= law.rate(i as i64);
        kappa1_max = kappa1_max.min(k * a);
        kappa2_min = kappa2_min.max(k * a * prev * (i + 1) as f64);
        prev = a;
    }
    Ok(ScheduleReport {
        satisfies_decay,
        kappa1_max,
        kappa2_min,
        feasible: satisfies_decay && kappa1_max > 0.0 && kappa2_min.is_finite(),
        law,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UmRecord {
    pub t: u64,
    /// Loss at `x_t`, before the update of iteration `t`.
    pub loss: f64,
    /// `min_{τ ≤ t} loss_τ`.
    pub min_loss: f64,
    pub alpha: f64,
}

/// Runs `iterations` unified-momentum steps with the schedule's rates.
pub fn run_um<P: GradientOracle + ?Sized>(
    cfg: &UmConfig,
    sched: &PiecewiseSchedule,
    problem: &mut P,
    x0: ParamVector,
    iterations: u64,
    seed: u64,
) -> Result<Vec<UmRecord>> {
    check_dim(problem.dim(), x0.dim())?;
    if iterations > sched.total() {
        return Err(LabError::Argument(format!(
            "{iterations} iterations exceed schedule length {}",
            sched.total()
        )));
    }
    let mut rng = seeded_rng(seed);
    let mut state = UmState::new(x0);
    let mut grad = vec![0.0; state.dim()];
    let mut min_loss = f64::INFINITY;
    let mut records = Vec::with_capacity(iterations as usize);
    for t in 0..iterations {
        let alpha = sched.alpha_at(t).expect("t below schedule total");
        let loss = problem.loss(&state.x);
        min_loss = min_loss.min(loss);
        records.push(UmRecord {
            t,
            loss,
            min_loss,
            alpha,
        });
        problem.gradient(&state.x, &mut rng, &mut grad)?;
        um_step(cfg, &mut state, &grad, alpha)?;
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noisy_quadratic::{NqmConfig, NqmProblem};

    #[test]
    fn config_bounds() {
        assert!(UmConfig::new(1.0, 0.0).is_err());
        assert!(UmConfig::new(-0.1, 0.0).is_err());
        assert!(UmConfig::new(0.5, -1.0).is_err());
        assert_eq!(UmConfig::gradient_descent(0.5).unwrap().s, 2.0);
    }

    #[test]
    fn zero_beta_is_sgd() {
        for s in [0.0, 1.0, 3.0] {
            let cfg = UmConfig::new(0.0, s).unwrap();
            let mut st = UmState::new(vec![1.0, -2.0].into());
            um_step(&cfg, &mut st, &[0.5, 1.0], 0.1).unwrap();
            assert_eq!(st.x.as_slice(), &[1.0 - 0.1 * 0.5, -2.0 - 0.1]);
        }
    }

    #[test]
    fn step_rejects_bad_input() {
        let cfg = UmConfig::heavy_ball(0.9).unwrap();
        let mut st = UmState::new(vec![1.0].into());
        assert!(matches!(
            um_step(&cfg, &mut st, &[1.0, 2.0], 0.1),
            Err(LabError::Dimension { .. })
        ));
        assert!(um_step(&cfg, &mut st, &[1.0], 0.0).is_err());
    }

    #[test]
    fn heavy_ball_matches_two_term_recursion() {
        let beta = 0.9;
        let cfg = UmConfig::heavy_ball(beta).unwrap();
        let grad = |x: f64| 0.7 * x;
        let mut st = UmState::new(vec![1.0].into());
        let (mut x_prev, mut x) = (1.0f64, 1.0f64);
        for _ in 0..50 {
            let g = grad(st.x[0]);
            um_step(&cfg, &mut st, &[g], 0.05).unwrap();
            let next = x - 0.05 * grad(x) + beta * (x - x_prev);
            x_prev = x;
            x = next;
            assert!((st.x[0] - x).abs() <= 1e-12);
        }
    }

    #[test]
    fn schedule_construction() {
        assert!(PiecewiseSchedule::new(vec![], vec![]).is_err());
        assert!(PiecewiseSchedule::new(vec![0.5], vec![0]).is_err());
        assert!(PiecewiseSchedule::new(vec![0.5, 0.6], vec![1, 1]).is_err());
        assert!(PiecewiseSchedule::new(vec![1.5], vec![1]).is_err());
        assert!(PiecewiseSchedule::new(vec![0.5, 0.2, 0.2, 0.1], vec![1; 4]).is_err());
        assert!(PiecewiseSchedule::new(vec![0.5, 0.2, 0.2, 0.2], vec![1; 4]).is_ok());

        let s = PiecewiseSchedule::new(vec![0.5, 0.25, 0.1], vec![2, 3, 1]).unwrap();
        assert_eq!(s.boundaries(), &[0, 2, 5, 6]);
        assert_eq!(s.total(), 6);
        let looked: Vec<_> = (0..7).map(|t| s.alpha_at(t)).collect();
        assert_eq!(
            looked,
            vec![
                Some(0.5),
                Some(0.5),
                Some(0.25),
                Some(0.25),
                Some(0.25),
                Some(0.1),
                None
            ]
        );
    }

    #[test]
    fn validator_examples() {
        // single phase, α̂_0 = 0.5 = (0+2)^{-1}, k_0 = 4
        let s = PiecewiseSchedule::new(vec![0.5], vec![4]).unwrap();
        let r = validate_schedule(&s).unwrap();
        assert!(r.satisfies_decay);
        assert_eq!(r.kappa1_max, 2.0);
        assert_eq!(r.kappa2_min, 2.0);
        assert!(r.feasible);

        let s = PiecewiseSchedule::new(vec![0.5; 5], vec![3; 5]).unwrap();
        let r = validate_schedule(&s).unwrap();
        assert!(!r.satisfies_decay);
        assert!(!r.feasible);
    }

    #[test]
    fn validator_on_inverse_linear_law() {
        // k_i = ceil(1/α̂_i) = i + 2
        let n = 30;
        let alphas = DecayLaw::InverseLinear.rates(n);
        let gaps: Vec<u64> = alphas.iter().map(|a| (1.0 / a).ceil() as u64).collect();
        let r = validate_schedule(&PiecewiseSchedule::new(alphas, gaps).unwrap()).unwrap();
        assert!(r.feasible);
        assert!(r.kappa1_max >= 1.0 - 1e-12);
        assert!((r.kappa2_min - 1.0).abs() < 1e-12);
        let from_law = PiecewiseSchedule::from_law(DecayLaw::InverseLinear, n, 1.0).unwrap();
        assert_eq!(validate_schedule(&from_law).unwrap(), r);
        assert!(PiecewiseSchedule::from_law(DecayLaw::TwoThirds, n, 1.0).is_err());
        assert!(PiecewiseSchedule::from_law(DecayLaw::InverseLinear, n, 0.0).is_err());
    }

    #[test]
    fn two_thirds_law_flag() {
        let alphas = DecayLaw::TwoThirds.rates(5);
        let r = validate_gaps(&alphas, &[4.0; 5], 1.0, DecayLaw::TwoThirds).unwrap();
        assert!(r.satisfies_decay);
        let r = validate_gaps(&alphas, &[4.0; 5], 1.0, DecayLaw::InverseLinear).unwrap();
        assert!(!r.satisfies_decay);
    }

    #[test]
    fn run_um_noiseless_contraction() {
        let cfg = UmConfig::heavy_ball(0.0).unwrap();
        let mut p = NqmProblem {
            cfg: NqmConfig::new(vec![1.0], vec![0.0], 0.5).unwrap(),
        };
        let sched = PiecewiseSchedule::new(vec![0.5], vec![20]).unwrap();
        let rec = run_um(&cfg, &sched, &mut p, vec![1.0].into(), 20, 0).unwrap();
        for r in &rec {
            let x = 0.5f64.powi(r.t as i32);
            assert_eq!(r.loss, 0.5 * x * x);
        }
        assert!(run_um(&cfg, &sched, &mut p, vec![1.0].into(), 21, 0).is_err());
    }

    #[test]
    fn heavy_ball_and_nesterov_split_after_first_update() {
        let mut p = NqmProblem {
            cfg: NqmConfig::new(vec![1.0, 2.0], vec![1.0, 1.0], 0.1).unwrap(),
        };
        let sched = PiecewiseSchedule::new(vec![0.1], vec![10]).unwrap();
        let hb = run_um(&UmConfig::heavy_ball(0.9).unwrap(), &sched, &mut p, vec![1.0, 1.0].into(), 10, 9)
            .unwrap();
        let nag = run_um(&UmConfig::nesterov(0.9).unwrap(), &sched, &mut p, vec![1.0, 1.0].into(), 10, 9)
            .unwrap();
        // With y^s_0 = x_0 the Nesterov look-ahead already moves x_1 by an
        // extra -βαg_0; heavy-ball has no velocity yet.
        assert_eq!(hb[0].loss, nag[0].loss);
        assert_ne!(hb[1].loss, nag[1].loss);
        assert_ne!(hb[2].loss, nag[2].loss);
    }

    #[test]
    fn running_minimum_is_monotone() {
        let mut p = NqmProblem {
            cfg: NqmConfig::new(vec![0.5, 1.0, 2.0], vec![1.0; 3], 0.1).unwrap(),
        };
        let alphas = DecayLaw::InverseLinear.rates(20);
        let gaps = (0..20).map(|i| i as u64 + 2).collect();
        let sched = PiecewiseSchedule::new(alphas, gaps).unwrap();
        let t = sched.total();
        let rec = run_um(&UmConfig::heavy_ball(0.5).unwrap(), &sched, &mut p, vec![3.0; 3].into(), t, 1)
            .unwrap();
        assert!(rec.windows(2).all(|w| w[1].min_loss <= w[0].min_loss));
    }
}
