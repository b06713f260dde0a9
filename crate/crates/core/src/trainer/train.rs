use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::angular_velocity::VelocityTracker;
use crate::autodrop::{AutoDrop, AutoDropConfig, AutoDropSnapshot};
use crate::error::{LabError, Result};
use crate::params::{seeded_rng, ParamVector};
use crate::trainer::dataset::SyntheticDataset;
use crate::trainer::model::MlpModel;
use crate::unified_momentum::{um_step, PiecewiseSchedule, UmConfig, UmState};

/// Learning-rate policy applied at epoch granularity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scheduler {
    Constant { alpha: f64 },
    /// Phase `i` lasts `gaps[i]` epochs; the last rate is held afterwards.
    Piecewise { schedule: PiecewiseSchedule },
    AutoDrop { config: AutoDropConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: UmConfig,
    pub scheduler: Scheduler,
    /// Keep every epoch's start and end parameters in the output.
    #[serde(default)]
    pub keep_snapshots: bool,
}

/// One row per epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrainRecord {
    /// 1-based epoch index.
    pub epoch: usize,
    /// Mean training loss at the parameters carried into the next epoch.
    pub train_loss: f64,
    pub eval_accuracy: f64,
    /// Rate used during this epoch.
    pub learning_rate: f64,
    /// Angle between this epoch's step and the previous one, degrees.
    pub omega: Option<f64>,
    /// A drop completed at the end of this epoch.
    pub dropped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub records: Vec<TrainRecord>,
    pub final_params: ParamVector,
    /// `(start, end)` parameters of every epoch, when requested.
    pub snapshots: Vec<(ParamVector, ParamVector)>,
    /// Scheduler state after the last epoch, for AutoDrop runs.
    pub scheduler_state: Option<AutoDropSnapshot>,
}

impl TrainOutput {
    pub fn final_train_loss(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.train_loss)
    }
}

enum Policy {
    Fixed(Box<dyn Fn(usize) -> f64>),
    Auto(AutoDrop),
}

/// Epoch-granular training. All randomness (initialization, then one
/// shuffle per epoch) comes from a single stream seeded with `cfg.seed`.
pub fn train(
    model: &MlpModel,
    data: &SyntheticDataset,
    eval: &SyntheticDataset,
    cfg: &TrainConfig,
) -> Result<TrainOutput> {
    if cfg.epochs < 3 {
        return Err(LabError::Argument("need at least 3 epochs".into()));
    }
    if cfg.batch_size == 0 {
        return Err(LabError::Argument("batch size must be >= 1".into()));
    }
    let mut rng = seeded_rng(cfg.seed);
    let x0 = model.init(&mut rng);
    let mut policy = match &cfg.scheduler {
        Scheduler::Constant { alpha } => {
            if !(*alpha > 0.0) {
                return Err(LabError::Config("learning rate must be > 0".into()));
            }
            let alpha = *alpha;
            Policy::Fixed(Box::new(move |_| alpha))
        }
        Scheduler::Piecewise { schedule } => {
            let schedule = schedule.clone();
            let last = *schedule.alphas().last().unwrap();
            Policy::Fixed(Box::new(move |epoch| {
                schedule.alpha_at(epoch as u64).unwrap_or(last)
            }))
        }
        Scheduler::AutoDrop { config } => Policy::Auto(AutoDrop::new(config.clone(), x0.clone())?),
    };
    // Fixed policies still report ω, from a tracker of their own.
    let mut tracker = VelocityTracker::new(1)?;
    let mut state = UmState::new(x0);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut snapshots = Vec::new();
    for epoch in 0..cfg.epochs {
        let alpha = match &policy {
            Policy::Fixed(f) => f(epoch),
            Policy::Auto(ad) => ad.alpha(),
        };
        let start = state.x.clone();
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let (_, grad) = model.forward_loss(&state.x, data, batch)?;
            um_step(&cfg.optimizer, &mut state, &grad, alpha)?;
        }
        if !state.x.is_finite() {
            return Err(LabError::NonFinite(format!("parameters diverged in epoch {}", epoch + 1)));
        }
        let end = state.x.clone();
        let (omega, dropped) = match &mut policy {
            Policy::Fixed(_) => (tracker.observe(&end, &start)?.map(|a| a.value()), false),
            Policy::Auto(ad) => {
                let decision = ad.observe(&end)?;
                if let Some(averaged) = decision.params_override {
                    state.set_params(averaged)?;
                }
                (decision.omega, decision.dropped)
            }
        };
        if cfg.keep_snapshots {
            snapshots.push((start, end));
        }
        records.push(TrainRecord {
            epoch: epoch + 1,
            train_loss: model.dataset_loss(&state.x, data)?,
            eval_accuracy: model.accuracy(&state.x, eval)?,
            learning_rate: alpha,
            omega,
            dropped,
        });
    }
    let scheduler_state = match &policy {
        Policy::Auto(ad) => Some(ad.snapshot()),
        Policy::Fixed(_) => None,
    };
    Ok(TrainOutput {
        records,
        final_params: state.x,
        snapshots,
        scheduler_state,
    })
}
