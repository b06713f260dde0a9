//! Each experiment kind as a composition of library calls producing tables.

use rayon::prelude::*;
use serde::Deserialize;

use autodrop_core::noisy_quadratic::simulate_curve;
use autodrop_core::trainer::{train, BlobSpec, MlpModel, Scheduler, TrainConfig};
use autodrop_core::unified_momentum::{validate_gaps, validate_schedule_with_law};
use autodrop_core::velocity_model::simulate_algorithm2;
use autodrop_core::{
    autodrop_nqm_experiment, lemma1_bounds, nqm_empirical_limits, nqm_oracle, ApproxDropConfig,
    AutoDropConfig, AutoDropSnapshot, CurvePoint, DecayLaw, NqmAutoDropConfig, NqmConfig,
    ParamVector, PiecewiseSchedule, UmConfig, VelocityModelParams,
};

use crate::config::{
    Alg2PlanParams, ExperimentConfig, NqmAutodropParams, NqmSweepParams, OracleCheckParams, Params,
    ScheduleValidateParams, TrainParams,
};
use crate::error::{CliError, CliResult};
use crate::table::{Cell, Table};

/// Everything an experiment produces besides its manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    pub tables: Vec<Table>,
    /// Final scheduler state of an AutoDrop training run.
    pub checkpoint: Option<AutoDropSnapshot>,
}

impl From<Vec<Table>> for Outputs {
    fn from(tables: Vec<Table>) -> Self {
        Self {
            tables,
            checkpoint: None,
        }
    }
}

pub const CURVE_HEADER: [&str; 4] = ["t", "loss", "omega", "alpha"];

/// Runs the configured experiment. Independent curves are computed on
/// `pool`; the output order never depends on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig, pool: &rayon::ThreadPool) -> CliResult<Outputs> {
    match &cfg.params {
        Params::NqmSweep(p) => nqm_sweep(p, cfg.seed, pool).map(Into::into),
        Params::NqmAutodrop(p) => nqm_autodrop(p, cfg.seed, pool).map(Into::into),
        Params::OracleCheck(p) => oracle_check(p, cfg.seed).map(Into::into),
        Params::ScheduleValidate(p) => schedule_validate(p).map(Into::into),
        Params::Alg2Plan(p) => alg2_plan(p).map(Into::into),
        Params::Train(p) => train_run(p, cfg.seed),
    }
}

pub fn parse_law(name: &str) -> CliResult<DecayLaw> {
    DecayLaw::deserialize(toml::Value::String(name.into()))
        .map_err(|_| CliError::Config(format!("unknown decay law `{name}` (inverse-linear | two-thirds)")))
}

fn check_record_every(every: u64) -> CliResult<()> {
    if every == 0 {
        return Err(CliError::Config("record_every must be >= 1".into()));
    }
    Ok(())
}

/// Keeps every `every`-th point plus the last one.
pub fn curve_table(name: impl Into<String>, curve: &[CurvePoint], every: u64) -> Table {
    let mut table = Table::new(name, CURVE_HEADER.to_vec());
    let last = curve.last().map_or(0, |p| p.t);
    for p in curve.iter().filter(|p| p.t % every == 0 || p.t == last) {
        table.push(vec![p.t.into(), p.loss.into(), p.omega.into(), p.alpha.into()]);
    }
    table
}

pub fn sweep_table_name(alpha: f64) -> String {
    format!("nqm_sweep_alpha_{alpha}")
}

pub fn nqm_sweep(p: &NqmSweepParams, seed: u64, pool: &rayon::ThreadPool) -> CliResult<Vec<Table>> {
    check_record_every(p.record_every)?;
    if p.alphas.is_empty() {
        return Err(CliError::Config("alphas must not be empty".into()));
    }
    let models = p
        .alphas
        .iter()
        .map(|&alpha| NqmConfig::linear(p.dim, p.a_scale, p.sigma2, alpha))
        .collect::<Result<Vec<_>, _>>()?;
    let curves = pool.install(|| {
        models
            .par_iter()
            .map(|m| simulate_curve(m, ParamVector::filled(p.dim, p.x0), p.iterations, p.window, seed))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(models
        .iter()
        .zip(&curves)
        .map(|(m, c)| curve_table(sweep_table_name(m.alpha), c, p.record_every))
        .collect())
}

pub fn nqm_autodrop(p: &NqmAutodropParams, seed: u64, pool: &rayon::ThreadPool) -> CliResult<Vec<Table>> {
    check_record_every(p.record_every)?;
    let model = NqmConfig::linear(p.dim, p.a_scale, p.sigma2, p.alpha0)?;
    let cfg = NqmAutoDropConfig {
        alpha0: p.alpha0,
        alpha_min: p.alpha_min,
        rho: p.rho,
        window: p.window,
        delta_threshold: p.delta_threshold,
    };
    cfg.validate(&model)?;
    let baseline = if p.baseline_alpha > 0.0 {
        Some(model.with_alpha(p.baseline_alpha)?)
    } else if p.baseline_alpha == 0.0 {
        None
    } else {
        return Err(CliError::Config("baseline_alpha must be >= 0".into()));
    };
    let x0 = ParamVector::filled(p.dim, p.x0);
    let (run, fixed) = pool.install(|| {
        rayon::join(
            || autodrop_nqm_experiment(&model, &cfg, x0.clone(), p.iterations, seed),
            || {
                baseline
                    .as_ref()
                    .map(|b| simulate_curve(b, x0.clone(), p.iterations, p.window, seed))
                    .transpose()
            },
        )
    });
    let run = run?;
    let mut tables = vec![curve_table("nqm_autodrop", &run.curve, p.record_every)];
    let mut drops = Table::new("nqm_autodrop_drops", vec!["drop", "iteration", "alpha_after"]);
    for (i, &t) in run.drop_iterations.iter().enumerate() {
        let after = run.curve.get(t as usize).map_or(run.final_alpha(), |pt| pt.alpha);
        drops.push(vec![(i + 1).into(), t.into(), after.into()]);
    }
    tables.push(drops);
    if let Some(curve) = fixed? {
        tables.push(curve_table("nqm_fixed_alpha", &curve, p.record_every));
    }
    Ok(tables)
}

pub const ORACLE_HEADER: [&str; 15] = [
    "dim", "alpha", "burn_in", "samples", "i_star", "i_hat", "i_rel_err", "n_star", "n_hat",
    "n_rel_err", "c_star", "c_hat", "c_abs_err", "cos_mean", "angle_star",
];

pub fn oracle_model(p: &OracleCheckParams, seed: u64) -> CliResult<NqmConfig> {
    if p.a.is_empty() {
        Ok(NqmConfig::random_contraction(p.dim, seed)?)
    } else {
        Ok(NqmConfig::new(p.a.clone(), p.sigma2.clone(), p.alpha)?)
    }
}

pub fn oracle_check(p: &OracleCheckParams, seed: u64) -> CliResult<Vec<Table>> {
    let model = oracle_model(p, seed)?;
    let oracle = nqm_oracle(&model)?;
    let burn_in = if p.burn_in == 0 { model.default_burn_in() } else { p.burn_in };
    let emp = nqm_empirical_limits(&model, burn_in, p.samples, seed)?;
    let mut table = Table::new("oracle_check", ORACLE_HEADER.to_vec());
    table.push(vec![
        model.dim().into(),
        model.alpha.into(),
        burn_in.into(),
        p.samples.into(),
        oracle.i_star.into(),
        emp.i_hat.into(),
        ((emp.i_hat - oracle.i_star) / oracle.i_star).abs().into(),
        oracle.n_star.into(),
        emp.n_hat.into(),
        ((emp.n_hat - oracle.n_star) / oracle.n_star).abs().into(),
        oracle.c_star.into(),
        emp.c_hat.into(),
        (emp.c_hat - oracle.c_star).abs().into(),
        emp.cos_mean.into(),
        oracle.angle_star.into(),
    ]);
    Ok(vec![table])
}

pub fn schedule_validate(p: &ScheduleValidateParams) -> CliResult<Vec<Table>> {
    let law = parse_law(&p.law)?;
    let schedule = if p.alphas.is_empty() {
        PiecewiseSchedule::from_law(law, p.phases, p.kappa)?
    } else {
        PiecewiseSchedule::with_alpha_prev(p.alphas.clone(), p.gaps.clone(), p.alpha_prev)?
    };
    let report = validate_schedule_with_law(&schedule, law)?;
    let mut phases = Table::new("schedule_phases", vec!["phase", "alpha", "gap", "start"]);
    for (i, (&a, &k)) in schedule.alphas().iter().zip(schedule.gaps()).enumerate() {
        phases.push(vec![i.into(), a.into(), k.into(), schedule.boundaries()[i].into()]);
    }
    let mut summary = Table::new(
        "schedule_report",
        vec!["law", "phases", "total", "satisfies_decay", "kappa1_max", "kappa2_min", "feasible"],
    );
    summary.push(vec![
        p.law.as_str().into(),
        schedule.phases().into(),
        schedule.total().into(),
        report.satisfies_decay.into(),
        report.kappa1_max.into(),
        report.kappa2_min.into(),
        report.feasible.into(),
    ]);
    Ok(vec![phases, summary])
}

pub fn alg2_plan(p: &Alg2PlanParams) -> CliResult<Vec<Table>> {
    let law = parse_law(&p.law)?;
    let params = VelocityModelParams::new(p.epsilon, p.gamma, law.rate(0))?;
    let cfg = ApproxDropConfig::from_law(p.tau0, law, p.phases)?;
    let plan = simulate_algorithm2(&params, &cfg)?;
    let integer_gaps: Vec<f64> = plan.gaps.iter().map(|&k| k as f64).collect();
    let report = validate_gaps(&plan.alphas, &integer_gaps, 1.0, law)?;
    let bounds = match law {
        DecayLaw::InverseLinear => Some(lemma1_bounds(plan.kappa1, plan.kappa2, p.phases)?),
        DecayLaw::TwoThirds => None,
    };

    let mut phases = Table::new(
        "alg2_phases",
        vec!["phase", "alpha", "gap", "continuous_gap", "start"],
    );
    for i in 0..plan.alphas.len() {
        phases.push(vec![
            i.into(),
            plan.alphas[i].into(),
            plan.gaps[i].into(),
            plan.continuous_gaps[i].into(),
            plan.boundaries[i].into(),
        ]);
    }
    let mut summary = Table::new(
        "alg2_summary",
        vec![
            "total",
            "continuous_total",
            "kappa1",
            "kappa2",
            "measured_kappa1",
            "measured_kappa2",
            "lemma1_lower",
            "lemma1_upper",
            "validator_kappa1_max",
            "validator_kappa2_min",
            "feasible",
        ],
    );
    summary.push(vec![
        plan.total.into(),
        plan.continuous_total().into(),
        plan.kappa1.into(),
        plan.kappa2.into(),
        plan.measured_kappa1.into(),
        plan.measured_kappa2.into(),
        bounds.map(|b| b.0).into(),
        bounds.map(|b| b.1).into(),
        report.kappa1_max.into(),
        report.kappa2_min.into(),
        report.feasible.into(),
    ]);
    Ok(vec![phases, summary])
}

pub const TRAIN_HEADER: [&str; 7] = [
    "epoch",
    "train_loss",
    "eval_accuracy",
    "eval_error",
    "learning_rate",
    "omega",
    "dropped",
];

/// Library-level pieces of a training run.
pub struct TrainSetup {
    pub model: MlpModel,
    pub data: autodrop_core::trainer::SyntheticDataset,
    pub eval: autodrop_core::trainer::SyntheticDataset,
    pub config: TrainConfig,
}

pub fn train_setup(p: &TrainParams, seed: u64) -> CliResult<TrainSetup> {
    let spec = BlobSpec {
        classes: p.classes,
        dim: p.input_dim,
        samples: p.samples,
        separation: p.separation,
        noise_scale: p.noise_scale,
    };
    let eval_spec = BlobSpec {
        samples: p.eval_samples,
        ..spec.clone()
    };
    let model = if p.hidden == 0 {
        MlpModel::logistic(p.input_dim, p.classes)
    } else {
        MlpModel::two_layer(p.input_dim, p.hidden, p.classes)
    };
    let scheduler = match p.scheduler.as_str() {
        "constant" => Scheduler::Constant { alpha: p.alpha0 },
        "autodrop" => {
            let config = AutoDropConfig {
                alpha0: p.alpha0,
                alpha_min: p.alpha_min,
                theta0: p.theta0,
                theta_max: p.theta_max,
                rho: p.rho,
                n_d: p.n_d,
                cooldown_epochs: p.cooldown_epochs,
            };
            config.validate()?;
            Scheduler::AutoDrop { config }
        }
        "piecewise" => Scheduler::Piecewise {
            schedule: PiecewiseSchedule::new(p.piecewise_alphas.clone(), p.piecewise_gaps.clone())?,
        },
        other => {
            return Err(CliError::Config(format!(
                "unknown scheduler `{other}` (autodrop | constant | piecewise)"
            )))
        }
    };
    Ok(TrainSetup {
        model,
        data: spec.generate(p.data_seed)?,
        eval: eval_spec.generate(p.data_seed.wrapping_add(1))?,
        config: TrainConfig {
            epochs: p.epochs,
            batch_size: p.batch_size,
            seed,
            optimizer: UmConfig::new(p.beta, p.s)?,
            scheduler,
            keep_snapshots: false,
        },
    })
}

pub fn train_run(p: &TrainParams, seed: u64) -> CliResult<Outputs> {
    let setup = train_setup(p, seed)?;
    let out = train(&setup.model, &setup.data, &setup.eval, &setup.config)?;
    let mut table = Table::new("train", TRAIN_HEADER.to_vec());
    for r in &out.records {
        table.push(vec![
            r.epoch.into(),
            r.train_loss.into(),
            r.eval_accuracy.into(),
            (1.0 - r.eval_accuracy).into(),
            r.learning_rate.into(),
            r.omega.into(),
            Cell::Bool(r.dropped),
        ]);
    }
    Ok(Outputs {
        tables: vec![table],
        checkpoint: out.scheduler_state,
    })
}
