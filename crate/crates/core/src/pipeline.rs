//! End-to-end evaluation: marginals, copulas, scenarios, MPIs and scores.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{Copula, CopulaKind};
use crate::data_io::DayMatrix;
use crate::error::{Error, Result};
use crate::gaussian_copula::fit_gaussian;
use crate::marginals::{fit_marginals, pit, MarginalModel, QuantileCurve};
use crate::mpi::{build_mpi_set, MpiSet};
use crate::rvine::select_structure;
use crate::scenarios::{generate_days, ScenarioSet};
use crate::scoring::{
    energy_score, mpi_calibration, summarize, variogram_score, GoodnessOfFit, ScoreReport,
};

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub levels: Vec<f64>,
    pub alphas: Vec<f64>,
    pub n_scenarios: usize,
    pub gamma: f64,
    pub weights: Option<DMatrix<f64>>,
    pub kinds: Vec<CopulaKind>,
    pub seed: u64,
}

impl PipelineOptions {
    pub fn from_config(cfg: &crate::config::RunConfig) -> Self {
        PipelineOptions {
            levels: cfg.levels.clone(),
            alphas: cfg.alphas.clone(),
            n_scenarios: cfg.scenarios,
            gamma: cfg.gamma,
            weights: cfg.weights.as_ref().map(|w| {
                let d = w.len();
                DMatrix::from_fn(d, d, |i, j| w[i][j])
            }),
            kinds: cfg.copula.kinds(),
            seed: cfg.seed,
        }
    }
}

pub fn fit_copula(kind: CopulaKind, u: &DMatrix<f64>) -> Result<Copula> {
    Ok(match kind {
        CopulaKind::Gaussian => Copula::Gaussian(fit_gaussian(u)?),
        CopulaKind::Rvine => Copula::RVine(select_structure(u)?),
    })
}

/// Everything produced for one copula on the evaluation days.
#[derive(Debug, Clone)]
pub struct ModelRun {
    pub copula: Copula,
    pub scenarios: Vec<ScenarioSet>,
    pub mpis: Vec<MpiSet>,
    pub energy: Vec<f64>,
    pub variogram: Vec<f64>,
    pub report: ScoreReport,
}

/// One nested MPI set per day.
pub fn mpis_for(
    scenarios: &[ScenarioSet],
    curves: &[Vec<QuantileCurve>],
    alphas: &[f64],
) -> Result<Vec<MpiSet>> {
    if scenarios.len() != curves.len() {
        return Err(Error::Dimension(format!(
            "{} scenario sets for {} days of curves",
            scenarios.len(),
            curves.len()
        )));
    }
    scenarios
        .par_iter()
        .zip(curves)
        .map(|(s, c)| build_mpi_set(s, c, alphas))
        .collect()
}

/// Per-day energy and variogram scores plus the summary row.
pub struct Scored {
    pub energy: Vec<f64>,
    pub variogram: Vec<f64>,
    pub report: ScoreReport,
}

/// Scores scenarios and MPIs against the observed evaluation days.
pub fn score(
    kind: CopulaKind,
    gof: GoodnessOfFit,
    eval: &[DayMatrix],
    scenarios: &[ScenarioSet],
    mpis: &[MpiSet],
    opts: &PipelineOptions,
) -> Result<Scored> {
    if scenarios.len() != eval.len() || mpis.len() != eval.len() {
        return Err(Error::Dimension(format!(
            "{} scenario sets and {} MPI sets for {} evaluation days",
            scenarios.len(),
            mpis.len(),
            eval.len()
        )));
    }
    if let Some(day) = eval
        .iter()
        .zip(scenarios.iter().zip(mpis))
        .find(|(d, (s, m))| s.day != d.date || m.day != d.date)
    {
        return Err(Error::InvalidInput(format!(
            "scenarios or MPIs are not aligned with evaluation day {}",
            day.0.date
        )));
    }
    let scores: Vec<(f64, f64)> = scenarios
        .par_iter()
        .zip(eval)
        .map(|(s, day)| {
            Ok((
                energy_score(&day.power, &s.values)?,
                variogram_score(&day.power, &s.values, opts.gamma, opts.weights.as_ref())?,
            ))
        })
        .collect::<Result<_>>()?;
    let (energy, variogram): (Vec<f64>, Vec<f64>) = scores.into_iter().unzip();
    let observed: Vec<Vec<f64>> = eval.iter().map(|d| d.power.clone()).collect();
    let coverage = mpi_calibration(mpis, &observed)?;
    let volumes_95 = volumes_at(mpis, 0.95);
    let report = summarize(
        kind.name(),
        gof,
        &energy,
        &variogram,
        &opts.alphas,
        &coverage,
        &volumes_95,
    )?;
    Ok(Scored {
        energy,
        variogram,
        report,
    })
}

/// Scenarios, MPIs and scores of a fitted copula. `gof` describes the
/// copula's fit on the training PITs.
pub fn evaluate(
    copula: Copula,
    gof: GoodnessOfFit,
    eval: &[DayMatrix],
    curves: &[Vec<QuantileCurve>],
    opts: &PipelineOptions,
) -> Result<ModelRun> {
    let scenarios = generate_days(&copula, curves, opts.n_scenarios, opts.seed)?;
    let mpis = mpis_for(&scenarios, curves, &opts.alphas)?;
    let scored = score(copula.kind(), gof, eval, &scenarios, &mpis, opts)?;
    Ok(ModelRun {
        copula,
        scenarios,
        mpis,
        energy: scored.energy,
        variogram: scored.variogram,
        report: scored.report,
    })
}

/// In-sample fit statistics of a copula on `n_obs` training days.
pub fn goodness_of_fit(copula: &Copula, n_obs: usize) -> GoodnessOfFit {
    GoodnessOfFit {
        loglik: copula.loglik(),
        kappa: copula.n_params(),
        n_obs,
    }
}

/// Box volumes at nominal level `alpha` (matched to 1e-12).
pub fn volumes_at(mpis: &[MpiSet], alpha: f64) -> Vec<f64> {
    mpis.iter()
        .filter_map(|s| s.boxes.iter().find(|b| (b.alpha - alpha).abs() < 1e-12))
        .map(|b| b.volume())
        .collect()
}

/// Coverage of the per-hour central intervals taken as a box, ignoring
/// dependence between hours.
pub fn upi_calibration(
    eval: &[DayMatrix],
    curves: &[Vec<QuantileCurve>],
    alphas: &[f64],
) -> Vec<f64> {
    alphas
        .iter()
        .map(|&a| {
            let hits = eval
                .iter()
                .zip(curves)
                .filter(|(day, cs)| {
                    day.power.iter().zip(cs.iter()).all(|(p, c)| {
                        let (l, h) = c.central_interval(a);
                        l <= *p && *p <= h
                    })
                })
                .count();
            hits as f64 / eval.len().max(1) as f64
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpiRow {
    pub alphas: Vec<f64>,
    pub empirical_coverage: Vec<f64>,
    pub avg_deviation_pct: f64,
}

impl UpiRow {
    pub fn new(eval: &[DayMatrix], curves: &[Vec<QuantileCurve>], alphas: &[f64]) -> Self {
        let empirical_coverage = upi_calibration(eval, curves, alphas);
        let avg_deviation_pct = alphas
            .iter()
            .zip(&empirical_coverage)
            .map(|(a, c)| (c - a).abs() * 100.0)
            .sum::<f64>()
            / alphas.len() as f64;
        UpiRow {
            alphas: alphas.to_vec(),
            empirical_coverage,
            avg_deviation_pct,
        }
    }
}

/// The comparison table written by `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub dim: usize,
    pub n_train: usize,
    pub n_eval: usize,
    pub n_scenarios: usize,
    pub seed: u64,
    /// Fit statistics are computed on the training PITs.
    pub models: Vec<ScoreReport>,
    pub upi: UpiRow,
}

pub struct PipelineResult {
    pub marginals: MarginalModel,
    pub train_pit: DMatrix<f64>,
    pub eval_curves: Vec<Vec<QuantileCurve>>,
    pub runs: Vec<ModelRun>,
    pub report: Report,
}

pub fn run(
    train: &[DayMatrix],
    eval: &[DayMatrix],
    feature_names: &[String],
    opts: &PipelineOptions,
) -> Result<PipelineResult> {
    if eval.is_empty() {
        return Err(Error::InvalidInput("no evaluation days".into()));
    }
    let marginals = fit_marginals(train, &opts.levels, feature_names)?;
    let train_curves = marginals.predict_days(train)?;
    let train_pit = pit(train, &train_curves)?;
    let eval_curves = marginals.predict_days(eval)?;
    let mut runs = Vec::new();
    for &kind in &opts.kinds {
        log::info!("fitting {kind} copula on {} training days", train.len());
        let copula = fit_copula(kind, &train_pit)?;
        let gof = goodness_of_fit(&copula, train.len());
        runs.push(evaluate(copula, gof, eval, &eval_curves, opts)?);
    }
    let report = Report {
        dim: marginals.dim(),
        n_train: train.len(),
        n_eval: eval.len(),
        n_scenarios: opts.n_scenarios,
        seed: opts.seed,
        models: runs.iter().map(|r| r.report.clone()).collect(),
        upi: UpiRow::new(eval, &eval_curves, &opts.alphas),
    };
    Ok(PipelineResult {
        marginals,
        train_pit,
        eval_curves,
        runs,
        report,
    })
}
