use chrono::{Duration, NaiveDate};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::DayMatrix;
use crate::bicop::{BivariateCopula, Family};
use crate::copula::Copula;
use crate::error::{Error, Result};
use crate::gaussian_copula::GaussianCopulaModel;
use crate::marginals::{default_levels, QuantileCurve};
use crate::rvine::{EdgeJson, EdgeSpec, RVineModel};
use crate::seeds::derive_seed;
use crate::special::{beta_cdf, beta_quantile};

/// A vine edge in the truth file (1-based variable labels).
pub type TruthEdge = EdgeJson;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum CopulaTruth {
    /// Row-major `D x D` correlation matrix.
    Gaussian {
        corr: Vec<Vec<f64>>,
    },
    Rvine {
        edges: Vec<TruthEdge>,
    },
}

/// How copula draws become power values. Either way the true conditional
/// quantiles are linear in the capacity feature `cap(t, d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalShape {
    /// `cap * Beta^-1(u; a, b)`: support `[0, cap]`.
    ScaledBeta,
    /// Piecewise-linear quantile function through `(alpha_m, cap *
    /// Beta^-1(alpha_m; a, b))` at the 19 default levels, with linear tails
    /// to `(0, 0)` and `(1, 1)`; exactly representable by the fitted curves.
    BetaKnots,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarginalTruth {
    pub beta_a: f64,
    pub beta_b: f64,
    pub shape: MarginalShape,
}

impl Default for MarginalTruth {
    fn default() -> Self {
        MarginalTruth {
            beta_a: 2.0,
            beta_b: 2.5,
            shape: MarginalShape::BetaKnots,
        }
    }
}

impl MarginalTruth {
    fn knots(&self, cap: f64) -> QuantileCurve {
        let levels = default_levels();
        let values = levels
            .iter()
            .map(|&a| cap * beta_quantile(a, self.beta_a, self.beta_b))
            .collect();
        QuantileCurve::from_raw(NaiveDate::MIN, 0, levels, values)
    }

    /// Power at uniform level `u` for capacity `cap`.
    pub fn quantile(&self, u: f64, cap: f64) -> f64 {
        match self.shape {
            MarginalShape::ScaledBeta => cap * beta_quantile(u, self.beta_a, self.beta_b),
            MarginalShape::BetaKnots => self.knots(cap).inverse_cdf(u),
        }
    }

    pub fn cdf(&self, p: f64, cap: f64) -> f64 {
        match self.shape {
            MarginalShape::ScaledBeta => {
                beta_cdf((p / cap).clamp(0.0, 1.0), self.beta_a, self.beta_b)
            }
            MarginalShape::BetaKnots => self.knots(cap).cdf(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSpec {
    pub copula: CopulaTruth,
    #[serde(default)]
    pub marginal: MarginalTruth,
    /// Pure-noise features appended after the capacity feature.
    #[serde(default = "one")]
    pub noise_features: usize,
    #[serde(default = "default_start")]
    pub start_date: NaiveDate,
    #[serde(default = "default_hour_start")]
    pub hour_start: u32,
}

fn one() -> usize {
    1
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 1).unwrap()
}

fn default_hour_start() -> u32 {
    7
}

impl TruthSpec {
    /// An asymmetric D-vine: tail-dependent families between neighbouring
    /// hours, Frank one lag further, independence beyond.
    pub fn default_for(dim: usize) -> Self {
        let tree1 = [
            (Family::Clayton, 2.0),
            (Family::Gumbel, 2.0),
            (Family::SurvivalClayton, 1.5),
            (Family::SurvivalGumbel, 1.8),
        ];
        let mut edges = Vec::new();
        for i in 0..dim.saturating_sub(1) {
            let (family, theta) = tree1[i % tree1.len()];
            edges.push(truth_edge(i, i + 1, vec![], family, theta));
        }
        for i in 0..dim.saturating_sub(2) {
            edges.push(truth_edge(i, i + 2, vec![i + 1], Family::Frank, 2.0));
        }
        for k in 3..dim {
            for i in 0..(dim - k) {
                edges.push(truth_edge(
                    i,
                    i + k,
                    ((i + 1)..(i + k)).collect(),
                    Family::Independence,
                    0.0,
                ));
            }
        }
        TruthSpec {
            copula: CopulaTruth::Rvine { edges },
            marginal: MarginalTruth::default(),
            noise_features: 1,
            start_date: default_start(),
            hour_start: default_hour_start(),
        }
    }

    pub fn dim(&self) -> usize {
        match &self.copula {
            CopulaTruth::Gaussian { corr } => corr.len(),
            CopulaTruth::Rvine { edges } => {
                edges.iter().filter(|e| e.cond_set.is_empty()).count() + 1
            }
        }
    }

    pub fn build_copula(&self) -> Result<Copula> {
        match &self.copula {
            CopulaTruth::Gaussian { corr } => {
                let d = corr.len();
                if corr.iter().any(|r| r.len() != d) {
                    return Err(Error::Dimension("truth correlation must be square".into()));
                }
                let m = DMatrix::from_fn(d, d, |i, j| corr[i][j]);
                Ok(Copula::Gaussian(GaussianCopulaModel::new(m)?))
            }
            CopulaTruth::Rvine { edges } => {
                let d = self.dim();
                let label = |v: usize| {
                    if v == 0 || v > d {
                        Err(Error::InvalidStructure(format!(
                            "label {v} outside 1..={d}"
                        )))
                    } else {
                        Ok(v - 1)
                    }
                };
                let specs = edges
                    .iter()
                    .map(|e| {
                        Ok(EdgeSpec::new(
                            (label(e.cond_pair[0])?, label(e.cond_pair[1])?),
                            e.cond_set
                                .iter()
                                .map(|&v| label(v))
                                .collect::<Result<_>>()?,
                            e.copula,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Copula::RVine(RVineModel::from_edges(d, specs)?))
            }
        }
    }
}

fn truth_edge(a: usize, b: usize, cond: Vec<usize>, family: Family, theta: f64) -> TruthEdge {
    EdgeJson {
        tree: cond.len() + 1,
        cond_pair: [a + 1, b + 1],
        cond_set: cond.into_iter().map(|v| v + 1).collect(),
        copula: BivariateCopula::new(family, theta).expect("valid default truth"),
    }
}

/// Clear-sky style capacity: a diurnal bell times a mild seasonal swing.
pub(crate) fn capacity_profile(t: usize, d: usize, dim: usize) -> f64 {
    let diurnal = 0.15 + 0.85 * (std::f64::consts::PI * (d + 1) as f64 / (dim + 1) as f64).sin();
    let seasonal = 0.8 + 0.2 * (2.0 * std::f64::consts::PI * t as f64 / 365.25).cos();
    diurnal * seasonal
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub days: Vec<DayMatrix>,
    /// The copula draws behind each day (`n_days x D`).
    pub uniforms: DMatrix<f64>,
}

/// Days whose dependence is exactly `truth`. Deterministic in `seed`.
pub fn synth_generate(truth: &TruthSpec, n_days: usize, seed: u64) -> Result<SynthDataset> {
    let MarginalTruth { beta_a, beta_b, .. } = truth.marginal;
    if !(beta_a > 0.0 && beta_b > 0.0) {
        return Err(Error::InvalidInput(
            "Beta shape parameters must be positive".into(),
        ));
    }
    let dim = truth.dim();
    if truth.hour_start as usize + dim > 24 {
        return Err(Error::InvalidInput(format!(
            "{dim} hours from {}:00 do not fit in a day",
            truth.hour_start
        )));
    }
    let copula = truth.build_copula()?;
    let uniforms = copula.sample(n_days, derive_seed(seed, "synth-copula", 0))?;
    let mut noise = ChaCha8Rng::seed_from_u64(derive_seed(seed, "synth-noise", 0));
    let days = (0..n_days)
        .map(|t| {
            let mut power = Vec::with_capacity(dim);
            let mut features = Vec::with_capacity(dim);
            for d in 0..dim {
                let cap = capacity_profile(t, d, dim);
                power.push(truth.marginal.quantile(uniforms[(t, d)], cap));
                let mut f = vec![cap];
                f.extend((0..truth.noise_features).map(|_| {
                    let z: f64 = StandardNormal.sample(&mut noise);
                    z
                }));
                features.push(f);
            }
            DayMatrix {
                date: truth.start_date + Duration::days(t as i64),
                hour_start: truth.hour_start,
                power,
                features,
            }
        })
        .collect();
    Ok(SynthDataset { days, uniforms })
}

/// PIT under the true marginals (feature 0 must be the capacity).
pub fn synth_true_pit(truth: &TruthSpec, day: &DayMatrix) -> Vec<f64> {
    day.power
        .iter()
        .zip(&day.features)
        .map(|(&p, f)| truth.marginal.cdf(p, f[0]))
        .collect()
}
