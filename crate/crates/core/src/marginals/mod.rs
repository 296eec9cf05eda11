//! Per-lead-time linear quantile regression and the piecewise-linear
//! predictive CDFs built from it.

mod curve;
mod quantreg;

use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use curve::{QuantileCurve, KNOT_GAP};
pub use quantreg::{fit_quantile, mean_pinball, pinball, predict, MIN_ROWS_PER_COEF};

use crate::data_io::DayMatrix;
use crate::error::{Error, Result};

/// PIT values are kept this far from 0 and 1.
pub const PIT_EPS: f64 = 1e-6;

/// `0.05, 0.10, ..., 0.95`.
pub fn default_levels() -> Vec<f64> {
    (1..=19).map(|k| k as f64 / 20.0).collect()
}

/// Quantile regressions of one lead-time, one coefficient vector per level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileModel {
    pub lead: usize,
    /// `coefficients[m] = [intercept, w_1, ..., w_K]` for level `m`.
    pub coefficients: Vec<Vec<f64>>,
}

/// The full set of marginal models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalModel {
    pub levels: Vec<f64>,
    pub feature_names: Vec<String>,
    pub leads: Vec<QuantileModel>,
}

fn check_levels(levels: &[f64]) -> Result<()> {
    let ok = !levels.is_empty()
        && levels.iter().all(|&a| a > 0.0 && a < 1.0)
        && levels.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(
            "quantile levels must be strictly increasing within (0, 1)".into(),
        ))
    }
}

impl MarginalModel {
    pub fn dim(&self) -> usize {
        self.leads.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_levels(&self.levels)?;
        let p = self.feature_names.len() + 1;
        for (d, m) in self.leads.iter().enumerate() {
            if m.lead != d
                || m.coefficients.len() != self.levels.len()
                || m.coefficients.iter().any(|c| c.len() != p)
            {
                return Err(Error::Dimension(format!(
                    "lead {d}: expected {} coefficient vectors of length {p}",
                    self.levels.len()
                )));
            }
        }
        Ok(())
    }

    /// Curve of lead `d` given that hour's features.
    pub fn predict_curve(
        &self,
        day: NaiveDate,
        d: usize,
        features: &[f64],
    ) -> Result<QuantileCurve> {
        let model = self
            .leads
            .get(d)
            .ok_or_else(|| Error::Dimension(format!("no model for lead {d}")))?;
        if features.len() != self.feature_names.len() {
            return Err(Error::Dimension(format!(
                "lead {d}: {} features given, model expects {}",
                features.len(),
                self.feature_names.len()
            )));
        }
        let raw = model
            .coefficients
            .iter()
            .map(|c| predict(c, features))
            .collect();
        Ok(QuantileCurve::from_raw(day, d, self.levels.clone(), raw))
    }

    /// One curve per lead-time for `day`.
    pub fn predict_day(&self, day: &DayMatrix) -> Result<Vec<QuantileCurve>> {
        if day.dim() != self.dim() {
            return Err(Error::Dimension(format!(
                "day {} has {} lead-times, model has {}",
                day.date,
                day.dim(),
                self.dim()
            )));
        }
        (0..self.dim())
            .map(|d| self.predict_curve(day.date, d, &day.features[d]))
            .collect()
    }

    pub fn predict_days(&self, days: &[DayMatrix]) -> Result<Vec<Vec<QuantileCurve>>> {
        days.par_iter().map(|d| self.predict_day(d)).collect()
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: MarginalModel = serde_json::from_str(&s)?;
        m.validate()?;
        Ok(m)
    }
}

/// Fits every (lead-time, level) regression on the training days.
pub fn fit_marginals(
    train: &[DayMatrix],
    levels: &[f64],
    feature_names: &[String],
) -> Result<MarginalModel> {
    check_levels(levels)?;
    let first = train
        .first()
        .ok_or_else(|| Error::InvalidInput("no training days".into()))?;
    let (dim, k) = (first.dim(), first.n_features());
    if train
        .iter()
        .any(|d| d.dim() != dim || d.features.iter().any(|f| f.len() != k))
    {
        return Err(Error::Dimension("training days differ in shape".into()));
    }
    let names: Vec<String> = if feature_names.len() == k {
        feature_names.to_vec()
    } else {
        (1..=k).map(|j| format!("f{j}")).collect()
    };
    let jobs: Vec<(usize, usize)> = (0..dim)
        .flat_map(|d| (0..levels.len()).map(move |m| (d, m)))
        .collect();
    let coefs: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(d, m)| {
            let x: Vec<Vec<f64>> = train.iter().map(|t| t.features[d].clone()).collect();
            let y: Vec<f64> = train.iter().map(|t| t.power[d]).collect();
            fit_quantile(&x, &y, levels[m], &names)
        })
        .collect::<Result<_>>()?;
    let leads = coefs
        .chunks(levels.len())
        .enumerate()
        .map(|(d, c)| QuantileModel {
            lead: d,
            coefficients: c.to_vec(),
        })
        .collect();
    Ok(MarginalModel {
        levels: levels.to_vec(),
        feature_names: names,
        leads,
    })
}

/// `T x D` matrix of PIT values, clipped to `[PIT_EPS, 1 - PIT_EPS]`.
pub fn pit(days: &[DayMatrix], curves: &[Vec<QuantileCurve>]) -> Result<DMatrix<f64>> {
    if days.len() != curves.len() {
        return Err(Error::Dimension(format!(
            "{} days but {} curve sets",
            days.len(),
            curves.len()
        )));
    }
    let dim = days.first().map_or(0, DayMatrix::dim);
    for (day, c) in days.iter().zip(curves) {
        if day.dim() != dim || c.len() != dim {
            return Err(Error::Dimension(format!(
                "day {}: {} observations, {} curves, expected {dim}",
                day.date,
                day.dim(),
                c.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(days.len(), dim, |t, d| {
        curves[t][d]
            .cdf(days[t].power[d])
            .clamp(PIT_EPS, 1.0 - PIT_EPS)
    }))
}

/// Curves as CSV: `day,lead,q<level>...`, one row per (day, lead).
pub fn write_curves_csv(path: impl AsRef<Path>, curves: &[Vec<QuantileCurve>]) -> Result<()> {
    let path = path.as_ref();
    let levels = curves
        .first()
        .and_then(|c| c.first())
        .map_or_else(default_levels, |c| c.levels.clone());
    let mut out = String::from("day,lead");
    for a in &levels {
        out.push_str(&format!(",q{a}"));
    }
    out.push('\n');
    for c in curves.iter().flatten() {
        out.push_str(&format!("{},{}", c.day, c.lead + 1));
        for v in &c.values {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a file written by [`write_curves_csv`], grouping rows by day.
pub fn read_curves_csv(path: impl AsRef<Path>) -> Result<Vec<Vec<QuantileCurve>>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Csv {
        path: path.into(),
        message: e.to_string(),
    })?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv {
            path: path.into(),
            message: e.to_string(),
        })?
        .clone();
    let levels: Vec<f64> = headers
        .iter()
        .skip(2)
        .map(|h| h.strip_prefix('q').and_then(|v| v.parse().ok()))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Csv {
            path: path.into(),
            message: "curve header must be day,lead,q<level>...".into(),
        })?;
    check_levels(&levels)?;
    let mut out: Vec<Vec<QuantileCurve>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let bad = |message: String| Error::Parse {
            path: path.into(),
            row,
            message,
        };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let day: NaiveDate = rec[0]
            .parse()
            .map_err(|_| bad(format!("bad day '{}'", &rec[0])))?;
        let lead: usize = rec[1]
            .parse()
            .map_err(|_| bad(format!("bad lead '{}'", &rec[1])))?;
        let values = rec
            .iter()
            .skip(2)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| bad(format!("non-numeric value '{v}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let curve = QuantileCurve::from_raw(day, lead.saturating_sub(1), levels.clone(), values);
        match out.last_mut() {
            Some(group) if group[0].day == day => group.push(curve),
            _ => out.push(vec![curve]),
        }
    }
    Ok(out)
}
