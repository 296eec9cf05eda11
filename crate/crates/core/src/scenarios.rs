//! Scenario generation: copula draws pushed through the inverse marginal CDFs.

use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::copula::{Copula, CopulaKind};
use crate::error::{Error, Result};
use crate::marginals::QuantileCurve;
use crate::seeds::derive_seed;

/// `S` trajectories of one day in power space.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub day: NaiveDate,
    pub kind: Option<CopulaKind>,
    pub seed: u64,
    /// `S x D`, entries in `[0, 1]`.
    pub values: DMatrix<f64>,
}

impl ScenarioSet {
    pub fn n_scenarios(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, s: usize) -> Vec<f64> {
        self.values.row(s).iter().copied().collect()
    }
}

pub fn generate(
    copula: &Copula,
    curves: &[QuantileCurve],
    s: usize,
    seed: u64,
) -> Result<ScenarioSet> {
    if curves.len() != copula.dim() {
        return Err(Error::Dimension(format!(
            "{} marginal curves for a {}-dimensional copula",
            curves.len(),
            copula.dim()
        )));
    }
    let day = curves
        .first()
        .map(|c| c.day)
        .ok_or_else(|| Error::Dimension("no marginal curves".into()))?;
    let u = copula.sample(s, seed)?;
    let values = DMatrix::from_fn(s, curves.len(), |i, d| curves[d].inverse_cdf(u[(i, d)]));
    Ok(ScenarioSet {
        day,
        kind: Some(copula.kind()),
        seed,
        values,
    })
}

/// One set per day, day `t` seeded with `derive_seed(master, "scenarios", t)`.
pub fn generate_days(
    copula: &Copula,
    curves: &[Vec<QuantileCurve>],
    s: usize,
    master_seed: u64,
) -> Result<Vec<ScenarioSet>> {
    curves
        .par_iter()
        .enumerate()
        .map(|(t, c)| {
            generate(
                copula,
                c,
                s,
                derive_seed(master_seed, "scenarios", t as u64),
            )
        })
        .collect()
}

/// CSV `day,scenario,h1..hD`; scenarios numbered from 1.
pub fn export(sets: &[ScenarioSet], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dim = sets.first().map_or(0, ScenarioSet::dim);
    if sets.iter().any(|s| s.dim() != dim) {
        return Err(Error::Dimension("scenario sets differ in dimension".into()));
    }
    let mut out = String::from("day,scenario");
    for d in 1..=dim {
        let _ = write!(out, ",h{d}");
    }
    out.push('\n');
    for set in sets {
        for s in 0..set.n_scenarios() {
            let _ = write!(out, "{},{}", set.day, s + 1);
            for v in set.values.row(s).iter() {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads [`export`] output; consecutive rows of one day form one set.
pub fn import(path: impl AsRef<Path>) -> Result<Vec<ScenarioSet>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Csv {
        path: path.into(),
        message: e.to_string(),
    })?;
    let dim = rdr
        .headers()
        .map_err(|e| Error::Csv {
            path: path.into(),
            message: e.to_string(),
        })?
        .len()
        .saturating_sub(2);
    let mut groups: Vec<(NaiveDate, Vec<f64>)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let bad = |message: String| Error::Parse {
            path: path.into(),
            row: i + 2,
            message,
        };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let day: NaiveDate = rec[0]
            .parse()
            .map_err(|_| bad(format!("bad day '{}'", &rec[0])))?;
        let vals = rec
            .iter()
            .skip(2)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| bad(format!("non-numeric value '{v}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        match groups.last_mut() {
            Some((d, v)) if *d == day => v.extend(vals),
            _ => groups.push((day, vals)),
        }
    }
    Ok(groups
        .into_iter()
        .map(|(day, v)| ScenarioSet {
            day,
            kind: None,
            seed: 0,
            values: DMatrix::from_row_slice(v.len() / dim.max(1), dim, &v),
        })
        .collect())
}
