//! Multivariate prediction intervals: boxes grown from the univariate
//! central intervals until they hold enough whole scenarios.

use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginals::QuantileCurve;
use crate::scenarios::ScenarioSet;

/// Slack when comparing a scenario proportion against a nominal level.
const COVERAGE_TOL: f64 = 1e-9;

/// One box at one nominal level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mpi {
    pub alpha: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Share of scenarios fully inside (NaN when read back from CSV).
    pub coverage: f64,
}

impl Mpi {
    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, h)| h - l)
            .product()
    }

    /// Closed-box membership of a whole trajectory.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(x, (l, h))| *l <= *x && *x <= *h)
    }
}

/// The boxes of one day, ascending in `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpiSet {
    pub day: NaiveDate,
    pub boxes: Vec<Mpi>,
}

/// Share of rows with `l_d <= x_d <= h_d` for every `d`.
pub fn coverage_count(scenarios: &DMatrix<f64>, l: &[f64], h: &[f64]) -> f64 {
    let s = scenarios.nrows();
    if s == 0 {
        return 0.0;
    }
    inside(scenarios, l, h) as f64 / s as f64
}

fn inside(scenarios: &DMatrix<f64>, l: &[f64], h: &[f64]) -> usize {
    (0..scenarios.nrows())
        .filter(|&i| {
            (0..scenarios.ncols()).all(|d| l[d] <= scenarios[(i, d)] && scenarios[(i, d)] <= h[d])
        })
        .count()
}

/// `prod_d (h_d - l_d)`.
pub fn volume(l: &[f64], h: &[f64]) -> Result<f64> {
    if l.len() != h.len() {
        return Err(Error::Dimension(format!(
            "{} lower vs {} upper bounds",
            l.len(),
            h.len()
        )));
    }
    if let Some(d) = (0..l.len()).find(|&d| !(l[d] <= h[d])) {
        return Err(Error::InvalidInput(format!(
            "lower bound {} exceeds upper bound {} in dimension {}",
            l[d],
            h[d],
            d + 1
        )));
    }
    Ok(l.iter().zip(h).map(|(a, b)| b - a).product())
}

fn enough(count: usize, s: usize, alpha: f64) -> bool {
    count as f64 >= alpha * s as f64 - COVERAGE_TOL
}

/// Scenario columns sorted once and reused for every level of a day.
struct Columns<'a> {
    values: &'a DMatrix<f64>,
    /// Per dimension, `(value, row)` ascending in value.
    sorted: Vec<Vec<(f64, usize)>>,
}

impl<'a> Columns<'a> {
    fn new(values: &'a DMatrix<f64>) -> Self {
        let sorted = (0..values.ncols())
            .map(|d| {
                let mut v: Vec<(f64, usize)> = values
                    .column(d)
                    .iter()
                    .copied()
                    .enumerate()
                    .map(|(i, x)| (x, i))
                    .collect();
                v.sort_by(|a, b| a.0.total_cmp(&b.0));
                v
            })
            .collect();
        Columns { values, sorted }
    }

    /// Starts from `(l, h)` and, while fewer than `alpha * S` rows are
    /// inside, moves every bound to the next scenario value outward.
    /// Coverage is tracked through per-row counts of violated dimensions.
    fn widen(&self, mut l: Vec<f64>, mut h: Vec<f64>, alpha: f64) -> Mpi {
        let (s, dim) = self.values.shape();
        let mut violated: Vec<usize> = (0..s)
            .map(|i| {
                (0..dim)
                    .filter(|&d| {
                        let x = self.values[(i, d)];
                        !(l[d] <= x && x <= h[d])
                    })
                    .count()
            })
            .collect();
        let mut count = violated.iter().filter(|&&v| v == 0).count();
        while !enough(count, s, alpha) {
            let mut moved = false;
            for d in 0..dim {
                let col = &self.sorted[d];
                let (l0, h0) = (l[d], h[d]);
                let above = col.partition_point(|p| p.0 <= h0);
                if above < col.len() {
                    h[d] = col[above].0;
                    moved = true;
                }
                let below = col.partition_point(|p| p.0 < l0);
                if below > 0 {
                    l[d] = col[below - 1].0;
                    moved = true;
                }
                let hi_end = col.partition_point(|p| p.0 <= h[d]);
                let lo_start = col.partition_point(|p| p.0 < l[d]);
                let fresh = col[above..hi_end.max(above)].iter().chain(
                    col[lo_start..below.max(lo_start)]
                        .iter()
                        .filter(|p| !(h0 < p.0 && p.0 <= h[d])),
                );
                for &(x, i) in fresh {
                    let was_in = l0 <= x && x <= h0;
                    if !was_in && l[d] <= x && x <= h[d] {
                        violated[i] -= 1;
                        if violated[i] == 0 {
                            count += 1;
                        }
                    }
                }
            }
            if !moved {
                break;
            }
        }
        Mpi {
            alpha,
            lower: l,
            upper: h,
            coverage: count as f64 / s as f64,
        }
    }
}

fn check_inputs(set: &ScenarioSet, upi: &[QuantileCurve], alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!(
            "nominal level {alpha} outside (0, 1)"
        )));
    }
    let (s, dim) = set.values.shape();
    if s == 0 {
        return Err(Error::InvalidInput("empty scenario set".into()));
    }
    if upi.len() != dim {
        return Err(Error::Dimension(format!(
            "{} curves for {dim} dimensions",
            upi.len()
        )));
    }
    Ok(())
}

fn central_box(upi: &[QuantileCurve], alpha: f64) -> (Vec<f64>, Vec<f64>) {
    upi.iter()
        .map(|c| {
            let (a, b) = c.central_interval(alpha);
            (a.clamp(0.0, 1.0), b.clamp(0.0, 1.0))
        })
        .unzip()
}

/// Starts from the central UPI of level `alpha` and, while fewer than
/// `alpha * S` scenarios lie fully inside, moves every bound outward to
/// the next scenario value in its dimension.
pub fn build_mpi(set: &ScenarioSet, upi: &[QuantileCurve], alpha: f64) -> Result<Mpi> {
    check_inputs(set, upi, alpha)?;
    let (l, h) = central_box(upi, alpha);
    Ok(Columns::new(&set.values).widen(l, h, alpha))
}

/// Boxes for every level in `alphas`, made nested by taking the hull with
/// the box of the next lower level whenever the widening broke nesting.
pub fn build_mpi_set(set: &ScenarioSet, upi: &[QuantileCurve], alphas: &[f64]) -> Result<MpiSet> {
    let mut order: Vec<usize> = (0..alphas.len()).collect();
    order.sort_by(|&a, &b| alphas[a].total_cmp(&alphas[b]));
    let mut boxes: Vec<Mpi> = Vec::with_capacity(alphas.len());
    for &a in alphas {
        check_inputs(set, upi, a)?;
    }
    let cols = Columns::new(&set.values);
    for &i in &order {
        let (l, h) = central_box(upi, alphas[i]);
        let mut b = cols.widen(l, h, alphas[i]);
        if let Some(prev) = boxes.last() {
            let mut grew = false;
            for d in 0..b.lower.len() {
                if prev.lower[d] < b.lower[d] {
                    b.lower[d] = prev.lower[d];
                    grew = true;
                }
                if prev.upper[d] > b.upper[d] {
                    b.upper[d] = prev.upper[d];
                    grew = true;
                }
            }
            if grew {
                b.coverage = coverage_count(&set.values, &b.lower, &b.upper);
            }
        }
        boxes.push(b);
    }
    Ok(MpiSet {
        day: set.day,
        boxes,
    })
}

/// CSV `day,alpha,dim,lower,upper`, `dim` counted from 1.
pub fn write_mpi_csv(sets: &[MpiSet], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("day,alpha,dim,lower,upper\n");
    for set in sets {
        for b in &set.boxes {
            for d in 0..b.lower.len() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    set.day,
                    b.alpha,
                    d + 1,
                    b.lower[d],
                    b.upper[d]
                );
            }
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_mpi_csv(path: impl AsRef<Path>) -> Result<Vec<MpiSet>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Csv {
        path: path.into(),
        message: e.to_string(),
    })?;
    let mut sets: Vec<MpiSet> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let bad = |message: String| Error::Parse {
            path: path.into(),
            row,
            message,
        };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 5 {
            return Err(bad(format!("expected 5 fields, got {}", rec.len())));
        }
        let day: NaiveDate = rec[0]
            .parse()
            .map_err(|_| bad(format!("bad day '{}'", &rec[0])))?;
        let num = |k: usize| {
            rec[k]
                .parse::<f64>()
                .map_err(|_| bad(format!("non-numeric value '{}'", &rec[k])))
        };
        let (alpha, lower, upper) = (num(1)?, num(3)?, num(4)?);
        let dim: usize = rec[2]
            .parse()
            .map_err(|_| bad(format!("bad dim '{}'", &rec[2])))?;
        if sets.last().is_none_or(|s| s.day != day) {
            sets.push(MpiSet {
                day,
                boxes: Vec::new(),
            });
        }
        let set = sets.last_mut().expect("pushed above");
        if set.boxes.last().is_none_or(|b| b.alpha != alpha) {
            set.boxes.push(Mpi {
                alpha,
                lower: Vec::new(),
                upper: Vec::new(),
                coverage: f64::NAN,
            });
        }
        let b = set.boxes.last_mut().expect("pushed above");
        if dim != b.lower.len() + 1 {
            return Err(bad(format!("dimension {dim} out of order")));
        }
        b.lower.push(lower);
        b.upper.push(upper);
    }
    Ok(sets)
}

/// Scenario coverages and volumes, per day and averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpiSummary {
    pub alphas: Vec<f64>,
    pub mean_coverage: Vec<f64>,
    pub mean_volume: Vec<f64>,
    pub days: Vec<MpiDaySummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpiDaySummary {
    pub day: NaiveDate,
    pub coverage: Vec<f64>,
    pub volume: Vec<f64>,
}

pub fn summarize_mpis(sets: &[MpiSet]) -> MpiSummary {
    let alphas: Vec<f64> = sets
        .first()
        .map(|s| s.boxes.iter().map(|b| b.alpha).collect())
        .unwrap_or_default();
    let days: Vec<MpiDaySummary> = sets
        .iter()
        .map(|s| MpiDaySummary {
            day: s.day,
            coverage: s.boxes.iter().map(|b| b.coverage).collect(),
            volume: s.boxes.iter().map(Mpi::volume).collect(),
        })
        .collect();
    let mean = |f: &dyn Fn(&MpiDaySummary) -> &Vec<f64>| -> Vec<f64> {
        (0..alphas.len())
            .map(|k| days.iter().map(|d| f(d)[k]).sum::<f64>() / days.len().max(1) as f64)
            .collect()
    };
    MpiSummary {
        mean_coverage: mean(&|d| &d.coverage),
        mean_volume: mean(&|d| &d.volume),
        alphas,
        days,
    }
}
