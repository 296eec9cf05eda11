//! Run configuration. Defaults follow the evaluation protocol: 19 levels
//! 0.05..0.95, 500 scenarios, variogram order 0.5 with unit weights and
//! the 7..=17 hour window.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::copula::CopulaKind;
use crate::data_io::{
    csv_feature_names, load_csv, normalize_and_window, split, CsvSchema, DayMatrix, TruthSpec,
};
use crate::error::{Error, Result};
use crate::marginals::default_levels;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CopulaChoice {
    Gaussian,
    Rvine,
    Both,
}

impl CopulaChoice {
    pub fn kinds(self) -> Vec<CopulaKind> {
        match self {
            CopulaChoice::Gaussian => vec![CopulaKind::Gaussian],
            CopulaChoice::Rvine => vec![CopulaKind::Rvine],
            CopulaChoice::Both => vec![CopulaKind::Gaussian, CopulaKind::Rvine],
        }
    }
}

/// Share of days used for training when no `train_end` is given.
pub const DEFAULT_TRAIN_SHARE: f64 = 0.6;

/// Windowed days split into training and evaluation parts.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Vec<DayMatrix>,
    pub eval: Vec<DayMatrix>,
    pub feature_names: Vec<String>,
    /// Incomplete days left out.
    pub dropped: usize,
}

/// Settings for generating a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_days: usize,
    /// Truth specification; `None` uses the default asymmetric D-vine.
    pub truth: Option<TruthSpec>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_days: 730,
            truth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Input CSV (`timestamp,power,f1..fK`). Relative paths resolve
    /// against the config file's directory.
    pub data: Option<PathBuf>,
    pub capacity: f64,
    pub hour_start: u32,
    pub hour_end: u32,
    /// Last training day (inclusive); `None` trains on the first 60 % of days.
    pub train_end: Option<NaiveDate>,
    pub feature_columns: Vec<String>,
    pub levels: Vec<f64>,
    pub alphas: Vec<f64>,
    pub scenarios: usize,
    pub gamma: f64,
    /// Variogram weights (`D x D`, row-major); `None` means all ones.
    pub weights: Option<Vec<Vec<f64>>>,
    pub copula: CopulaChoice,
    pub seed: u64,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            capacity: 1.0,
            hour_start: 7,
            hour_end: 17,
            train_end: None,
            feature_columns: Vec::new(),
            levels: default_levels(),
            alphas: default_levels(),
            scenarios: 500,
            gamma: 0.5,
            weights: None,
            copula: CopulaChoice::Both,
            seed: 20_240_601,
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn dim(&self) -> usize {
        (self.hour_end.saturating_sub(self.hour_start) + 1) as usize
    }

    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            feature_columns: self.feature_columns.clone(),
            ..CsvSchema::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.capacity > 0.0 && self.capacity.is_finite()) {
            return bad(format!("capacity must be positive, got {}", self.capacity));
        }
        if self.hour_end < self.hour_start || self.hour_end > 23 {
            return bad(format!(
                "hour window {}..={} is empty or out of range",
                self.hour_start, self.hour_end
            ));
        }
        for (name, v) in [("levels", &self.levels), ("alphas", &self.alphas)] {
            let ok = !v.is_empty()
                && v.iter().all(|&a| a > 0.0 && a < 1.0)
                && v.windows(2).all(|w| w[0] < w[1]);
            if !ok {
                return bad(format!("{name} must be strictly increasing within (0, 1)"));
            }
        }
        if self.scenarios == 0 {
            return bad("scenarios must be at least 1".into());
        }
        if !(self.gamma > 0.0) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if let Some(w) = &self.weights {
            let d = self.dim();
            if w.len() != d
                || w.iter()
                    .any(|r| r.len() != d || r.iter().any(|v| !(*v >= 0.0)))
            {
                return bad(format!("weights must be a nonnegative {d} x {d} matrix"));
            }
        }
        if self.synth.n_days < 2 {
            return bad("synth.n_days must be at least 2".into());
        }
        Ok(())
    }

    /// Reads and validates a config file; `data` is resolved relative to it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)?;
        if let (Some(data), Some(dir)) = (&cfg.data, path.parent()) {
            if data.is_relative() {
                cfg.data = Some(dir.join(data));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Last training day: `train_end`, or the day closing the first
    /// [`DEFAULT_TRAIN_SHARE`] of `days` (which must be sorted).
    pub fn train_end_for(&self, days: &[DayMatrix]) -> Result<NaiveDate> {
        if let Some(d) = self.train_end {
            return Ok(d);
        }
        if days.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 complete days to split, got {}",
                days.len()
            )));
        }
        let n_train =
            ((days.len() as f64 * DEFAULT_TRAIN_SHARE).round() as usize).clamp(1, days.len() - 1);
        Ok(days[n_train - 1].date)
    }

    /// Loads `data`, normalizes by capacity, windows and splits.
    pub fn prepare(&self, data: &Path) -> Result<Prepared> {
        let schema = self.schema();
        let records = load_csv(data, &schema)?;
        let feature_names = csv_feature_names(data, &schema)?;
        let w = normalize_and_window(&records, self.capacity, self.hour_start, self.hour_end)?;
        let end = self.train_end_for(&w.days)?;
        let (train, eval) = split(&w.days, end)?;
        Ok(Prepared {
            train,
            eval,
            feature_names,
            dropped: w.dropped.len(),
        })
    }

    /// The truth used by `synth`, sized to the hour window.
    pub fn truth(&self) -> Result<TruthSpec> {
        let mut t = self
            .synth
            .truth
            .clone()
            .unwrap_or_else(|| TruthSpec::default_for(self.dim()));
        if t.dim() != self.dim() {
            return Err(Error::Dimension(format!(
                "truth has dimension {}, hour window has {}",
                t.dim(),
                self.dim()
            )));
        }
        t.hour_start = self.hour_start;
        Ok(t)
    }
}
