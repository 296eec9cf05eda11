//! Time-series ingestion, day windowing, train/evaluation split and
//! synthetic data with known dependence.

mod csv_io;
mod synth;
mod window;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

pub use csv_io::{csv_feature_names, load_csv, read_days_csv, write_days_csv, CsvSchema};
pub use synth::{
    synth_generate, synth_true_pit, CopulaTruth, MarginalShape, MarginalTruth, SynthDataset,
    TruthEdge, TruthSpec,
};
pub use window::{normalize_and_window, split, Windowed};

/// One hourly observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub timestamp: NaiveDateTime,
    pub power: f64,
    pub features: Vec<f64>,
}

/// One calendar day restricted to the hour window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayMatrix {
    pub date: NaiveDate,
    /// First hour of the window, so lead-time `d` is hour `hour_start + d`.
    pub hour_start: u32,
    /// Normalized power per lead-time, in `[0, 1]`.
    pub power: Vec<f64>,
    /// Explanatory variables per lead-time.
    pub features: Vec<Vec<f64>>,
}

impl DayMatrix {
    pub fn dim(&self) -> usize {
        self.power.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }
}
