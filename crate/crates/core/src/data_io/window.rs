use std::collections::BTreeMap;

use chrono::{NaiveDate, Timelike};
use log::warn;

use super::csv_io::on_the_hour;
use super::{DayMatrix, Record};
use crate::error::{Error, Result};

/// Complete days plus bookkeeping about what was discarded or altered.
#[derive(Debug, Clone, PartialEq)]
pub struct Windowed {
    pub days: Vec<DayMatrix>,
    /// Days lacking at least one hour of the window.
    pub dropped: Vec<NaiveDate>,
    /// Number of power values clamped into `[0, capacity]`.
    pub clamped: usize,
}

/// Normalizes power by `capacity` and keeps one [`DayMatrix`] per calendar
/// day whose window `hour_start..=hour_end` is complete.
pub fn normalize_and_window(
    records: &[Record],
    capacity: f64,
    hour_start: u32,
    hour_end: u32,
) -> Result<Windowed> {
    if !(capacity > 0.0 && capacity.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "capacity must be positive, got {capacity}"
        )));
    }
    if hour_end < hour_start || hour_end > 23 {
        return Err(Error::InvalidInput(format!(
            "hour window {hour_start}..={hour_end} is empty or out of range"
        )));
    }
    let width = (hour_end - hour_start + 1) as usize;
    let mut by_day: BTreeMap<NaiveDate, Vec<Option<&Record>>> = BTreeMap::new();
    for r in records {
        if !on_the_hour(&r.timestamp) {
            continue;
        }
        let h = r.timestamp.hour();
        let slots = by_day
            .entry(r.timestamp.date())
            .or_insert_with(|| vec![None; width]);
        if (hour_start..=hour_end).contains(&h) {
            slots[(h - hour_start) as usize] = Some(r);
        }
    }

    let mut days = Vec::new();
    let mut dropped = Vec::new();
    let mut clamped = 0;
    for (date, slots) in by_day {
        if slots.iter().any(Option::is_none) {
            dropped.push(date);
            continue;
        }
        let mut power = Vec::with_capacity(width);
        let mut features = Vec::with_capacity(width);
        for r in slots.into_iter().flatten() {
            let p = r.power / capacity;
            if !(0.0..=1.0).contains(&p) {
                clamped += 1;
            }
            power.push(p.clamp(0.0, 1.0));
            features.push(r.features.clone());
        }
        days.push(DayMatrix {
            date,
            hour_start,
            power,
            features,
        });
    }
    if !dropped.is_empty() {
        warn!("dropped {} incomplete day(s)", dropped.len());
    }
    if clamped > 0 {
        warn!("clamped {clamped} power value(s) into [0, capacity]");
    }
    Ok(Windowed {
        days,
        dropped,
        clamped,
    })
}

/// Chronological split: days up to and including `train_end` train the
/// models, the rest are evaluated.
pub fn split(days: &[DayMatrix], train_end: NaiveDate) -> Result<(Vec<DayMatrix>, Vec<DayMatrix>)> {
    let mut sorted = days.to_vec();
    sorted.sort_by_key(|d| d.date);
    let cut = sorted.partition_point(|d| d.date <= train_end);
    if cut == 0 {
        return Err(Error::InvalidInput(format!(
            "train_end {train_end} precedes the first day; training set is empty"
        )));
    }
    if cut == sorted.len() {
        return Err(Error::InvalidInput(format!(
            "train_end {train_end} is on or after the last day; evaluation set is empty"
        )));
    }
    let eval = sorted.split_off(cut);
    Ok((sorted, eval))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Duration;
    use proptest::prelude::*;

    fn day0() -> NaiveDate {
        NaiveDate::from_ymd_opt(2013, 6, 1).unwrap()
    }

    fn records(n_days: usize, hours: std::ops::RangeInclusive<u32>, power: f64) -> Vec<Record> {
        let mut out = Vec::new();
        for t in 0..n_days {
            let date = day0() + Duration::days(t as i64);
            for h in hours.clone() {
                out.push(Record {
                    timestamp: date.and_hms_opt(h, 0, 0).unwrap(),
                    power,
                    features: vec![h as f64],
                });
            }
        }
        out
    }

    #[test]
    fn full_capacity_is_one_and_window_width() {
        let w = normalize_and_window(&records(2, 0..=23, 5.0), 5.0, 7, 17).unwrap();
        assert_eq!(w.days.len(), 2);
        assert_eq!(w.days[0].dim(), 11);
        assert!(w.days[0].power.iter().all(|&p| p == 1.0));
        assert_eq!(w.days[0].features[0], vec![7.0]);
    }

    #[test]
    fn missing_hour_drops_day() {
        let mut recs = records(3, 7..=17, 1.0);
        recs.retain(|r| {
            !(r.timestamp.date() == day0() + Duration::days(1) && r.timestamp.hour() == 12)
        });
        let w = normalize_and_window(&recs, 2.0, 7, 17).unwrap();
        assert_eq!(w.days.len(), 2);
        assert_eq!(w.dropped, vec![day0() + Duration::days(1)]);
    }

    #[test]
    fn bad_capacity_and_window() {
        let recs = records(1, 7..=17, 1.0);
        assert!(normalize_and_window(&recs, 0.0, 7, 17).is_err());
        assert!(normalize_and_window(&recs, -1.0, 7, 17).is_err());
        assert!(normalize_and_window(&recs, 1.0, 17, 7).is_err());
    }

    #[test]
    fn clamping_is_counted() {
        let mut recs = records(1, 7..=8, 1.0);
        recs[0].power = -0.5;
        recs[1].power = 3.0;
        let w = normalize_and_window(&recs, 2.0, 7, 8).unwrap();
        assert_eq!(w.clamped, 2);
        assert_eq!(w.days[0].power, vec![0.0, 1.0]);
    }

    #[test]
    fn split_sizes_and_errors() {
        let w = normalize_and_window(&records(100, 7..=9, 1.0), 1.0, 7, 9).unwrap();
        let (train, eval) = split(&w.days, day0() + Duration::days(59)).unwrap();
        assert_eq!((train.len(), eval.len()), (60, 40));
        assert!(train.last().unwrap().date < eval[0].date);
        assert!(split(&w.days, day0() - Duration::days(1)).is_err());
        assert!(split(&w.days, day0() + Duration::days(99)).is_err());
    }

    proptest! {
        #[test]
        fn normalized_power_is_bounded(
            powers in prop::collection::vec(-50.0f64..50.0, 3),
            cap in 0.1f64..20.0,
        ) {
            let mut recs = records(1, 7..=9, 0.0);
            for (r, p) in recs.iter_mut().zip(&powers) {
                r.power = *p;
            }
            let w = normalize_and_window(&recs, cap, 7, 9).unwrap();
            prop_assert!(w.days[0].power.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }
}
