use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// Minimum knot spacing; tied quantiles are pulled apart by this much so
/// the CDF stays continuous and strictly increasing.
pub const KNOT_GAP: f64 = 1e-12;

/// Predictive quantiles of one lead-time on one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileCurve {
    pub day: NaiveDate,
    pub lead: usize,
    pub levels: Vec<f64>,
    /// Sorted, within `[0, 1]`.
    pub values: Vec<f64>,
}

impl QuantileCurve {
    /// Clamps raw predictions into `[0, 1]` and sorts them (crossing repair).
    pub fn from_raw(day: NaiveDate, lead: usize, levels: Vec<f64>, mut raw: Vec<f64>) -> Self {
        for v in &mut raw {
            *v = v.clamp(0.0, 1.0);
        }
        raw.sort_by(f64::total_cmp);
        QuantileCurve {
            day,
            lead,
            levels,
            values: raw,
        }
    }

    /// `(x, y)` knots including the anchors `(0, 0)` and `(1, 1)`, with x
    /// strictly increasing.
    fn knots(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.values.len();
        let mut x = Vec::with_capacity(m + 2);
        let mut y = Vec::with_capacity(m + 2);
        x.push(0.0);
        y.push(0.0);
        x.extend_from_slice(&self.values);
        y.extend_from_slice(&self.levels);
        x.push(1.0);
        y.push(1.0);
        let last = x.len() - 1;
        for i in 1..last {
            x[i] = x[i].max(x[i - 1] + KNOT_GAP);
        }
        for i in (1..last).rev() {
            x[i] = x[i].min(x[i + 1] - KNOT_GAP);
        }
        (x, y)
    }

    /// All quantiles equal: the marginal is a point mass.
    pub fn point_mass(&self) -> Option<f64> {
        match (self.values.first(), self.values.last()) {
            (Some(&a), Some(&b)) if a == b => Some(a),
            _ => None,
        }
    }

    pub fn cdf(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        if p >= 1.0 {
            return 1.0;
        }
        if let Some(c) = self.point_mass() {
            // Mid-jump at the atom itself.
            return if p < c {
                0.0
            } else if p > c {
                1.0
            } else {
                0.5
            };
        }
        let (x, y) = self.knots();
        let k = x.partition_point(|&v| v <= p) - 1;
        let u = y[k] + (y[k + 1] - y[k]) * (p - x[k]) / (x[k + 1] - x[k]);
        u.clamp(0.0, 1.0)
    }

    pub fn inverse_cdf(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        if let Some(c) = self.point_mass() {
            return c;
        }
        let (x, y) = self.knots();
        let k = y.partition_point(|&v| v <= u) - 1;
        let p = x[k] + (x[k + 1] - x[k]) * (u - y[k]) / (y[k + 1] - y[k]);
        p.clamp(0.0, 1.0)
    }

    /// Central interval `[q((1-a)/2), q((1+a)/2)]`.
    pub fn central_interval(&self, alpha: f64) -> (f64, f64) {
        (
            self.inverse_cdf((1.0 - alpha) / 2.0),
            self.inverse_cdf((1.0 + alpha) / 2.0),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn curve(levels: &[f64], values: &[f64]) -> QuantileCurve {
        QuantileCurve {
            day: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            lead: 0,
            levels: levels.to_vec(),
            values: values.to_vec(),
        }
    }

    #[test]
    fn interpolation_examples() {
        let c = curve(&[0.25, 0.5, 0.75], &[0.2, 0.4, 0.6]);
        assert!((c.cdf(0.3) - 0.375).abs() < 1e-15);
        assert_eq!(c.cdf(0.4), 0.5);
        assert_eq!(c.cdf(0.0), 0.0);
        assert_eq!(c.cdf(1.0), 1.0);
        assert!((c.cdf(0.1) - 0.125).abs() < 1e-15);
        assert!((c.cdf(0.8) - 0.875).abs() < 1e-15);
        assert!((c.inverse_cdf(0.75) - 0.6).abs() < 1e-15);
        assert_eq!(c.inverse_cdf(0.0), 0.0);
        assert_eq!(c.inverse_cdf(1.0), 1.0);
    }

    #[test]
    fn sorting_and_clamping() {
        let day = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let c = QuantileCurve::from_raw(day, 0, vec![0.25, 0.5, 0.75], vec![0.3, 0.2, 0.4]);
        assert_eq!(c.values, vec![0.2, 0.3, 0.4]);
        let c = QuantileCurve::from_raw(day, 0, vec![0.25, 0.5, 0.75], vec![0.3, 1.2, -0.1]);
        assert_eq!(c.values, vec![0.0, 0.3, 1.0]);
    }

    #[test]
    fn point_mass_curve_inverts_to_the_mass() {
        let levels: Vec<f64> = (1..=19).map(|k| k as f64 / 20.0).collect();
        for c0 in [0.0, 0.42, 1.0] {
            let c = curve(&levels, &vec![c0; 19]);
            for u in [1e-6, 0.05, 0.3, 0.5, 0.9, 0.95, 1.0 - 1e-6] {
                assert!((c.inverse_cdf(u) - c0).abs() < 1e-9);
            }
        }
    }

    fn arb_curve() -> impl Strategy<Value = QuantileCurve> {
        prop::collection::vec(0.0f64..1.0, 19).prop_map(|mut v| {
            v.sort_by(f64::total_cmp);
            curve(&(1..=19).map(|k| k as f64 / 20.0).collect::<Vec<_>>(), &v)
        })
    }

    proptest! {
        #[test]
        fn cdf_is_monotone_and_onto(c in arb_curve(), ps in prop::collection::vec(0.0f64..=1.0, 50)) {
            let mut ps = ps;
            ps.sort_by(f64::total_cmp);
            let us: Vec<f64> = ps.iter().map(|&p| c.cdf(p)).collect();
            prop_assert!(us.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(us.iter().all(|u| (0.0..=1.0).contains(u)));
            prop_assert_eq!(c.cdf(0.0), 0.0);
            prop_assert_eq!(c.cdf(1.0), 1.0);
        }

        #[test]
        fn inverse_round_trip(gaps in prop::collection::vec(0.001f64..1.0, 20), p in 0.0f64..=1.0) {
            let total: f64 = gaps.iter().sum();
            let mut acc = 0.0;
            let values: Vec<f64> = gaps[..19].iter().map(|g| { acc += g / total; acc }).collect();
            let c = curve(&(1..=19).map(|k| k as f64 / 20.0).collect::<Vec<_>>(), &values);
            prop_assert!((c.inverse_cdf(c.cdf(p)) - p).abs() < 1e-9);
            for (q, a) in c.values.iter().zip(&c.levels) {
                prop_assert!((c.cdf(*q) - a).abs() < 1e-12);
                prop_assert!((c.inverse_cdf(*a) - q).abs() < 1e-12);
            }
        }
    }
}
