//! Goodness of fit, multivariate scores and interval calibration.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mpi::MpiSet;
use crate::rvine::{aic, bic};

fn check_dims(obs: &[f64], scen: &DMatrix<f64>) -> Result<()> {
    if scen.nrows() == 0 {
        return Err(Error::InvalidInput("no scenarios".into()));
    }
    if scen.ncols() != obs.len() {
        return Err(Error::Dimension(format!(
            "observation has {} values, scenarios have {}",
            obs.len(),
            scen.ncols()
        )));
    }
    Ok(())
}

fn dist(a: impl Iterator<Item = f64>, b: impl Iterator<Item = f64>) -> f64 {
    a.zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `(1/S) sum_s |P - X_s| - (1/(2 S^2)) sum_{s,s'} |X_s - X_s'|`.
pub fn energy_score(obs: &[f64], scen: &DMatrix<f64>) -> Result<f64> {
    check_dims(obs, scen)?;
    let s = scen.nrows();
    let first: f64 = (0..s)
        .map(|i| dist(obs.iter().copied(), scen.row(i).iter().copied()))
        .sum();
    // Row-major copy keeps the O(S^2 D) loop cache-friendly.
    let d = scen.ncols();
    let rows: Vec<f64> = (0..s)
        .flat_map(|i| scen.row(i).iter().copied().collect::<Vec<_>>())
        .collect();
    let mut pair = 0.0;
    for i in 0..s {
        let a = &rows[i * d..(i + 1) * d];
        for j in (i + 1)..s {
            let b = &rows[j * d..(j + 1) * d];
            pair += dist(a.iter().copied(), b.iter().copied());
        }
    }
    let sf = s as f64;
    Ok(first / sf - pair / (sf * sf))
}

/// `sum_{i,j} w_ij (|P_i - P_j|^g - (1/S) sum_s |X_si - X_sj|^g)^2` over
/// ordered pairs; `weights = None` means all ones.
pub fn variogram_score(
    obs: &[f64],
    scen: &DMatrix<f64>,
    gamma: f64,
    weights: Option<&DMatrix<f64>>,
) -> Result<f64> {
    check_dims(obs, scen)?;
    if !(gamma > 0.0) {
        return Err(Error::InvalidInput(format!(
            "variogram order {gamma} must be positive"
        )));
    }
    let d = obs.len();
    if let Some(w) = weights {
        if w.shape() != (d, d) || w.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "weights must be a nonnegative {d} x {d} matrix"
            )));
        }
    }
    let s = scen.nrows() as f64;
    let mut total = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            let w = weights.map_or(1.0, |w| w[(i, j)]);
            if w == 0.0 {
                continue;
            }
            let vo = (obs[i] - obs[j]).abs().powf(gamma);
            let vs = scen
                .row_iter()
                .map(|r| (r[i] - r[j]).abs().powf(gamma))
                .sum::<f64>()
                / s;
            total += w * (vo - vs) * (vo - vs);
        }
    }
    Ok(total)
}

/// Per level, the share of days whose whole observed trajectory lies in
/// that day's box.
pub fn mpi_calibration(mpis: &[MpiSet], observed: &[Vec<f64>]) -> Result<Vec<f64>> {
    if mpis.len() != observed.len() {
        return Err(Error::Dimension(format!(
            "{} MPI days but {} observed trajectories",
            mpis.len(),
            observed.len()
        )));
    }
    let first = mpis
        .first()
        .ok_or_else(|| Error::InvalidInput("no MPI days".into()))?;
    let alphas: Vec<f64> = first.boxes.iter().map(|b| b.alpha).collect();
    let mut hits = vec![0usize; alphas.len()];
    for (set, obs) in mpis.iter().zip(observed) {
        if set.boxes.len() != alphas.len()
            || set.boxes.iter().zip(&alphas).any(|(b, a)| b.alpha != *a)
        {
            return Err(Error::Dimension(format!(
                "day {} uses different levels",
                set.day
            )));
        }
        for (k, b) in set.boxes.iter().enumerate() {
            if b.lower.len() != obs.len() {
                return Err(Error::Dimension(format!(
                    "day {}: box of dimension {} vs trajectory of {}",
                    set.day,
                    b.lower.len(),
                    obs.len()
                )));
            }
            if b.contains(obs) {
                hits[k] += 1;
            }
        }
    }
    Ok(hits
        .into_iter()
        .map(|h| h as f64 / mpis.len() as f64)
        .collect())
}

/// One model row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub model: String,
    pub loglik: f64,
    pub kappa: usize,
    pub aic: f64,
    pub bic: f64,
    pub energy_score: f64,
    pub variogram_score: f64,
    /// Mean of `|empirical - nominal| * 100` over the levels.
    pub avg_deviation_pct: f64,
    /// Mean volume of the boxes at level 0.95 (NaN if that level is absent).
    pub avg_volume_95: f64,
    pub alphas: Vec<f64>,
    pub empirical_coverage: Vec<f64>,
}

/// Fit statistics entering the report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodnessOfFit {
    pub loglik: f64,
    pub kappa: usize,
    pub n_obs: usize,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn summarize(
    model: &str,
    gof: GoodnessOfFit,
    es: &[f64],
    vs: &[f64],
    alphas: &[f64],
    coverage: &[f64],
    volumes_95: &[f64],
) -> Result<ScoreReport> {
    if es.is_empty() || vs.is_empty() || alphas.is_empty() {
        return Err(Error::InvalidInput("nothing to summarize".into()));
    }
    if alphas.len() != coverage.len() {
        return Err(Error::Dimension(format!(
            "{} levels but {} coverages",
            alphas.len(),
            coverage.len()
        )));
    }
    let deviation: Vec<f64> = alphas
        .iter()
        .zip(coverage)
        .map(|(a, c)| (c - a).abs() * 100.0)
        .collect();
    Ok(ScoreReport {
        model: model.to_string(),
        loglik: gof.loglik,
        kappa: gof.kappa,
        aic: aic(gof.loglik, gof.kappa),
        bic: bic(gof.loglik, gof.kappa, gof.n_obs as f64),
        energy_score: mean(es),
        variogram_score: mean(vs),
        avg_deviation_pct: mean(&deviation),
        avg_volume_95: if volumes_95.is_empty() {
            f64::NAN
        } else {
            mean(volumes_95)
        },
        alphas: alphas.to_vec(),
        empirical_coverage: coverage.to_vec(),
    })
}

/// CSV `alpha,empirical`.
pub fn write_reliability_csv(
    alphas: &[f64],
    empirical: &[f64],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("alpha,empirical\n");
    for (a, e) in alphas.iter().zip(empirical) {
        let _ = writeln!(out, "{a},{e}");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_reliability_csv(path: impl AsRef<Path>) -> Result<(Vec<f64>, Vec<f64>)> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Csv {
        path: path.into(),
        message: e.to_string(),
    })?;
    let mut alphas = Vec::new();
    let mut emp = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let bad = |m: String| Error::Parse {
            path: path.into(),
            row: i + 2,
            message: m,
        };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |k: usize| {
            rec.get(k)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| bad(format!("column {} is not numeric", k + 1)))
        };
        alphas.push(num(0)?);
        emp.push(num(1)?);
    }
    Ok((alphas, emp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpi::Mpi;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn rows(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, v)
    }

    #[test]
    fn energy_score_examples() {
        let obs = [0.2, 0.4];
        assert_eq!(
            energy_score(&obs, &rows(3, 2, &[0.2, 0.4, 0.2, 0.4, 0.2, 0.4])).unwrap(),
            0.0
        );
        let es = energy_score(&obs, &rows(1, 2, &[0.5, 0.0])).unwrap();
        assert!((es - 0.5).abs() < 1e-12);
        let es = energy_score(&[0.0], &rows(2, 1, &[-1.0, 1.0])).unwrap();
        assert!((es - 0.5).abs() < 1e-12);
        assert!(energy_score(&[0.0, 1.0], &rows(2, 1, &[-1.0, 1.0])).is_err());
    }

    #[test]
    fn variogram_score_examples() {
        let vs = variogram_score(&[0.0, 4.0], &rows(1, 2, &[0.0, 1.0]), 0.5, None).unwrap();
        assert!((vs - 2.0).abs() < 1e-12);
        assert_eq!(
            variogram_score(&[0.3], &rows(2, 1, &[0.1, 0.9]), 0.5, None).unwrap(),
            0.0
        );
        let obs = [0.1, 0.7, 0.3];
        let same = rows(2, 3, &[0.1, 0.7, 0.3, 0.1, 0.7, 0.3]);
        assert_eq!(variogram_score(&obs, &same, 0.5, None).unwrap(), 0.0);
        assert!(variogram_score(&obs, &same, 0.0, None).is_err());
    }

    fn brute_calibration(mpis: &[MpiSet], obs: &[Vec<f64>]) -> Vec<f64> {
        (0..mpis[0].boxes.len())
            .map(|k| {
                let mut n = 0;
                for (m, o) in mpis.iter().zip(obs) {
                    let mut ok = true;
                    for d in 0..o.len() {
                        if o[d] < m.boxes[k].lower[d] || o[d] > m.boxes[k].upper[d] {
                            ok = false;
                        }
                    }
                    n += ok as usize;
                }
                n as f64 / obs.len() as f64
            })
            .collect()
    }

    fn cube_set(dim: usize) -> MpiSet {
        MpiSet {
            day: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            boxes: vec![0.5, 0.9]
                .into_iter()
                .map(|alpha| Mpi {
                    alpha,
                    lower: vec![0.0; dim],
                    upper: vec![1.0; dim],
                    coverage: 1.0,
                })
                .collect(),
        }
    }

    #[test]
    fn calibration_examples() {
        let obs = vec![vec![0.0, 1.0], vec![0.3, 0.3]];
        assert_eq!(
            mpi_calibration(&[cube_set(2), cube_set(2)], &obs).unwrap(),
            vec![1.0, 1.0]
        );
        let mut narrow = cube_set(2);
        narrow.boxes[0].upper[1] = 0.9;
        let got = mpi_calibration(&[narrow, cube_set(2)], &obs).unwrap();
        assert_eq!(got, vec![0.5, 1.0]);
        assert!(mpi_calibration(&[cube_set(2)], &obs).is_err());
    }

    #[test]
    fn summary_examples() {
        let gof = GoodnessOfFit {
            loglik: 396.573,
            kappa: 55,
            n_obs: 365,
        };
        let alphas: Vec<f64> = (1..=19).map(|k| k as f64 / 20.0).collect();
        let r = summarize(
            "gaussian",
            gof,
            &[0.07; 4],
            &[0.2; 4],
            &alphas,
            &alphas,
            &[0.01],
        )
        .unwrap();
        assert!((r.energy_score - 0.07).abs() < 1e-15);
        assert_eq!(r.avg_deviation_pct, 0.0);
        assert!((r.aic + 683.146).abs() < 0.01);
        let shifted: Vec<f64> = alphas.iter().map(|a| a + 0.02).collect();
        let r = summarize("rvine", gof, &[1.0], &[1.0], &alphas, &shifted, &[]).unwrap();
        assert!((r.avg_deviation_pct - 2.0).abs() < 1e-9);
        assert!(r.avg_volume_95.is_nan());
    }

    #[test]
    fn reliability_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rel.csv");
        write_reliability_csv(&[0.05, 0.5], &[0.04, 0.52], &p).unwrap();
        assert_eq!(
            read_reliability_csv(&p).unwrap(),
            (vec![0.05, 0.5], vec![0.04, 0.52])
        );
    }

    fn arb_case() -> impl Strategy<Value = (Vec<f64>, DMatrix<f64>)> {
        (1usize..5, 1usize..12).prop_flat_map(|(d, s)| {
            (
                prop::collection::vec(0.0f64..1.0, d),
                prop::collection::vec(0.0f64..1.0, d * s)
                    .prop_map(move |v| DMatrix::from_row_slice(s, d, &v)),
            )
        })
    }

    proptest! {
        #[test]
        fn scaling_laws((obs, scen) in arb_case(), lambda in 0.1f64..10.0, gamma in 0.2f64..2.0) {
            let es = energy_score(&obs, &scen).unwrap();
            let vs = variogram_score(&obs, &scen, gamma, None).unwrap();
            prop_assert!(es >= -1e-12 && vs >= 0.0);
            let obs2: Vec<f64> = obs.iter().map(|v| v * lambda).collect();
            let scen2 = &scen * lambda;
            let es2 = energy_score(&obs2, &scen2).unwrap();
            let vs2 = variogram_score(&obs2, &scen2, gamma, None).unwrap();
            prop_assert!((es2 - lambda * es).abs() <= 1e-9 * (1.0 + es2.abs()));
            prop_assert!((vs2 - lambda.powf(2.0 * gamma) * vs).abs() <= 1e-9 * (1.0 + vs2.abs()));
        }

        #[test]
        fn es_permutation_invariant((obs, scen) in arb_case()) {
            let rev = DMatrix::from_fn(scen.nrows(), scen.ncols(), |i, j| scen[(scen.nrows() - 1 - i, j)]);
            let a = energy_score(&obs, &scen).unwrap();
            let b = energy_score(&obs, &rev).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn calibration_matches_brute_force(seed in 0u64..1000, days in 1usize..8, dim in 1usize..4) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mpis: Vec<MpiSet> = (0..days)
                .map(|_| MpiSet {
                    day: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
                    boxes: [0.3, 0.6, 0.9]
                        .iter()
                        .map(|&alpha| {
                            let lower: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..0.5)).collect();
                            let upper = lower.iter().map(|l| l + rng.random_range(0.0..0.5)).collect();
                            Mpi { alpha, lower, upper, coverage: f64::NAN }
                        })
                        .collect(),
                })
                .collect();
            let obs: Vec<Vec<f64>> = (0..days).map(|_| (0..dim).map(|_| rng.random()).collect()).collect();
            prop_assert_eq!(mpi_calibration(&mpis, &obs).unwrap(), brute_calibration(&mpis, &obs));
        }
    }
}
