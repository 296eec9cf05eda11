//! Linear quantile regression by exact descent along the edges of the
//! pinball-loss polytope: a vertex interpolates `p` observations, each edge
//! releases one of them, and the step length is found exactly from the
//! sorted residual breakpoints.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Rows per coefficient required before a fit is attempted.
pub const MIN_ROWS_PER_COEF: usize = 10;

const MAX_ITER: usize = 100_000;

/// `r (tau - 1{r < 0})`.
pub fn pinball(r: f64, tau: f64) -> f64 {
    if r < 0.0 {
        r * (tau - 1.0)
    } else {
        r * tau
    }
}

/// Mean pinball loss of `coef` (intercept first) on rows `x` without intercept.
pub fn mean_pinball(coef: &[f64], x: &[Vec<f64>], y: &[f64], tau: f64) -> f64 {
    let total: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &yi)| pinball(yi - predict(coef, row), tau))
        .sum();
    total / y.len() as f64
}

pub fn predict(coef: &[f64], features: &[f64]) -> f64 {
    coef[0]
        + coef[1..]
            .iter()
            .zip(features)
            .map(|(b, f)| b * f)
            .sum::<f64>()
}

/// Fits `y ~ 1 + x` at quantile level `tau`. `names` label the feature
/// columns in error messages.
pub fn fit_quantile(x: &[Vec<f64>], y: &[f64], tau: f64, names: &[String]) -> Result<Vec<f64>> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidInput(format!(
            "quantile level {tau} outside (0, 1)"
        )));
    }
    let n = y.len();
    if x.len() != n {
        return Err(Error::Dimension(format!(
            "{} feature rows for {n} targets",
            x.len()
        )));
    }
    let k = x.first().map_or(0, Vec::len);
    if x.iter().any(|r| r.len() != k) {
        return Err(Error::Dimension("feature rows differ in length".into()));
    }
    let p = k + 1;
    if n < MIN_ROWS_PER_COEF * p {
        return Err(Error::InvalidInput(format!(
            "quantile regression with {p} coefficients needs at least {} rows, got {n}",
            MIN_ROWS_PER_COEF * p
        )));
    }
    let design = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
    check_collinear(&design, names)?;

    let basis = initial_basis(&design);
    let (coef, basis, degenerate) = descend(&design, y, tau, basis)?;
    if !degenerate {
        return Ok(coef);
    }
    // Ties can stall the descent at a degenerate vertex; a vanishing
    // deterministic jitter of the targets breaks them.
    let scale = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let jittered: Vec<f64> = y
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            v + scale * 1e-11 * (crate::seeds::splitmix64(i as u64) as f64 / u64::MAX as f64 - 0.5)
        })
        .collect();
    let (alt, _, _) = descend(&design, &jittered, tau, basis)?;
    let loss = |c: &[f64]| mean_pinball(c, x, y, tau);
    Ok(if loss(&alt) < loss(&coef) { alt } else { coef })
}

fn check_collinear(design: &DMatrix<f64>, names: &[String]) -> Result<()> {
    let label = |j: usize| {
        if j == 0 {
            "intercept".to_string()
        } else {
            names.get(j - 1).cloned().unwrap_or_else(|| format!("f{j}"))
        }
    };
    let mut ortho: Vec<DVector<f64>> = Vec::new();
    for j in 0..design.ncols() {
        let col = design.column(j).into_owned();
        let norm = col.norm();
        let mut v = col.clone();
        for q in &ortho {
            v -= q * q.dot(&v);
        }
        if norm == 0.0 || v.norm() <= 1e-10 * norm.max(1.0) {
            return Err(Error::Collinear {
                column: label(j),
                others: (0..j).map(label).collect(),
            });
        }
        let len = v.norm();
        ortho.push(v / len);
    }
    Ok(())
}

/// Greedy row selection giving a nonsingular `p x p` basis; rows are
/// visited in a stride pattern so the start is spread over the sample.
fn initial_basis(design: &DMatrix<f64>) -> Vec<usize> {
    let (n, p) = design.shape();
    let mut rows: Vec<DVector<f64>> = Vec::new();
    let mut basis = Vec::with_capacity(p);
    let stride = (n / p).max(1);
    let order = (0..stride).flat_map(|o| (o..n).step_by(stride));
    for i in order {
        let r = design.row(i).transpose();
        let mut v = r.clone();
        for q in &rows {
            v -= q * q.dot(&v);
        }
        if v.norm() > 1e-8 * r.norm().max(1e-300) {
            let len = v.norm();
            rows.push(v / len);
            basis.push(i);
            if basis.len() == p {
                break;
            }
        }
    }
    basis
}

/// Returns the coefficients, the final basis and whether the vertex has
/// non-basic zero residuals.
fn descend(
    design: &DMatrix<f64>,
    y: &[f64],
    tau: f64,
    mut basis: Vec<usize>,
) -> Result<(Vec<f64>, Vec<usize>, bool)> {
    let (n, p) = design.shape();
    let yscale = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let zero_tol = 1e-12 * yscale;
    let mut in_basis = vec![false; n];
    for &b in &basis {
        in_basis[b] = true;
    }
    let mut breaks: Vec<(f64, f64, usize)> = Vec::with_capacity(n);

    for _ in 0..MAX_ITER {
        let xb = DMatrix::from_fn(p, p, |i, j| design[(basis[i], j)]);
        let binv = xb
            .try_inverse()
            .ok_or_else(|| Error::NoConvergence("singular quantile-regression basis".into()))?;
        let yb = DVector::from_fn(p, |i, _| y[basis[i]]);
        let beta = &binv * yb;
        let resid: Vec<f64> = (0..n)
            .map(|i| {
                if in_basis[i] {
                    0.0
                } else {
                    y[i] - design.row(i).dot(&beta.transpose())
                }
            })
            .collect();
        // a_i(j) = x_i . (B^-1 e_j)
        let a = design * &binv;

        let mut best: Option<(f64, usize, f64)> = None;
        for j in 0..p {
            for sigma in [1.0, -1.0] {
                let mut g = if sigma > 0.0 { 1.0 - tau } else { tau };
                let mut scale = 1.0;
                for i in 0..n {
                    if in_basis[i] {
                        continue;
                    }
                    let ai = sigma * a[(i, j)];
                    scale += ai.abs();
                    let r = resid[i];
                    g += if r > zero_tol || (r.abs() <= zero_tol && ai < 0.0) {
                        -tau * ai
                    } else {
                        (1.0 - tau) * ai
                    };
                }
                if g < -1e-12 * scale && best.is_none_or(|(bg, _, _)| g < bg) {
                    best = Some((g, j, sigma));
                }
            }
        }
        let Some((g, j, sigma)) = best else {
            let degenerate = (0..n).any(|i| !in_basis[i] && resid[i].abs() <= zero_tol);
            return Ok((beta.iter().copied().collect(), basis, degenerate));
        };

        breaks.clear();
        for i in 0..n {
            if in_basis[i] {
                continue;
            }
            let ai = sigma * a[(i, j)];
            let r = resid[i];
            if r.abs() > zero_tol && ai != 0.0 && (r > 0.0) == (ai > 0.0) {
                breaks.push((r / ai, ai.abs(), i));
            }
        }
        breaks.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.2.cmp(&y.2)));
        let mut slope = g;
        let mut entering = None;
        for &(_, w, i) in &breaks {
            slope += w;
            if slope >= 0.0 {
                entering = Some(i);
                break;
            }
        }
        let entering = entering
            .ok_or_else(|| Error::NoConvergence("pinball loss unbounded along an edge".into()))?;
        in_basis[basis[j]] = false;
        in_basis[entering] = true;
        basis[j] = entering;
    }
    Err(Error::NoConvergence(format!(
        "quantile regression did not converge in {MAX_ITER} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(k: usize) -> Vec<String> {
        (1..=k).map(|j| format!("f{j}")).collect()
    }

    fn repeat(v: &[f64], times: usize) -> Vec<f64> {
        v.iter().cycle().take(v.len() * times).copied().collect()
    }

    #[test]
    fn intercept_only_median_and_upper() {
        let y = repeat(&[1.0, 2.0, 3.0, 4.0, 5.0], 2);
        let x = vec![vec![]; y.len()];
        let c = fit_quantile(&x, &y, 0.5, &[]).unwrap();
        assert!((c[0] - 3.0).abs() < 1e-12);
        let c9 = fit_quantile(&x, &y, 0.9, &[]).unwrap();
        assert!((4.0..=5.0).contains(&c9[0]));
        // grid-search oracle
        let oracle = (0..=4000)
            .map(|i| 1.0 + i as f64 * 1e-3)
            .map(|b| mean_pinball(&[b], &x, &y, 0.9))
            .fold(f64::INFINITY, f64::min);
        assert!(mean_pinball(&c9, &x, &y, 0.9) <= oracle + 1e-12);
    }

    #[test]
    fn constant_target_is_reproduced() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.random(), rng.random()]).collect();
        let y = vec![0.37; 60];
        let c = fit_quantile(&x, &y, 0.3, &names(2)).unwrap();
        for row in &x {
            assert!((predict(&c, row) - 0.37).abs() < 1e-9);
        }
    }

    #[test]
    fn too_few_rows_and_collinear() {
        let x = vec![vec![1.0]; 19];
        assert!(fit_quantile(&x, &[0.0; 19], 0.5, &names(1)).is_err());
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let y: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let err = fit_quantile(&x, &y, 0.5, &["irr".into(), "irr2".into()]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("irr2") && msg.contains("irr"), "{msg}");
        let x: Vec<Vec<f64>> = (0..40).map(|_| vec![3.0]).collect();
        let msg = fit_quantile(&x, &y, 0.5, &["const".into()])
            .unwrap_err()
            .to_string();
        assert!(msg.contains("const") && msg.contains("intercept"), "{msg}");
    }

    /// Exhaustive search over all vertices (pairs of interpolated rows).
    fn vertex_oracle(x: &[Vec<f64>], y: &[f64], tau: f64) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..y.len() {
            for j in (i + 1)..y.len() {
                let dx = x[j][0] - x[i][0];
                if dx.abs() < 1e-12 {
                    continue;
                }
                let b1 = (y[j] - y[i]) / dx;
                let b0 = y[i] - b1 * x[i][0];
                best = best.min(mean_pinball(&[b0, b1], x, y, tau));
            }
        }
        best
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn matches_vertex_enumeration(seed in 0u64..10_000, tau in 0.05f64..0.95) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<Vec<f64>> = (0..25).map(|_| vec![rng.random::<f64>()]).collect();
            let y: Vec<f64> = x.iter().map(|r| 0.3 + r[0] + rng.random::<f64>() - 0.5).collect();
            let c = fit_quantile(&x, &y, tau, &names(1)).unwrap();
            let got = mean_pinball(&c, &x, &y, tau);
            prop_assert!(got <= vertex_oracle(&x, &y, tau) + 1e-8);
        }

        #[test]
        fn perturbation_never_helps(seed in 0u64..10_000, tau in 0.05f64..0.95, tied in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<Vec<f64>> = (0..80).map(|_| vec![rng.random::<f64>(), rng.random::<f64>() - 0.5]).collect();
            let y: Vec<f64> = x
                .iter()
                .map(|r| {
                    let v = 0.2 + 0.5 * r[0] + 0.3 * rng.random::<f64>();
                    if tied { (v * 4.0).round() / 4.0 } else { v }
                })
                .collect();
            let c = fit_quantile(&x, &y, tau, &names(2)).unwrap();
            let base = mean_pinball(&c, &x, &y, tau);
            for j in 0..c.len() {
                for h in [1e-3, -1e-3] {
                    let mut c2 = c.clone();
                    c2[j] += h;
                    prop_assert!(mean_pinball(&c2, &x, &y, tau) >= base - 1e-9);
                }
            }
        }
    }
}
