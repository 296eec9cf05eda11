use log::warn;

use super::{kendall_tau, BivariateCopula, Family};
use crate::error::{Error, Result};

const MIN_FIT_OBS: usize = 20;
const GRID_POINTS: usize = 25;
const AIC_TIE: f64 = 1e-9;

/// Sum of log-densities over paired pseudo-observations.
pub fn sample_loglik(cop: &BivariateCopula, u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(&a, &b)| cop.log_density(a, b)).sum()
}

fn check_sample(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::Dimension(format!(
            "paired sample lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    if u.len() < MIN_FIT_OBS {
        return Err(Error::InvalidInput(format!(
            "pair-copula fit needs at least {MIN_FIT_OBS} observations, got {}",
            u.len()
        )));
    }
    Ok(())
}

/// Maximum-likelihood estimate of the parameter of `family`.
pub fn fit_family(u: &[f64], v: &[f64], family: Family) -> Result<BivariateCopula> {
    check_sample(u, v)?;
    let tau = kendall_tau(u, v)?;
    fit_with_tau(u, v, family, tau)
}

fn fit_with_tau(u: &[f64], v: &[f64], family: Family, tau: f64) -> Result<BivariateCopula> {
    if family == Family::Independence {
        return Ok(BivariateCopula::independence());
    }
    let ll = |theta: f64| -> f64 {
        match BivariateCopula::new(family, theta) {
            Ok(c) => sample_loglik(&c, u, v),
            Err(_) => f64::NEG_INFINITY,
        }
    };

    // Coarse grid on the Kendall-tau scale, seeded with the tau-inversion
    // estimate, then Brent refinement inside the bracket of the best node.
    let (lo, hi) = family.tau_range();
    let mut thetas: Vec<f64> = (0..GRID_POINTS)
        .map(|i| family.theta_of_tau(lo + (hi - lo) * i as f64 / (GRID_POINTS - 1) as f64))
        .collect();
    let start = family.theta_of_tau(tau);
    thetas.push(start);
    thetas.sort_by(f64::total_cmp);
    thetas.dedup();

    let values: Vec<f64> = thetas.iter().map(|&t| ll(t)).collect();
    let (best, best_val) = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .unwrap_or((0, f64::NAN));
    let worst = values
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min);

    if !best_val.is_finite() || (best_val - worst).abs() < 1e-12 {
        warn!("{family} likelihood is flat or unbounded; using tau-inversion estimate");
        let cop = BivariateCopula::new(family, start)?;
        let l = sample_loglik(&cop, u, v);
        return Ok(cop.with_loglik(l));
    }

    let a = thetas[best.saturating_sub(1)];
    let b = thetas[(best + 1).min(thetas.len() - 1)];
    let (theta, val) = brent_max(&ll, a, b, 1e-10);
    let (theta, val) = if val >= best_val {
        (theta, val)
    } else {
        (thetas[best], best_val)
    };
    Ok(BivariateCopula::new(family, theta)?.with_loglik(val))
}

/// Selects the family with minimal AIC; ties go to fewer parameters, then
/// to the order of [`Family::ALL`].
pub fn select_family(u: &[f64], v: &[f64]) -> Result<BivariateCopula> {
    check_sample(u, v)?;
    let tau = kendall_tau(u, v)?;
    let mut best: Option<BivariateCopula> = None;
    for family in Family::ALL {
        if tau < 0.0 && !family.allows_negative() {
            continue;
        }
        let cand = fit_with_tau(u, v, family, tau)?;
        best = match best {
            None => Some(cand),
            Some(cur) => {
                let d = cand.aic() - cur.aic();
                if d < -AIC_TIE || (d.abs() <= AIC_TIE && cand.n_params() < cur.n_params()) {
                    Some(cand)
                } else {
                    Some(cur)
                }
            }
        };
    }
    Ok(best.expect("independence is always a candidate"))
}

/// Brent's method for a maximum of `f` on `[a, b]`.
fn brent_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const GOLD: f64 = 0.381_966_011_250_105_1;
    let g = |x: f64| -f(x);
    let mut x = a + GOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = g(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-12;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = g(u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, -fx)
}
