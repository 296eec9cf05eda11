//! One-parameter bivariate copulas used as vine building blocks.
//!
//! Every family here is exchangeable, `C(u, v) = C(v, u)`, so a single
//! h-function `h(u | v) = ∂C(u, v)/∂v` serves both conditioning directions.

mod fit;
mod tau;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{debye1, integrate, normal_cdf, normal_pdf, normal_quantile};

pub use fit::{fit_family, sample_loglik, select_family};
pub use tau::{kendall_tau, kendall_tau_naive};

/// Arguments are clamped to `[UEPS, 1 - UEPS]` before evaluation.
pub(crate) const UEPS: f64 = 1e-14;

const HINV_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    Independence,
    Gaussian,
    Clayton,
    Gumbel,
    Frank,
    SurvivalClayton,
    SurvivalGumbel,
}

impl Family {
    /// Fixed order used for tie-breaking in family selection.
    pub const ALL: [Family; 7] = [
        Family::Independence,
        Family::Gaussian,
        Family::Clayton,
        Family::Gumbel,
        Family::Frank,
        Family::SurvivalClayton,
        Family::SurvivalGumbel,
    ];

    pub fn n_params(self) -> usize {
        match self {
            Family::Independence => 0,
            _ => 1,
        }
    }

    /// Families able to represent negative Kendall's tau.
    pub fn allows_negative(self) -> bool {
        matches!(
            self,
            Family::Independence | Family::Gaussian | Family::Frank
        )
    }

    pub fn check_theta(self, theta: f64) -> Result<()> {
        let ok = theta.is_finite()
            && match self {
                Family::Independence => true,
                Family::Gaussian => theta.abs() < 1.0,
                Family::Clayton | Family::SurvivalClayton => theta > 0.0,
                Family::Gumbel | Family::SurvivalGumbel => theta >= 1.0,
                Family::Frank => theta != 0.0,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::ParameterDomain {
                family: self.to_string(),
                theta,
            })
        }
    }

    /// Kendall's tau implied by parameter `theta`.
    pub fn tau_of_theta(self, theta: f64) -> f64 {
        match self {
            Family::Independence => 0.0,
            Family::Gaussian => std::f64::consts::FRAC_2_PI * theta.asin(),
            Family::Clayton | Family::SurvivalClayton => theta / (theta + 2.0),
            Family::Gumbel | Family::SurvivalGumbel => 1.0 - 1.0 / theta,
            Family::Frank => 1.0 - 4.0 / theta * (1.0 - debye1(theta)),
        }
    }

    /// Parameter implied by Kendall's tau, clamped into the fitting range.
    pub fn theta_of_tau(self, tau: f64) -> f64 {
        let (lo, hi) = self.tau_range();
        let tau = tau.clamp(lo, hi);
        match self {
            Family::Independence => 0.0,
            Family::Gaussian => (std::f64::consts::FRAC_PI_2 * tau).sin(),
            Family::Clayton | Family::SurvivalClayton => 2.0 * tau / (1.0 - tau),
            Family::Gumbel | Family::SurvivalGumbel => 1.0 / (1.0 - tau),
            Family::Frank => {
                // tau(theta) is increasing and odd; bisect on a wide bracket.
                let (mut a, mut b) = if tau >= 0.0 {
                    (1e-8, 60.0)
                } else {
                    (-60.0, -1e-8)
                };
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if self.tau_of_theta(m) < tau {
                        a = m;
                    } else {
                        b = m;
                    }
                    if b - a < 1e-12 {
                        break;
                    }
                }
                0.5 * (a + b)
            }
        }
    }

    /// Range of Kendall's tau searched when fitting.
    pub(crate) fn tau_range(self) -> (f64, f64) {
        match self {
            Family::Independence => (0.0, 0.0),
            Family::Gaussian => (-0.97, 0.97),
            Family::Clayton | Family::SurvivalClayton => (1e-4, 0.93),
            Family::Gumbel | Family::SurvivalGumbel => (0.0, 0.94),
            Family::Frank => (-0.9, 0.9),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A bivariate copula with a validated parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CopulaRepr", into = "CopulaRepr")]
pub struct BivariateCopula {
    family: Family,
    theta: f64,
    loglik: f64,
}

#[derive(Serialize, Deserialize)]
struct CopulaRepr {
    family: Family,
    theta: f64,
    #[serde(default)]
    loglik: f64,
}

impl TryFrom<CopulaRepr> for BivariateCopula {
    type Error = Error;

    fn try_from(r: CopulaRepr) -> Result<Self> {
        Ok(BivariateCopula::new(r.family, r.theta)?.with_loglik(r.loglik))
    }
}

impl From<BivariateCopula> for CopulaRepr {
    fn from(c: BivariateCopula) -> Self {
        CopulaRepr {
            family: c.family,
            theta: c.theta,
            loglik: c.loglik,
        }
    }
}

fn clamp_unit(u: f64) -> f64 {
    u.clamp(UEPS, 1.0 - UEPS)
}

impl BivariateCopula {
    pub fn new(family: Family, theta: f64) -> Result<Self> {
        family.check_theta(theta)?;
        let theta = if family == Family::Independence {
            0.0
        } else {
            theta
        };
        Ok(BivariateCopula {
            family,
            theta,
            loglik: 0.0,
        })
    }

    pub fn independence() -> Self {
        BivariateCopula {
            family: Family::Independence,
            theta: 0.0,
            loglik: 0.0,
        }
    }

    pub(crate) fn with_loglik(mut self, loglik: f64) -> Self {
        self.loglik = loglik;
        self
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Log-likelihood recorded at fit time (0 for hand-built copulas).
    pub fn loglik(&self) -> f64 {
        self.loglik
    }

    pub fn n_params(&self) -> usize {
        self.family.n_params()
    }

    pub fn aic(&self) -> f64 {
        -2.0 * self.loglik + 2.0 * self.n_params() as f64
    }

    pub fn tau(&self) -> f64 {
        self.family.tau_of_theta(self.theta)
    }

    pub fn density(&self, u: f64, v: f64) -> f64 {
        self.log_density(u, v).exp()
    }

    pub fn log_density(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (clamp_unit(u), clamp_unit(v));
        let t = self.theta;
        match self.family {
            Family::Independence => 0.0,
            Family::Gaussian => gaussian_log_density(t, u, v),
            Family::Clayton => clayton_log_density(t, u, v),
            Family::SurvivalClayton => clayton_log_density(t, 1.0 - u, 1.0 - v),
            Family::Gumbel => gumbel_log_density(t, u, v),
            Family::SurvivalGumbel => gumbel_log_density(t, 1.0 - u, 1.0 - v),
            Family::Frank => frank_log_density(t, u, v),
        }
    }

    /// Conditional distribution `h(u | v) = ∂C(u, v)/∂v`.
    pub fn hfunc(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (clamp_unit(u), clamp_unit(v));
        let t = self.theta;
        let h = match self.family {
            Family::Independence => u,
            Family::Gaussian => {
                let s = (1.0 - t * t).sqrt();
                normal_cdf((normal_quantile(u) - t * normal_quantile(v)) / s)
            }
            Family::Clayton => clayton_h(t, u, v),
            Family::SurvivalClayton => 1.0 - clayton_h(t, 1.0 - u, 1.0 - v),
            Family::Gumbel => gumbel_h(t, u, v),
            Family::SurvivalGumbel => 1.0 - gumbel_h(t, 1.0 - u, 1.0 - v),
            Family::Frank => frank_h(t, u, v),
        };
        clamp_unit(h)
    }

    /// Inverse of [`hfunc`](Self::hfunc) in its first argument.
    pub fn hfunc_inv(&self, w: f64, v: f64) -> Result<f64> {
        if !(w.is_finite() && v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "hfunc_inv arguments must be finite (w={w}, v={v})"
            )));
        }
        let (w, v) = (clamp_unit(w), clamp_unit(v));
        let t = self.theta;
        let u = match self.family {
            Family::Independence => w,
            Family::Gaussian => {
                let s = (1.0 - t * t).sqrt();
                normal_cdf(normal_quantile(w) * s + t * normal_quantile(v))
            }
            Family::Clayton => clayton_hinv(t, w, v),
            Family::SurvivalClayton => 1.0 - clayton_hinv(t, 1.0 - w, 1.0 - v),
            Family::Frank => frank_hinv(t, w, v),
            Family::Gumbel => match gumbel_hinv(t, w, v) {
                Some(u) => u,
                None => self.hinv_newton(w, v)?,
            },
            Family::SurvivalGumbel => match gumbel_hinv(t, 1.0 - w, 1.0 - v) {
                Some(u) => 1.0 - u,
                None => self.hinv_newton(w, v)?,
            },
        };
        Ok(clamp_unit(u))
    }

    /// Safeguarded Newton on `h(., v) - w`; `∂h/∂u` is the density. Steps
    /// that leave the bracket fall back to bisection.
    fn hinv_newton(&self, w: f64, v: f64) -> Result<f64> {
        let (mut lo, mut hi) = (UEPS, 1.0 - UEPS);
        if self.hfunc(lo, v) >= w {
            return Ok(lo);
        }
        if self.hfunc(hi, v) <= w {
            return Ok(hi);
        }
        let mut u = w;
        for _ in 0..HINV_MAX_ITER {
            let f = self.hfunc(u, v) - w;
            if f == 0.0 {
                return Ok(u);
            }
            if f < 0.0 {
                lo = u;
            } else {
                hi = u;
            }
            let dens = self.log_density(u, v).exp();
            let newton = u - f / dens;
            let next = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - u).abs() <= 1e-15 * u.max(1e-3) || hi - lo <= 1e-15 {
                return Ok(next);
            }
            u = next;
        }
        let resid = (self.hfunc(u, v) - w).abs();
        if resid > 1e-9 {
            return Err(Error::NoConvergence(format!(
                "{} h-inverse at w={w}, v={v}, theta={}: bracket [{lo}, {hi}], residual {resid:e}",
                self.family, self.theta
            )));
        }
        Ok(u)
    }

    /// Copula distribution function `C(u, v)`.
    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        if u <= 0.0 || v <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return v.min(1.0);
        }
        if v >= 1.0 {
            return u;
        }
        let t = self.theta;
        match self.family {
            Family::Independence => u * v,
            Family::Gaussian => gaussian_cdf(t, u, v),
            Family::Clayton => clayton_cdf(t, u, v),
            Family::SurvivalClayton => u + v - 1.0 + clayton_cdf(t, 1.0 - u, 1.0 - v),
            Family::Gumbel => gumbel_cdf(t, u, v),
            Family::SurvivalGumbel => u + v - 1.0 + gumbel_cdf(t, 1.0 - u, 1.0 - v),
            Family::Frank => {
                let k = (-t).exp_m1();
                let a = (-t * u).exp_m1();
                let b = (-t * v).exp_m1();
                -(a * b / k).ln_1p() / t
            }
        }
    }
}

fn gaussian_log_density(rho: f64, u: f64, v: f64) -> f64 {
    let x = normal_quantile(u);
    let y = normal_quantile(v);
    let one_m = 1.0 - rho * rho;
    -0.5 * one_m.ln() - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * one_m)
}

fn gaussian_cdf(rho: f64, u: f64, v: f64) -> f64 {
    // C(u, v) = ∫_{-∞}^{y} φ(s) Φ((x - ρ s)/√(1-ρ²)) ds
    let x = normal_quantile(u);
    let y = normal_quantile(v);
    let s = (1.0 - rho * rho).sqrt();
    let lower = y.min(-9.0) - 1.0;
    integrate(
        |z| normal_pdf(z) * normal_cdf((x - rho * z) / s),
        lower,
        y,
        1e-14,
    )
}

/// `ln(u^-θ + v^-θ - 1)` without cancellation.
fn clayton_log_base(t: f64, u: f64, v: f64) -> f64 {
    ((-t * u.ln()).exp_m1() + (-t * v.ln()).exp_m1()).ln_1p()
}

fn clayton_log_density(t: f64, u: f64, v: f64) -> f64 {
    t.ln_1p() - (1.0 + t) * (u.ln() + v.ln()) - (2.0 + 1.0 / t) * clayton_log_base(t, u, v)
}

fn clayton_h(t: f64, u: f64, v: f64) -> f64 {
    (-(t + 1.0) * v.ln() - (1.0 + 1.0 / t) * clayton_log_base(t, u, v)).exp()
}

fn clayton_hinv(t: f64, w: f64, v: f64) -> f64 {
    let base = (-t * v.ln()).exp() * (-t / (1.0 + t) * w.ln()).exp_m1();
    (-base.ln_1p() / t).exp()
}

fn clayton_cdf(t: f64, u: f64, v: f64) -> f64 {
    (-clayton_log_base(t, u, v) / t).exp()
}

fn gumbel_log_density(t: f64, u: f64, v: f64) -> f64 {
    let x = -u.ln();
    let y = -v.ln();
    let log_a = log_sum_pow(t, x, y);
    let a_inv = (log_a / t).exp();
    -a_inv - u.ln() - v.ln()
        + (t - 1.0) * (x.ln() + y.ln())
        + (2.0 / t - 2.0) * log_a
        + ((t - 1.0) / a_inv).ln_1p()
}

fn gumbel_h(t: f64, u: f64, v: f64) -> f64 {
    let x = -u.ln();
    let y = -v.ln();
    let log_a = log_sum_pow(t, x, y);
    let a_inv = (log_a / t).exp();
    (-a_inv + (1.0 / t - 1.0) * log_a + (t - 1.0) * y.ln() - v.ln()).exp()
}

/// With `z = A^(1/t)` the equation `h(u | v) = w` becomes
/// `z + (t - 1) ln z = y + (t - 1) ln y - ln w`, `y = -ln v`. The left side
/// is concave and increasing, so Newton from `z = y` climbs monotonically.
fn gumbel_hinv(t: f64, w: f64, v: f64) -> Option<f64> {
    let y = -v.ln();
    let c = y + (t - 1.0) * y.ln() - w.ln();
    let mut z = y;
    for _ in 0..HINV_MAX_ITER {
        let step = (z + (t - 1.0) * z.ln() - c) / (1.0 + (t - 1.0) / z);
        z -= step;
        if !z.is_finite() || z <= 0.0 {
            return None;
        }
        if step.abs() <= 1e-15 * z {
            // x = (z^t - y^t)^(1/t), kept accurate when z is close to y.
            let x = z * (-(t * (y / z).ln()).exp_m1()).powf(1.0 / t);
            return x.is_finite().then(|| (-x).exp());
        }
    }
    None
}

fn gumbel_cdf(t: f64, u: f64, v: f64) -> f64 {
    let log_a = log_sum_pow(t, -u.ln(), -v.ln());
    (-(log_a / t).exp()).exp()
}

/// `ln(x^t + y^t)` for positive `x`, `y`.
fn log_sum_pow(t: f64, x: f64, y: f64) -> f64 {
    let lx = t * x.ln();
    let ly = t * y.ln();
    let m = lx.max(ly);
    m + ((lx - m).exp() + (ly - m).exp()).ln()
}

fn frank_log_density(t: f64, u: f64, v: f64) -> f64 {
    let k = (-t).exp_m1();
    let a = (-t * u).exp_m1();
    let b = (-t * v).exp_m1();
    (-t * k).ln() - t * (u + v) - 2.0 * (k + a * b).abs().ln()
}

fn frank_h(t: f64, u: f64, v: f64) -> f64 {
    let k = (-t).exp_m1();
    let a = (-t * u).exp_m1();
    let b = (-t * v).exp_m1();
    (b + 1.0) * a / (k + a * b)
}

fn frank_hinv(t: f64, w: f64, v: f64) -> f64 {
    let k = (-t).exp_m1();
    let b = (-t * v).exp_m1();
    let a = w * k / (1.0 + b * (1.0 - w));
    -a.ln_1p() / t
}
