//! Full-dimensional Gaussian copula: normal-scores correlation estimate,
//! log-likelihood and Cholesky sampling.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bicop::UEPS;
use crate::error::{Error, Result};
use crate::special::{normal_cdf, normal_quantile};

/// Smallest eigenvalue accepted for a correlation matrix.
pub const EIGEN_FLOOR: f64 = 1e-10;

const SHRINKAGE_STEPS: [f64; 5] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianRepr", into = "GaussianRepr")]
pub struct GaussianCopulaModel {
    corr: DMatrix<f64>,
    loglik: f64,
    /// Shrinkage weight applied during fitting (0 when none was needed).
    shrinkage: f64,
}

#[derive(Serialize, Deserialize)]
struct GaussianRepr {
    dim: usize,
    corr: Vec<f64>,
    loglik: f64,
    kappa: usize,
}

impl TryFrom<GaussianRepr> for GaussianCopulaModel {
    type Error = Error;

    fn try_from(r: GaussianRepr) -> Result<Self> {
        if r.corr.len() != r.dim * r.dim {
            return Err(Error::Dimension(format!(
                "correlation has {} entries for dimension {}",
                r.corr.len(),
                r.dim
            )));
        }
        let mut m = GaussianCopulaModel::new(DMatrix::from_row_slice(r.dim, r.dim, &r.corr))?;
        m.loglik = r.loglik;
        Ok(m)
    }
}

impl From<GaussianCopulaModel> for GaussianRepr {
    fn from(m: GaussianCopulaModel) -> Self {
        let d = m.dim();
        let corr = (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .map(|(i, j)| m.corr[(i, j)])
            .collect();
        GaussianRepr {
            dim: d,
            corr,
            loglik: m.loglik,
            kappa: m.n_params(),
        }
    }
}

impl GaussianCopulaModel {
    /// Wraps a correlation matrix after checking symmetry, unit diagonal and
    /// positive definiteness.
    pub fn new(corr: DMatrix<f64>) -> Result<Self> {
        let d = corr.nrows();
        if d == 0 || corr.ncols() != d {
            return Err(Error::Dimension(format!(
                "correlation matrix must be square and non-empty, got {}x{}",
                corr.nrows(),
                corr.ncols()
            )));
        }
        for i in 0..d {
            if (corr[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "correlation diagonal entry {i} is {}",
                    corr[(i, i)]
                )));
            }
            for j in 0..i {
                if (corr[(i, j)] - corr[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!(
                        "correlation matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let min_eig = min_eigenvalue(&corr);
        if !(min_eig > EIGEN_FLOOR) {
            return Err(Error::NotPositiveDefinite(format!(
                "smallest eigenvalue {min_eig:e}"
            )));
        }
        Ok(GaussianCopulaModel {
            corr,
            loglik: 0.0,
            shrinkage: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.corr.nrows()
    }

    pub fn corr(&self) -> &DMatrix<f64> {
        &self.corr
    }

    /// Training-set log-likelihood recorded by [`fit_gaussian`].
    pub fn loglik(&self) -> f64 {
        self.loglik
    }

    pub fn shrinkage(&self) -> f64 {
        self.shrinkage
    }

    pub fn n_params(&self) -> usize {
        let d = self.dim();
        d * (d - 1) / 2
    }

    /// Kendall's tau implied between dimensions `i` and `j`.
    pub fn implied_tau(&self, i: usize, j: usize) -> f64 {
        std::f64::consts::FRAC_2_PI * self.corr[(i, j)].asin()
    }

    fn cholesky(&self) -> Result<Cholesky<f64, Dyn>> {
        Cholesky::new(self.corr.clone())
            .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))
    }
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn normal_scores(u: &DMatrix<f64>) -> DMatrix<f64> {
    u.map(|x| normal_quantile(x.clamp(UEPS, 1.0 - UEPS)))
}

/// Fits the copula correlation as the sample correlation of normal scores,
/// repairing loss of positive definiteness by diagonal shrinkage.
pub fn fit_gaussian(u: &DMatrix<f64>) -> Result<GaussianCopulaModel> {
    let (t, d) = u.shape();
    if d == 0 {
        return Err(Error::Dimension("uniform matrix has no columns".into()));
    }
    if t <= d {
        return Err(Error::InvalidInput(format!(
            "Gaussian copula fit needs more than {d} rows, got {t}"
        )));
    }
    let z = normal_scores(u);
    let means: Vec<f64> = (0..d).map(|j| z.column(j).mean()).collect();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = z
                .column(i)
                .iter()
                .zip(z.column(j).iter())
                .map(|(a, b)| (a - means[i]) * (b - means[j]))
                .sum();
            cov[(i, j)] = s;
            cov[(j, i)] = s;
        }
    }
    let mut corr = DMatrix::<f64>::identity(d, d);
    for i in 0..d {
        for j in 0..i {
            let denom = (cov[(i, i)] * cov[(j, j)]).sqrt();
            let r = if denom > 0.0 {
                cov[(i, j)] / denom
            } else {
                0.0
            };
            corr[(i, j)] = r;
            corr[(j, i)] = r;
        }
    }

    let mut shrinkage = 0.0;
    if !(min_eigenvalue(&corr) > EIGEN_FLOOR) {
        let identity = DMatrix::<f64>::identity(d, d);
        let raw = corr.clone();
        for &lambda in &SHRINKAGE_STEPS {
            let cand = &raw * (1.0 - lambda) + &identity * lambda;
            if min_eigenvalue(&cand) > EIGEN_FLOOR {
                corr = cand;
                shrinkage = lambda;
                break;
            }
        }
        log::warn!("correlation matrix repaired by shrinkage lambda={shrinkage}");
    }

    let mut model = GaussianCopulaModel::new(corr)?;
    model.shrinkage = shrinkage;
    model.loglik = loglik_gaussian(&model, u)?;
    Ok(model)
}

/// Copula log-likelihood `Σ_t [-½ log det Σ - ½ zᵀ(Σ⁻¹ - I)z]`.
pub fn loglik_gaussian(model: &GaussianCopulaModel, u: &DMatrix<f64>) -> Result<f64> {
    let d = model.dim();
    if u.ncols() != d {
        return Err(Error::Dimension(format!(
            "model dimension {d}, data has {} columns",
            u.ncols()
        )));
    }
    let chol = model.cholesky()?;
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let z = normal_scores(u);
    let mut total = 0.0;
    for row in z.row_iter() {
        let zv = DVector::from_iterator(d, row.iter().copied());
        let solved = chol.solve(&zv);
        let quad = zv.dot(&solved) - zv.dot(&zv);
        total += -0.5 * log_det - 0.5 * quad;
    }
    Ok(total)
}

/// Copula log-density at one point.
pub fn logdensity_gaussian(model: &GaussianCopulaModel, u: &[f64]) -> Result<f64> {
    let row = DMatrix::from_row_slice(1, u.len(), u);
    loglik_gaussian(model, &row)
}

/// Draws `s` rows from the copula: `u = Φ(Lε)` with `ε` standard normal.
pub fn sample_gaussian(model: &GaussianCopulaModel, s: usize, seed: u64) -> Result<DMatrix<f64>> {
    let d = model.dim();
    let chol = model.cholesky()?;
    let l = chol.l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DMatrix::<f64>::zeros(s, d);
    let mut eps = DVector::<f64>::zeros(d);
    for r in 0..s {
        for e in eps.iter_mut() {
            *e = StandardNormal.sample(&mut rng);
        }
        let z = &l * &eps;
        for c in 0..d {
            out[(r, c)] = normal_cdf(z[c]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bicop::kendall_tau;
    use rand::Rng;

    fn uniform_matrix(t: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(t, d, |_, _| rng.random_range(0.0..1.0))
    }

    fn corr2(rho: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0])
    }

    #[test]
    fn independent_uniforms_fit_near_identity() {
        let u = uniform_matrix(5000, 3, 1);
        let m = fit_gaussian(&u).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(m.corr()[(i, j)].abs() < 0.05);
                }
            }
        }
        assert_eq!(m.shrinkage(), 0.0);
    }

    #[test]
    fn duplicate_columns_trigger_shrinkage() {
        let mut u = uniform_matrix(200, 3, 2);
        let c0 = u.column(0).clone_owned();
        u.set_column(2, &c0);
        let m = fit_gaussian(&u).unwrap();
        assert!(m.shrinkage() > 0.0);
        assert!(min_eigenvalue(m.corr()) > EIGEN_FLOOR);
    }

    #[test]
    fn too_few_rows() {
        let u = uniform_matrix(3, 3, 3);
        assert!(fit_gaussian(&u).is_err());
    }

    #[test]
    fn kappa_for_eleven_hours() {
        let m = GaussianCopulaModel::new(DMatrix::identity(11, 11)).unwrap();
        assert_eq!(m.n_params(), 55);
    }

    #[test]
    fn identity_loglik_is_zero() {
        let m = GaussianCopulaModel::new(DMatrix::identity(4, 4)).unwrap();
        let u = uniform_matrix(50, 4, 4);
        assert_eq!(loglik_gaussian(&m, &u).unwrap(), 0.0);
    }

    #[test]
    fn loglik_closed_form_at_median() {
        let m = GaussianCopulaModel::new(corr2(0.5)).unwrap();
        let v = logdensity_gaussian(&m, &[0.5, 0.5]).unwrap();
        assert!((v - (-0.5 * 0.75_f64.ln())).abs() < 1e-12);
        assert!((v - 0.143_841_036_225_890_2).abs() < 1e-12);
    }

    #[test]
    fn fitted_loglik_dominates_independence() {
        let truth = GaussianCopulaModel::new(corr2(0.6)).unwrap();
        let u = sample_gaussian(&truth, 400, 5).unwrap();
        let fit = fit_gaussian(&u).unwrap();
        assert!(fit.loglik() >= 0.0);
    }

    #[test]
    fn loglik_is_row_order_invariant() {
        let truth = GaussianCopulaModel::new(corr2(0.3)).unwrap();
        let u = sample_gaussian(&truth, 100, 6).unwrap();
        let rev = DMatrix::from_fn(100, 2, |r, c| u[(99 - r, c)]);
        let a = loglik_gaussian(&truth, &u).unwrap();
        let b = loglik_gaussian(&truth, &rev).unwrap();
        assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn sample_determinism_and_independence() {
        let m = GaussianCopulaModel::new(DMatrix::identity(3, 3)).unwrap();
        let a = sample_gaussian(&m, 2000, 11).unwrap();
        let b = sample_gaussian(&m, 2000, 11).unwrap();
        assert_eq!(a, b);
        let bound = 3.0 / (2000f64).sqrt();
        for i in 0..3 {
            for j in 0..i {
                let col_i: Vec<f64> = a.column(i).iter().copied().collect();
                let col_j: Vec<f64> = a.column(j).iter().copied().collect();
                assert!(kendall_tau(&col_i, &col_j).unwrap().abs() < bound);
            }
        }
    }

    #[test]
    fn sample_recovers_correlation() {
        let m = GaussianCopulaModel::new(corr2(0.8)).unwrap();
        let u = sample_gaussian(&m, 10_000, 12).unwrap();
        let fit = fit_gaussian(&u).unwrap();
        assert!((fit.corr()[(0, 1)] - 0.8).abs() < 0.03);
    }

    #[test]
    fn json_round_trip() {
        let m = GaussianCopulaModel::new(corr2(-0.25)).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"kappa\":1"));
        let back: GaussianCopulaModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back.corr(), m.corr());
    }

    #[test]
    fn rejects_non_pd() {
        let bad = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0]);
        assert!(matches!(
            GaussianCopulaModel::new(bad),
            Err(Error::NotPositiveDefinite(_))
        ));
    }
}
