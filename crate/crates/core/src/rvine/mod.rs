//! Regular-vine copulas: pair-copula construction density, sequential
//! structure selection and sampling through inverse h-functions.

mod select;
mod structure;

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bicop::BivariateCopula;
use crate::error::{Error, Result};

pub use select::select_structure;
pub use structure::{RVineStructure, VineEdge, MAX_DIM};
pub(crate) use structure::{SamplingStep, Source};

/// A fitted or hand-specified R-vine copula.
#[derive(Debug, Clone, PartialEq)]
pub struct RVineModel {
    structure: RVineStructure,
    /// Pair-copulas, indexed like `structure.trees()`.
    copulas: Vec<Vec<BivariateCopula>>,
    loglik: f64,
    plan: Vec<SamplingStep>,
}

/// Edge specification used to build a vine by hand (0-based variables).
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpec {
    pub pair: (usize, usize),
    pub cond: Vec<usize>,
    pub copula: BivariateCopula,
}

impl EdgeSpec {
    pub fn new(pair: (usize, usize), cond: Vec<usize>, copula: BivariateCopula) -> Self {
        EdgeSpec { pair, cond, copula }
    }
}

impl RVineModel {
    pub(crate) fn from_parts(
        structure: RVineStructure,
        copulas: Vec<Vec<BivariateCopula>>,
    ) -> Result<Self> {
        if copulas.len() != structure.trees().len()
            || copulas
                .iter()
                .zip(structure.trees())
                .any(|(c, t)| c.len() != t.len())
        {
            return Err(Error::InvalidStructure(
                "one pair-copula per edge required".into(),
            ));
        }
        let plan = structure.sampling_plan()?;
        Ok(RVineModel {
            structure,
            copulas,
            loglik: 0.0,
            plan,
        })
    }

    /// Builds a vine from explicit edges; the structure is validated.
    pub fn from_edges(dim: usize, edges: Vec<EdgeSpec>) -> Result<Self> {
        let triples: Vec<_> = edges.iter().map(|e| (e.pair, e.cond.clone())).collect();
        let structure = RVineStructure::from_edges(dim, &triples)?;
        let mut lookup: HashMap<((usize, usize), Vec<usize>), BivariateCopula> = HashMap::new();
        for e in edges {
            let mut cond = e.cond;
            cond.sort_unstable();
            let key = ((e.pair.0.min(e.pair.1), e.pair.0.max(e.pair.1)), cond);
            lookup.insert(key, e.copula);
        }
        let copulas = structure
            .trees()
            .iter()
            .map(|tree| {
                tree.iter()
                    .map(|e| lookup[&(e.pair, e.cond.clone())])
                    .collect()
            })
            .collect();
        RVineModel::from_parts(structure, copulas)
    }

    /// An all-independence vine on a D-vine (path) structure.
    pub fn independence(dim: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for k in 0..dim.saturating_sub(1) {
            for i in 0..(dim - 1 - k) {
                edges.push(EdgeSpec::new(
                    (i, i + k + 1),
                    ((i + 1)..(i + k + 1)).collect(),
                    BivariateCopula::independence(),
                ));
            }
        }
        RVineModel::from_edges(dim, edges)
    }

    pub fn dim(&self) -> usize {
        self.structure.dim()
    }

    pub fn structure(&self) -> &RVineStructure {
        &self.structure
    }

    pub fn copulas(&self) -> &[Vec<BivariateCopula>] {
        &self.copulas
    }

    /// `(tree, edge, copula)` triples tree by tree; trees are numbered from 1.
    pub fn edges(&self) -> impl Iterator<Item = (usize, &VineEdge, &BivariateCopula)> {
        self.structure
            .trees()
            .iter()
            .zip(&self.copulas)
            .enumerate()
            .flat_map(|(k, (t, c))| t.iter().zip(c).map(move |(e, c)| (k + 1, e, c)))
    }

    /// Training log-likelihood recorded by [`select_structure`].
    pub fn loglik(&self) -> f64 {
        self.loglik
    }

    pub(crate) fn set_loglik(&mut self, loglik: f64) {
        self.loglik = loglik;
    }

    /// Number of estimated parameters, summed over the pair-copulas.
    pub fn n_params(&self) -> usize {
        self.copulas.iter().flatten().map(|c| c.n_params()).sum()
    }

    pub fn aic(&self) -> f64 {
        aic(self.loglik, self.n_params())
    }

    pub fn bic(&self, n_obs: usize) -> f64 {
        bic(self.loglik, self.n_params(), n_obs as f64)
    }

    /// Copula log-density at one point of `(0, 1)^D`.
    pub fn logdensity(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "vine dimension {}, point has {} coordinates",
                self.dim(),
                u.len()
            )));
        }
        if let Some(x) = u.iter().find(|x| !(**x > 0.0 && **x < 1.0)) {
            return Err(Error::InvalidInput(format!(
                "vine density argument {x} outside (0, 1)"
            )));
        }
        Ok(self.logdensity_unchecked(u))
    }

    fn logdensity_unchecked(&self, u: &[f64]) -> f64 {
        let mut total = 0.0;
        let mut prev: Vec<[f64; 2]> = Vec::new();
        for (tree, cops) in self.structure.trees().iter().zip(&self.copulas) {
            let mut cur = Vec::with_capacity(tree.len());
            for (e, c) in tree.iter().zip(cops) {
                let a = resolve(e.inputs[0], u, &prev);
                let b = resolve(e.inputs[1], u, &prev);
                total += c.log_density(a, b);
                cur.push([c.hfunc(a, b), c.hfunc(b, a)]);
            }
            prev = cur;
        }
        total
    }

    /// Sum of log-densities over the rows of `u`.
    pub fn loglik_of(&self, u: &DMatrix<f64>) -> Result<f64> {
        if u.ncols() != self.dim() {
            return Err(Error::Dimension(format!(
                "vine dimension {}, data has {} columns",
                self.dim(),
                u.ncols()
            )));
        }
        let rows: Vec<Vec<f64>> = u.row_iter().map(|r| r.iter().copied().collect()).collect();
        let parts: Vec<Result<f64>> = rows.par_iter().map(|r| self.logdensity(r)).collect();
        let mut total = 0.0;
        for p in parts {
            total += p?;
        }
        Ok(total)
    }

    /// Draws `s` rows by sequential inversion of conditional distributions.
    /// Row `r` uses the uniforms `w` drawn for variables `0..D` in order;
    /// an all-independence vine returns them unchanged.
    pub fn sample(&self, s: usize, seed: u64) -> Result<DMatrix<f64>> {
        let d = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = DMatrix::<f64>::zeros(s, d);
        let mut w = vec![0.0; d];
        for r in 0..s {
            for x in w.iter_mut() {
                *x = rng.random::<f64>();
            }
            let row = self.invert_row(&w)?;
            for c in 0..d {
                out[(r, c)] = row[c];
            }
        }
        Ok(out)
    }

    /// Inverse Rosenblatt transform of one vector of independent uniforms.
    pub fn invert_row(&self, w: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        let trees = self.structure.trees();
        let mut u = vec![0.0; d];
        // Outputs `[a-side, b-side]` of edges whose complete set is sampled.
        let mut out: Vec<Vec<[f64; 2]>> = trees.iter().map(|t| vec![[0.0; 2]; t.len()]).collect();

        for step in &self.plan {
            let x = step.var;
            let mut t = w[x];
            for &(k, i) in step.chain.iter().rev() {
                let e = &trees[k][i];
                let partner_side = if e.pair.0 == x { 1 } else { 0 };
                let given = resolve_level(e.inputs[partner_side], &u, k, &out);
                t = self.copulas[k][i].hfunc_inv(t, given)?;
            }
            u[x] = t;
            for &(k, i) in &step.chain {
                let e = &trees[k][i];
                let c = &self.copulas[k][i];
                let a = resolve_level(e.inputs[0], &u, k, &out);
                let b = resolve_level(e.inputs[1], &u, k, &out);
                out[k][i] = [c.hfunc(a, b), c.hfunc(b, a)];
            }
        }
        Ok(u)
    }

    pub fn to_json_model(&self) -> Result<RVineJson> {
        let d = self.dim();
        let matrix = self.structure.matrix()?;
        let edges = self
            .edges()
            .map(|(tree, e, c)| EdgeJson {
                tree,
                cond_pair: [e.pair.0 + 1, e.pair.1 + 1],
                cond_set: e.cond.iter().map(|v| v + 1).collect(),
                copula: *c,
            })
            .collect();
        Ok(RVineJson {
            dim: d,
            matrix: matrix.into_iter().flatten().collect(),
            edges,
            loglik: self.loglik,
            kappa: self.n_params(),
        })
    }

    pub fn from_json_model(j: RVineJson) -> Result<Self> {
        let edges = j
            .edges
            .iter()
            .map(|e| {
                if e.cond_pair.contains(&0) || e.cond_set.contains(&0) {
                    return Err(Error::InvalidStructure(
                        "vine JSON labels are 1-based".into(),
                    ));
                }
                Ok(EdgeSpec::new(
                    (e.cond_pair[0] - 1, e.cond_pair[1] - 1),
                    e.cond_set.iter().map(|v| v - 1).collect(),
                    e.copula,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut model = RVineModel::from_edges(j.dim, edges)?;
        if !j.matrix.is_empty() {
            if j.matrix.len() != j.dim * j.dim {
                return Err(Error::Dimension(format!(
                    "structure matrix has {} entries for dimension {}",
                    j.matrix.len(),
                    j.dim
                )));
            }
            let rows: Vec<Vec<usize>> = j.matrix.chunks(j.dim).map(<[usize]>::to_vec).collect();
            let from_matrix = RVineStructure::from_matrix(&rows)?;
            if &from_matrix != model.structure() {
                return Err(Error::InvalidStructure(
                    "structure matrix disagrees with the edge list".into(),
                ));
            }
        }
        model.loglik = j.loglik;
        Ok(model)
    }
}

impl Serialize for RVineModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json_model()
            .map_err(serde::ser::Error::custom)?
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RVineModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = RVineJson::deserialize(d)?;
        RVineModel::from_json_model(j).map_err(serde::de::Error::custom)
    }
}

/// File form of a vine: 1-based labels, row-major structure matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RVineJson {
    pub dim: usize,
    #[serde(default)]
    pub matrix: Vec<usize>,
    pub edges: Vec<EdgeJson>,
    #[serde(default)]
    pub loglik: f64,
    #[serde(default)]
    pub kappa: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeJson {
    #[serde(default)]
    pub tree: usize,
    pub cond_pair: [usize; 2],
    #[serde(default)]
    pub cond_set: Vec<usize>,
    #[serde(flatten)]
    pub copula: BivariateCopula,
}

fn resolve(src: Source, u: &[f64], prev: &[[f64; 2]]) -> f64 {
    match src {
        Source::Var(v) => u[v],
        Source::Edge { edge, side } => prev[edge][side],
    }
}

fn resolve_level(src: Source, u: &[f64], level: usize, out: &[Vec<[f64; 2]>]) -> f64 {
    match src {
        Source::Var(v) => u[v],
        Source::Edge { edge, side } => out[level - 1][edge][side],
    }
}

/// `-2 loglik + 2 kappa`.
pub fn aic(loglik: f64, kappa: usize) -> f64 {
    -2.0 * loglik + 2.0 * kappa as f64
}

/// `-2 loglik + kappa ln T`.
pub fn bic(loglik: f64, kappa: usize, n_obs: f64) -> f64 {
    -2.0 * loglik + kappa as f64 * n_obs.ln()
}
