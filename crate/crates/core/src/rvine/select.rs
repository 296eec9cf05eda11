use nalgebra::DMatrix;
use rayon::prelude::*;

use super::structure::{bit, RVineStructure, Source, UnionFind, VineEdge};
use super::RVineModel;
use crate::bicop::{kendall_tau, select_family, BivariateCopula};
use crate::error::{Error, Result};

const MIN_ROWS: usize = 30;

struct Fitted {
    edge: VineEdge,
    copula: BivariateCopula,
    /// Conditional pseudo-observations `[a | cond ∪ b, b | cond ∪ a]`.
    out: [Vec<f64>; 2],
}

struct Candidate<'a> {
    edge: VineEdge,
    data: [&'a [f64]; 2],
    weight: f64,
}

/// Sequential R-vine selection: each tree is the maximum spanning tree of
/// |Kendall's tau| among edges allowed by the proximity condition, and each
/// selected edge gets the AIC-best pair-copula family.
pub fn select_structure(u: &DMatrix<f64>) -> Result<RVineModel> {
    let (t, d) = u.shape();
    if d < 2 || d > super::MAX_DIM {
        return Err(Error::Dimension(format!(
            "vine dimension must be in 2..={}, got {d}",
            super::MAX_DIM
        )));
    }
    if t < MIN_ROWS {
        return Err(Error::InvalidInput(format!(
            "vine selection needs at least {MIN_ROWS} rows, got {t}"
        )));
    }
    let cols: Vec<Vec<f64>> = (0..d)
        .map(|j| u.column(j).iter().copied().collect())
        .collect();

    let mut trees: Vec<Vec<Fitted>> = Vec::with_capacity(d - 1);
    for k in 0..(d - 1) {
        let candidates = if k == 0 {
            first_tree_candidates(&cols)
        } else {
            higher_tree_candidates(&trees[k - 1], k)
        };
        let n_nodes = if k == 0 { d } else { trees[k - 1].len() };
        let mut weighted: Vec<Candidate> = candidates
            .into_par_iter()
            .map(|mut c| -> Result<Candidate> {
                c.weight = kendall_tau(c.data[0], c.data[1])?.abs();
                Ok(c)
            })
            .collect::<Result<_>>()?;
        weighted.sort_by(|x, y| {
            y.weight
                .total_cmp(&x.weight)
                .then(x.edge.nodes.cmp(&y.edge.nodes))
        });
        let mut uf = UnionFind::new(n_nodes);
        let chosen: Vec<Candidate> = weighted
            .into_iter()
            .filter(|c| uf.union(c.edge.nodes.0, c.edge.nodes.1))
            .collect();
        if chosen.len() != n_nodes - 1 {
            return Err(Error::InvalidStructure(format!(
                "tree {} has no spanning tree under the proximity condition",
                k + 1
            )));
        }
        let mut fitted: Vec<Fitted> = chosen
            .into_par_iter()
            .map(|c| -> Result<Fitted> {
                let cop = select_family(c.data[0], c.data[1])?;
                let (a, b) = (c.data[0], c.data[1]);
                let out_a = a.iter().zip(b).map(|(&x, &y)| cop.hfunc(x, y)).collect();
                let out_b = a.iter().zip(b).map(|(&x, &y)| cop.hfunc(y, x)).collect();
                Ok(Fitted {
                    edge: c.edge,
                    copula: cop,
                    out: [out_a, out_b],
                })
            })
            .collect::<Result<_>>()?;
        fitted.sort_by(|x, y| (&x.edge.cond, x.edge.pair).cmp(&(&y.edge.cond, y.edge.pair)));
        trees.push(fitted);
    }

    let copulas = trees
        .iter()
        .map(|t| t.iter().map(|f| f.copula).collect())
        .collect();
    let edges = trees
        .into_iter()
        .map(|t| t.into_iter().map(|f| f.edge).collect())
        .collect();
    let structure = RVineStructure::from_linked(d, edges)?;
    let mut model = RVineModel::from_parts(structure, copulas)?;
    let ll = model.loglik_of(u)?;
    model.set_loglik(ll);
    Ok(model)
}

fn first_tree_candidates(cols: &[Vec<f64>]) -> Vec<Candidate<'_>> {
    let d = cols.len();
    let mut out = Vec::with_capacity(d * (d - 1) / 2);
    for a in 0..d {
        for b in (a + 1)..d {
            out.push(Candidate {
                edge: VineEdge {
                    pair: (a, b),
                    cond: Vec::new(),
                    inputs: [Source::Var(a), Source::Var(b)],
                    nodes: (a, b),
                },
                data: [&cols[a], &cols[b]],
                weight: 0.0,
            });
        }
    }
    out
}

/// Pairs of previous-tree edges that share a node.
fn higher_tree_candidates(prev: &[Fitted], k: usize) -> Vec<Candidate<'_>> {
    let mut out = Vec::new();
    for i in 0..prev.len() {
        for j in (i + 1)..prev.len() {
            let (ei, ej) = (&prev[i].edge, &prev[j].edge);
            let shares = [ei.nodes.0, ei.nodes.1]
                .iter()
                .any(|n| *n == ej.nodes.0 || *n == ej.nodes.1);
            if !shares {
                continue;
            }
            let (mi, mj) = (ei.complete_mask(), ej.complete_mask());
            let common = mi & mj;
            if common.count_ones() as usize != k {
                continue;
            }
            let x = (mi & !common).trailing_zeros() as usize;
            let y = (mj & !common).trailing_zeros() as usize;
            let side = |e: &VineEdge, v: usize| if e.pair.0 == v { 0 } else { 1 };
            let (sx, sy) = (side(ei, x), side(ej, y));
            let cond: Vec<usize> = (0..64).filter(|v| common & bit(*v) != 0).collect();
            let (edge, data) = if x < y {
                (
                    VineEdge {
                        pair: (x, y),
                        cond,
                        inputs: [
                            Source::Edge { edge: i, side: sx },
                            Source::Edge { edge: j, side: sy },
                        ],
                        nodes: (i, j),
                    },
                    [prev[i].out[sx].as_slice(), prev[j].out[sy].as_slice()],
                )
            } else {
                (
                    VineEdge {
                        pair: (y, x),
                        cond,
                        inputs: [
                            Source::Edge { edge: j, side: sy },
                            Source::Edge { edge: i, side: sx },
                        ],
                        nodes: (i, j),
                    },
                    [prev[j].out[sy].as_slice(), prev[i].out[sx].as_slice()],
                )
            };
            out.push(Candidate {
                edge,
                data,
                weight: 0.0,
            });
        }
    }
    out
}
