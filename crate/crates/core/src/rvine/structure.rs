//! Regular-vine structures: edge bookkeeping, validation and the
//! lower-triangular structure matrix.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Maximum supported dimension (complete sets are stored as `u64` masks).
pub const MAX_DIM: usize = 64;

/// Where one argument of a pair-copula comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Source {
    /// The uniform of a variable (tree 1).
    Var(usize),
    /// Output `side` of edge `edge` in the previous tree.
    Edge { edge: usize, side: usize },
}

/// One edge `a, b | cond` of a vine tree, with `a < b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VineEdge {
    pub(crate) pair: (usize, usize),
    pub(crate) cond: Vec<usize>,
    /// Sources of the `a`- and `b`-side arguments.
    pub(crate) inputs: [Source; 2],
    /// Nodes joined in this tree: variables for tree 1, previous-tree edge
    /// indices above.
    pub(crate) nodes: (usize, usize),
}

impl VineEdge {
    pub fn conditioned(&self) -> (usize, usize) {
        self.pair
    }

    pub fn conditioning(&self) -> &[usize] {
        &self.cond
    }

    pub(crate) fn complete_mask(&self) -> u64 {
        let mut m = bit(self.pair.0) | bit(self.pair.1);
        for &c in &self.cond {
            m |= bit(c);
        }
        m
    }
}

pub(crate) fn bit(v: usize) -> u64 {
    1u64 << v
}

/// The nested tree sequence of an R-vine on `dim` variables (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RVineStructure {
    dim: usize,
    trees: Vec<Vec<VineEdge>>,
}

/// Per-variable recipe for sequential sampling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct SamplingStep {
    pub var: usize,
    /// `(tree index, edge index)` for trees 1..k, each with `var` conditioned.
    pub chain: Vec<(usize, usize)>,
}

impl RVineStructure {
    /// Builds and validates a structure from `(a, b, cond)` triples listed
    /// tree by tree; tree membership is taken from the conditioning-set size.
    pub fn from_edges(dim: usize, edges: &[((usize, usize), Vec<usize>)]) -> Result<Self> {
        if dim < 2 || dim > MAX_DIM {
            return Err(Error::InvalidStructure(format!(
                "dimension must be in 2..={MAX_DIM}, got {dim}"
            )));
        }
        let mut trees: Vec<Vec<VineEdge>> = vec![Vec::new(); dim - 1];
        for ((a, b), cond) in edges {
            let (a, b) = ((*a).min(*b), (*a).max(*b));
            let k = cond.len();
            if k >= dim - 1 {
                return Err(Error::InvalidStructure(format!(
                    "edge {a},{b} has conditioning set of size {k} in dimension {dim}"
                )));
            }
            let mut cond = cond.clone();
            cond.sort_unstable();
            trees[k].push(VineEdge {
                pair: (a, b),
                cond,
                inputs: [Source::Var(a), Source::Var(b)],
                nodes: (a, b),
            });
        }
        // Deterministic edge order inside each tree.
        for tree in &mut trees {
            tree.sort_by(|x, y| (&x.cond, x.pair).cmp(&(&y.cond, y.pair)));
        }
        let mut s = RVineStructure { dim, trees };
        s.link()?;
        s.validate()?;
        Ok(s)
    }

    /// Assembles a structure from trees already carrying their links.
    pub(crate) fn from_linked(dim: usize, trees: Vec<Vec<VineEdge>>) -> Result<Self> {
        let s = RVineStructure { dim, trees };
        s.validate()?;
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn trees(&self) -> &[Vec<VineEdge>] {
        &self.trees
    }

    pub fn n_edges(&self) -> usize {
        self.trees.iter().map(Vec::len).sum()
    }

    /// Resolves, for every edge above tree 1, the previous-tree edges whose
    /// complete sets are `{a} ∪ cond` and `{b} ∪ cond`.
    fn link(&mut self) -> Result<()> {
        for k in 1..self.trees.len() {
            let index: HashMap<u64, usize> = self.trees[k - 1]
                .iter()
                .enumerate()
                .map(|(i, e)| (e.complete_mask(), i))
                .collect();
            let prev = self.trees[k - 1].clone();
            for e in &mut self.trees[k] {
                let cmask: u64 = e.cond.iter().map(|&c| bit(c)).fold(0, |a, b| a | b);
                let mut inputs = [Source::Var(0); 2];
                let mut nodes = [0usize; 2];
                for (side, var) in [e.pair.0, e.pair.1].into_iter().enumerate() {
                    let child = *index.get(&(cmask | bit(var))).ok_or_else(|| {
                        Error::InvalidStructure(format!(
                            "edge {} has no tree-{} parent with complete set {{{var}}} ∪ {:?}",
                            fmt_edge(e),
                            k,
                            e.cond
                        ))
                    })?;
                    let c = &prev[child];
                    let cside = if c.pair.0 == var {
                        0
                    } else if c.pair.1 == var {
                        1
                    } else {
                        return Err(Error::InvalidStructure(format!(
                            "variable {var} is not conditioned in tree-{k} edge {}",
                            fmt_edge(c)
                        )));
                    };
                    inputs[side] = Source::Edge {
                        edge: child,
                        side: cside,
                    };
                    nodes[side] = child;
                }
                e.inputs = inputs;
                e.nodes = (nodes[0].min(nodes[1]), nodes[0].max(nodes[1]));
            }
        }
        Ok(())
    }

    /// Checks the tree sequence: sizes, spanning-tree property of every
    /// level and the proximity condition.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim;
        if self.trees.len() != d - 1 {
            return Err(Error::InvalidStructure(format!(
                "expected {} trees, found {}",
                d - 1,
                self.trees.len()
            )));
        }
        for (k, tree) in self.trees.iter().enumerate() {
            let level = k + 1;
            if tree.len() != d - level {
                return Err(Error::InvalidStructure(format!(
                    "tree {level} has {} edges, expected {}",
                    tree.len(),
                    d - level
                )));
            }
            let n_nodes = if k == 0 { d } else { self.trees[k - 1].len() };
            let mut uf = UnionFind::new(n_nodes);
            let mut seen = HashMap::new();
            for e in tree {
                let (a, b) = e.pair;
                if a >= d || b >= d || a >= b {
                    return Err(Error::InvalidStructure(format!(
                        "bad conditioned pair in tree {level}: {}",
                        fmt_edge(e)
                    )));
                }
                if e.cond.len() != k || e.cond.iter().any(|&c| c >= d || c == a || c == b) {
                    return Err(Error::InvalidStructure(format!(
                        "bad conditioning set in tree {level}: {}",
                        fmt_edge(e)
                    )));
                }
                if e.cond.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidStructure(format!(
                        "conditioning set not strictly increasing: {}",
                        fmt_edge(e)
                    )));
                }
                if seen.insert(e.complete_mask(), ()).is_some() {
                    return Err(Error::InvalidStructure(format!(
                        "duplicate complete set in tree {level}: {}",
                        fmt_edge(e)
                    )));
                }
                let (n0, n1) = e.nodes;
                if n0 >= n_nodes || n1 >= n_nodes || n0 == n1 {
                    return Err(Error::InvalidStructure(format!(
                        "edge {} joins invalid nodes",
                        fmt_edge(e)
                    )));
                }
                if k == 0 {
                    if e.nodes != e.pair {
                        return Err(Error::InvalidStructure(format!(
                            "tree-1 edge {} nodes disagree with pair",
                            fmt_edge(e)
                        )));
                    }
                } else {
                    let prev = &self.trees[k - 1];
                    let (c0, c1) = (&prev[n0], &prev[n1]);
                    // Proximity: the joined edges must share a node.
                    let shared = [c0.nodes.0, c0.nodes.1]
                        .iter()
                        .any(|x| *x == c1.nodes.0 || *x == c1.nodes.1);
                    if !shared {
                        return Err(Error::InvalidStructure(format!(
                            "proximity condition violated by {}",
                            fmt_edge(e)
                        )));
                    }
                    let m0 = c0.complete_mask();
                    let m1 = c1.complete_mask();
                    if (m0 | m1) != e.complete_mask() || (m0 & m1).count_ones() as usize != k {
                        return Err(Error::InvalidStructure(format!(
                            "edge {} inconsistent with its parents",
                            fmt_edge(e)
                        )));
                    }
                }
                if !uf.union(n0, n1) {
                    return Err(Error::InvalidStructure(format!(
                        "tree {level} contains a cycle through {}",
                        fmt_edge(e)
                    )));
                }
            }
        }
        Ok(())
    }

    /// Peels the vine into per-variable chains. The returned steps are in
    /// sampling order (the first variable is drawn unconditionally).
    pub(crate) fn sampling_plan(&self) -> Result<Vec<SamplingStep>> {
        let d = self.dim;
        let mut alive: Vec<Vec<bool>> = self.trees.iter().map(|t| vec![true; t.len()]).collect();
        let mut remaining: Vec<usize> = (0..d).collect();
        let mut peeled: Vec<SamplingStep> = Vec::with_capacity(d);

        while remaining.len() > 1 {
            let n = remaining.len();
            let mut found = None;
            'cand: for &x in &remaining {
                let mut chain = Vec::with_capacity(n - 1);
                for k in 0..(n - 1) {
                    let mut hit = None;
                    for (i, e) in self.trees[k].iter().enumerate() {
                        if alive[k][i] && e.complete_mask() & bit(x) != 0 {
                            if hit.is_some() {
                                continue 'cand;
                            }
                            if e.pair.0 != x && e.pair.1 != x {
                                continue 'cand;
                            }
                            hit = Some(i);
                        }
                    }
                    match hit {
                        Some(i) => chain.push((k, i)),
                        None => continue 'cand,
                    }
                }
                found = Some((x, chain));
                break;
            }
            let (x, chain) = found.ok_or_else(|| {
                Error::InvalidStructure(format!(
                    "cannot peel a variable from the sub-vine on {remaining:?}"
                ))
            })?;
            for &(k, i) in &chain {
                alive[k][i] = false;
            }
            remaining.retain(|&v| v != x);
            peeled.push(SamplingStep { var: x, chain });
        }
        peeled.push(SamplingStep {
            var: remaining[0],
            chain: Vec::new(),
        });
        peeled.reverse();
        Ok(peeled)
    }

    /// Lower-triangular structure matrix with 1-based labels: column `i`
    /// holds the `i`-th peeled variable on the diagonal and its partner in
    /// tree `t` in row `dim - t`. Entries above the diagonal are 0.
    pub fn matrix(&self) -> Result<Vec<Vec<usize>>> {
        let d = self.dim;
        let plan = self.sampling_plan()?;
        let mut m = vec![vec![0usize; d]; d];
        for (col, step) in plan.iter().rev().enumerate() {
            m[col][col] = step.var + 1;
            for &(k, i) in &step.chain {
                let e = &self.trees[k][i];
                let partner = if e.pair.0 == step.var {
                    e.pair.1
                } else {
                    e.pair.0
                };
                m[d - 1 - k][col] = partner + 1;
            }
        }
        Ok(m)
    }

    /// Rebuilds a structure from a lower-triangular matrix as produced by
    /// [`matrix`](Self::matrix).
    pub fn from_matrix(m: &[Vec<usize>]) -> Result<Self> {
        let d = m.len();
        if d < 2 || m.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidStructure(
                "structure matrix must be square, dim >= 2".into(),
            ));
        }
        let mut edges = Vec::new();
        for col in 0..d - 1 {
            let x = m[col][col];
            for row in (col + 1)..d {
                let partner = m[row][col];
                let cond: Vec<usize> = ((row + 1)..d).map(|r| m[r][col]).collect();
                if x == 0 || partner == 0 || cond.iter().any(|&c| c == 0) {
                    return Err(Error::InvalidStructure(format!(
                        "zero label below the diagonal in column {col}"
                    )));
                }
                edges.push(((x - 1, partner - 1), cond.iter().map(|c| c - 1).collect()));
            }
        }
        RVineStructure::from_edges(d, &edges)
    }
}

pub(crate) fn fmt_edge(e: &VineEdge) -> String {
    if e.cond.is_empty() {
        format!("{},{}", e.pair.0, e.pair.1)
    } else {
        format!("{},{}|{:?}", e.pair.0, e.pair.1, e.cond)
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns `false` when `a` and `b` were already connected.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dvine4() -> RVineStructure {
        RVineStructure::from_edges(
            4,
            &[
                ((0, 1), vec![]),
                ((1, 2), vec![]),
                ((2, 3), vec![]),
                ((0, 2), vec![1]),
                ((1, 3), vec![2]),
                ((0, 3), vec![1, 2]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn dvine_is_valid_and_round_trips_through_matrix() {
        let s = dvine4();
        assert_eq!(s.n_edges(), 6);
        let m = s.matrix().unwrap();
        for (i, row) in m.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if j > i {
                    assert_eq!(x, 0);
                } else {
                    assert!(x >= 1 && x <= 4);
                }
            }
        }
        let back = RVineStructure::from_matrix(&m).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn cvine_is_valid() {
        let s = RVineStructure::from_edges(
            4,
            &[
                ((0, 1), vec![]),
                ((0, 2), vec![]),
                ((0, 3), vec![]),
                ((1, 2), vec![0]),
                ((1, 3), vec![0]),
                ((2, 3), vec![0, 1]),
            ],
        )
        .unwrap();
        let plan = s.sampling_plan().unwrap();
        assert_eq!(plan.len(), 4);
        for (j, step) in plan.iter().enumerate() {
            assert_eq!(step.chain.len(), j);
        }
    }

    #[test]
    fn proximity_violation_is_rejected() {
        // Tree 1 is the path 0-1-2-3, but 0,3|1 joins edges (0,1) and (1,3),
        // and (1,3) is not in tree 1.
        let err = RVineStructure::from_edges(
            4,
            &[
                ((0, 1), vec![]),
                ((1, 2), vec![]),
                ((2, 3), vec![]),
                ((0, 2), vec![1]),
                ((0, 3), vec![1]),
                ((2, 3), vec![0, 1]),
            ],
        );
        assert!(err.is_err());
    }

    #[test]
    fn tree_one_cycle_is_rejected() {
        let err =
            RVineStructure::from_edges(3, &[((0, 1), vec![]), ((1, 2), vec![]), ((0, 2), vec![1])]);
        assert!(err.is_ok());
        let cyc = RVineStructure::from_edges(
            4,
            &[
                ((0, 1), vec![]),
                ((1, 2), vec![]),
                ((0, 2), vec![]),
                ((0, 2), vec![1]),
                ((1, 3), vec![2]),
                ((0, 3), vec![1, 2]),
            ],
        );
        assert!(cyc.is_err());
    }

    #[test]
    fn wrong_edge_count_is_rejected() {
        let err = RVineStructure::from_edges(3, &[((0, 1), vec![]), ((1, 2), vec![])]);
        assert!(err.is_err());
    }
}
