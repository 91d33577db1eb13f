//! Graph shift operators.
//!
//! A shift is an `N x N` sparse matrix `S` applied to node signals. Row `i`
//! of `S X` combines the signals of the out-neighbors of `i`, so a signal
//! placed on node `u` moves to the in-neighbors of `u`.

use super::GnnError;
use crate::graph::LabeledGraph;
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// How a graph is turned into a shift operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftKind {
    /// The 0/1 adjacency matrix as stored.
    Raw,
    /// `D_out^{-1/2} (A with self loops) D_in^{-1/2}`. For undirected graphs
    /// this is the usual symmetric normalization.
    #[default]
    Normalized,
    /// The identity; the graph is ignored.
    Identity,
}

/// Compressed sparse rows with values.
#[derive(Debug, Clone, PartialEq)]
struct Csr {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    fn transpose(&self, n: usize) -> Csr {
        let mut counts = vec![0usize; n + 1];
        for &c in &self.cols {
            counts[c + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let offsets = counts.clone();
        let mut next = counts;
        let mut cols = vec![0; self.cols.len()];
        let mut vals = vec![0.0; self.vals.len()];
        for row in 0..n {
            for idx in self.offsets[row]..self.offsets[row + 1] {
                let c = self.cols[idx];
                cols[next[c]] = row;
                vals[next[c]] = self.vals[idx];
                next[c] += 1;
            }
        }
        Csr { offsets, cols, vals }
    }

    fn spmm(&self, x: &Array2<f64>) -> Array2<f64> {
        let (n, f) = x.dim();
        let x = x.as_standard_layout();
        let src = x.as_slice().expect("standard layout");
        let mut out = vec![0.0; n * f];
        out.par_chunks_mut(f.max(1)).enumerate().for_each(|(row, dst)| {
            if f == 0 {
                return;
            }
            for idx in self.offsets[row]..self.offsets[row + 1] {
                let w = self.vals[idx];
                let s = &src[self.cols[idx] * f..(self.cols[idx] + 1) * f];
                for (d, v) in dst.iter_mut().zip(s) {
                    *d += w * v;
                }
            }
        });
        Array2::from_shape_vec((n, f), out).expect("shape")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftOperator {
    n: usize,
    kind: ShiftKind,
    forward: Option<Csr>,
    backward: Option<Csr>,
}

impl ShiftOperator {
    pub fn identity(n: usize) -> Self {
        ShiftOperator {
            n,
            kind: ShiftKind::Identity,
            forward: None,
            backward: None,
        }
    }

    pub fn from_graph(g: &LabeledGraph, kind: ShiftKind) -> Self {
        let n = g.num_nodes();
        let csr = match kind {
            ShiftKind::Identity => return Self::identity(n),
            ShiftKind::Raw => {
                let mut offsets = vec![0];
                let mut cols = Vec::with_capacity(g.num_edges());
                for u in 0..n {
                    cols.extend_from_slice(g.neighbors(u));
                    offsets.push(cols.len());
                }
                let vals = vec![1.0; cols.len()];
                Csr { offsets, cols, vals }
            }
            ShiftKind::Normalized => {
                // self loops are ensured, never doubled
                let mut offsets = vec![0];
                let mut cols = Vec::with_capacity(g.num_edges() + n);
                for u in 0..n {
                    let start = cols.len();
                    cols.extend_from_slice(g.neighbors(u));
                    if !g.has_self_loop(u) {
                        cols.push(u);
                        cols[start..].sort_unstable();
                    }
                    offsets.push(cols.len());
                }
                let mut in_deg = vec![0usize; n];
                for &c in &cols {
                    in_deg[c] += 1;
                }
                let mut vals = Vec::with_capacity(cols.len());
                for u in 0..n {
                    let out_deg = (offsets[u + 1] - offsets[u]) as f64;
                    for &v in &cols[offsets[u]..offsets[u + 1]] {
                        vals.push(1.0 / (out_deg * in_deg[v] as f64).sqrt());
                    }
                }
                Csr { offsets, cols, vals }
            }
        };
        let backward = csr.transpose(n);
        ShiftOperator {
            n,
            kind,
            forward: Some(csr),
            backward: Some(backward),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> ShiftKind {
        self.kind
    }

    fn check(&self, x: &Array2<f64>) -> Result<(), GnnError> {
        if x.nrows() != self.n {
            return Err(GnnError::ShapeMismatch(format!(
                "signal has {} rows, shift is {}x{}",
                x.nrows(),
                self.n,
                self.n
            )));
        }
        Ok(())
    }

    /// `S x`.
    pub fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>, GnnError> {
        self.check(x)?;
        Ok(match &self.forward {
            Some(csr) => csr.spmm(x),
            None => x.clone(),
        })
    }

    /// `S^T x`.
    pub fn apply_transpose(&self, x: &Array2<f64>) -> Result<Array2<f64>, GnnError> {
        self.check(x)?;
        Ok(match &self.backward {
            Some(csr) => csr.spmm(x),
            None => x.clone(),
        })
    }

    /// Dense copy of the operator.
    pub fn to_dense(&self) -> Array2<f64> {
        match &self.forward {
            None => Array2::eye(self.n),
            Some(csr) => {
                let mut a = Array2::zeros((self.n, self.n));
                for row in 0..self.n {
                    for idx in csr.offsets[row]..csr.offsets[row + 1] {
                        a[[row, csr.cols[idx]]] = csr.vals[idx];
                    }
                }
                a
            }
        }
    }

    /// Entries of the operator in row-major order.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        match &self.forward {
            None => (0..self.n).map(|i| (i, i, 1.0)).collect(),
            Some(csr) => (0..self.n)
                .flat_map(|row| (csr.offsets[row]..csr.offsets[row + 1]).map(move |idx| (row, csr.cols[idx], csr.vals[idx])))
                .collect(),
        }
    }
}

/// Returns `[X, S X, S^2 X, ..., S^{d-1} X]`, applying `S` once per term.
pub fn shift_powers_apply(s: &ShiftOperator, x: &Array2<f64>, degree: usize) -> Result<Vec<Array2<f64>>, GnnError> {
    if degree == 0 {
        return Err(GnnError::InvalidConfig("polynomial degree must be at least 1".into()));
    }
    s.check(x)?;
    let mut out = Vec::with_capacity(degree);
    out.push(x.clone());
    for _ in 1..degree {
        let next = s.apply(out.last().expect("nonempty"))?;
        out.push(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Directedness;
    use ndarray::array;

    fn swap_graph() -> LabeledGraph {
        LabeledGraph::from_edges(vec![0, 0], 1, [(0, 1)], Directedness::Undirected).unwrap()
    }

    #[test]
    fn identity_powers_repeat_x() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let p = shift_powers_apply(&ShiftOperator::identity(2), &x, 4).unwrap();
        assert_eq!(p.len(), 4);
        assert!(p.iter().all(|m| *m == x));
    }

    #[test]
    fn degree_one_is_x_only() {
        let x = array![[1.0], [0.0]];
        let s = ShiftOperator::from_graph(&swap_graph(), ShiftKind::Raw);
        assert_eq!(shift_powers_apply(&s, &x, 1).unwrap(), vec![x]);
    }

    #[test]
    fn swap_operator_powers() {
        let s = ShiftOperator::from_graph(&swap_graph(), ShiftKind::Raw);
        let p = shift_powers_apply(&s, &array![[1.0], [0.0]], 3).unwrap();
        assert_eq!(p, vec![array![[1.0], [0.0]], array![[0.0], [1.0]], array![[1.0], [0.0]]]);
    }

    #[test]
    fn shape_mismatch() {
        let s = ShiftOperator::from_graph(&swap_graph(), ShiftKind::Raw);
        assert!(matches!(shift_powers_apply(&s, &Array2::zeros((3, 1)), 2), Err(GnnError::ShapeMismatch(_))));
        assert!(matches!(shift_powers_apply(&s, &Array2::zeros((2, 1)), 0), Err(GnnError::InvalidConfig(_))));
    }

    #[test]
    fn normalized_swap_adds_self_loops() {
        let s = ShiftOperator::from_graph(&swap_graph(), ShiftKind::Normalized);
        assert_eq!(s.to_dense(), array![[0.5, 0.5], [0.5, 0.5]]);
        // an existing self loop is not counted twice
        let g = swap_graph().with_self_loops();
        assert_eq!(ShiftOperator::from_graph(&g, ShiftKind::Normalized).to_dense(), array![[0.5, 0.5], [0.5, 0.5]]);
    }

    #[test]
    fn transpose_matches_dense() {
        let g = LabeledGraph::from_edges(vec![0; 4], 1, [(0, 1), (0, 2), (2, 3), (3, 1)], Directedness::Directed).unwrap();
        for kind in [ShiftKind::Raw, ShiftKind::Normalized, ShiftKind::Identity] {
            let s = ShiftOperator::from_graph(&g, kind);
            let x = Array2::from_shape_fn((4, 3), |(i, j)| (i * 3 + j) as f64 - 4.0);
            let dense = s.to_dense();
            let close = |a: Array2<f64>, b: Array2<f64>| a.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-12);
            assert!(close(s.apply(&x).unwrap(), dense.dot(&x)));
            assert!(close(s.apply_transpose(&x).unwrap(), dense.t().dot(&x)));
        }
    }
}
