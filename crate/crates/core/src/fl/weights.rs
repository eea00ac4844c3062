use faer::{Mat, Side};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spatial::{KdTree, PointSet};

/// Row-standardized, symmetrized k-nearest-neighbor weights.
///
/// The binary adjacency `A` links each point to its `k` nearest neighbors and
/// is symmetrized with `A = max(A, A^T)`; `W = D^{-1} A` with `D` the degree
/// matrix. `W` is similar to `D^{-1/2} A D^{-1/2}`, so its spectrum is real and
/// is computed once here.
#[derive(Debug, Clone, Serialize)]
pub struct WeightsMatrix {
    n: usize,
    k: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    /// Ascending.
    eigenvalues: Vec<f64>,
}

pub fn build_knn_weights(points: &PointSet, k: usize) -> Result<WeightsMatrix> {
    let n = points.len();
    if k == 0 || n <= k {
        return Err(Error::InvalidK { k, n });
    }
    let tree = KdTree::build(points)?;
    let mut adj: Vec<Vec<usize>> = vec![Vec::with_capacity(2 * k); n];
    for i in 0..n {
        for nb in tree.nearest_neighbors(i, k, f64::INFINITY)? {
            adj[i].push(nb.index);
            adj[nb.index].push(i);
        }
    }
    for row in &mut adj {
        row.sort_unstable();
        row.dedup();
    }

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for row in &adj {
        let w = 1.0 / row.len() as f64;
        cols.extend_from_slice(row);
        vals.extend(std::iter::repeat_n(w, row.len()));
        row_ptr.push(cols.len());
    }

    let deg: Vec<f64> = adj.iter().map(|r| r.len() as f64).collect();
    let mut sym = Mat::<f64>::zeros(n, n);
    for (i, row) in adj.iter().enumerate() {
        for &j in row {
            sym[(i, j)] = 1.0 / (deg[i] * deg[j]).sqrt();
        }
    }
    let mut eigenvalues = sym
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::NoConvergence(format!("eigenvalue decomposition failed: {e:?}")))?;
    eigenvalues.sort_by(f64::total_cmp);

    Ok(WeightsMatrix {
        n,
        k,
        row_ptr,
        cols,
        vals,
        eigenvalues,
    })
}

impl WeightsMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `(column, weight)` entries of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[self.n - 1]
    }

    /// Open interval of admissible spatial coefficients, `(1/lambda_min, 1)`.
    pub fn rho_bounds(&self) -> (f64, f64) {
        (1.0 / self.lambda_min(), 1.0)
    }

    /// `W v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, w)| w * v[j]).sum())
            .collect()
    }

    /// `ln det(I - rho W)` from the spectrum.
    pub fn log_det(&self, rho: f64) -> f64 {
        self.eigenvalues.iter().map(|&l| (1.0 - rho * l).ln()).sum()
    }

    /// Dense copy of `W`.
    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, w) in self.row(i) {
                m[(i, j)] = w;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn collinear_symmetrization() {
        let pts = PointSet::from_coords([(0.0, 0.0), (1.0, 0.0), (3.0, 0.0)]).unwrap();
        let w = build_knn_weights(&pts, 1).unwrap();
        let rows: Vec<Vec<(usize, f64)>> = (0..3).map(|i| w.row(i).collect()).collect();
        assert_eq!(rows[0], vec![(1, 1.0)]);
        assert_eq!(rows[1], vec![(0, 0.5), (2, 0.5)]);
        assert_eq!(rows[2], vec![(1, 1.0)]);
    }

    #[test]
    fn invalid_k() {
        let pts = PointSet::from_coords([(0.0, 0.0), (1.0, 0.0)]).unwrap();
        assert_eq!(
            build_knn_weights(&pts, 2).unwrap_err(),
            Error::InvalidK { k: 2, n: 2 }
        );
        assert_eq!(
            build_knn_weights(&pts, 0).unwrap_err(),
            Error::InvalidK { k: 0, n: 2 }
        );
    }

    #[test]
    fn rows_sum_to_one_and_spectrum_tops_at_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts =
            PointSet::from_coords((0..300).map(|_| (rng.random::<f64>(), rng.random::<f64>())))
                .unwrap();
        let w = build_knn_weights(&pts, 5).unwrap();
        for i in 0..300 {
            let row: Vec<(usize, f64)> = w.row(i).collect();
            assert!(row.iter().all(|&(j, _)| j != i));
            assert!(row.len() >= 5);
            let s: f64 = row.iter().map(|&(_, v)| v).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!((w.lambda_max() - 1.0).abs() < 1e-10);
        assert!(w.lambda_min() >= -1.0 - 1e-10 && w.lambda_min() < 0.0);
    }
}
