use crate::error::{Error, Result};

use super::Tensor;

/// Coordinate-list matrix. Entries are kept sorted by `(row, col)` with
/// duplicates merged.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
    symmetric: bool,
}

impl SparseMatrix {
    /// Builds from triplets; duplicate coordinates are summed. When
    /// `symmetric` is set the result must satisfy `M(i,j) == M(j,i)`.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut entries: Vec<(usize, usize, f64)>,
        symmetric: bool,
    ) -> Result<Self> {
        for &(i, j, w) in &entries {
            if i >= rows {
                return Err(Error::Index {
                    what: "row",
                    index: i,
                    bound: rows,
                });
            }
            if j >= cols {
                return Err(Error::Index {
                    what: "column",
                    index: j,
                    bound: cols,
                });
            }
            if !w.is_finite() {
                return Err(Error::validation(format!("non-finite entry at ({i}, {j})")));
            }
        }
        entries.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (i, j, w) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += w,
                _ => merged.push((i, j, w)),
            }
        }
        let m = Self {
            rows,
            cols,
            entries: merged,
            symmetric,
        };
        if symmetric {
            if rows != cols {
                return Err(Error::dim(format!(
                    "symmetric matrix must be square, got {rows}×{cols}"
                )));
            }
            for &(i, j, w) in &m.entries {
                if m.get(j, i) != w {
                    return Err(Error::validation(format!("entry ({i}, {j}) = {w} has no equal mirror")));
                }
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries
            .binary_search_by(|e| (e.0, e.1).cmp(&(i, j)))
            .map(|pos| self.entries[pos].2)
            .unwrap_or(0.0)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::dim(format!(
                "matvec: matrix has {} columns, vector has {} entries",
                self.cols,
                x.len()
            )));
        }
        let mut y = vec![0.0; self.rows];
        for &(i, j, w) in &self.entries {
            y[i] += w * x[j];
        }
        Ok(y)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.rows];
        for &(i, _, w) in &self.entries {
            s[i] += w;
        }
        s
    }

    pub fn to_dense(&self) -> Tensor {
        let mut t = Tensor::zeros(&[self.rows, self.cols]);
        let cols = self.cols;
        let data = t.data_mut();
        for &(i, j, w) in &self.entries {
            data[i * cols + j] += w;
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_out_of_range_and_asymmetric() {
        assert!(SparseMatrix::from_triplets(2, 2, vec![(2, 0, 1.0)], false).is_err());
        assert!(SparseMatrix::from_triplets(2, 2, vec![(0, 1, 1.0)], true).is_err());
        assert!(SparseMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, 2.0)], true).is_err());
        assert!(SparseMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, 1.0)], true).is_ok());
    }

    #[test]
    fn merges_duplicates() {
        let m = SparseMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (0, 1, 2.5)], false).unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), 3.5);
    }

    fn instance() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>, Vec<f64>)> {
        (1usize..=50).prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec((0..n, 0..n, -2.0f64..2.0), 0..200),
                prop::collection::vec(-2.0f64..2.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn matvec_matches_dense((n, trip, x) in instance()) {
            let m = SparseMatrix::from_triplets(n, n, trip, false).unwrap();
            let y = m.matvec(&x).unwrap();
            let dense = m.to_dense();
            for i in 0..n {
                let expect: f64 = (0..n).map(|j| dense.get(i, j) * x[j]).sum();
                prop_assert!((y[i] - expect).abs() <= 1e-12);
            }
        }
    }
}
