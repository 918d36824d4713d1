//! Compressed sparse row matrices assembled from triplets.

use crate::solver::SolverError;

/// Square CSR matrix with sorted column indices and no duplicates.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Duplicates are summed in input order, so the result is deterministic.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(i, j, _) in triplets {
            assert!(i < n && j < n, "triplet ({i}, {j}) outside a {n}×{n} matrix");
            counts[i + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut order = vec![0usize; triplets.len()];
        let mut fill = counts.clone();
        for (k, &(i, _, _)) in triplets.iter().enumerate() {
            order[fill[i]] = k;
            fill[i] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for i in 0..n {
            row.clear();
            row.extend(
                order[counts[i]..counts[i + 1]]
                    .iter()
                    .map(|&k| (triplets[k].1, triplets[k].2)),
            );
            // stable sort keeps the summation order of duplicates fixed
            row.sort_by_key(|&(j, _)| j);
            let mut iter = row.iter().peekable();
            while let Some(&(j, mut v)) = iter.next() {
                while let Some(&&(j2, v2)) = iter.peek() {
                    if j2 != j {
                        break;
                    }
                    v += v2;
                    iter.next();
                }
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        CsrMatrix {
            n: d.len(),
            row_ptr: (0..=d.len()).collect(),
            col_idx: (0..d.len()).collect(),
            values: d.to_vec(),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `xᵀ A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>())
            .sum()
    }

    /// Row sums (equal to `A·1`).
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        CsrMatrix {
            values: self.values.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }

    /// `Σ cₖ Aₖ` over matrices of equal size.
    pub fn linear_combination(terms: &[(f64, &CsrMatrix)]) -> Self {
        let n = terms.first().map_or(0, |(_, a)| a.n);
        let mut triplets = Vec::with_capacity(terms.iter().map(|(_, a)| a.nnz()).sum());
        for (c, a) in terms {
            assert_eq!(a.n, n, "matrix sizes differ in linear combination");
            for i in 0..n {
                triplets.extend(a.row(i).map(|(j, v)| (i, j, c * v)));
            }
        }
        CsrMatrix::from_triplets(n, &triplets)
    }

    /// Largest `|i − j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| {
            self.row(i).all(|(j, v)| {
                let w = self.get(j, i);
                (v - w).abs() <= tol * v.abs().max(w.abs()).max(1.0)
            })
        })
    }

    pub fn check_finite(&self) -> Result<(), SolverError> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(k) => Err(SolverError::NonFinite(format!("matrix entry {k} is not finite"))),
        }
    }

    /// Replace rows and columns of `constrained` dofs by the identity.
    /// `rhs` is not touched: homogeneous constraints only need a zero there.
    pub fn constrain(&self, constrained: &[bool]) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            if constrained[i] {
                triplets.push((i, i, 1.0));
                continue;
            }
            triplets.extend(self.row(i).filter(|&(j, _)| !constrained[j]).map(|(j, v)| (i, j, v)));
        }
        CsrMatrix::from_triplets(self.n, &triplets)
    }

    /// Principal submatrix on `keep` (in the given order).
    pub fn submatrix(&self, keep: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.n];
        for (k, &i) in keep.iter().enumerate() {
            map[i] = k;
        }
        let mut triplets = Vec::new();
        for (k, &i) in keep.iter().enumerate() {
            triplets.extend(
                self.row(i)
                    .filter(|&(j, _)| map[j] != usize::MAX)
                    .map(|(j, v)| (k, map[j], v)),
            );
        }
        CsrMatrix::from_triplets(keep.len(), &triplets)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }
}
