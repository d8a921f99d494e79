//! Compressed sparse-column matrices for finite-element assembly.
//!
//! Assembly produces unordered (row, col, value) contributions with many
//! duplicates.  [`CscMatrix::from_triplets`] merges them once; the resulting
//! symbolic [`Pattern`] can be reused across repeated assemblies with
//! identical structure (each nonlinear iteration rebuilds values only, via
//! [`CscMatrix::zeros`] and [`CscMatrix::add`]).  Row indices are `u32` to
//! halve the memory footprint of the index stream; all system sizes in this
//! crate stay far below that limit.
//!
//! Dirichlet-style row/column elimination is provided by
//! [`reduce_square_system`], which also folds the pinned values into the
//! right-hand side.

use std::sync::Arc;

/// Immutable sparsity structure in compressed sparse-column form, rows
/// ascending within each column.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub n_rows: usize,
    pub n_cols: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<u32>,
}

impl Pattern {
    /// Builds a pattern from (row, col) pairs; duplicates collapse.
    /// The input buffer is consumed as scratch.
    pub fn from_pairs(n_rows: usize, n_cols: usize, pairs: &mut Vec<(u32, u32)>) -> Pattern {
        assert!(n_rows <= u32::MAX as usize && n_cols <= u32::MAX as usize);
        // Pack as col-major keys so an unstable u64 sort orders by (col, row).
        let mut keys: Vec<u64> = pairs
            .iter()
            .map(|&(r, c)| ((c as u64) << 32) | r as u64)
            .collect();
        pairs.clear();
        keys.sort_unstable();
        keys.dedup();

        let mut col_ptr = vec![0usize; n_cols + 1];
        let mut row_idx = Vec::with_capacity(keys.len());
        for key in keys {
            let col = (key >> 32) as usize;
            let row = (key & 0xffff_ffff) as u32;
            debug_assert!(col < n_cols && (row as usize) < n_rows);
            col_ptr[col + 1] += 1;
            row_idx.push(row);
        }
        for c in 0..n_cols {
            col_ptr[c + 1] += col_ptr[c];
        }
        Pattern {
            n_rows,
            n_cols,
            col_ptr,
            row_idx,
        }
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Position of `(row, col)` in the value array, if structurally present.
    pub fn find(&self, row: u32, col: u32) -> Option<usize> {
        let start = self.col_ptr[col as usize];
        let end = self.col_ptr[col as usize + 1];
        self.row_idx[start..end]
            .binary_search(&row)
            .ok()
            .map(|k| start + k)
    }
}

/// Sparse matrix sharing an immutable [`Pattern`], with its own values.
#[derive(Debug, Clone)]
pub struct CscMatrix {
    pub pattern: Arc<Pattern>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    /// All-zero matrix over an existing pattern.
    pub fn zeros(pattern: Arc<Pattern>) -> CscMatrix {
        let nnz = pattern.nnz();
        CscMatrix {
            pattern,
            values: vec![0.0; nnz],
        }
    }

    /// Merges triplets (duplicates summed) into a fresh matrix and pattern.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &mut Vec<(u32, u32, f64)>,
    ) -> CscMatrix {
        assert!(n_rows <= u32::MAX as usize && n_cols <= u32::MAX as usize);
        let mut keyed: Vec<(u64, f64)> = triplets
            .iter()
            .map(|&(r, c, v)| (((c as u64) << 32) | r as u64, v))
            .collect();
        triplets.clear();
        keyed.sort_unstable_by_key(|&(k, _)| k);

        let mut col_ptr = vec![0usize; n_cols + 1];
        let mut row_idx: Vec<u32> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last_key = u64::MAX;
        for (key, v) in keyed {
            if key == last_key {
                *values.last_mut().expect("entry exists") += v;
            } else {
                let col = (key >> 32) as usize;
                let row = (key & 0xffff_ffff) as u32;
                debug_assert!(col < n_cols && (row as usize) < n_rows);
                col_ptr[col + 1] += 1;
                row_idx.push(row);
                values.push(v);
                last_key = key;
            }
        }
        for c in 0..n_cols {
            col_ptr[c + 1] += col_ptr[c];
        }
        CscMatrix {
            pattern: Arc::new(Pattern {
                n_rows,
                n_cols,
                col_ptr,
                row_idx,
            }),
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.pattern.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.pattern.n_cols
    }

    /// Accumulates into a structurally present entry; panics otherwise, since
    /// assembling outside the symbolic pattern is a programming error.
    pub fn add(&mut self, row: u32, col: u32, value: f64) {
        match self.pattern.find(row, col) {
            Some(pos) => self.values[pos] += value,
            None => panic!("entry ({row}, {col}) not in sparsity pattern"),
        }
    }

    /// Value at `(row, col)`; structural zeros read as 0.
    pub fn get(&self, row: u32, col: u32) -> f64 {
        self.pattern.find(row, col).map_or(0.0, |p| self.values[p])
    }

    /// `y += A x`.
    pub fn matvec_add(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols());
        assert_eq!(y.len(), self.n_rows());
        for col in 0..self.n_cols() {
            let xj = x[col];
            if xj == 0.0 {
                continue;
            }
            for k in self.pattern.col_ptr[col]..self.pattern.col_ptr[col + 1] {
                y[self.pattern.row_idx[k] as usize] += self.values[k] * xj;
            }
        }
    }

    /// `A x` as a fresh vector.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows()];
        self.matvec_add(x, &mut y);
        y
    }

    /// Dense copy for small oracle comparisons in tests.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut dense = nalgebra::DMatrix::zeros(self.n_rows(), self.n_cols());
        for col in 0..self.n_cols() {
            for k in self.pattern.col_ptr[col]..self.pattern.col_ptr[col + 1] {
                dense[(self.pattern.row_idx[k] as usize, col)] = self.values[k];
            }
        }
        dense
    }

    /// Conversion to the direct-solver backend format.
    pub fn to_faer(&self) -> faer::sparse::SparseColMat<usize, f64> {
        let symbolic = faer::sparse::SymbolicSparseColMat::new_checked(
            self.n_rows(),
            self.n_cols(),
            self.pattern.col_ptr.clone(),
            None,
            self.pattern.row_idx.iter().map(|&r| r as usize).collect(),
        );
        faer::sparse::SparseColMat::new(symbolic, self.values.clone())
    }

    /// Largest absolute entry (0 for an empty matrix).
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Square system with some unknowns eliminated and their values folded into
/// the right-hand side.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    /// The free-by-free submatrix.
    pub matrix: CscMatrix,
    /// `rhs_f - A_fp x_p` for the pinned values `x_p`.
    pub rhs: Vec<f64>,
    /// Original index of each reduced unknown.
    pub new_to_old: Vec<usize>,
}

impl ReducedSystem {
    /// Writes a reduced solution back into full-length storage, leaving the
    /// pinned entries untouched.
    pub fn expand_into(&self, reduced: &[f64], full: &mut [f64]) {
        assert_eq!(reduced.len(), self.new_to_old.len());
        for (new, &old) in self.new_to_old.iter().enumerate() {
            full[old] = reduced[new];
        }
    }
}

/// Eliminates the unknowns with `free[i] == false` from the square system
/// `A x = rhs`, substituting their prescribed values from `pinned_values`.
pub fn reduce_square_system(
    a: &CscMatrix,
    rhs: &[f64],
    pinned_values: &[f64],
    free: &[bool],
) -> ReducedSystem {
    let n = a.n_rows();
    assert_eq!(a.n_cols(), n);
    assert_eq!(rhs.len(), n);
    assert_eq!(pinned_values.len(), n);
    assert_eq!(free.len(), n);

    let mut old_to_new = vec![u32::MAX; n];
    let mut new_to_old = Vec::new();
    for (old, &is_free) in free.iter().enumerate() {
        if is_free {
            old_to_new[old] = new_to_old.len() as u32;
            new_to_old.push(old);
        }
    }
    let n_free = new_to_old.len();

    let mut reduced_rhs: Vec<f64> = new_to_old.iter().map(|&old| rhs[old]).collect();
    let mut col_ptr = vec![0usize; n_free + 1];
    let mut row_idx = Vec::new();
    let mut values = Vec::new();
    for col in 0..n {
        let entries = a.pattern.col_ptr[col]..a.pattern.col_ptr[col + 1];
        if free[col] {
            let new_col = old_to_new[col] as usize;
            for k in entries {
                let row = a.pattern.row_idx[k] as usize;
                if free[row] {
                    col_ptr[new_col + 1] += 1;
                    row_idx.push(old_to_new[row]);
                    values.push(a.values[k]);
                }
            }
        } else {
            // Pinned column: move its coupling into the right-hand side.
            let xp = pinned_values[col];
            if xp != 0.0 {
                for k in entries {
                    let row = a.pattern.row_idx[k] as usize;
                    if free[row] {
                        reduced_rhs[old_to_new[row] as usize] -= a.values[k] * xp;
                    }
                }
            }
        }
    }
    for c in 0..n_free {
        col_ptr[c + 1] += col_ptr[c];
    }

    ReducedSystem {
        matrix: CscMatrix {
            pattern: Arc::new(Pattern {
                n_rows: n_free,
                n_cols: n_free,
                col_ptr,
                row_idx,
            }),
            values,
        },
        rhs: reduced_rhs,
        new_to_old,
    }
}
