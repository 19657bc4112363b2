use crate::error::{Error, Result};
use crate::matrix::dense::Dense;

/// Column-compressed sparse matrix.
///
/// Column pointers are non-decreasing and no explicit zeros are stored.
/// Row indices within a column are strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Csc {
    rows: usize,
    cols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl Csc {
    /// Assemble from (row, col, value) triplets. Duplicate positions are summed,
    /// zeros (including sums that cancel to zero) are dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        for &(i, j, _) in &triplets {
            if i >= rows || j >= cols {
                return Err(Error::DimensionMismatch(format!(
                    "entry ({i}, {j}) outside a {rows}x{cols} matrix"
                )));
            }
        }
        triplets.sort_unstable_by_key(|&(i, j, _)| (j, i));

        let mut col_ptr = vec![0usize; cols + 1];
        let mut row_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut prev: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if prev == Some((i, j)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            prev = Some((i, j));
            row_idx.push(i);
            values.push(v);
            col_ptr[j + 1] += 1;
        }
        for j in 0..cols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let mut m = Csc {
            rows,
            cols,
            col_ptr,
            row_idx,
            values,
        };
        m.drop_zeros();
        Ok(m)
    }

    pub fn from_dense(d: &Dense) -> Self {
        let mut col_ptr = vec![0usize; d.cols() + 1];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for j in 0..d.cols() {
            for i in 0..d.rows() {
                let v = d.get(i, j);
                if v != 0.0 {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr[j + 1] = values.len();
        }
        Csc {
            rows: d.rows(),
            cols: d.cols(),
            col_ptr,
            row_idx,
            values,
        }
    }

    fn drop_zeros(&mut self) {
        if !self.values.contains(&0.0) {
            return;
        }
        let mut col_ptr = vec![0usize; self.cols + 1];
        let mut row_idx = Vec::with_capacity(self.row_idx.len());
        let mut values = Vec::with_capacity(self.values.len());
        for j in 0..self.cols {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                if self.values[k] != 0.0 {
                    row_idx.push(self.row_idx[k]);
                    values.push(self.values[k]);
                }
            }
            col_ptr[j + 1] = values.len();
        }
        self.col_ptr = col_ptr;
        self.row_idx = row_idx;
        self.values = values;
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    /// Row indices and values of column `j`.
    #[inline]
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[range.clone()], &self.values[range])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (ri, vs) = self.col(j);
        match ri.binary_search(&i) {
            Ok(k) => vs[k],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.cols).flat_map(move |j| {
            let (ri, vs) = self.col(j);
            ri.iter().zip(vs).map(move |(&i, &v)| (i, j, v))
        })
    }

    pub fn transposed(&self) -> Csc {
        let triplets: Vec<(usize, usize, f64)> =
            self.iter().map(|(i, j, v)| (j, i, v)).collect();
        Csc::from_triplets(self.cols, self.rows, triplets)
            .expect("transposed indices are in range")
    }

    pub fn to_dense(&self) -> Dense {
        let mut d = Dense::zeros(self.rows, self.cols);
        for (i, j, v) in self.iter() {
            d.set(i, j, v);
        }
        d
    }

    pub fn frob_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn min_value(&self) -> f64 {
        // absent entries are zeros
        let min_stored = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        if self.nnz() < self.rows * self.cols {
            min_stored.min(0.0)
        } else {
            min_stored
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn find_invalid(&self, forbid_negative: bool) -> Option<(usize, usize, f64)> {
        self.iter()
            .find(|&(_, _, v)| !v.is_finite() || (forbid_negative && v < 0.0))
    }
}
