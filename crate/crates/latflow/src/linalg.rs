//! Small dense matrices, generic over the scalar, plus the float kernels
//! (LU inverse/determinant, infinity operator norm) that the lattice module
//! leans on. Dimensions here are tiny (k <= 8), so everything is plain
//! O(k^3) with partial pivoting and nothing fancier.

use std::fmt;

use crate::scalar::{Real, Scalar};

/// Row-major dense matrix.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Mat<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Mat {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    /// Column-major construction: `cols[j]` becomes the j-th column.
    pub fn from_cols(cols: Vec<Vec<S>>) -> Self {
        let c = cols.len();
        let r = if c == 0 { 0 } else { cols[0].len() };
        assert!(cols.iter().all(|col| col.len() == r), "ragged columns");
        let mut m = Mat::zeros(r, c);
        for (j, col) in cols.into_iter().enumerate() {
            for (i, v) in col.into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn col(&self, j: usize) -> Vec<S> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Mat<S> {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn matmul(&self, other: &Mat<S>) -> Mat<S> {
        assert_eq!(self.cols, other.rows, "dimension mismatch in matmul");
        let mut out: Mat<S> = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)].clone();
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)].clone() + a.clone() * other[(l, j)].clone();
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(self.cols, v.len(), "dimension mismatch in matvec");
        (0..self.rows)
            .map(|i| {
                let mut acc = S::zero();
                for j in 0..self.cols {
                    acc = acc + self[(i, j)].clone() * v[j].clone();
                }
                acc
            })
            .collect()
    }

    pub fn scale(&self, c: &S) -> Mat<S> {
        let mut out = self.clone();
        for x in &mut out.data {
            *x = x.clone() * c.clone();
        }
        out
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Mat<T> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Entrywise absolute values.
    pub fn abs(&self) -> Mat<S> {
        self.map(|x| x.abs())
    }

    /// j x j minor on the given (sorted) row and column index sets, expanded
    /// by cofactors. Exact for integer scalars; fine for j <= 5.
    pub fn minor(&self, rows: &[usize], cols: &[usize]) -> S {
        debug_assert_eq!(rows.len(), cols.len());
        let j = rows.len();
        match j {
            0 => S::one(),
            1 => self[(rows[0], cols[0])].clone(),
            _ => {
                let mut acc = S::zero();
                let sub_rows = &rows[1..];
                let mut sub_cols = Vec::with_capacity(j - 1);
                for (pos, &c) in cols.iter().enumerate() {
                    let a = self[(rows[0], c)].clone();
                    if a.is_zero() {
                        continue;
                    }
                    sub_cols.clear();
                    sub_cols.extend(cols.iter().filter(|&&cc| cc != c).cloned());
                    let m = self.minor(sub_rows, &sub_cols);
                    let term = a * m;
                    acc = if pos % 2 == 0 { acc + term } else { acc - term };
                }
                acc
            }
        }
    }
}

impl<S> std::ops::Index<(usize, usize)> for Mat<S> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S> std::ops::IndexMut<(usize, usize)> for Mat<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

impl<S: fmt::Debug> fmt::Debug for Mat<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[i * self.cols..(i + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

impl<R: Real> Mat<R> {
    /// Max absolute row sum: the operator norm for sup-norm vectors.
    pub fn opnorm_inf(&self) -> R {
        let mut best = R::zero();
        for i in 0..self.rows {
            let mut s = R::zero();
            for j in 0..self.cols {
                s = s + self[(i, j)].abs();
            }
            if s > best {
                best = s;
            }
        }
        best
    }

    /// Absolute row sums, one per row. These certify per-coordinate
    /// enumeration boxes: |m_i| <= rowsum_i(g^{-1}) * ||g m||_inf.
    pub fn abs_row_sums(&self) -> Vec<R> {
        (0..self.rows)
            .map(|i| {
                let mut s = R::zero();
                for j in 0..self.cols {
                    s = s + self[(i, j)].abs();
                }
                s
            })
            .collect()
    }

    pub fn max_abs_entry(&self) -> R {
        self.data
            .iter()
            .fold(R::zero(), |m, x| if x.abs() > m { x.abs() } else { m })
    }

    /// LU determinant with partial pivoting.
    pub fn det_lu(&self) -> R {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut det = R::one();
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if a[(r, col)].abs() > a[(piv, col)].abs() {
                    piv = r;
                }
            }
            if a[(piv, col)].is_zero() {
                return R::zero();
            }
            if piv != col {
                for j in 0..n {
                    let tmp = a[(col, j)];
                    a[(col, j)] = a[(piv, j)];
                    a[(piv, j)] = tmp;
                }
                det = -det;
            }
            det = det * a[(col, col)];
            for r in col + 1..n {
                let f = a[(r, col)] / a[(col, col)];
                for j in col..n {
                    let sub = f * a[(col, j)];
                    a[(r, j)] = a[(r, j)] - sub;
                }
            }
        }
        det
    }

    /// Gauss-Jordan inverse with partial pivoting. `None` when a pivot
    /// vanishes to working precision.
    pub fn inverse(&self) -> Option<Mat<R>> {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Mat::identity(n);
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if a[(r, col)].abs() > a[(piv, col)].abs() {
                    piv = r;
                }
            }
            if a[(piv, col)].abs() <= R::cast_f64(1e-300) {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    a.data.swap(col * n + j, piv * n + j);
                    inv.data.swap(col * n + j, piv * n + j);
                }
            }
            let d = a[(col, col)];
            for j in 0..n {
                a[(col, j)] = a[(col, j)] / d;
                inv[(col, j)] = inv[(col, j)] / d;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)];
                if f.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let s1 = f * a[(col, j)];
                    a[(r, j)] = a[(r, j)] - s1;
                    let s2 = f * inv[(col, j)];
                    inv[(r, j)] = inv[(r, j)] - s2;
                }
            }
        }
        Some(inv)
    }
}

pub fn sup_norm<S: Scalar>(v: &[S]) -> S {
    v.iter()
        .fold(S::zero(), |m, x| if x.abs() > m { x.abs() } else { m })
}

pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(S::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip() {
        let m = Mat::from_rows(vec![
            vec![2.0f64, 1.0, 0.0],
            vec![1.0, 1.0, 1.0],
            vec![0.0, 3.0, 1.0],
        ]);
        let inv = m.inverse().unwrap();
        let prod = m.matmul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn det_matches_cofactor_minor() {
        let m = Mat::from_rows(vec![vec![3i64, -1, 2], vec![0, 4, 1], vec![5, 2, -2]]);
        let exact = m.minor(&[0, 1, 2], &[0, 1, 2]);
        let f = m.map(|&x| x as f64);
        assert!((f.det_lu() - exact as f64).abs() < 1e-9);
    }

    #[test]
    fn opnorm_is_max_row_sum() {
        let m = Mat::from_rows(vec![vec![1.0f64, -2.0], vec![0.5, 0.25]]);
        assert_eq!(m.opnorm_inf(), 3.0);
    }

    #[test]
    fn generic_over_f32() {
        let m = Mat::from_rows(vec![vec![2.0f32, 0.0], vec![0.0, 0.5]]);
        assert!((m.det_lu() - 1.0).abs() < 1e-6);
    }
}
