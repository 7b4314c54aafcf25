//! Exterior algebra of R^k with the sup norm.
//!
//! A [`MultiVector`] stores one coefficient per subset I of {1..k}, densely
//! indexed by bitmask (bit i-1 set means index i is in I; the empty set is
//! the scalar grade, with e_empty = 1). The norm is the max of the absolute
//! coefficients. Discrete subgroups are represented by the wedge of a basis,
//! defined up to sign, and the norm of a subgroup is the norm of any
//! representative.
//!
//! Sign convention: for disjoint I and J,
//! e_I ^ e_J = (-1)^s e_{I u J} where s counts pairs (i, j) with i in I,
//! j in J and i > j, i.e. the inversions of the shuffle that sorts the
//! concatenation of the two sorted tuples. This is deterministic, so wedge
//! results are bit-reproducible across runs.

use thiserror::Error;

use crate::linalg::Mat;
use crate::scalar::{Real, Scalar};

pub const MAX_DIM: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExteriorError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("basis vectors are linearly dependent (zero wedge)")]
    DependentBasis,
    #[error("dimension {0} exceeds supported maximum {MAX_DIM}")]
    DimensionTooLarge(usize),
}

/// Graded coefficient table over basis elements e_I of the exterior algebra
/// of R^k, k <= 8.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiVector<S> {
    dim: usize,
    coeffs: Vec<S>,
}

impl<S: Scalar> MultiVector<S> {
    pub fn zero(dim: usize) -> Self {
        assert!(dim <= MAX_DIM, "dimension {dim} exceeds {MAX_DIM}");
        MultiVector {
            dim,
            coeffs: vec![S::zero(); 1 << dim],
        }
    }

    /// The scalar multivector c * e_empty.
    pub fn scalar(dim: usize, c: S) -> Self {
        let mut m = Self::zero(dim);
        m.coeffs[0] = c;
        m
    }

    /// Grade-1 multivector from a coordinate vector.
    pub fn from_vector(v: &[S]) -> Self {
        let mut m = Self::zero(v.len());
        for (i, x) in v.iter().enumerate() {
            m.coeffs[1 << i] = x.clone();
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Coefficient of e_I for the bitmask of I.
    pub fn coeff(&self, mask: usize) -> &S {
        &self.coeffs[mask]
    }

    pub fn set_coeff(&mut self, mask: usize, v: S) {
        self.coeffs[mask] = v;
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// max_I |w_I|; 0 iff all coefficients are 0.
    pub fn sup_norm(&self) -> S {
        self.coeffs
            .iter()
            .fold(S::zero(), |m, c| if c.abs() > m { c.abs() } else { m })
    }

    /// Indices of the single grade carrying nonzero coefficients, if the
    /// multivector is homogeneous; the zero multivector reports grade 0.
    pub fn grade(&self) -> Option<usize> {
        let mut g = None;
        for (mask, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                let pc = mask.count_ones() as usize;
                match g {
                    None => g = Some(pc),
                    Some(h) if h != pc => return None,
                    _ => {}
                }
            }
        }
        Some(g.unwrap_or(0))
    }

    pub fn neg(&self) -> Self {
        MultiVector {
            dim: self.dim,
            coeffs: self.coeffs.iter().map(|c| -c.clone()).collect(),
        }
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> MultiVector<T> {
        MultiVector {
            dim: self.dim,
            coeffs: self.coeffs.iter().map(f).collect(),
        }
    }
}

/// Parity of the shuffle sorting (sorted I, sorted J) into sorted I u J,
/// for disjoint bitmasks: counts pairs i in I, j in J with i > j.
fn shuffle_sign(i_mask: usize, j_mask: usize) -> bool {
    let mut inversions = 0u32;
    let mut j = j_mask;
    while j != 0 {
        let low = j.trailing_zeros();
        inversions += (i_mask >> (low + 1)).count_ones();
        j &= j - 1;
    }
    inversions % 2 == 1
}

/// Wedge product. Bilinear, associative, antisymmetric on grade-1 elements.
pub fn wedge<S: Scalar>(
    a: &MultiVector<S>,
    b: &MultiVector<S>,
) -> Result<MultiVector<S>, ExteriorError> {
    if a.dim != b.dim {
        return Err(ExteriorError::DimensionMismatch(a.dim, b.dim));
    }
    let mut out: MultiVector<S> = MultiVector::zero(a.dim);
    for (ia, ca) in a.coeffs.iter().enumerate() {
        if ca.is_zero() {
            continue;
        }
        for (ib, cb) in b.coeffs.iter().enumerate() {
            if cb.is_zero() || ia & ib != 0 {
                continue;
            }
            let term = ca.clone() * cb.clone();
            let dst = &mut out.coeffs[ia | ib];
            *dst = if shuffle_sign(ia, ib) {
                dst.clone() - term
            } else {
                dst.clone() + term
            };
        }
    }
    Ok(out)
}

/// A (not necessarily primitive) discrete subgroup given by basis vectors.
/// Rank 0 is the trivial subgroup, represented by an empty basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupBasis<S> {
    dim: usize,
    vectors: Vec<Vec<S>>,
}

impl<S: Scalar> SubgroupBasis<S> {
    pub fn new(dim: usize, vectors: Vec<Vec<S>>) -> Result<Self, ExteriorError> {
        if dim > MAX_DIM {
            return Err(ExteriorError::DimensionTooLarge(dim));
        }
        for v in &vectors {
            if v.len() != dim {
                return Err(ExteriorError::DimensionMismatch(v.len(), dim));
            }
        }
        Ok(SubgroupBasis { dim, vectors })
    }

    pub fn trivial(dim: usize) -> Self {
        SubgroupBasis {
            dim,
            vectors: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[Vec<S>] {
        &self.vectors
    }

    /// Basis as the columns of a dim x rank matrix.
    pub fn as_matrix(&self) -> Mat<S> {
        Mat::from_cols(self.vectors.clone())
    }
}

/// w = v_1 ^ ... ^ v_j, or the scalar 1 for rank 0. Defined up to sign:
/// callers must only use the norm or sign-insensitive comparisons.
pub fn represent<S: Scalar>(g: &SubgroupBasis<S>) -> Result<MultiVector<S>, ExteriorError> {
    let mut w = MultiVector::scalar(g.dim, S::one());
    for v in &g.vectors {
        w = wedge(&w, &MultiVector::from_vector(v))?;
    }
    if g.rank() > 0 && w.is_zero() {
        return Err(ExteriorError::DependentBasis);
    }
    Ok(w)
}

/// ||Gamma|| = ||w|| for any representing w; basis-independent.
pub fn subgroup_norm<S: Scalar>(g: &SubgroupBasis<S>) -> Result<S, ExteriorError> {
    Ok(represent(g)?.sup_norm())
}

/// Image of a multivector under the exterior extension of a linear map:
/// e_i is sent to the i-th column of `m`, extended as an algebra map.
pub fn apply_matrix<S: Scalar>(m: &Mat<S>, w: &MultiVector<S>) -> MultiVector<S> {
    assert_eq!(m.nrows(), w.dim());
    assert_eq!(m.ncols(), w.dim());
    let dim = w.dim();
    let mut out: MultiVector<S> = MultiVector::zero(dim);
    // Images of basis blades, built by increasing mask so every mask can
    // reuse mask-without-lowest-bit. Blade images commute with sign
    // bookkeeping because we always wedge in ascending index order.
    let mut images: Vec<MultiVector<S>> = Vec::with_capacity(1 << dim);
    images.push(MultiVector::scalar(dim, S::one()));
    for mask in 1usize..1 << dim {
        let low = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        // e_mask = e_low ^ e_rest with low the smallest index: no sign.
        let col = MultiVector::from_vector(&m.col(low));
        let img = wedge(&col, &images[rest]).expect("same dim");
        images.push(img);
    }
    for (mask, c) in w.coeffs().iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        for (dst, ic) in images[mask].coeffs().iter().enumerate() {
            if !ic.is_zero() {
                let add = c.clone() * ic.clone();
                out.coeffs[dst] = out.coeffs[dst].clone() + add;
            }
        }
    }
    out
}

/// Sorted list of bitmasks of the given popcount, ascending. The position of
/// a mask in this list indexes the rows/columns of [`compound`].
pub fn grade_masks(dim: usize, grade: usize) -> Vec<usize> {
    (0..1usize << dim)
        .filter(|m| m.count_ones() as usize == grade)
        .collect()
}

fn mask_indices(mask: usize) -> Vec<usize> {
    (0..usize::BITS as usize)
        .filter(|i| mask >> i & 1 == 1)
        .collect()
}

/// Grade-j compound matrix: entry (I, J) is the j x j minor det(m[I, J]),
/// rows/columns ordered as in [`grade_masks`]. The exterior action on grade
/// j is multiplication by this matrix.
pub fn compound<S: Scalar>(m: &Mat<S>, grade: usize) -> Mat<S> {
    let dim = m.nrows();
    let masks = grade_masks(dim, grade);
    let sets: Vec<Vec<usize>> = masks.iter().map(|&msk| mask_indices(msk)).collect();
    let mut out = Mat::zeros(masks.len(), masks.len());
    for (a, rows) in sets.iter().enumerate() {
        for (b, cols) in sets.iter().enumerate() {
            out[(a, b)] = m.minor(rows, cols);
        }
    }
    out
}

/// Exact sup-to-sup operator norm of the grade-j compound of a fixed matrix:
/// max over row sets I of sum over column sets J of |det m[I, J]|.
pub fn compound_opnorm<R: Real>(m: &Mat<R>, grade: usize) -> R {
    compound(m, grade).opnorm_inf()
}

/// Certified upper bound for the grade-j compound operator norm of any
/// matrix whose entries are bounded entrywise by `w` (nonnegative): each
/// |det| is bounded by the permanent of the corresponding submatrix of `w`.
pub fn compound_opnorm_upper<R: Real>(w: &Mat<R>, grade: usize) -> R {
    let dim = w.nrows();
    let masks = grade_masks(dim, grade);
    let sets: Vec<Vec<usize>> = masks.iter().map(|&msk| mask_indices(msk)).collect();
    let mut best = R::zero();
    for rows in &sets {
        let mut sum = R::zero();
        for cols in &sets {
            sum = sum + permanent(w, rows, cols);
        }
        if sum > best {
            best = sum;
        }
    }
    best
}

fn permanent<R: Real>(w: &Mat<R>, rows: &[usize], cols: &[usize]) -> R {
    match rows.len() {
        0 => R::one(),
        1 => w[(rows[0], cols[0])],
        _ => {
            let mut acc = R::zero();
            let sub_rows = &rows[1..];
            let mut sub_cols = Vec::with_capacity(cols.len() - 1);
            for &c in cols {
                let a = w[(rows[0], c)];
                if a.is_zero() {
                    continue;
                }
                sub_cols.clear();
                sub_cols.extend(cols.iter().filter(|&&cc| cc != c).cloned());
                acc = acc + a * permanent(w, sub_rows, &sub_cols);
            }
            acc
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(dim: usize, i: usize) -> MultiVector<i128> {
        let mut v = vec![0i128; dim];
        v[i - 1] = 1;
        MultiVector::from_vector(&v)
    }

    #[test]
    fn basis_wedge_sign() {
        let w = wedge(&e(3, 1), &e(3, 2)).unwrap();
        assert_eq!(*w.coeff(0b011), 1);
        let w = wedge(&e(3, 2), &e(3, 1)).unwrap();
        assert_eq!(*w.coeff(0b011), -1);
        let w = wedge(&e(3, 1), &e(3, 1)).unwrap();
        assert!(w.is_zero());
    }

    #[test]
    fn wedge_associative_on_random_integers() {
        let mut rng = 0x12345u64;
        let mut next = move || {
            rng = rng
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((rng >> 33) % 11) as i128 - 5
        };
        for _ in 0..50 {
            let dim = 4;
            let a = MultiVector::from_vector(&(0..dim).map(|_| next()).collect::<Vec<_>>());
            let b = MultiVector::from_vector(&(0..dim).map(|_| next()).collect::<Vec<_>>());
            let c = MultiVector::from_vector(&(0..dim).map(|_| next()).collect::<Vec<_>>());
            let ab_c = wedge(&wedge(&a, &b).unwrap(), &c).unwrap();
            let a_bc = wedge(&a, &wedge(&b, &c).unwrap()).unwrap();
            assert_eq!(ab_c, a_bc);
        }
    }

    #[test]
    fn wedge_matches_minor_expansion_oracle() {
        // The grade-j coefficients of v_1 ^ ... ^ v_j are the j x j minors
        // of the column matrix, computed here through the independent
        // cofactor expansion.
        let mut state = 0xfeedu64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            ((state >> 33) % 13) as i128 - 6
        };
        for _ in 0..40 {
            let dim = 2 + (next().unsigned_abs() as usize % 4); // 2..=5
            let rank = 1 + (next().unsigned_abs() as usize % dim.min(3));
            let vectors: Vec<Vec<i128>> =
                (0..rank).map(|_| (0..dim).map(|_| next()).collect()).collect();
            let g = SubgroupBasis::new(dim, vectors.clone()).unwrap();
            let w = match represent(&g) {
                Ok(w) => w,
                Err(_) => continue, // dependent draw
            };
            let m = Mat::from_cols(vectors);
            let cols: Vec<usize> = (0..rank).collect();
            for mask in 0..1usize << dim {
                let coeff = *w.coeff(mask);
                if mask.count_ones() as usize != rank {
                    assert_eq!(coeff, 0);
                    continue;
                }
                let rows: Vec<usize> =
                    (0..dim).filter(|i| mask >> i & 1 == 1).collect();
                assert_eq!(coeff, m.minor(&rows, &cols), "mask {mask:b}");
            }
        }
    }

    #[test]
    fn sup_norm_examples() {
        let z: MultiVector<f64> = MultiVector::zero(3);
        assert_eq!(z.sup_norm(), 0.0);
        let mut m = MultiVector::zero(3);
        m.set_coeff(0b001, 3.0);
        m.set_coeff(0b110, -4.0);
        assert_eq!(m.sup_norm(), 4.0);
    }

    #[test]
    fn represent_trivial_is_scalar_one() {
        let g: SubgroupBasis<i128> = SubgroupBasis::trivial(3);
        let w = represent(&g).unwrap();
        assert_eq!(*w.coeff(0), 1);
        assert_eq!(w.sup_norm(), 1);
    }

    #[test]
    fn represent_full_rank_examples() {
        let g = SubgroupBasis::new(2, vec![vec![1i128, 0], vec![0, 1]]).unwrap();
        assert_eq!(subgroup_norm(&g).unwrap(), 1);
        // {(2,1),(1,1)} has determinant 1
        let g = SubgroupBasis::new(2, vec![vec![2i128, 1], vec![1, 1]]).unwrap();
        assert_eq!(subgroup_norm(&g).unwrap(), 1);
        let g = SubgroupBasis::new(2, vec![vec![3i128, 0]]).unwrap();
        assert_eq!(subgroup_norm(&g).unwrap(), 3);
    }

    #[test]
    fn dependent_basis_rejected() {
        let g = SubgroupBasis::new(2, vec![vec![1i128, 2], vec![2, 4]]).unwrap();
        assert_eq!(represent(&g).unwrap_err(), ExteriorError::DependentBasis);
    }

    #[test]
    fn apply_matrix_matches_compound_per_grade() {
        let m = Mat::from_rows(vec![vec![1i128, 2, 0], vec![0, 1, -1], vec![3, 0, 1]]);
        for grade in 0..=3usize {
            let masks = grade_masks(3, grade);
            let comp = compound(&m, grade);
            for (pos, &mask) in masks.iter().enumerate() {
                let mut w = MultiVector::zero(3);
                w.set_coeff(mask, 1);
                let img = apply_matrix(&m, &w);
                for (pos2, &mask2) in masks.iter().enumerate() {
                    assert_eq!(*img.coeff(mask2), comp[(pos2, pos)], "grade {grade}");
                }
            }
        }
    }

    #[test]
    fn compound_upper_bound_dominates_exact() {
        let m = Mat::from_rows(vec![vec![0.5f64, -1.5], vec![2.0, 0.25]]);
        let w = m.abs();
        for grade in 1..=2 {
            assert!(compound_opnorm_upper(&w, grade) >= compound_opnorm(&m, grade) - 1e-12);
        }
    }
}
