//! Lattices gZ^k, the shortest-vector function, diagonal flows and
//! one-parameter unipotent maps, and enumeration of primitive subgroups
//! of Z^k.
//!
//! Everything here is exact in the sense that enumeration boxes are
//! certified: a vector gm with ||gm||_inf <= R satisfies
//! |m_i| <= rowsum_i(g^{-1}) * R (absolute row sums), so scanning that box
//! provably sees every candidate. No reduction (LLL/BKZ) is used; at k <= 5
//! exact enumeration is both simpler and fast enough.

use num_traits::ToPrimitive;
use thiserror::Error;

use crate::exterior::{self, MultiVector, SubgroupBasis};
use crate::intmat::{self, hnf_columns, hnf_pivot_rows};
use crate::linalg::{dot, Mat};
use crate::scalar::Real;

pub const DEFAULT_ENUM_BUDGET: u64 = 400_000_000;

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("basis is numerically singular")]
    SingularBasis,
    #[error("flow components must be nonnegative")]
    NegativeFlowComponent,
    #[error("matrix is not nilpotent")]
    NotNilpotent,
    #[error("enumeration budget exceeded: needs about {estimated} candidates, budget {budget}")]
    BudgetExceeded { estimated: u128, budget: u128 },
    #[error("basis vectors are dependent")]
    DependentBasis,
    #[error("basis does not generate a primitive subgroup (elementary divisors {0:?})")]
    NotPrimitive(Vec<i128>),
    #[error(transparent)]
    Exterior(#[from] exterior::ExteriorError),
}

/// Full-rank lattice gZ^k given by the columns of `basis`.
#[derive(Debug, Clone)]
pub struct Lattice<R> {
    basis: Mat<R>,
    integer_derived: bool,
}

impl<R: Real> Lattice<R> {
    pub fn new(basis: Mat<R>) -> Result<Self, LatticeError> {
        if !basis.is_square() {
            return Err(LatticeError::DimensionMismatch(
                basis.nrows(),
                basis.ncols(),
            ));
        }
        let det = basis.det_lu();
        if det.abs() <= R::cast_f64(1e-12) {
            return Err(LatticeError::SingularBasis);
        }
        Ok(Lattice {
            basis,
            integer_derived: false,
        })
    }

    pub fn from_integer_basis(m: &Mat<i128>) -> Result<Self, LatticeError> {
        let mut lat = Lattice::new(m.map(|&x| R::cast_f64(x as f64)))?;
        lat.integer_derived = true;
        Ok(lat)
    }

    pub fn standard(k: usize) -> Self {
        Lattice {
            basis: Mat::identity(k),
            integer_derived: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &Mat<R> {
        &self.basis
    }

    pub fn det(&self) -> R {
        self.basis.det_lu()
    }

    /// |det| = 1 within 1e-9. Non-unimodular lattices are allowed but flagged.
    pub fn is_unimodular(&self) -> bool {
        (self.det().abs() - R::one()).abs() <= R::cast_f64(1e-9)
    }

    pub fn is_integer_derived(&self) -> bool {
        self.integer_derived
    }

    pub fn scaled(&self, c: R) -> Self {
        Lattice {
            basis: self.basis.scale(&c),
            integer_derived: false,
        }
    }
}

/// Nonnegative flow exponents t_1..t_n; the total t = sum t_i is always
/// recomputed, never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowVector<R> {
    components: Vec<R>,
}

impl<R: Real> FlowVector<R> {
    pub fn new(components: Vec<R>) -> Result<Self, LatticeError> {
        if components.iter().any(|t| *t < R::zero()) {
            return Err(LatticeError::NegativeFlowComponent);
        }
        Ok(FlowVector { components })
    }

    pub fn zero(n: usize) -> Self {
        FlowVector {
            components: vec![R::zero(); n],
        }
    }

    pub fn components(&self) -> &[R] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn total(&self) -> R {
        self.components.iter().fold(R::zero(), |a, b| a + *b)
    }

    /// Componentwise integer parts.
    pub fn floor(&self) -> Self {
        FlowVector {
            components: self.components.iter().map(|t| t.floor()).collect(),
        }
    }
}

/// The lattice whose elements are (q.y + p, q_1, ..., q_n) over integer
/// (p, q): Z^{n+1} sheared by the row vector y.
pub fn make_lambda_y<R: Real>(y: &[R]) -> Lattice<R> {
    let n = y.len();
    let mut basis = Mat::identity(n + 1);
    for (i, &yi) in y.iter().enumerate() {
        basis[(0, i + 1)] = yi;
    }
    Lattice {
        basis,
        integer_derived: y.iter().all(|v| v.fract() == R::zero()),
    }
}

/// Premultiplies the basis by diag(e^t, e^{-t_1}, ..., e^{-t_n}).
/// The determinant is preserved since the diagonal has product one.
pub fn apply_flow<R: Real>(
    lat: &Lattice<R>,
    t: &FlowVector<R>,
) -> Result<Lattice<R>, LatticeError> {
    let k = lat.dim();
    if k != t.len() + 1 {
        return Err(LatticeError::DimensionMismatch(k, t.len() + 1));
    }
    let mut basis = lat.basis.clone();
    let e_t = t.total().exp();
    for j in 0..k {
        basis[(0, j)] = basis[(0, j)] * e_t;
    }
    for (i, &ti) in t.components().iter().enumerate() {
        let f = (-ti).exp();
        for j in 0..k {
            basis[(i + 1, j)] = basis[(i + 1, j)] * f;
        }
    }
    Ok(Lattice {
        basis,
        integer_derived: false,
    })
}

/// exp(xN) for nilpotent N, via the terminating power series: an exact
/// polynomial in x of degree < k, determinant one.
pub fn unipotent_orbit_point<R: Real>(n: &Mat<R>, x: R) -> Result<Mat<R>, LatticeError> {
    if !n.is_square() {
        return Err(LatticeError::DimensionMismatch(n.nrows(), n.ncols()));
    }
    let k = n.nrows();
    let mut power = Mat::identity(k);
    let mut out = Mat::identity(k);
    let mut factorial = R::one();
    for j in 1..=k {
        power = power.matmul(n);
        factorial = factorial * R::cast_usize(j);
        if j == k {
            // N^k must vanish.
            let scale = R::one() + n.max_abs_entry().powi(k as i32);
            if power.max_abs_entry() > R::cast_f64(1e-9) * scale {
                return Err(LatticeError::NotNilpotent);
            }
            break;
        }
        let coeff = x.powi(j as i32) / factorial;
        for r in 0..k {
            for c in 0..k {
                let add = coeff * power[(r, c)];
                out[(r, c)] = out[(r, c)] + add;
            }
        }
    }
    Ok(out)
}

/// Shortest nonzero vector data: the attained value and the integer
/// coefficient witness (lexicographically smallest among ties).
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaResult<R> {
    pub value: R,
    pub witness: Vec<i64>,
}

/// Outcome of a capped shortest-vector search.
#[derive(Debug, Clone, PartialEq)]
pub enum DeltaCapped<R> {
    /// Exact minimum, which is < cap.
    Below(DeltaResult<R>),
    /// Certified: no nonzero lattice vector has norm < cap.
    AtLeast(R),
}

/// delta(L) = min over nonzero integer m of ||g m||_inf.
///
/// The infimum in the definition is attained for full-rank lattices, which
/// the search relies on: it returns a witness vector realizing the value.
pub fn delta<R: Real>(lat: &Lattice<R>) -> Result<DeltaResult<R>, LatticeError> {
    match delta_capped(lat, R::infinity())? {
        DeltaCapped::Below(res) => Ok(res),
        DeltaCapped::AtLeast(_) => unreachable!("uncapped search always attains"),
    }
}

/// Capped variant: exact delta when it is < cap, otherwise a certificate
/// that delta >= cap. Sweep kernels call this with cap = rho and reuse one
/// enumeration for a whole epsilon grid.
pub fn delta_capped<R: Real>(lat: &Lattice<R>, cap: R) -> Result<DeltaCapped<R>, LatticeError> {
    delta_capped_budgeted(lat, cap, DEFAULT_ENUM_BUDGET)
}

pub fn delta_capped_budgeted<R: Real>(
    lat: &Lattice<R>,
    cap: R,
    budget: u64,
) -> Result<DeltaCapped<R>, LatticeError> {
    let k = lat.dim();
    if lat.basis.inverse().is_none() {
        return Err(LatticeError::SingularBasis);
    }

    // Pre-scan the +-1 box (contains all basis columns) for a radius seed.
    let mut seed = R::infinity();
    let mut pre = vec![0i64; k];
    loop {
        if !pre.iter().all(|&c| c == 0) {
            let v = mul_int(&lat.basis, &pre);
            let norm = sup(&v);
            if norm < seed {
                seed = norm;
            }
        }
        if !advance(&mut pre, &vec![1i64; k]) {
            break;
        }
    }
    let radius = if cap < seed { cap } else { seed };

    // Any v with ||v||_inf <= radius has ||v||_2^2 <= k radius^2; walk the
    // Gram-Schmidt enumeration tree for that Euclidean ball and filter by
    // the sup norm at the leaves.
    let gso = gram_schmidt(&lat.basis)?;
    let c_bound = R::cast_usize(k) * radius * radius * R::cast_f64(1.0 + 1e-9);
    let mut search = TreeSearch {
        basis: &lat.basis,
        gso: &gso,
        c_bound,
        budget,
        nodes: 0,
        best: None,
    };
    let mut coords = vec![0i64; k];
    search.descend(k, R::zero(), &mut coords)?;

    match search.best {
        Some(res) if res.value < cap => Ok(DeltaCapped::Below(res)),
        _ => {
            if cap.is_infinite() {
                // Bounds came from the attained seed, so something was found.
                Ok(DeltaCapped::Below(
                    search.best.expect("seed vector inside tree"),
                ))
            } else {
                Ok(DeltaCapped::AtLeast(cap))
            }
        }
    }
}

struct Gso<R> {
    /// Squared lengths of the orthogonalized basis vectors.
    b2: Vec<R>,
    /// mu[i][j] for j < i: projection coefficients.
    mu: Vec<Vec<R>>,
}

fn gram_schmidt<R: Real>(basis: &Mat<R>) -> Result<Gso<R>, LatticeError> {
    let k = basis.ncols();
    let cols: Vec<Vec<R>> = (0..k).map(|j| basis.col(j)).collect();
    let mut star: Vec<Vec<R>> = Vec::with_capacity(k);
    let mut b2 = Vec::with_capacity(k);
    let mut mu = vec![vec![R::zero(); k]; k];
    for i in 0..k {
        let mut v = cols[i].clone();
        for j in 0..i {
            let m = dot(&cols[i], &star[j]) / b2[j];
            mu[i][j] = m;
            for (vc, sc) in v.iter_mut().zip(&star[j]) {
                *vc = *vc - m * *sc;
            }
        }
        let n2 = dot(&v, &v);
        if !(n2 > R::cast_f64(1e-280)) {
            return Err(LatticeError::SingularBasis);
        }
        b2.push(n2);
        star.push(v);
    }
    Ok(Gso { b2, mu })
}

struct TreeSearch<'a, R> {
    basis: &'a Mat<R>,
    gso: &'a Gso<R>,
    c_bound: R,
    budget: u64,
    nodes: u64,
    best: Option<DeltaResult<R>>,
}

impl<R: Real> TreeSearch<'_, R> {
    /// Standard depth-first enumeration over coordinates level k-1 .. 0:
    /// ||sum x_i b_i||_2^2 = sum_i B_i (x_i + sum_{j>i} mu_{ji} x_j)^2.
    fn descend(
        &mut self,
        level: usize,
        partial: R,
        coords: &mut Vec<i64>,
    ) -> Result<(), LatticeError> {
        if level == 0 {
            if coords.iter().all(|&c| c == 0) {
                return Ok(());
            }
            let v = mul_int(self.basis, coords);
            let norm = sup(&v);
            let replace = match &self.best {
                None => true,
                Some(b) => {
                    norm < b.value || (norm == b.value && coords.as_slice() < b.witness.as_slice())
                }
            };
            if replace {
                self.best = Some(DeltaResult {
                    value: norm,
                    witness: coords.clone(),
                });
            }
            return Ok(());
        }
        let i = level - 1;
        let mut shift = R::zero();
        for (j, &cj) in coords.iter().enumerate().skip(level) {
            shift = shift + self.gso.mu[j][i] * R::cast_f64(cj as f64);
        }
        let room = (self.c_bound - partial) / self.gso.b2[i];
        if room < R::zero() {
            return Ok(());
        }
        let half_width = room.sqrt();
        let lo = (-half_width - shift)
            .ceil()
            .to_i64()
            .ok_or(LatticeError::SingularBasis)?;
        let hi = (half_width - shift)
            .floor()
            .to_i64()
            .ok_or(LatticeError::SingularBasis)?;
        for x in lo..=hi {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(LatticeError::BudgetExceeded {
                    estimated: self.nodes as u128,
                    budget: self.budget as u128,
                });
            }
            coords[i] = x;
            let y = R::cast_f64(x as f64) + shift;
            let child = partial + self.gso.b2[i] * y * y;
            if child <= self.c_bound {
                self.descend(i, child, coords)?;
            }
        }
        coords[i] = 0;
        Ok(())
    }
}

fn mul_int<R: Real>(g: &Mat<R>, m: &[i64]) -> Vec<R> {
    let k = g.nrows();
    let mut out = vec![R::zero(); k];
    for (j, &c) in m.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let cf = R::cast_f64(c as f64);
        for i in 0..k {
            out[i] = out[i] + cf * g[(i, j)];
        }
    }
    out
}

fn sup<R: Real>(v: &[R]) -> R {
    v.iter()
        .fold(R::zero(), |m, x| if x.abs() > m { x.abs() } else { m })
}

/// Odometer over the symmetric box [-b, b]^k, ascending lexicographic.
fn advance(m: &mut [i64], bounds: &[i64]) -> bool {
    let lower: Vec<i64> = bounds.iter().map(|&b| -b).collect();
    advance_from(m, &lower, bounds)
}

fn advance_from(m: &mut [i64], lower: &[i64], upper: &[i64]) -> bool {
    for i in (0..m.len()).rev() {
        if m[i] < upper[i] {
            m[i] += 1;
            let tail = i + 1;
            m[tail..].copy_from_slice(&lower[tail..]);
            return true;
        }
    }
    false
}

// ---------------------------------------------------------------------------
// Sheared-lattice fast kernels
// ---------------------------------------------------------------------------

/// Is delta(g_t Lambda_y) < eps? Exact decision.
///
/// Lattice vectors are (q.y + p, q) scaled by (e^t, e^{-t_i}); a vector of
/// norm < eps needs |q_i| < eps e^{t_i} and |q.y + p| < eps e^{-t}, so only
/// the q box is scanned and p is the nearest integer. Vectors with q = 0
/// have norm e^t |p| >= e^t >= 1 > eps for the eps <= 1 this is called with.
pub fn lambda_flow_delta_below(
    y: &[f64],
    t: &FlowVector<f64>,
    eps: f64,
    budget: u64,
) -> Result<bool, LatticeError> {
    let n = y.len();
    if n != t.len() {
        return Err(LatticeError::DimensionMismatch(n, t.len()));
    }
    let total = t.total();
    if total.exp() < eps {
        // (p, q) = (1, 0) already has norm e^t < eps.
        return Ok(true);
    }
    let bounds: Vec<i64> = t
        .components()
        .iter()
        .map(|&ti| (eps * ti.exp()).floor().to_i64().unwrap_or(i64::MAX))
        .collect();
    let mut volume: u128 = 1;
    for &b in &bounds {
        volume = volume.saturating_mul((2 * b as u128) + 1);
    }
    if volume > budget as u128 {
        return Err(LatticeError::BudgetExceeded {
            estimated: volume,
            budget: budget as u128,
        });
    }
    let p_tol = eps * (-total).exp();
    let mut q = bounds.iter().map(|&b| -b).collect::<Vec<i64>>();
    let lower = q.clone();
    loop {
        if !q.iter().all(|&c| c == 0) {
            let dot: f64 = q.iter().zip(y).map(|(&qi, &yi)| qi as f64 * yi).sum();
            if (dot - dot.round()).abs() < p_tol {
                // Check the q-side norms exactly (the box floor may admit
                // boundary values).
                let ok = q
                    .iter()
                    .zip(t.components())
                    .all(|(&qi, &ti)| (qi as f64).abs() * (-ti).exp() < eps);
                if ok {
                    return Ok(true);
                }
            }
        }
        if !advance_from(&mut q, &lower, &bounds) {
            break;
        }
    }
    Ok(false)
}

/// Exact delta(g_t Lambda_y) with witness (p, q_1..q_n) in lattice
/// coordinates, using the sheared structure for the search.
pub fn lambda_flow_delta(
    y: &[f64],
    t: &FlowVector<f64>,
    budget: u64,
) -> Result<DeltaResult<f64>, LatticeError> {
    match lambda_flow_delta_search(y, t, f64::INFINITY, budget)? {
        Some(res) => Ok(res),
        None => unreachable!("uncapped search always attains"),
    }
}

/// Exact minimum when it is < cap, or None certifying delta >= cap. The
/// search box comes from min(cap, seed), so tight caps keep deep flows
/// cheap: the q box is |q_i| <= cap e^{t_i}.
pub fn lambda_flow_delta_capped(
    y: &[f64],
    t: &FlowVector<f64>,
    cap: f64,
    budget: u64,
) -> Result<Option<DeltaResult<f64>>, LatticeError> {
    lambda_flow_delta_search(y, t, cap, budget)
}

fn lambda_flow_delta_search(
    y: &[f64],
    t: &FlowVector<f64>,
    cap: f64,
    budget: u64,
) -> Result<Option<DeltaResult<f64>>, LatticeError> {
    let n = y.len();
    if n != t.len() {
        return Err(LatticeError::DimensionMismatch(n, t.len()));
    }
    let total = t.total();
    let e_t = total.exp();

    let norm_of = |p: i64, q: &[i64]| -> f64 {
        let dot: f64 = q.iter().zip(y).map(|(&qi, &yi)| qi as f64 * yi).sum();
        let mut norm = e_t * (dot + p as f64).abs();
        for (&qi, &ti) in q.iter().zip(t.components()) {
            norm = norm.max((qi as f64).abs() * (-ti).exp());
        }
        norm
    };

    // Seed: p-only vector, plus a small q pre-scan with optimal p.
    let mut best = DeltaResult {
        value: e_t,
        witness: seed_witness(n),
    };
    let pre_bound = vec![2i64; n];
    let mut q = vec![-2i64; n];
    let lower = q.clone();
    loop {
        if !q.iter().all(|&c| c == 0) {
            let dot: f64 = q.iter().zip(y).map(|(&qi, &yi)| qi as f64 * yi).sum();
            let p = (-dot).round() as i64;
            let norm = norm_of(p, &q);
            if norm < best.value {
                best = DeltaResult {
                    value: norm,
                    witness: with_p(p, &q),
                };
            }
        }
        if !advance_from(&mut q, &lower, &pre_bound) {
            break;
        }
    }

    // Certified box: every vector of norm <= radius lies inside.
    let radius = best.value.min(cap) * (1.0 + 1e-12);
    let bounds: Vec<i64> = t
        .components()
        .iter()
        .map(|&ti| (radius * ti.exp()).floor().to_i64().unwrap_or(i64::MAX))
        .collect();
    let mut volume: u128 = 1;
    for &b in &bounds {
        volume = volume.saturating_mul((2 * b as u128) + 1);
    }
    if volume > budget as u128 {
        return Err(LatticeError::BudgetExceeded {
            estimated: volume,
            budget: budget as u128,
        });
    }
    let p_tol = radius * (-total).exp();
    let mut q = bounds.iter().map(|&b| -b).collect::<Vec<i64>>();
    let lower = q.clone();
    loop {
        if !q.iter().all(|&c| c == 0) {
            let dot: f64 = q.iter().zip(y).map(|(&qi, &yi)| qi as f64 * yi).sum();
            // All integers p with |dot + p| <= p_tol; usually one.
            let p_lo = (-dot - p_tol).ceil() as i64;
            let p_hi = (-dot + p_tol).floor() as i64;
            for p in p_lo..=p_hi {
                let norm = norm_of(p, &q);
                if norm < best.value {
                    best = DeltaResult {
                        value: norm,
                        witness: with_p(p, &q),
                    };
                }
            }
        }
        if !advance_from(&mut q, &lower, &bounds) {
            break;
        }
    }
    if best.value < cap || cap.is_infinite() {
        Ok(Some(best))
    } else {
        Ok(None)
    }
}

fn seed_witness(n: usize) -> Vec<i64> {
    let mut w = vec![0i64; n + 1];
    w[0] = 1;
    w
}

fn with_p(p: i64, q: &[i64]) -> Vec<i64> {
    let mut w = Vec::with_capacity(q.len() + 1);
    w.push(p);
    w.extend_from_slice(q);
    w
}

/// g_t u_y as a matrix (the shear in the top row, then the diagonal).
pub fn flow_shear_matrix(f_vals: &[f64], t: &FlowVector<f64>) -> Mat<f64> {
    let n = f_vals.len();
    let mut m = Mat::identity(n + 1);
    for (i, &fi) in f_vals.iter().enumerate() {
        m[(0, i + 1)] = fi;
    }
    let e_t = t.total().exp();
    for j in 0..n + 1 {
        m[(0, j)] *= e_t;
    }
    for (i, &ti) in t.components().iter().enumerate() {
        for j in 0..n + 1 {
            m[(i + 1, j)] *= (-ti).exp();
        }
    }
    m
}

// ---------------------------------------------------------------------------
// Primitive subgroups
// ---------------------------------------------------------------------------

/// Nonzero primitive subgroup of Z^k: an integer subgroup equal to the
/// intersection of its real span with Z^k, held in canonical column Hermite
/// normal form. Two values are equal iff the HNF matrices are equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PrimitiveSubgroup {
    dim: usize,
    basis: Mat<i128>,
}

impl PrimitiveSubgroup {
    /// Canonicalize and verify primitivity (all elementary divisors 1).
    pub fn new(dim: usize, vectors: Vec<Vec<i128>>) -> Result<Self, LatticeError> {
        let rank = vectors.len();
        if rank == 0 || rank > dim {
            return Err(LatticeError::DependentBasis);
        }
        let m = Mat::from_cols(vectors);
        let div = intmat::elementary_divisors(&m);
        if div.len() != rank {
            return Err(LatticeError::DependentBasis);
        }
        if div.iter().any(|&d| d != 1) {
            return Err(LatticeError::NotPrimitive(div));
        }
        Ok(PrimitiveSubgroup {
            dim,
            basis: hnf_columns(&m),
        })
    }

    fn from_hnf_unchecked(dim: usize, basis: Mat<i128>) -> Self {
        PrimitiveSubgroup { dim, basis }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// Canonical HNF basis (columns).
    pub fn hnf(&self) -> &Mat<i128> {
        &self.basis
    }

    pub fn to_subgroup_basis(&self) -> SubgroupBasis<i128> {
        SubgroupBasis::new(
            self.dim,
            (0..self.rank()).map(|j| self.basis.col(j)).collect(),
        )
        .expect("valid basis")
    }

    /// Representing multivector (wedge of the HNF basis), defined up to sign.
    pub fn representative(&self) -> MultiVector<i128> {
        exterior::represent(&self.to_subgroup_basis()).expect("independent basis")
    }

    /// ||Gamma||: sup norm of the representative. A positive integer.
    pub fn norm(&self) -> i128 {
        self.representative().sup_norm()
    }

    /// ||T Gamma|| for a real transform T.
    pub fn transformed_norm<R: Real>(&self, transform: &Mat<R>) -> R {
        let w = self.representative().map(|&c| R::cast_f64(c as f64));
        exterior::apply_matrix(transform, &w).sup_norm()
    }

    /// Does the subgroup contain the vector? Exact, via staircase solve.
    pub fn contains_vector(&self, v: &[i128]) -> bool {
        debug_assert_eq!(v.len(), self.dim);
        let mut residual = v.to_vec();
        let pivots = hnf_pivot_rows(&self.basis);
        for (j, &pr) in pivots.iter().enumerate() {
            let p = self.basis[(pr, j)];
            if residual[pr] % p != 0 {
                return false;
            }
            let c = residual[pr] / p;
            if c != 0 {
                for (r, res) in residual.iter_mut().enumerate() {
                    *res -= c * self.basis[(r, j)];
                }
            }
        }
        residual.iter().all(|&x| x == 0)
    }

    /// Subgroup inclusion self <= other.
    pub fn is_subgroup_of(&self, other: &PrimitiveSubgroup) -> bool {
        if self.rank() > other.rank() {
            return false;
        }
        (0..self.rank()).all(|j| other.contains_vector(&self.basis.col(j)))
    }

    /// Comparable in the inclusion order (and distinct or equal either way).
    pub fn comparable(&self, other: &PrimitiveSubgroup) -> bool {
        self.is_subgroup_of(other) || other.is_subgroup_of(self)
    }
}

/// Primitive hull of an integer subgroup: real span intersected with Z^k.
/// Idempotent; the result contains the input with index = product of the
/// input's elementary divisors.
pub fn saturate(b: &SubgroupBasis<i128>) -> Result<PrimitiveSubgroup, LatticeError> {
    let dim = b.dim();
    let rank = b.rank();
    if rank == 0 {
        return Err(LatticeError::DependentBasis);
    }
    let m = b.as_matrix();
    let (div, pinv) = intmat::smith_with_left_inverse(&m);
    if div.len() != rank {
        return Err(LatticeError::DependentBasis);
    }
    // First `rank` columns of pinv generate span_R(b) intersect Z^k.
    let cols: Vec<Vec<i128>> = (0..rank).map(|j| pinv.col(j)).collect();
    let h = hnf_columns(&Mat::from_cols(cols));
    Ok(PrimitiveSubgroup::from_hnf_unchecked(dim, h))
}

// ---------------------------------------------------------------------------
// Certified enumeration of primitive subgroups
// ---------------------------------------------------------------------------

/// All primitive subgroups whose representative has Plucker coordinates
/// bounded by `plucker_bound[rank - 1]` in absolute value. Complete for that
/// bound: every j-minor of an HNF basis is a coordinate of the representing
/// multivector, so pivot products and the Cramer coefficients of non-pivot
/// rows are all bounded by it.
pub fn enumerate_by_plucker_bounds(
    dim: usize,
    plucker_bound: &[i128],
    budget: u64,
) -> Result<Vec<PrimitiveSubgroup>, LatticeError> {
    assert!((1..=5).contains(&dim), "enumeration supports 1 <= k <= 5");
    assert_eq!(plucker_bound.len(), dim);
    let mut out = Vec::new();
    let mut work: u64 = 0;
    for rank in 1..=dim {
        let h = plucker_bound[rank - 1];
        if h < 1 {
            continue;
        }
        enumerate_rank(dim, rank, h, budget, &mut work, &mut out)?;
    }
    // Deterministic order independent of the search path.
    out.sort_by_key(|g| (g.rank(), flat(&g.basis)));
    Ok(out)
}

fn flat(m: &Mat<i128>) -> Vec<i128> {
    let mut v = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        v.extend_from_slice(m.row(i));
    }
    v
}

fn bump(work: &mut u64, amount: u64, budget: u64) -> Result<(), LatticeError> {
    *work = work.saturating_add(amount);
    if *work > budget {
        return Err(LatticeError::BudgetExceeded {
            estimated: *work as u128,
            budget: budget as u128,
        });
    }
    Ok(())
}

fn enumerate_rank(
    dim: usize,
    rank: usize,
    h: i128,
    budget: u64,
    work: &mut u64,
    out: &mut Vec<PrimitiveSubgroup>,
) -> Result<(), LatticeError> {
    let pivot_sets = combinations(dim, rank);
    for pivots in pivot_sets {
        // Pivot values with product <= h.
        let mut pvals = vec![1i128; rank];
        enumerate_pivots(dim, rank, h, &pivots, &mut pvals, 0, 1, budget, work, out)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn enumerate_pivots(
    dim: usize,
    rank: usize,
    h: i128,
    pivots: &[usize],
    pvals: &mut Vec<i128>,
    idx: usize,
    product: i128,
    budget: u64,
    work: &mut u64,
    out: &mut Vec<PrimitiveSubgroup>,
) -> Result<(), LatticeError> {
    if idx == rank {
        return enumerate_reduced(dim, rank, h, pivots, pvals, budget, work, out);
    }
    let mut p = 1i128;
    while product * p <= h {
        pvals[idx] = p;
        enumerate_pivots(
            dim,
            rank,
            h,
            pivots,
            pvals,
            idx + 1,
            product * p,
            budget,
            work,
            out,
        )?;
        p += 1;
    }
    Ok(())
}

/// Enumerate the reduced entries (pivot rows, earlier columns, in [0, p_i))
/// then fill non-pivot rows through Cramer coefficients.
#[allow(clippy::too_many_arguments)]
fn enumerate_reduced(
    dim: usize,
    rank: usize,
    h: i128,
    pivots: &[usize],
    pvals: &[i128],
    budget: u64,
    work: &mut u64,
    out: &mut Vec<PrimitiveSubgroup>,
) -> Result<(), LatticeError> {
    // P is rank x rank lower-triangular: P[i][c] = entry of column c at pivot
    // row r_i; diagonal = pivots, below-diagonal = reduced entries.
    let mut p = Mat::<i128>::zeros(rank, rank);
    for i in 0..rank {
        p[(i, i)] = pvals[i];
    }
    let positions: Vec<(usize, usize)> = (0..rank)
        .flat_map(|i| (0..i).map(move |c| (i, c)))
        .collect();
    enumerate_reduced_rec(
        dim, rank, h, pivots, &mut p, &positions, 0, budget, work, out,
    )
}

#[allow(clippy::too_many_arguments)]
fn enumerate_reduced_rec(
    dim: usize,
    rank: usize,
    h: i128,
    pivots: &[usize],
    p: &mut Mat<i128>,
    positions: &[(usize, usize)],
    depth: usize,
    budget: u64,
    work: &mut u64,
    out: &mut Vec<PrimitiveSubgroup>,
) -> Result<(), LatticeError> {
    if depth == positions.len() {
        return fill_free_rows(dim, rank, h, pivots, p, budget, work, out);
    }
    let (i, c) = positions[depth];
    let pivot = p[(i, i)];
    for v in 0..pivot {
        p[(i, c)] = v;
        enumerate_reduced_rec(
            dim,
            rank,
            h,
            pivots,
            p,
            positions,
            depth + 1,
            budget,
            work,
            out,
        )?;
    }
    p[(i, c)] = 0;
    Ok(())
}

/// Candidate rows for non-pivot positions: integer rows of the form
/// (sum_i n_i P_i) / det(P) with n in [-h, h]^rank. The n_i are forced to be
/// pivot-row-replacement minors, all bounded by h for a subgroup of norm
/// <= h, so this is complete.
#[allow(clippy::too_many_arguments)]
fn fill_free_rows(
    dim: usize,
    rank: usize,
    h: i128,
    pivots: &[usize],
    p: &Mat<i128>,
    budget: u64,
    work: &mut u64,
    out: &mut Vec<PrimitiveSubgroup>,
) -> Result<(), LatticeError> {
    let free_rows: Vec<usize> = (0..dim).filter(|r| !pivots.contains(r)).collect();
    let mut valid_rows: Vec<Vec<i128>> = Vec::new();
    if !free_rows.is_empty() {
        let det: i128 = (0..rank).map(|i| p[(i, i)]).product();
        let mut n = vec![-h; rank];
        let lower = vec![-h; rank];
        let upper = vec![h; rank];
        let box_size = (2 * h as u128 + 1).pow(rank as u32);
        bump(work, box_size.min(u64::MAX as u128) as u64, budget)?;
        loop {
            let mut row = vec![0i128; rank];
            let mut ok = true;
            for c in 0..rank {
                let mut acc = 0i128;
                for i in c..rank {
                    acc += n[i] * p[(i, c)];
                }
                if acc % det != 0 {
                    ok = false;
                    break;
                }
                row[c] = acc / det;
            }
            if ok {
                valid_rows.push(row);
            }
            if !advance_i128(&mut n, &lower, &upper) {
                break;
            }
        }
    }
    let mut choice: Vec<usize> = Vec::new();
    assemble_rows(
        dim,
        rank,
        h,
        pivots,
        p,
        &free_rows,
        &valid_rows,
        &mut choice,
        budget,
        work,
        out,
    )
}

#[allow(clippy::too_many_arguments)]
fn assemble_rows(
    dim: usize,
    rank: usize,
    h: i128,
    pivots: &[usize],
    p: &Mat<i128>,
    free_rows: &[usize],
    valid_rows: &[Vec<i128>],
    choice: &mut Vec<usize>,
    budget: u64,
    work: &mut u64,
    out: &mut Vec<PrimitiveSubgroup>,
) -> Result<(), LatticeError> {
    if choice.len() == free_rows.len() {
        bump(work, 4, budget)?;
        let basis = build_basis(dim, rank, pivots, p, free_rows, valid_rows, choice);
        // Exact filters: all Plucker coordinates within h, gcd 1.
        let sb = SubgroupBasis::new(dim, (0..rank).map(|j| basis.col(j)).collect())?;
        let w = match exterior::represent(&sb) {
            Ok(w) => w,
            Err(_) => return Ok(()),
        };
        if w.sup_norm() > h {
            return Ok(());
        }
        if intmat::gcd_all(w.coeffs().iter().cloned()) != 1 {
            return Ok(());
        }
        out.push(PrimitiveSubgroup::from_hnf_unchecked(dim, basis));
        return Ok(());
    }
    let row_index = free_rows[choice.len()];
    // Columns with pivot row below row_index must vanish at this row.
    let zero_from = pivots.iter().position(|&pr| pr > row_index).unwrap_or(rank);
    bump(work, valid_rows.len() as u64, budget)?;
    for (vi, row) in valid_rows.iter().enumerate() {
        if row[zero_from..].iter().any(|&x| x != 0) {
            continue;
        }
        choice.push(vi);
        assemble_rows(
            dim, rank, h, pivots, p, free_rows, valid_rows, choice, budget, work, out,
        )?;
        choice.pop();
    }
    Ok(())
}

fn build_basis(
    dim: usize,
    rank: usize,
    pivots: &[usize],
    p: &Mat<i128>,
    free_rows: &[usize],
    valid_rows: &[Vec<i128>],
    choice: &[usize],
) -> Mat<i128> {
    let mut basis = Mat::<i128>::zeros(dim, rank);
    for (i, &pr) in pivots.iter().enumerate() {
        for c in 0..rank {
            basis[(pr, c)] = p[(i, c)];
        }
    }
    for (slot, &fr) in free_rows.iter().enumerate() {
        let row = &valid_rows[choice[slot]];
        for c in 0..rank {
            basis[(fr, c)] = row[c];
        }
    }
    basis
}

fn advance_i128(m: &mut [i128], lower: &[i128], upper: &[i128]) -> bool {
    for i in (0..m.len()).rev() {
        if m[i] < upper[i] {
            m[i] += 1;
            let tail = i + 1;
            m[tail..].copy_from_slice(&lower[tail..]);
            return true;
        }
    }
    false
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Exactly the primitive subgroups with ||T Gamma|| <= norm_cap (T the given
/// transform, or the identity). Completeness: ||Gamma|| <= norm_cap *
/// ||compound_j(T^{-1})||, which feeds the Plucker-bound enumeration.
pub fn enumerate_primitive_subgroups(
    dim: usize,
    norm_cap: f64,
    transform: Option<&Mat<f64>>,
    budget: u64,
) -> Result<Vec<PrimitiveSubgroup>, LatticeError> {
    let bounds = plucker_bounds_for_transform(dim, norm_cap, transform)?;
    let all = enumerate_by_plucker_bounds(dim, &bounds, budget)?;
    let id = Mat::identity(dim);
    let t = transform.unwrap_or(&id);
    Ok(all
        .into_iter()
        .filter(|g| g.transformed_norm(t) <= norm_cap)
        .collect())
}

/// Per-rank Plucker bounds certified for one fixed transform.
pub fn plucker_bounds_for_transform(
    dim: usize,
    norm_cap: f64,
    transform: Option<&Mat<f64>>,
) -> Result<Vec<i128>, LatticeError> {
    let id = Mat::identity(dim);
    let t = transform.unwrap_or(&id);
    let tinv = t.inverse().ok_or(LatticeError::SingularBasis)?;
    Ok((1..=dim)
        .map(|j| {
            let op = exterior::compound_opnorm(&tinv, j);
            ((norm_cap * op) * (1.0 + 1e-9)).floor() as i128
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Random unimodular bases (test instances and scenario inputs)
// ---------------------------------------------------------------------------

/// Random unimodular integer matrix built from bounded elementary column
/// operations; entries stay below `max_entry`.
pub fn random_unimodular(k: usize, max_entry: i128, rng: &mut impl rand::Rng) -> Mat<i128> {
    loop {
        let mut m: Mat<i128> = Mat::identity(k);
        for _ in 0..3 * k {
            let a = rng.gen_range(0..k);
            let mut b = rng.gen_range(0..k);
            while b == a {
                b = rng.gen_range(0..k);
            }
            let f: i128 = rng.gen_range(-2..=2);
            for r in 0..k {
                let add = f * m[(r, b)];
                m[(r, a)] += add;
            }
        }
        if m.map(|&x| x).max_abs_entry_int() <= max_entry {
            return m;
        }
    }
}

impl Mat<i128> {
    fn max_abs_entry_int(&self) -> i128 {
        let mut best = 0;
        for i in 0..self.nrows() {
            for j in 0..self.ncols() {
                best = best.max(self[(i, j)].abs());
            }
        }
        best
    }
}
