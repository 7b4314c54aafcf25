//! Number-theoretic front end: the product functionals, Diophantine
//! exponent scanners for the dual/simultaneous/matrix criteria, the
//! witness-to-flow correspondence with its asserted inequalities, excursion
//! scans, and exact solution counting for tabulated approximation speeds.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::lattice::{
    lambda_flow_delta, lambda_flow_delta_below, lambda_flow_delta_capped, FlowVector, LatticeError,
};

/// Float dot products lose the signal once |q.y| eats the mantissa; scans
/// refuse witnesses beyond this modulus on float targets.
pub const FLOAT_MODULUS_LIMIT: f64 = 1e12;

#[derive(Debug, Error)]
pub enum DiophError {
    #[error("exact rational hit: q.y + p = 0, exponent is infinite")]
    ExactHit,
    #[error("modulus Pi_+(q) = 1 carries no exponent information")]
    DegenerateModulus,
    #[error("pair is not a quality-1 approximation (exponent {0} < 0)")]
    NegativeExponent(f64),
    #[error("float target refused beyond Pi_+(q) = {0:.3e} (representation error dominates)")]
    PrecisionRefused(f64),
    #[error("search bound {q} exceeds the budget {max} for n = {n}")]
    QBudget { q: u64, max: u64, n: usize },
    #[error("q must be nonzero")]
    ZeroQ,
    #[error("asserted conclusion failed: {0}")]
    ConclusionViolated(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Approximation target: a float vector, or an exact rational vector for
/// constructed examples (truncated Liouville series and friends).
#[derive(Debug, Clone)]
pub enum Target {
    Float(Vec<f64>),
    Rational(Vec<BigRational>),
}

impl Target {
    pub fn n(&self) -> usize {
        match self {
            Target::Float(v) => v.len(),
            Target::Rational(v) => v.len(),
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            Target::Float(v) => v.clone(),
            Target::Rational(v) => v.iter().map(|r| r.to_f64().unwrap()).collect(),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Target::Rational(_))
    }

    /// (|q.y + p| with p the optimal integer, p itself, exact-zero flag).
    pub fn dual_distance(&self, q: &[i64]) -> (f64, i64, bool) {
        match self {
            Target::Float(y) => {
                let dot: f64 = q.iter().zip(y).map(|(&qi, &yi)| qi as f64 * yi).sum();
                let p = -dot.round();
                ((dot + p).abs(), p as i64, false)
            }
            Target::Rational(y) => {
                let mut dot = BigRational::zero();
                for (&qi, yi) in q.iter().zip(y) {
                    dot += BigRational::from_integer(BigInt::from(qi)) * yi;
                }
                let p = -nearest_int(&dot);
                let d = (&dot + BigRational::from_integer(p.clone())).abs();
                let exact = d.is_zero();
                (
                    d.to_f64().unwrap_or(0.0),
                    p.to_i64().expect("p fits i64"),
                    exact,
                )
            }
        }
    }

    pub fn sqrt2() -> Target {
        Target::Float(vec![std::f64::consts::SQRT_2])
    }

    pub fn golden() -> Target {
        Target::Float(vec![(1.0 + 5f64.sqrt()) / 2.0])
    }

    /// Truncated Liouville-type series sum_{j<=terms} 10^{-j!}, exact.
    pub fn liouville(terms: u32) -> Target {
        let mut acc = BigRational::zero();
        let mut fact: u64 = 1;
        for j in 1..=terms as u64 {
            fact *= j;
            let den = BigInt::from(10u32).pow(fact as u32);
            acc += BigRational::new(BigInt::from(1), den);
        }
        Target::Rational(vec![acc])
    }
}

fn nearest_int(x: &BigRational) -> BigInt {
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    (x + half).floor().to_integer()
}

/// Pi(x) = prod |x_i|.
pub fn pi(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).product()
}

/// Pi_+(x) = prod max(|x_i|, 1); always >= 1.
pub fn pi_plus(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs().max(1.0)).product()
}

fn pi_plus_i64(q: &[i64]) -> f64 {
    q.iter().map(|&v| (v.abs().max(1)) as f64).product()
}

fn sup_i64(q: &[i64]) -> i64 {
    q.iter().map(|v| v.abs()).max().unwrap_or(0)
}

/// gamma(eps) = eps / (n + 1 + n eps): the excursion rate produced by a
/// dual witness of exponent eps.
pub fn gamma_rate(eps: f64, n: usize) -> f64 {
    eps / (n as f64 + 1.0 + n as f64 * eps)
}

/// The inequality family a scan searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// |q.y + p| ||q||^n <= ||q||^{-n eps}
    DualStandard,
    /// |q.y + p| Pi_+(q) <= Pi_+(q)^{-eps}
    DualMultiplicative,
    /// ||q y + p||^n |q| <= |q|^{-eps}
    SimultaneousStandard,
    /// Pi(q y + p) |q| <= |q|^{-eps}
    SimultaneousMultiplicative,
    /// ||Y q + p||^m ||q||^n <= ||q||^{-n eps}
    MatrixStandard,
    /// Pi(Y q + p) Pi_+(q) <= Pi_+(q)^{-eps}
    MatrixMultiplicative,
}

impl Criterion {
    pub fn tag(&self) -> &'static str {
        match self {
            Criterion::DualStandard => "dual-standard",
            Criterion::DualMultiplicative => "dual-multiplicative",
            Criterion::SimultaneousStandard => "simultaneous-standard",
            Criterion::SimultaneousMultiplicative => "simultaneous-multiplicative",
            Criterion::MatrixStandard => "matrix-standard",
            Criterion::MatrixMultiplicative => "matrix-multiplicative",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Criterion> {
        [
            Criterion::DualStandard,
            Criterion::DualMultiplicative,
            Criterion::SimultaneousStandard,
            Criterion::SimultaneousMultiplicative,
            Criterion::MatrixStandard,
            Criterion::MatrixMultiplicative,
        ]
        .into_iter()
        .find(|c| c.tag() == tag)
    }
}

/// Best pair found in one dyadic shell 2^{s-1} < ||q|| <= 2^s.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ShellRecord {
    pub shell: u32,
    /// Largest exponent attained in the shell.
    pub best_eps: f64,
    /// Exact rational hit: the criterion holds for every exponent.
    pub exact_hit: bool,
    pub q: Vec<i64>,
    pub p: Vec<i64>,
}

#[derive(Debug, Clone)]
pub struct ExponentScan {
    pub criterion: Criterion,
    pub q_max: u64,
    pub shells: Vec<ShellRecord>,
    /// Count of q skipped because the float modulus guard tripped.
    pub refused: u64,
}

fn q_budget(n: usize) -> u64 {
    match n {
        1 => 1_000_000,
        2 => 1_000,
        _ => 100,
    }
}

/// Exhaustive per-shell exponent search. p is chosen optimally (nearest
/// integer), which is exact for all six criteria, so the scan reduces to
/// the q box. Vectors with modulus 1 (||q|| = 1 or Pi_+(q) = 1 as the
/// criterion requires) carry no exponent information and are skipped.
pub fn best_exponent(
    target: &Target,
    criterion: Criterion,
    q_max: u64,
) -> Result<ExponentScan, DiophError> {
    let n = target.n();
    match criterion {
        Criterion::DualStandard | Criterion::DualMultiplicative => {
            let max = q_budget(n);
            if q_max > max {
                return Err(DiophError::QBudget { q: q_max, max, n });
            }
            dual_scan(target, criterion, q_max)
        }
        Criterion::SimultaneousStandard | Criterion::SimultaneousMultiplicative => {
            let max = 10_000_000;
            if q_max > max {
                return Err(DiophError::QBudget { q: q_max, max, n });
            }
            simultaneous_scan(target, criterion, q_max)
        }
        Criterion::MatrixStandard | Criterion::MatrixMultiplicative => {
            Err(DiophError::ConclusionViolated(
                "matrix criteria take a MatrixTarget; use best_exponent_matrix".into(),
            ))
        }
    }
}

struct ShellAccum {
    shells: Vec<Option<ShellRecord>>,
}

impl ShellAccum {
    fn new(q_max: u64) -> Self {
        let count = 64 - q_max.leading_zeros() as usize + 1;
        ShellAccum {
            shells: (0..count + 1).map(|_| None).collect(),
        }
    }

    fn shell_of(norm: i64) -> usize {
        // norm in (2^{s-1}, 2^s]  => s
        let n = norm as u64;
        (64 - (n - 1).leading_zeros()) as usize
    }

    fn offer(&mut self, norm: i64, eps: f64, exact: bool, q: &[i64], p: &[i64]) {
        if norm <= 1 {
            return;
        }
        let s = Self::shell_of(norm);
        if s >= self.shells.len() {
            return;
        }
        let better = match &self.shells[s] {
            None => true,
            Some(cur) => {
                if exact != cur.exact_hit {
                    exact
                } else if eps != cur.best_eps {
                    eps > cur.best_eps
                } else {
                    // deterministic tie-break: lexicographically smallest q
                    q < cur.q.as_slice()
                }
            }
        };
        if better {
            self.shells[s] = Some(ShellRecord {
                shell: s as u32,
                best_eps: eps,
                exact_hit: exact,
                q: q.to_vec(),
                p: p.to_vec(),
            });
        }
    }

    fn finish(self) -> Vec<ShellRecord> {
        self.shells.into_iter().flatten().collect()
    }
}

fn dual_scan(
    target: &Target,
    criterion: Criterion,
    q_max: u64,
) -> Result<ExponentScan, DiophError> {
    let n = target.n();
    let mut acc = ShellAccum::new(q_max);
    let mut refused = 0u64;
    let bound = q_max as i64;
    let mut q = vec![-bound; n];
    let lower = q.clone();
    let upper = vec![bound; n];
    loop {
        // Canonical half: first nonzero coordinate positive.
        if is_canonical_nonzero(&q) {
            let norm = sup_i64(&q);
            let modulus = match criterion {
                Criterion::DualStandard => (norm as f64).powi(n as i32),
                _ => pi_plus_i64(&q),
            };
            if modulus > 1.0 {
                if !target.is_exact() && modulus > FLOAT_MODULUS_LIMIT {
                    refused += 1;
                } else {
                    let (d, p, exact) = target.dual_distance(&q);
                    if exact {
                        acc.offer(norm, f64::INFINITY, true, &q, &[p]);
                    } else {
                        // d * modulus = modulus^{-eps}
                        let eps = -1.0 - d.ln() / modulus.ln();
                        acc.offer(norm, eps, false, &q, &[p]);
                    }
                }
            }
        }
        if !advance(&mut q, &lower, &upper) {
            break;
        }
    }
    Ok(ExponentScan {
        criterion,
        q_max,
        shells: acc.finish(),
        refused,
    })
}

fn simultaneous_scan(
    target: &Target,
    criterion: Criterion,
    q_max: u64,
) -> Result<ExponentScan, DiophError> {
    let y = target.to_f64();
    let n = y.len();
    let mut acc = ShellAccum::new(q_max);
    let mut refused = 0u64;
    for q in 2..=q_max as i64 {
        if !target.is_exact() && (q as f64) > FLOAT_MODULUS_LIMIT {
            refused += 1;
            continue;
        }
        let mut p = Vec::with_capacity(n);
        let mut exact = false;
        let mut diffs = Vec::with_capacity(n);
        for &yi in &y {
            let prod = q as f64 * yi;
            let pi_ = -prod.round();
            let d = (prod + pi_).abs();
            if d == 0.0 && target.is_exact() {
                exact = true;
            }
            p.push(pi_ as i64);
            diffs.push(d);
        }
        let lhs = match criterion {
            Criterion::SimultaneousStandard => {
                diffs.iter().fold(0.0f64, |m, &d| m.max(d)).powi(n as i32)
            }
            _ => pi(&diffs),
        };
        if lhs == 0.0 {
            acc.offer(q, f64::INFINITY, true, &[q], &p);
            continue;
        }
        // lhs * q = q^{-eps}
        let eps = -1.0 - lhs.ln() / (q as f64).ln();
        acc.offer(q, eps, exact, &[q], &p);
    }
    Ok(ExponentScan {
        criterion,
        q_max,
        shells: acc.finish(),
        refused,
    })
}

/// System of m linear forms in n variables, scanned as (6.1)/(6.1M)-style
/// exponents; no flow correspondence is provided for these.
#[derive(Debug, Clone)]
pub struct MatrixTarget {
    pub rows: usize,
    pub cols: usize,
    /// Row-major m x n entries.
    pub entries: Vec<f64>,
}

impl MatrixTarget {
    fn apply(&self, q: &[i64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| {
                (0..self.cols)
                    .map(|j| self.entries[i * self.cols + j] * q[j] as f64)
                    .sum::<f64>()
            })
            .collect()
    }
}

pub fn best_exponent_matrix(
    target: &MatrixTarget,
    criterion: Criterion,
    q_max: u64,
) -> Result<ExponentScan, DiophError> {
    let n = target.cols;
    let m = target.rows;
    let max = q_budget(n);
    if q_max > max {
        return Err(DiophError::QBudget { q: q_max, max, n });
    }
    let mut acc = ShellAccum::new(q_max);
    let bound = q_max as i64;
    let mut q = vec![-bound; n];
    let lower = q.clone();
    let upper = vec![bound; n];
    loop {
        if is_canonical_nonzero(&q) {
            let norm = sup_i64(&q);
            let modulus = match criterion {
                Criterion::MatrixStandard => (norm as f64).powi(n as i32),
                _ => pi_plus_i64(&q),
            };
            if modulus > 1.0 {
                let prods = target.apply(&q);
                let mut p = Vec::with_capacity(m);
                let mut diffs = Vec::with_capacity(m);
                for &v in &prods {
                    let pi_ = -v.round();
                    p.push(pi_ as i64);
                    diffs.push((v + pi_).abs());
                }
                let lhs = match criterion {
                    Criterion::MatrixStandard => {
                        diffs.iter().fold(0.0f64, |mx, &d| mx.max(d)).powi(m as i32)
                    }
                    _ => pi(&diffs),
                };
                if lhs > 0.0 {
                    let eps = -1.0 - lhs.ln() / modulus.ln();
                    acc.offer(norm, eps, false, &q, &p);
                }
            }
        }
        if !advance(&mut q, &lower, &upper) {
            break;
        }
    }
    Ok(ExponentScan {
        criterion,
        q_max,
        shells: acc.finish(),
        refused: 0,
    })
}

fn is_canonical_nonzero(q: &[i64]) -> bool {
    match q.iter().find(|&&c| c != 0) {
        None => false,
        Some(&first) => first > 0,
    }
}

fn advance(m: &mut [i64], lower: &[i64], upper: &[i64]) -> bool {
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

/// A dual-multiplicative approximation pair together with the derived flow
/// data: r = Pi_+(q)^{-eps/(n+1)} and t_i = log(|q_i|_+ / r).
#[derive(Debug, Clone, serde::Serialize)]
pub struct Witness {
    pub n: usize,
    pub p: i64,
    pub q: Vec<i64>,
    /// Exponent at equality in the dual-multiplicative criterion.
    pub eps: f64,
    pub r: f64,
    pub t: Vec<f64>,
    /// delta(g_t Lambda_y), asserted <= r.
    pub delta: f64,
    /// Measured slack in the asserted conclusion (r - delta >= -1e-9).
    pub margin: f64,
}

impl Witness {
    pub fn flow(&self) -> FlowVector<f64> {
        FlowVector::new(self.t.clone()).expect("nonnegative by construction")
    }
}

/// Computes eps from equality in the dual-multiplicative inequality, then
/// r and t, and asserts the conclusion delta(g_t Lambda_y) <= r along with
/// the component inequalities and the product identity Pi_+(q) = r^n e^t
/// and r = e^{-gamma t}.
pub fn witness_to_flow(target: &Target, q: &[i64], budget: u64) -> Result<Witness, DiophError> {
    let n = target.n();
    if q.iter().all(|&c| c == 0) {
        return Err(DiophError::ZeroQ);
    }
    let modulus = pi_plus_i64(q);
    if modulus <= 1.0 {
        return Err(DiophError::DegenerateModulus);
    }
    if !target.is_exact() && modulus > FLOAT_MODULUS_LIMIT {
        return Err(DiophError::PrecisionRefused(modulus));
    }
    let (d, p, exact) = target.dual_distance(q);
    if exact || d == 0.0 {
        return Err(DiophError::ExactHit);
    }
    let eps = -1.0 - d.ln() / modulus.ln();
    if eps < 0.0 {
        return Err(DiophError::NegativeExponent(eps));
    }
    let r = modulus.powf(-eps / (n as f64 + 1.0));
    let t: Vec<f64> = q
        .iter()
        .map(|&qi| ((qi.abs().max(1)) as f64 / r).ln())
        .collect();
    let tv = FlowVector::new(t.clone()).map_err(DiophError::Lattice)?;
    let total = tv.total();

    // Component inequalities at the derived equality point.
    let tol = 1e-9;
    let lhs_a = total.exp() * d;
    if lhs_a > r * (1.0 + 1e-9) + 1e-12 {
        return Err(DiophError::ConclusionViolated(format!(
            "e^t |q.y+p| = {lhs_a} > r = {r}"
        )));
    }
    for (i, &qi) in q.iter().enumerate() {
        let lhs_b = (-t[i]).exp() * qi.abs() as f64;
        if lhs_b > r * (1.0 + 1e-9) + 1e-12 {
            return Err(DiophError::ConclusionViolated(format!(
                "e^-t_{i} |q_{i}| = {lhs_b} > r = {r}"
            )));
        }
    }
    // Product identity Pi_+(q) = r^n e^t.
    let ident = r.powi(n as i32) * total.exp();
    if (ident - modulus).abs() > 1e-9 * modulus {
        return Err(DiophError::ConclusionViolated(format!(
            "Pi_+(q) = {modulus} but r^n e^t = {ident}"
        )));
    }
    // r = e^{-gamma t} with gamma = eps/(n+1+n eps).
    let gamma = gamma_rate(eps, n);
    if (r - (-gamma * total).exp()).abs() > 1e-9 * (1.0 + r) {
        return Err(DiophError::ConclusionViolated("r != e^{-gamma t}".into()));
    }

    // The asserted conclusion: the capped search's box is the q-box
    // |q_i| <= r e^{t_i} = |q_i|_+, so deep witnesses stay cheap.
    let delta = match flow_delta_capped_for_target(target, &tv, r * (1.0 + 1e-9) + 1e-12, budget)? {
        Some(d) => d,
        None => {
            return Err(DiophError::ConclusionViolated(format!(
                "delta(g_t Lambda_y) >= {r} + tol (no vector found under the cap)"
            )))
        }
    };
    if delta > r + tol {
        return Err(DiophError::ConclusionViolated(format!(
            "delta(g_t Lambda_y) = {delta} > r + tol = {r}"
        )));
    }
    Ok(Witness {
        n,
        p,
        q: q.to_vec(),
        eps,
        r,
        t,
        delta,
        margin: r - delta,
    })
}

fn flow_delta_capped_for_target(
    target: &Target,
    t: &FlowVector<f64>,
    cap: f64,
    budget: u64,
) -> Result<Option<f64>, DiophError> {
    match target {
        Target::Float(y) => Ok(lambda_flow_delta_capped(y, t, cap, budget)?.map(|r| r.value)),
        Target::Rational(y) => rational_flow_delta_capped(y, t, cap, budget),
    }
}

fn flow_delta_for_target(
    target: &Target,
    t: &FlowVector<f64>,
    budget: u64,
) -> Result<f64, DiophError> {
    match target {
        Target::Float(y) => Ok(lambda_flow_delta(y, t, budget)?.value),
        Target::Rational(y) => Ok(rational_flow_delta_capped(y, t, f64::INFINITY, budget)?
            .expect("uncapped search attains")),
    }
}

/// Exact-rational variant of the sheared-lattice delta: distances to the
/// nearest integer are computed in BigRational, so deep Liouville-type
/// witnesses are not blurred by f64 dot products.
fn rational_flow_delta_capped(
    y: &[BigRational],
    t: &FlowVector<f64>,
    cap: f64,
    budget: u64,
) -> Result<Option<f64>, DiophError> {
    let n = y.len();
    let total = t.total();
    let e_t = total.exp();
    let mut best = e_t; // (p, q) = (1, 0)
                        // Seed pass, then the certified box from min(cap, seed).
    for pass in 0..2 {
        let bounds: Vec<i64> = if pass == 0 {
            vec![2; n]
        } else {
            let radius = best.min(cap) * (1.0 + 1e-12);
            t.components()
                .iter()
                .map(|&ti| (radius * ti.exp()).floor().to_i64().unwrap_or(i64::MAX))
                .collect()
        };
        let mut volume: u128 = 1;
        for &b in &bounds {
            volume = volume.saturating_mul((2 * b as u128) + 1);
        }
        if volume > budget as u128 {
            return Err(DiophError::Lattice(LatticeError::BudgetExceeded {
                estimated: volume,
                budget: budget as u128,
            }));
        }
        let mut q = bounds.iter().map(|&b| -b).collect::<Vec<i64>>();
        let lower = q.clone();
        loop {
            if !q.iter().all(|&c| c == 0) {
                let mut dot = BigRational::zero();
                for (&qi, yi) in q.iter().zip(y) {
                    dot += BigRational::from_integer(BigInt::from(qi)) * yi;
                }
                let p = -nearest_int(&dot);
                let d = (&dot + BigRational::from_integer(p))
                    .abs()
                    .to_f64()
                    .unwrap_or(0.0);
                let mut norm = e_t * d;
                for (&qi, &ti) in q.iter().zip(t.components()) {
                    norm = norm.max((qi as f64).abs() * (-ti).exp());
                }
                if norm < best {
                    best = norm;
                }
            }
            if !advance(&mut q, &lower, &bounds) {
                break;
            }
        }
    }
    if best < cap || cap.is_infinite() {
        Ok(Some(best))
    } else {
        Ok(None)
    }
}

/// Floors the flow components; the distortion of delta is at most e^n.
pub fn round_flow_times(target: &Target, w: &Witness, budget: u64) -> Result<Witness, DiophError> {
    let floored: Vec<f64> = w.t.iter().map(|x| x.floor()).collect();
    let tv = FlowVector::new(floored.clone()).map_err(DiophError::Lattice)?;
    let cap = (w.n as f64).exp() * w.r;
    let search_cap = cap * (1.0 + 1e-9) + 1e-12;
    let delta = match flow_delta_capped_for_target(target, &tv, search_cap, budget)? {
        Some(d) => d,
        None => {
            return Err(DiophError::ConclusionViolated(format!(
                "delta(g_[t] Lambda_y) >= e^n r = {cap}"
            )))
        }
    };
    if delta > cap * (1.0 + 1e-9) + 1e-12 {
        return Err(DiophError::ConclusionViolated(format!(
            "delta(g_[t] Lambda_y) = {delta} > e^n r = {cap}"
        )));
    }
    Ok(Witness {
        n: w.n,
        p: w.p,
        q: w.q.clone(),
        eps: w.eps,
        r: w.r,
        t: floored,
        delta,
        margin: cap - delta,
    })
}

/// One excursion event: an integer flow vector whose orbit point dipped
/// below the target rate.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Excursion {
    pub t: Vec<u32>,
    pub threshold: f64,
    pub delta: f64,
}

/// All integer t with sum <= t_max and delta(g_t Lambda_y) <= e^{-gamma t}.
pub fn excursion_scan(
    target: &Target,
    gamma: f64,
    t_max: u32,
    budget: u64,
) -> Result<Vec<Excursion>, DiophError> {
    assert!(gamma > 0.0, "excursion rate must be positive");
    let n = target.n();
    let mut out = Vec::new();
    let mut t = vec![0u32; n];
    loop {
        let total: u32 = t.iter().sum();
        if total > 0 {
            let threshold = (-(gamma * total as f64)).exp();
            let tv = FlowVector::new(t.iter().map(|&x| x as f64).collect::<Vec<_>>())
                .map_err(DiophError::Lattice)?;
            let hit = match target {
                Target::Float(y) => {
                    lambda_flow_delta_below(y, &tv, threshold * (1.0 + 1e-12), budget)?
                }
                Target::Rational(y) => {
                    rational_flow_delta_capped(y, &tv, threshold * (1.0 + 1e-11), budget)?.is_some()
                }
            };
            if hit {
                let delta = flow_delta_for_target(target, &tv, budget)?;
                out.push(Excursion {
                    t: t.clone(),
                    threshold,
                    delta,
                });
            }
        }
        if !advance_simplex(&mut t, t_max) {
            break;
        }
    }
    Ok(out)
}

/// Odometer over {t in Z_+^n : sum t_i <= cap}, lexicographic.
pub fn advance_simplex(t: &mut [u32], cap: u32) -> bool {
    let n = t.len();
    let sum: u32 = t.iter().sum();
    if sum < cap {
        t[n - 1] += 1;
        return true;
    }
    // Zero the rightmost nonzero coordinate and carry one position left.
    match t.iter().rposition(|&v| v > 0) {
        None | Some(0) => false,
        Some(i) => {
            t[i] = 0;
            t[i - 1] += 1;
            true
        }
    }
}

/// Decreasing step function given by (argument, value) pairs; the value at
/// u is taken from the greatest tabulated argument <= u (left-extended by
/// the first value).
#[derive(Debug, Clone)]
pub struct PsiTable {
    entries: Vec<(f64, f64)>,
}

impl PsiTable {
    pub fn from_pairs(mut entries: Vec<(f64, f64)>) -> Self {
        assert!(
            !entries.is_empty(),
            "psi table must have at least one entry"
        );
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        PsiTable { entries }
    }

    pub fn zero() -> Self {
        PsiTable {
            entries: vec![(1.0, 0.0)],
        }
    }

    pub fn constant(v: f64) -> Self {
        PsiTable {
            entries: vec![(1.0, v)],
        }
    }

    /// psi(u) = 1/(u ln^2 u), tabulated on a log grid up to u_max.
    pub fn inv_q_log2(u_max: f64) -> Self {
        let mut entries = Vec::new();
        let mut u = 2.0f64;
        while u <= u_max * 2.0 {
            entries.push((u, 1.0 / (u * u.ln() * u.ln())));
            u *= 1.5;
        }
        PsiTable::from_pairs(entries)
    }

    pub fn value(&self, u: f64) -> f64 {
        match self.entries.iter().rev().find(|(a, _)| *a <= u) {
            Some(&(_, v)) => v,
            None => self.entries[0].1,
        }
    }
}

/// Exact count of pairs (q, p), 0 < ||q|| <= q_max, with
/// |q.y + p| ||q||^n <= psi(||q||^n). All integer p in range are counted.
pub fn khintchine_count(target: &Target, psi: &PsiTable, q_max: u64) -> Result<u64, DiophError> {
    let n = target.n();
    let max = q_budget(n);
    if q_max > max {
        return Err(DiophError::QBudget { q: q_max, max, n });
    }
    let y = target.to_f64();
    let mut count = 0u64;
    let bound = q_max as i64;
    let mut q = vec![-bound; n];
    let lower = q.clone();
    let upper = vec![bound; n];
    loop {
        if q.iter().any(|&c| c != 0) {
            let norm = sup_i64(&q) as f64;
            let tau = psi.value(norm.powi(n as i32)) / norm.powi(n as i32);
            let dot: f64 = q.iter().zip(&y).map(|(&qi, &yi)| qi as f64 * yi).sum();
            if tau >= 0.0 {
                let hi = (-dot + tau).floor();
                let lo = (-dot - tau).ceil();
                if hi >= lo {
                    count += (hi - lo) as u64 + 1;
                }
            }
        }
        if !advance(&mut q, &lower, &upper) {
            break;
        }
    }
    Ok(count)
}

/// (x, x^2, ..., x^n).
pub fn veronese(x: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| x.powi(i as i32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::DEFAULT_ENUM_BUDGET;

    #[test]
    fn pi_examples() {
        assert_eq!(pi(&[2.0, -3.0]), 6.0);
        assert_eq!(pi_plus(&[0.0, 3.0]), 3.0);
        assert!(pi_plus(&[0.2, -0.5]) >= 1.0);
        // pi_plus(q) >= ||q||_inf for integer q != 0
        for q in [[3i64, 0], [1, -7], [2, 2]] {
            assert!(pi_plus_i64(&q) >= sup_i64(&q) as f64);
        }
    }

    #[test]
    fn gamma_rate_spots() {
        assert!((gamma_rate(1.0, 1) - 1.0 / 3.0).abs() < 1e-15);
        // increasing in eps, below 1/n
        let mut prev = 0.0;
        for k in 1..40 {
            let g = gamma_rate(k as f64 * 0.25, 2);
            assert!(g > prev);
            assert!(g < 0.5);
            prev = g;
        }
    }

    #[test]
    fn rational_target_exact_hit() {
        let half = Target::Rational(vec![BigRational::new(BigInt::from(1), BigInt::from(2))]);
        let scan = best_exponent(&half, Criterion::DualMultiplicative, 16).unwrap();
        let hit = scan
            .shells
            .iter()
            .find(|s| s.exact_hit)
            .expect("rational point hits exactly");
        assert_eq!(hit.q, vec![2]);
        assert!(hit.best_eps.is_infinite());
        assert!(matches!(
            witness_to_flow(&half, &[2], DEFAULT_ENUM_BUDGET),
            Err(DiophError::ExactHit)
        ));
    }

    #[test]
    fn golden_per_shell_eps_shrinks() {
        let scan = best_exponent(&Target::golden(), Criterion::DualStandard, 4096).unwrap();
        let shells = &scan.shells;
        assert!(shells.len() >= 10);
        let early = shells[1].best_eps;
        let late = shells[shells.len() - 1].best_eps;
        assert!(late < early, "early={early} late={late}");
        assert!(
            late < 0.2,
            "golden ratio is badly approximable, late={late}"
        );
        // Every shell's best q must beat the continued-fraction convergent
        // in that shell (Fibonacci denominators for the golden ratio).
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let (mut f0, mut f1) = (1i64, 1i64);
        while f1 <= 4096 {
            let (d, _, _) = Target::golden().dual_distance(&[f1]);
            if d > 0.0 && f1 > 1 {
                let eps_conv = -1.0 - d.ln() / (f1 as f64).ln();
                let s = ShellAccum::shell_of(f1);
                if let Some(rec) = shells.iter().find(|r| r.shell == s as u32) {
                    assert!(
                        rec.best_eps >= eps_conv - 1e-9,
                        "shell {s}: scan {} < convergent {eps_conv} (q={f1}, phi={phi})",
                        rec.best_eps
                    );
                }
            }
            (f0, f1) = (f1, f0 + f1);
        }
    }

    #[test]
    fn liouville_truncation_big_shell_exponent() {
        let y = Target::liouville(4);
        let scan = best_exponent(&y, Criterion::DualStandard, 1_000_000).unwrap();
        // at q = 10^6 the distance is 10^{-18}: eps = -1 + 18/6 = 2
        let top = scan
            .shells
            .iter()
            .find(|s| s.q == vec![1_000_000])
            .expect("witness shell");
        assert!((top.best_eps - 2.0).abs() < 1e-6, "eps={}", top.best_eps);
        assert!(top.best_eps > 1.0);
    }

    #[test]
    fn witness_chain_sqrt2_convergent() {
        // 17/12 is a continued-fraction convergent of sqrt 2.
        let y = Target::sqrt2();
        let w = witness_to_flow(&y, &[12], DEFAULT_ENUM_BUDGET).unwrap();
        assert!(w.eps > 0.0);
        assert!(w.r < 1.0);
        assert!(w.t.iter().all(|&ti| ti >= 0.0));
        assert!(w.delta <= w.r + 1e-9);
        assert_eq!(w.p, -17);
        // product identity to 1e-12 relative
        let ident = w.r.powi(1) * w.t.iter().sum::<f64>().exp();
        assert!((ident - pi_plus_i64(&w.q)).abs() <= 1e-12 * pi_plus_i64(&w.q));
    }

    #[test]
    fn witness_zero_component_uses_plus_convention() {
        // q = (q1, 0): |0|_+ = 1, t_2 = log(1/r) > 0.
        let y = Target::Float(vec![std::f64::consts::SQRT_2, 0.7320508]);
        // find a decent q1 via a small scan
        let scan = best_exponent(&y, Criterion::DualMultiplicative, 64).unwrap();
        let mut checked = false;
        for rec in &scan.shells {
            if rec.best_eps > 0.0 {
                if let Ok(w) = witness_to_flow(&y, &rec.q, DEFAULT_ENUM_BUDGET) {
                    checked = true;
                    assert!(w.delta <= w.r + 1e-9);
                }
            }
        }
        // Degenerate-component handling specifically:
        if let Ok(w) = witness_to_flow(&y, &[12, 0], DEFAULT_ENUM_BUDGET) {
            assert!(w.t[1] > 0.0);
            assert!((w.t[1] - (1.0 / w.r).ln()).abs() < 1e-12);
            checked = true;
        }
        assert!(checked);
    }

    #[test]
    fn negative_exponent_rejected() {
        // A terrible approximation pair: q with dist ~ 1/2 at tiny modulus.
        let y = Target::Float(vec![0.5000001]);
        match witness_to_flow(&y, &[3], DEFAULT_ENUM_BUDGET) {
            Err(DiophError::NegativeExponent(e)) => assert!(e < 0.0),
            other => panic!("expected NegativeExponent, got {other:?}"),
        }
    }

    #[test]
    fn round_flow_times_within_e_n() {
        let y = Target::sqrt2();
        let w = witness_to_flow(&y, &[29], DEFAULT_ENUM_BUDGET).unwrap();
        let rounded = round_flow_times(&y, &w, DEFAULT_ENUM_BUDGET).unwrap();
        assert!(rounded.t.iter().all(|&ti| ti.fract() == 0.0));
        assert!(rounded.delta <= 1.0f64.exp() * w.r * (1.0 + 1e-9));
        // integer t already -> unchanged
        let again = round_flow_times(&y, &rounded, DEFAULT_ENUM_BUDGET).unwrap();
        assert_eq!(again.t, rounded.t);
    }

    #[test]
    fn excursion_scan_zero_target_closed_form() {
        // Lambda_0 = Z^{n+1}: delta(g_t) = e^{-max t_i}; the scan must
        // return exactly {t : max_i t_i >= gamma * sum t_i}.
        let y = Target::Float(vec![0.0, 0.0]);
        let gamma = 0.6;
        let t_max = 6;
        let got = excursion_scan(&y, gamma, t_max, DEFAULT_ENUM_BUDGET).unwrap();
        let got_set: std::collections::HashSet<Vec<u32>> =
            got.iter().map(|e| e.t.clone()).collect();
        let mut t = vec![0u32; 2];
        loop {
            let total: u32 = t.iter().sum();
            if total > 0 {
                let expect = *t.iter().max().unwrap() as f64 >= gamma * total as f64 - 1e-12;
                assert_eq!(
                    got_set.contains(&t),
                    expect,
                    "t={t:?} max={} gamma*sum={}",
                    t.iter().max().unwrap(),
                    gamma * total as f64
                );
            }
            if !advance_simplex(&mut t, t_max) {
                break;
            }
        }
    }

    #[test]
    fn excursion_scan_agrees_with_direct_delta() {
        // Coupled oracle: recompute delta for every t in the simplex and
        // compare membership. The generic-point list size is recorded, not
        // asserted (a.e. finiteness is not a finite computation).
        let y_vec = vec![0.7548776662466927, 0.5436890126920764];
        let y = Target::Float(y_vec.clone());
        let gamma = 0.3;
        let t_max = 8;
        let got = excursion_scan(&y, gamma, t_max, DEFAULT_ENUM_BUDGET).unwrap();
        let got_set: std::collections::HashSet<Vec<u32>> =
            got.iter().map(|e| e.t.clone()).collect();
        let mut t = vec![0u32; 2];
        loop {
            let total: u32 = t.iter().sum();
            if total > 0 {
                let tv = FlowVector::new(t.iter().map(|&x| x as f64).collect::<Vec<_>>()).unwrap();
                let d = lambda_flow_delta(&y_vec, &tv, DEFAULT_ENUM_BUDGET)
                    .unwrap()
                    .value;
                let threshold = (-(gamma * total as f64)).exp();
                if (d - threshold).abs() > 1e-9 {
                    assert_eq!(got_set.contains(&t), d <= threshold, "t={t:?} d={d}");
                }
            }
            if !advance_simplex(&mut t, t_max) {
                break;
            }
        }
    }

    #[test]
    fn khintchine_counts() {
        let y = Target::Float(vec![std::f64::consts::SQRT_2, std::f64::consts::E]);
        assert_eq!(khintchine_count(&y, &PsiTable::zero(), 40).unwrap(), 0);
        // generous threshold: tau = psi/||q||^n with psi = ||q||^n gives
        // tau = 1, so >= 2 integer p per q (usually 3).
        let q_max = 10u64;
        let box_count = (2 * q_max + 1).pow(2) - 1;
        let psi_big = PsiTable::from_pairs(vec![(1.0, 1e9)]);
        let c = khintchine_count(&y, &psi_big, q_max).unwrap();
        assert!(c > 2 * box_count, "c={c} boxes={box_count}");
    }

    #[test]
    fn veronese_values_and_nondegeneracy() {
        assert_eq!(veronese(0.0, 3), vec![0.0, 0.0, 0.0]);
        assert_eq!(veronese(2.0, 3), vec![2.0, 4.0, 8.0]);
        use crate::goodfun::{nondegeneracy_order, Polynomial, ScalarField};
        for &x0 in &[0.3, -1.2, 2.0] {
            let fields: Vec<ScalarField> = (1..=3)
                .map(|i| {
                    let mut coeffs = vec![0.0; i + 1];
                    coeffs[i] = 1.0;
                    ScalarField::poly(Polynomial::univariate(&coeffs))
                })
                .collect();
            assert_eq!(nondegeneracy_order(&fields, &[x0], 4), Some(3));
        }
    }

    #[test]
    fn standard_implies_multiplicative_per_pair() {
        // Any pair satisfying the standard dual criterion at eps >= 0
        // satisfies the multiplicative one at the same eps, since
        // Pi_+(q) <= ||q||^n.
        let y = Target::Float(vec![0.39226, 0.77126]);
        let scan_std = best_exponent(&y, Criterion::DualStandard, 128).unwrap();
        for rec in &scan_std.shells {
            if rec.best_eps >= 0.0 && !rec.exact_hit {
                let (d, _, _) = y.dual_distance(&rec.q);
                let mult = pi_plus_i64(&rec.q);
                if mult > 1.0 {
                    let eps_mult = -1.0 - d.ln() / mult.ln();
                    assert!(
                        eps_mult >= rec.best_eps - 1e-9,
                        "q={:?}: mult {eps_mult} < std {}",
                        rec.q,
                        rec.best_eps
                    );
                }
            }
        }
    }
}
