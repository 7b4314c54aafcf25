//! The marking procedure on the poset of primitive subgroups: for a
//! continuous family of matrices h(x), a point is marked when some chain of
//! primitive subgroups has its transformed norms pinned inside [eps, rho]
//! while every outside subgroup comparable with the whole chain stays at or
//! above rho. Marked points have delta(h(x) Z^k) >= eps; the measure of the
//! unmarked set is bounded by kC(3^d N_d)^k (eps/rho)^alpha |B|.
//!
//! The quantifier in the outside-the-chain condition runs over the infinite
//! poset, but any violator has psi < rho and therefore lies in the finite
//! certified candidate set, so checking candidates is equivalent, not an
//! approximation.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::exterior::{self, MultiVector};
use crate::goodfun::{self, Ball, GoodFunError, GoodParams, ScalarField};
use crate::lattice::{
    self, delta_capped_budgeted, flow_shear_matrix, DeltaCapped, FlowVector, Lattice, LatticeError,
    PrimitiveSubgroup,
};
use crate::linalg::Mat;
use crate::stats;

#[derive(Debug, Error)]
pub enum MarkingError {
    #[error("rho = {0} must satisfy 0 < rho <= 1/k and rho >= 1e-3 (boundary resolution)")]
    BadRho(f64),
    #[error("candidate floor: rho too small to resolve boundaries")]
    Degenerate,
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    GoodFun(#[from] GoodFunError),
}

/// How the point-to-matrix family is evaluated.
#[derive(Clone)]
enum Family {
    /// h(x) = g_t u_{f(x)} with polynomial (or black-box) coordinates.
    FlowShear {
        fields: Vec<ScalarField>,
        t: FlowVector<f64>,
    },
    /// Arbitrary continuous family with caller-certified inverse bounds.
    Map(Arc<dyn Fn(f64) -> Mat<f64> + Send + Sync>),
}

/// Poset candidate: a primitive subgroup with its cached representative.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub subgroup: PrimitiveSubgroup,
    rep: MultiVector<f64>,
    pub rank: usize,
}

/// A marking problem instance: the ball, the matrix family, the constants,
/// and the precomputed certified candidate superset with its inclusion
/// relation.
pub struct MarkingInstance {
    pub k: usize,
    pub ball: Ball,
    pub params: GoodParams,
    pub n_d: u32,
    family: Family,
    candidates: Vec<Candidate>,
    /// includes[i][j]: candidate i is a subgroup of candidate j.
    includes: Vec<Vec<bool>>,
    pub budget: u64,
}

pub const BOUNDARY_TOL: f64 = 1e-9;

impl MarkingInstance {
    /// Instance for h(x) = g_t u_{f(x)}. The candidate superset is certified
    /// from entrywise bounds for h(x)^{-1} = u_{-f(x)} g_{-t} over the
    /// dilated ball; polynomial coordinates get exact coefficient bounds.
    pub fn flow_shear(
        fields: Vec<ScalarField>,
        t: FlowVector<f64>,
        ball: Ball,
        params: GoodParams,
        n_d: u32,
        budget: u64,
    ) -> Result<Self, MarkingError> {
        let n = fields.len();
        let k = n + 1;
        check_rho(params.rho, k)?;
        let tilde = ball.enlarged();
        let lo = tilde.center[0] - tilde.radius;
        let hi = tilde.center[0] + tilde.radius;
        let mut w: Mat<f64> = Mat::zeros(k, k);
        let total = t.total();
        w[(0, 0)] = (-total).exp();
        for (i, &ti) in t.components().iter().enumerate() {
            w[(i + 1, i + 1)] = ti.exp();
            let fbound = field_abs_bound(&fields[i], lo, hi);
            w[(0, i + 1)] = fbound * ti.exp();
        }
        let family = Family::FlowShear { fields, t };
        Self::build(k, ball, params, n_d, family, w, budget)
    }

    /// Instance from an arbitrary matrix family; `inv_entry_bounds` must
    /// bound |h(x)^{-1}| entrywise over the dilated ball.
    pub fn from_map(
        k: usize,
        h: Arc<dyn Fn(f64) -> Mat<f64> + Send + Sync>,
        inv_entry_bounds: Mat<f64>,
        ball: Ball,
        params: GoodParams,
        n_d: u32,
        budget: u64,
    ) -> Result<Self, MarkingError> {
        check_rho(params.rho, k)?;
        Self::build(
            k,
            ball,
            params,
            n_d,
            Family::Map(h),
            inv_entry_bounds,
            budget,
        )
    }

    fn build(
        k: usize,
        ball: Ball,
        params: GoodParams,
        n_d: u32,
        family: Family,
        inv_entry_bounds: Mat<f64>,
        budget: u64,
    ) -> Result<Self, MarkingError> {
        // Superset cap slightly above rho so that subgroups outside the
        // candidate set are certified strictly clear of the boundary band.
        let cap = params.rho * (1.0 + 1e-6) + 1e-9;
        let bounds: Vec<i128> = (1..=k)
            .map(|j| {
                let op = exterior::compound_opnorm_upper(&inv_entry_bounds, j);
                ((cap * op) * (1.0 + 1e-9)).floor() as i128
            })
            .collect();
        let subs = lattice::enumerate_by_plucker_bounds(k, &bounds, budget)?;
        let candidates: Vec<Candidate> = subs
            .into_iter()
            .map(|s| {
                let rep = s.representative().map(|&c| c as f64);
                let rank = s.rank();
                Candidate {
                    subgroup: s,
                    rep,
                    rank,
                }
            })
            .collect();
        let m = candidates.len();
        let mut includes = vec![vec![false; m]; m];
        for i in 0..m {
            for j in 0..m {
                includes[i][j] = i != j
                    && candidates[i]
                        .subgroup
                        .is_subgroup_of(&candidates[j].subgroup);
            }
        }
        Ok(MarkingInstance {
            k,
            ball,
            params,
            n_d,
            family,
            candidates,
            includes,
            budget,
        })
    }

    pub fn matrix_at(&self, x: f64) -> Mat<f64> {
        match &self.family {
            Family::FlowShear { fields, t } => {
                let f_vals: Vec<f64> = fields.iter().map(|f| f.eval(&[x])).collect();
                flow_shear_matrix(&f_vals, t)
            }
            Family::Map(h) => h(x),
        }
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    /// Resolves a witness chain to its subgroups, in increasing rank order.
    pub fn chain_subgroups(&self, chain: &Chain) -> Vec<&PrimitiveSubgroup> {
        chain.members.iter().map(|&i| &self.candidates[i].subgroup).collect()
    }

    /// psi for every candidate at x, through per-grade compound matrices.
    pub fn psi_all(&self, x: f64) -> Vec<f64> {
        let h = self.matrix_at(x);
        let compounds: Vec<Mat<f64>> = (1..=self.k).map(|j| exterior::compound(&h, j)).collect();
        let grade_index: Vec<Vec<usize>> = (1..=self.k)
            .map(|j| exterior::grade_masks(self.k, j))
            .collect();
        self.candidates
            .iter()
            .map(|cand| {
                let comp = &compounds[cand.rank - 1];
                let masks = &grade_index[cand.rank - 1];
                let mut best = 0.0f64;
                for row in 0..masks.len() {
                    let mut acc = 0.0;
                    for (col, &col_mask) in masks.iter().enumerate() {
                        let w = cand.rep.coeff(col_mask);
                        if *w != 0.0 {
                            acc += comp[(row, col)] * w;
                        }
                    }
                    best = best.max(acc.abs());
                }
                best
            })
            .collect()
    }
}

fn check_rho(rho: f64, k: usize) -> Result<(), MarkingError> {
    if !(rho > 0.0) || rho > 1.0 / k as f64 || rho < 1e-3 {
        return Err(MarkingError::BadRho(rho));
    }
    Ok(())
}

fn field_abs_bound(f: &ScalarField, lo: f64, hi: f64) -> f64 {
    match f {
        ScalarField::Polynomial(p) => p.abs_bound_on_box(&[lo], &[hi]),
        ScalarField::BlackBox { .. } => {
            // Grid estimate with headroom; not a certificate, recorded by
            // the caller as such.
            let mut m = 0.0f64;
            for i in 0..=2048 {
                let x = lo + (hi - lo) * i as f64 / 2048.0;
                m = m.max(f.eval(&[x]).abs());
            }
            1.25 * m
        }
    }
}

/// The finite set of primitive subgroups with transformed norm strictly
/// below rho at x, as (candidate index, psi value) pairs. Finiteness is
/// certified by the superset enumeration; a fresh per-transform enumeration
/// gives the same set (tested).
pub fn h_set(inst: &MarkingInstance, x: f64) -> Vec<(usize, f64)> {
    let psis = inst.psi_all(x);
    (0..psis.len())
        .filter(|&i| psis[i] < inst.params.rho)
        .map(|i| (i, psis[i]))
        .collect()
}

/// Chain witness: candidate indices in increasing rank order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Chain {
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum MarkStatus {
    Marked(Chain),
    Unmarked,
    /// Some psi value within 1e-9 of eps or rho: the caller resamples.
    Boundary,
}

/// Decides whether x is marked at level eps, returning a witness chain.
///
/// The search space is the finite poset of candidates with psi(x) <= rho;
/// chains are extended tip-upward in decreasing-psi order with memoized
/// inclusion, and the outside condition is checked against the candidates
/// with psi(x) < rho only (any violator lies there).
pub fn is_marked(inst: &MarkingInstance, x: f64, eps: f64) -> MarkStatus {
    assert!(
        eps > 0.0 && eps <= inst.params.rho,
        "0 < eps <= rho required"
    );
    let psis = inst.psi_all(x);
    classify_with_psis(inst, &psis, eps)
}

fn classify_with_psis(inst: &MarkingInstance, psis: &[f64], eps: f64) -> MarkStatus {
    let rho = inst.params.rho;
    for &psi in psis {
        if (psi - eps).abs() <= BOUNDARY_TOL || (psi - rho).abs() <= BOUNDARY_TOL {
            return MarkStatus::Boundary;
        }
    }
    let in_h: Vec<usize> = (0..psis.len()).filter(|&i| psis[i] < rho).collect();
    // Chain pool: eps <= psi <= rho (strictness resolved by the quarantine).
    let mut pool: Vec<usize> = (0..psis.len())
        .filter(|&i| psis[i] > eps && psis[i] < rho)
        .collect();
    // Decreasing psi, deterministic tie-break by candidate index.
    pool.sort_by(|&a, &b| psis[b].partial_cmp(&psis[a]).unwrap().then(a.cmp(&b)));

    let mut chain: Vec<usize> = Vec::new();
    if search_chain(inst, psis, &in_h, &pool, &mut chain) {
        chain.sort_by_key(|&i| inst.candidates[i].rank);
        MarkStatus::Marked(Chain { members: chain })
    } else {
        MarkStatus::Unmarked
    }
}

/// DFS over chains: returns true leaving the witness in `chain`.
fn search_chain(
    inst: &MarkingInstance,
    psis: &[f64],
    in_h: &[usize],
    pool: &[usize],
    chain: &mut Vec<usize>,
) -> bool {
    if chain_is_marked(inst, in_h, chain) {
        return true;
    }
    let tip = chain.last().copied();
    for &cand in pool {
        if chain.contains(&cand) {
            continue;
        }
        // Extend upward only: the new element must strictly contain the tip.
        let ok = match tip {
            None => true,
            Some(t) => inst.includes[t][cand],
        };
        let _ = psis;
        if ok {
            chain.push(cand);
            if search_chain(inst, psis, in_h, pool, chain) {
                return true;
            }
            chain.pop();
        }
    }
    false
}

/// The outside condition: no candidate with psi < rho, outside the chain,
/// comparable with every chain member.
fn chain_is_marked(inst: &MarkingInstance, in_h: &[usize], chain: &[usize]) -> bool {
    'outer: for &viol in in_h {
        if chain.contains(&viol) {
            continue;
        }
        for &m in chain {
            if !(inst.includes[viol][m] || inst.includes[m][viol]) {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// Per-point audit record (serialized as JSON lines by the runner).
#[derive(Debug, Clone, Serialize)]
pub struct PointRecord {
    pub x: f64,
    pub status: &'static str,
    /// HNF column bases of the witness chain members, flattened row-major.
    pub chain: Vec<Vec<i64>>,
    /// psi for candidates inside the sublevel band (index, value).
    pub low_psi: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarkingExperiment {
    pub eps: f64,
    pub rho: f64,
    pub samples: u64,
    pub unmarked: u64,
    pub boundary: u64,
    pub fraction_unmarked: f64,
    pub ci_high: f64,
    pub bound: f64,
    pub status: &'static str,
    pub hypothesis_summary: String,
}

/// Monte-Carlo estimate of the unmarked fraction with a 99% interval,
/// compared against kC(3^d N_d)^k (eps/rho)^alpha. Boundary points are
/// re-jittered up to three times, then counted as unmarked (the safe side
/// of the comparison).
pub fn unmarked_measure_experiment(
    inst: &MarkingInstance,
    eps: f64,
    samples: u64,
    seed: u64,
) -> Result<(MarkingExperiment, Vec<PointRecord>), MarkingError> {
    let (applicable, hypothesis_summary) = spot_check_hypotheses(inst)?;
    let lo = inst.ball.center[0] - inst.ball.radius;
    let hi = inst.ball.center[0] + inst.ball.radius;
    let width = (hi - lo) / samples as f64;
    let points = stats::stratified_points(lo, hi, samples as usize, seed);

    let records: Vec<PointRecord> = points
        .par_iter()
        .map(|&x0| {
            let mut x = x0;
            let mut status = is_marked(inst, x, eps);
            let mut tries = 0;
            while matches!(status, MarkStatus::Boundary) && tries < 3 {
                tries += 1;
                x = x0 + tries as f64 * 1e-7 * width;
                status = is_marked(inst, x, eps);
            }
            let psis = inst.psi_all(x);
            let low_psi: Vec<(usize, f64)> = psis
                .iter()
                .enumerate()
                .filter(|(_, &p)| p <= inst.params.rho * 1.5)
                .map(|(i, &p)| (i, p))
                .collect();
            match status {
                MarkStatus::Marked(chain) => PointRecord {
                    x,
                    status: "marked",
                    chain: chain
                        .members
                        .iter()
                        .map(|&i| flat_i64(inst.candidates[i].subgroup.hnf()))
                        .collect(),
                    low_psi,
                },
                MarkStatus::Unmarked => PointRecord {
                    x,
                    status: "unmarked",
                    chain: vec![],
                    low_psi,
                },
                MarkStatus::Boundary => PointRecord {
                    x,
                    status: "boundary",
                    chain: vec![],
                    low_psi,
                },
            }
        })
        .collect();

    let boundary = records.iter().filter(|r| r.status == "boundary").count() as u64;
    let unmarked = records
        .iter()
        .filter(|r| r.status == "unmarked" || r.status == "boundary")
        .count() as u64;
    let (_, ci_high) = stats::clopper_pearson(unmarked, samples, 0.99);
    let kf = inst.k as f64;
    let bound = kf
        * inst.params.c
        * (3f64.powi(1) * inst.n_d as f64).powi(inst.k as i32)
        * (eps / inst.params.rho).powf(inst.params.alpha);
    let status = if !applicable {
        "INAPPLICABLE"
    } else if bound >= 1.0 {
        "VACUOUS"
    } else if unmarked == 0 {
        "NO-EVENTS"
    } else if ci_high <= bound {
        "PASS"
    } else {
        "FAIL"
    };
    Ok((
        MarkingExperiment {
            eps,
            rho: inst.params.rho,
            samples,
            unmarked,
            boundary,
            fraction_unmarked: unmarked as f64 / samples as f64,
            ci_high,
            bound,
            status,
            hypothesis_summary,
        },
        records,
    ))
}

fn flat_i64(m: &Mat<i128>) -> Vec<i64> {
    let mut v = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            v.push(m[(i, j)] as i64);
        }
    }
    v
}

/// Spot-checks the two instance hypotheses on sampled candidates: the
/// good-function certificate for psi on the dilated ball, and sup over B of
/// psi at least rho. Candidates outside the superset clear rho everywhere
/// by the enumeration certificate, so sampling candidates covers the poset.
/// A failed hypothesis makes the measure bound inapplicable, never a
/// violation.
fn spot_check_hypotheses(inst: &MarkingInstance) -> Result<(bool, String), MarkingError> {
    let tilde = inst.ball.enlarged();
    let eps_list: Vec<f64> = (1..=4).map(|i| 10f64.powi(-i)).collect();
    let step = (inst.candidates.len() / 4).max(1);
    let mut checked = 0;
    for idx in (0..inst.candidates.len()).step_by(step) {
        let psi_field = {
            let cand = inst.candidates[idx].clone();
            let family = inst.family.clone();
            ScalarField::black_box(1, move |x| {
                let h = match &family {
                    Family::FlowShear { fields, t } => {
                        let f_vals: Vec<f64> = fields.iter().map(|f| f.eval(x)).collect();
                        flow_shear_matrix(&f_vals, t)
                    }
                    Family::Map(h) => h(x[0]),
                };
                exterior::apply_matrix(&h, &cand.rep).sup_norm()
            })
        };
        let rep = goodfun::check_good_on_ball(
            &psi_field,
            &tilde,
            inst.params.c,
            inst.params.alpha,
            &eps_list,
            1024,
        )?;
        if !rep.all_pass {
            return Ok((
                false,
                format!(
                    "candidate {idx}: psi fails the (C, alpha) certificate on the dilated ball"
                ),
            ));
        }
        let (sup, _) = goodfun::sup_norm_on_ball(&psi_field, &inst.ball, 512);
        if sup < inst.params.rho {
            return Ok((
                false,
                format!(
                    "candidate {idx}: sup_B psi = {sup} < rho = {}",
                    inst.params.rho
                ),
            ));
        }
        checked += 1;
    }
    Ok((
        true,
        format!(
            "good-certificate and norm-floor hypotheses spot-checked on {checked} of {} candidates; outside the superset psi > rho by the enumeration certificate",
            inst.candidates.len()
        ),
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct InclusionCheckReport {
    pub samples: u64,
    pub marked: u64,
    pub unmarked: u64,
    pub boundary: u64,
    pub violations: u64,
    /// min over marked points of delta(h(x) Z^k) - eps (should be >= -1e-9).
    pub min_margin: f64,
}

/// For every sampled marked point, asserts delta(h(x) Z^k) >= eps - 1e-9;
/// equivalently, points with delta < eps are never classified marked.
pub fn marked_implies_delta_check(
    inst: &MarkingInstance,
    eps: f64,
    samples: u64,
    seed: u64,
) -> Result<InclusionCheckReport, MarkingError> {
    let lo = inst.ball.center[0] - inst.ball.radius;
    let hi = inst.ball.center[0] + inst.ball.radius;
    let points = stats::stratified_points(lo, hi, samples as usize, seed);
    let results: Result<Vec<(u8, f64)>, MarkingError> = points
        .par_iter()
        .map(|&x| {
            let status = is_marked(inst, x, eps);
            let lat = Lattice::new(inst.matrix_at(x)).map_err(MarkingError::Lattice)?;
            let delta = match delta_capped_budgeted(&lat, eps, inst.budget)
                .map_err(MarkingError::Lattice)?
            {
                DeltaCapped::Below(res) => res.value,
                DeltaCapped::AtLeast(c) => c,
            };
            let code = match status {
                MarkStatus::Marked(_) => 0u8,
                MarkStatus::Unmarked => 1,
                MarkStatus::Boundary => 2,
            };
            Ok((code, delta))
        })
        .collect();
    let results = results?;
    let marked = results.iter().filter(|(c, _)| *c == 0).count() as u64;
    let unmarked = results.iter().filter(|(c, _)| *c == 1).count() as u64;
    let boundary = results.iter().filter(|(c, _)| *c == 2).count() as u64;
    let mut violations = 0;
    let mut min_margin = f64::INFINITY;
    for (code, delta) in &results {
        if *code == 0 {
            let margin = delta - eps;
            // delta_capped reports AtLeast(eps) as eps: margin 0 from below
            // never goes negative past the tolerance unless genuinely short.
            if margin < -BOUNDARY_TOL {
                violations += 1;
            }
            min_margin = min_margin.min(margin);
        }
    }
    Ok(InclusionCheckReport {
        samples,
        marked,
        unmarked,
        boundary,
        violations,
        min_margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::goodfun::Polynomial;
    use crate::lattice::DEFAULT_ENUM_BUDGET;

    fn diag_map(d: Vec<f64>) -> Arc<dyn Fn(f64) -> Mat<f64> + Send + Sync> {
        Arc::new(move |_x| {
            let mut m = Mat::zeros(d.len(), d.len());
            for (i, &v) in d.iter().enumerate() {
                m[(i, i)] = v;
            }
            m
        })
    }

    fn const_instance(diag: Vec<f64>, rho: f64) -> MarkingInstance {
        let k = diag.len();
        let mut inv_bounds = Mat::zeros(k, k);
        for (i, &v) in diag.iter().enumerate() {
            inv_bounds[(i, i)] = 1.0 / v;
        }
        MarkingInstance::from_map(
            k,
            diag_map(diag),
            inv_bounds,
            Ball::new(vec![0.0], 0.5, k as u32),
            GoodParams::new(4.0, 1.0, rho, 1, k).unwrap(),
            2,
            DEFAULT_ENUM_BUDGET,
        )
        .unwrap()
    }

    #[test]
    fn identity_family_empty_h_marked() {
        let inst = const_instance(vec![1.0, 1.0], 0.5 - 1e-6);
        // every primitive subgroup of Z^2 has norm >= 1 > rho: H empty
        match is_marked(&inst, 0.1, 0.1) {
            MarkStatus::Marked(chain) => assert!(chain.members.is_empty()),
            other => panic!("expected marked with empty chain, got {other:?}"),
        }
    }

    #[test]
    fn h_set_diagonal_quarter() {
        // h = diag(1/4, 4), rho = 0.4999...: psi(span e1) = 1/4; all other
        // subgroups >= 1.
        let inst = const_instance(vec![0.25, 4.0], 0.4999);
        let low = h_set(&inst, 0.0);
        assert_eq!(low.len(), 1);
        let cand = &inst.candidates()[low[0].0];
        assert_eq!(cand.rank, 1);
        assert_eq!(cand.subgroup.hnf().col(0), vec![1, 0]);
        assert!((low[0].1 - 0.25).abs() < 1e-12);
        // fresh per-point enumeration agrees with the cached superset
        let fresh = lattice::enumerate_primitive_subgroups(
            2,
            inst.params.rho,
            Some(&inst.matrix_at(0.0)),
            DEFAULT_ENUM_BUDGET,
        )
        .unwrap();
        let fresh_strict: Vec<_> = fresh
            .iter()
            .filter(|s| s.transformed_norm(&inst.matrix_at(0.0)) < inst.params.rho)
            .collect();
        assert_eq!(fresh_strict.len(), 1);
        assert_eq!(*fresh_strict[0], cand.subgroup);
    }

    #[test]
    fn singleton_chain_marked() {
        // eps <= 1/4 < rho: the chain {span e1} satisfies both conditions
        // (everything else comparable sits at >= 1 > rho).
        let inst = const_instance(vec![0.25, 4.0], 0.4999);
        match is_marked(&inst, 0.0, 0.2) {
            MarkStatus::Marked(chain) => {
                assert_eq!(chain.members.len(), 1);
                let c = &inst.candidates()[chain.members[0]];
                assert_eq!(c.subgroup.hnf().col(0), vec![1, 0]);
            }
            other => panic!("expected marked, got {other:?}"),
        }
    }

    #[test]
    fn low_psi_blocks_marking() {
        // psi(span e1) = 1/32 < eps = 1/16: the empty chain fails (span e1
        // violates), any chain containing it fails the band condition, and
        // any other chain leaves it comparable.
        let inst = const_instance(vec![1.0 / 32.0, 32.0], 0.4999);
        match is_marked(&inst, 0.0, 1.0 / 16.0) {
            MarkStatus::Unmarked => {}
            other => panic!("expected unmarked, got {other:?}"),
        }
    }

    #[test]
    fn marked_monotone_in_eps() {
        let fields = vec![
            ScalarField::poly(Polynomial::univariate(&[0.0, 1.0])),
            ScalarField::poly(Polynomial::univariate(&[0.0, 0.0, 1.0])),
        ];
        let inst = MarkingInstance::flow_shear(
            fields,
            FlowVector::new(vec![0.6, 0.4]).unwrap(),
            Ball::new(vec![0.35], 0.1, 3),
            GoodParams::new(4.0 * 3f64.sqrt(), 0.5, 0.02, 1, 3).unwrap(),
            2,
            DEFAULT_ENUM_BUDGET,
        )
        .unwrap();
        let rho = inst.params.rho;
        let mut xs = Vec::new();
        for i in 0..60 {
            xs.push(0.25 + 0.2 * i as f64 / 59.0);
        }
        for &x in &xs {
            let mut prev_marked = None;
            for eps in [rho * 0.9, rho * 0.5, rho * 0.1, rho * 0.01] {
                let status = is_marked(&inst, x, eps);
                let m = matches!(status, MarkStatus::Marked(_));
                if let Some(pm) = prev_marked {
                    if pm && !matches!(status, MarkStatus::Boundary) {
                        assert!(m, "monotonicity violated at x={x}, eps={eps}");
                    }
                }
                if !matches!(status, MarkStatus::Boundary) {
                    prev_marked = Some(m);
                }
            }
        }
    }

    #[test]
    fn candidate_set_stable_under_inflated_bounds() {
        // Rebuilding the instance with twice the certified inverse bounds
        // must not change h_set or the marking decision anywhere sampled.
        let diag = vec![0.25, 4.0];
        let mut inv_bounds = Mat::zeros(2, 2);
        let mut doubled = Mat::zeros(2, 2);
        for (i, &v) in diag.iter().enumerate() {
            inv_bounds[(i, i)] = 1.0 / v;
            doubled[(i, i)] = 2.0 / v;
        }
        let mk = |bounds: Mat<f64>| {
            MarkingInstance::from_map(
                2,
                diag_map(diag.clone()),
                bounds,
                Ball::new(vec![0.0], 0.5, 2),
                GoodParams::new(4.0, 1.0, 0.4999, 1, 2).unwrap(),
                2,
                DEFAULT_ENUM_BUDGET,
            )
            .unwrap()
        };
        let base = mk(inv_bounds);
        let wide = mk(doubled);
        assert!(wide.candidates().len() >= base.candidates().len());
        for i in 0..10 {
            let x = -0.4 + 0.08 * i as f64;
            let hs_base: Vec<_> = h_set(&base, x)
                .into_iter()
                .map(|(i, psi)| (base.candidates()[i].subgroup.clone(), psi))
                .collect();
            let hs_wide: Vec<_> = h_set(&wide, x)
                .into_iter()
                .map(|(i, psi)| (wide.candidates()[i].subgroup.clone(), psi))
                .collect();
            assert_eq!(hs_base, hs_wide, "x={x}");
            let eps = 0.2;
            let status_base = matches!(is_marked(&base, x, eps), MarkStatus::Marked(_));
            let status_wide = matches!(is_marked(&wide, x, eps), MarkStatus::Marked(_));
            assert_eq!(status_base, status_wide, "x={x}");
        }
    }

    #[test]
    fn witness_chains_reverify() {
        let inst = const_instance(vec![0.25, 4.0], 0.4999);
        for eps in [0.1, 0.2] {
            if let MarkStatus::Marked(chain) = is_marked(&inst, 0.0, eps) {
                let psis = inst.psi_all(0.0);
                // the norm band condition
                for &i in &chain.members {
                    assert!(psis[i] >= eps && psis[i] <= inst.params.rho);
                }
                // the outside condition against the sublevel set
                for (i, &psi) in psis.iter().enumerate() {
                    if psi < inst.params.rho && !chain.members.contains(&i) {
                        let all_comp = chain
                            .members
                            .iter()
                            .all(|&m| inst.includes[i][m] || inst.includes[m][i]);
                        assert!(!all_comp, "violator {i} comparable with the whole chain");
                    }
                }
                // ranks strictly increase
                let ranks: Vec<usize> = chain
                    .members
                    .iter()
                    .map(|&i| inst.candidates[i].rank)
                    .collect();
                assert!(ranks.windows(2).all(|w| w[0] < w[1]));
                assert!(ranks.len() <= inst.k);
            }
        }
    }

    #[test]
    fn inclusion_check_on_flow_shear() {
        let fields = vec![
            ScalarField::poly(Polynomial::univariate(&[0.0, 1.0])),
            ScalarField::poly(Polynomial::univariate(&[0.0, 0.0, 1.0])),
        ];
        let inst = MarkingInstance::flow_shear(
            fields,
            FlowVector::new(vec![0.5, 0.3]).unwrap(),
            Ball::new(vec![0.4], 0.12, 3),
            GoodParams::new(4.0 * 3f64.sqrt(), 0.5, 0.05, 1, 3).unwrap(),
            2,
            DEFAULT_ENUM_BUDGET,
        )
        .unwrap();
        let eps = inst.params.rho / 8.0;
        let report = marked_implies_delta_check(&inst, eps, 400, 77).unwrap();
        assert_eq!(report.violations, 0, "{report:?}");
        assert!(report.boundary as f64 <= 0.01 * 400.0);
        assert!(report.marked > 0);
    }

    #[test]
    fn unmarked_fraction_monotone_and_bounded() {
        let inst = const_instance(vec![0.25, 4.0], 0.4999);
        let mut prev = f64::INFINITY;
        for eps in [0.24, 0.1, 0.01] {
            let (exp, recs) = unmarked_measure_experiment(&inst, eps, 200, 5).unwrap();
            assert_eq!(recs.len(), 200);
            assert!(exp.fraction_unmarked <= prev + 1e-12);
            prev = exp.fraction_unmarked;
            assert_ne!(exp.status, "FAIL");
        }
    }
}
