//! Empirical verification of the quantitative non-divergence bounds: the
//! sublevel measure of delta along unipotent orbits and along sheared
//! Veronese-type families, compared row by row against the explicit
//! constants. Rows report PASS (upper confidence limit below the bound),
//! FAIL, VACUOUS (bound at least the whole measure), or NO-EVENTS.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::exterior::MultiVector;
use crate::goodfun::{self, Ball, GoodFunError, ScalarField};
use crate::lattice::{
    self, delta_capped_budgeted, lambda_flow_delta_below, DeltaCapped, FlowVector, Lattice,
    LatticeError,
};
use crate::linalg::Mat;
use crate::stats;

#[derive(Debug, Error)]
pub enum NondivError {
    #[error("epsilon {eps} exceeds rho {rho}")]
    EpsAboveRho { eps: f64, rho: f64 },
    #[error("hypothesis check failed, bound inapplicable: {0}")]
    Inapplicable(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    GoodFun(#[from] GoodFunError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowStatus {
    Pass,
    Fail,
    Vacuous,
    NoEvents,
}

/// One row of a sweep: a parameter value, the measured sublevel fraction
/// with its confidence interval, and the bound it is compared against.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub param: f64,
    pub events: u64,
    pub samples: u64,
    pub measured: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bound: f64,
    pub status: RowStatus,
    /// measured upper CI / bound; informative only, tightness is never
    /// asserted.
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub rho: f64,
    pub rows: Vec<SweepRow>,
    pub hypothesis_summary: String,
    pub all_non_vacuous_pass: bool,
}

impl SweepResult {
    fn from_rows(rho: f64, rows: Vec<SweepRow>, hypothesis_summary: String) -> Self {
        let all = rows.iter().all(|r| r.status != RowStatus::Fail);
        SweepResult {
            rho,
            rows,
            hypothesis_summary,
            all_non_vacuous_pass: all,
        }
    }
}

fn classify(events: u64, samples: u64, bound_fraction: f64, confidence: f64) -> SweepRow {
    let (lo, hi) = stats::clopper_pearson(events, samples, confidence);
    let measured = events as f64 / samples as f64;
    // Zero observed events is reported as NO-EVENTS: the empirical sublevel
    // set was empty at this sample size, so only the interval is recorded.
    // FAIL requires observed events whose upper limit clears the bound.
    let status = if bound_fraction >= 1.0 {
        RowStatus::Vacuous
    } else if events == 0 {
        RowStatus::NoEvents
    } else if hi <= bound_fraction {
        RowStatus::Pass
    } else {
        RowStatus::Fail
    };
    SweepRow {
        param: f64::NAN,
        events,
        samples,
        measured,
        ci_low: lo,
        ci_high: hi,
        bound: bound_fraction,
        status,
        margin: if bound_fraction > 0.0 {
            hi / bound_fraction
        } else {
            f64::INFINITY
        },
    }
}

/// kC(3^d N_d)^k (eps/rho)^alpha: the unmarked-measure bound per unit of
/// |B|, shared by the poset and lattice statements.
pub fn unmarked_measure_bound(
    k: usize,
    d: usize,
    c: f64,
    alpha: f64,
    rho: f64,
    eps: f64,
    n_d: u32,
) -> Result<f64, NondivError> {
    if eps > rho {
        return Err(NondivError::EpsAboveRho { eps, rho });
    }
    let base = 3f64.powi(d as i32) * n_d as f64;
    Ok(k as f64 * c * base.powi(k as i32) * (eps / rho).powf(alpha))
}

/// rho(Lambda) = min(1/k, min over primitive subgroups of ||g Gamma||),
/// exact: only finitely many subgroups can undercut 1/k, and the certified
/// enumeration lists them.
pub fn compute_rho(g: &Mat<f64>, budget: u64) -> Result<f64, NondivError> {
    let k = g.nrows();
    assert!(k <= 4, "compute_rho supports k <= 4");
    let cap = 1.0 / k as f64;
    let subs = lattice::enumerate_primitive_subgroups(k, cap, Some(g), budget)?;
    let mut rho = cap;
    for s in &subs {
        rho = rho.min(s.transformed_norm(g));
    }
    Ok(rho)
}

/// Orbit sweep for a one-parameter unipotent map: estimates
/// |{0 < x < T : delta(u_x g Z^k) < eps}| / T by stratified sampling and
/// compares against 2k^3 6^k (k^2+1)^{1/k^2} (eps/rho)^{1/k^2}.
pub struct UnipotentSweepConfig {
    pub basis: Mat<f64>,
    pub nilpotent: Mat<f64>,
    pub time_horizon: f64,
    pub eps_grid: Vec<f64>,
    pub samples: u64,
    pub seed: u64,
    pub budget: u64,
}

pub fn unipotent_orbit_sweep(cfg: &UnipotentSweepConfig) -> Result<SweepResult, NondivError> {
    let k = cfg.basis.nrows();
    assert!(k <= 4, "unipotent sweep supports k <= 4");
    let rho = compute_rho(&cfg.basis, cfg.budget)?;
    for &eps in &cfg.eps_grid {
        if eps > rho {
            return Err(NondivError::EpsAboveRho { eps, rho });
        }
    }
    // One capped enumeration per sample; every eps row reuses it.
    let points = stats::stratified_points(0.0, cfg.time_horizon, cfg.samples as usize, cfg.seed);
    let deltas: Result<Vec<f64>, NondivError> = points
        .par_iter()
        .map(|&x| {
            let u = lattice::unipotent_orbit_point(&cfg.nilpotent, x)?;
            let lat = Lattice::new(u.matmul(&cfg.basis))?;
            Ok(match delta_capped_budgeted(&lat, rho, cfg.budget)? {
                DeltaCapped::Below(res) => res.value,
                DeltaCapped::AtLeast(c) => c,
            })
        })
        .collect();
    let deltas = deltas?;

    let kf = k as f64;
    let constant = 2.0 * kf.powi(3) * 6f64.powi(k as i32) * (kf * kf + 1.0).powf(1.0 / (kf * kf));
    let rows = cfg
        .eps_grid
        .iter()
        .map(|&eps| {
            let events = deltas.iter().filter(|&&d| d < eps).count() as u64;
            let bound_fraction = constant * (eps / rho).powf(1.0 / (kf * kf));
            let mut row = classify(events, cfg.samples, bound_fraction, 0.99);
            row.param = eps;
            row
        })
        .collect();
    Ok(SweepResult::from_rows(
        rho,
        rows,
        format!("rho = {rho} from the certified subgroup enumeration"),
    ))
}

/// The image of a multivector under g_t u_f in closed form: for index sets
/// without the distinguished coordinate 0 the coefficient contracts by
/// e^{-sum_{i in I} t_i}; for sets containing 0 it expands by
/// e^{sum_{i not in I} t_i} and picks up the signed f_i-shear terms from
/// the sets I u {i} minus {0}.
pub fn shear_flow_coordinates(
    w: &MultiVector<f64>,
    f_vals: &[f64],
    t: &FlowVector<f64>,
) -> MultiVector<f64> {
    let dim = w.dim();
    let n = f_vals.len();
    assert_eq!(dim, n + 1, "multivector over indices {{0..n}}");
    assert_eq!(t.len(), n);
    let ts = t.components();
    let mut out = MultiVector::zero(dim);
    for mask in 0..1usize << dim {
        let has_zero = mask & 1 == 1;
        if !has_zero {
            // e^{-sum_{i in I} t_i} w_I
            let mut rate = 0.0;
            for i in 1..dim {
                if mask >> i & 1 == 1 {
                    rate -= ts[i - 1];
                }
            }
            let c = *w.coeff(mask);
            if c != 0.0 {
                out.set_coeff(mask, rate.exp() * c);
            }
        } else {
            // e^{sum_{i not in I} t_i} (w_I + sum_{i not in I} sign * w_{I u {i} minus {0}} f_i)
            let mut rate = 0.0;
            for i in 1..dim {
                if mask >> i & 1 == 0 {
                    rate += ts[i - 1];
                }
            }
            let mut acc = *w.coeff(mask);
            for i in 1..dim {
                if mask >> i & 1 == 1 {
                    continue;
                }
                let source = (mask | (1 << i)) & !1usize;
                // Sign of moving f_i e_0 into position: the parity of the
                // number of indices of the source set below i.
                let below = (source & ((1 << i) - 1)).count_ones();
                let sign = if below.is_multiple_of(2) { 1.0 } else { -1.0 };
                acc += sign * w.coeff(source) * f_vals[i - 1];
            }
            if acc != 0.0 {
                out.set_coeff(mask, rate.exp() * acc);
            }
        }
    }
    out
}

/// Sweep of |{x in B : delta(g_t Lambda_f(x)) < eps}| against
/// (n+1) C (3^d N_d)^{n+1} (eps/rho)^alpha |B| for a fixed flow vector.
pub struct ShearSweepConfig {
    /// Coordinate fields f_1..f_n (d = 1).
    pub fields: Vec<ScalarField>,
    pub ball: Ball,
    pub t: FlowVector<f64>,
    pub eps_grid: Vec<f64>,
    /// Good-function constants certified for linear combinations of
    /// 1, f_1, .., f_n on the dilated ball.
    pub c_good: f64,
    pub alpha: f64,
    pub rho: f64,
    pub n_d: u32,
    pub samples: u64,
    pub seed: u64,
    pub budget: u64,
}

pub fn shear_family_sweep(cfg: &ShearSweepConfig) -> Result<SweepResult, NondivError> {
    let n = cfg.fields.len();
    let k = n + 1;
    for &eps in &cfg.eps_grid {
        if eps > cfg.rho {
            return Err(NondivError::EpsAboveRho { eps, rho: cfg.rho });
        }
    }
    let hypothesis = spot_check_hypotheses(cfg)?;

    let lo = cfg.ball.center[0] - cfg.ball.radius;
    let hi = cfg.ball.center[0] + cfg.ball.radius;
    let points = stats::stratified_points(lo, hi, cfg.samples as usize, cfg.seed);
    let max_eps = cfg.eps_grid.iter().cloned().fold(0.0f64, f64::max);
    // delta capped at the largest eps; each row filters.
    let deltas: Result<Vec<f64>, NondivError> = points
        .par_iter()
        .map(|&x| {
            let f_vals: Vec<f64> = cfg.fields.iter().map(|f| f.eval(&[x])).collect();
            if lambda_flow_delta_below(&f_vals, &cfg.t, max_eps, cfg.budget)? {
                Ok(lattice::lambda_flow_delta(&f_vals, &cfg.t, cfg.budget)?.value)
            } else {
                Ok(max_eps)
            }
        })
        .collect();
    let deltas = deltas?;

    let constant = k as f64 * cfg.c_good * (3f64 * cfg.n_d as f64).powi(k as i32);
    let rows = cfg
        .eps_grid
        .iter()
        .map(|&eps| {
            let events = deltas.iter().filter(|&&d| d < eps).count() as u64;
            let bound_fraction = constant * (eps / cfg.rho).powf(cfg.alpha);
            let mut row = classify(events, cfg.samples, bound_fraction, 0.99);
            row.param = eps;
            row
        })
        .collect();
    Ok(SweepResult::from_rows(cfg.rho, rows, hypothesis))
}

/// Spot-checks the two hypotheses: sampled coordinate functions of sheared
/// representatives are (C, alpha)-good on the dilated ball, and unit-height
/// combinations clear rho on B. Failures make the bound inapplicable.
fn spot_check_hypotheses(cfg: &ShearSweepConfig) -> Result<String, NondivError> {
    let n = cfg.fields.len();
    let tilde = cfg.ball.enlarged();
    let eps_list: Vec<f64> = (0..6).map(|i| 10f64.powi(-i)).collect();

    // (i) sampled psi_Gamma through the closed-form coordinates.
    let mut checked = 0;
    for rank in 1..=n + 1 {
        let subs = lattice::enumerate_primitive_subgroups(n + 1, 1.5, None, cfg.budget)?;
        for sub in subs.iter().filter(|s| s.rank() == rank).take(2) {
            let w = sub.representative().map(|&c| c as f64);
            let fields = cfg.fields.clone();
            let t = cfg.t.clone();
            let psi = ScalarField::black_box(1, move |x| {
                let f_vals: Vec<f64> = fields.iter().map(|f| f.eval(x)).collect();
                shear_flow_coordinates(&w, &f_vals, &t).sup_norm()
            });
            let rep =
                goodfun::check_good_on_ball(&psi, &tilde, cfg.c_good, cfg.alpha, &eps_list, 2048)?;
            if !rep.all_pass {
                return Err(NondivError::Inapplicable(format!(
                    "psi for subgroup of rank {rank} fails the (C, alpha) certificate"
                )));
            }
            // (ii) sup over B must clear rho.
            let (sup, _) = goodfun::sup_norm_on_ball(&psi, &cfg.ball, 1024);
            if sup < cfg.rho {
                return Err(NondivError::Inapplicable(format!(
                    "sup_B psi = {sup} < rho = {} for a rank-{rank} subgroup",
                    cfg.rho
                )));
            }
            checked += 1;
        }
    }
    Ok(format!(
        "hypotheses spot-checked on {checked} subgroups: good-certificate and sup >= rho"
    ))
}

/// Lower estimate for min over unit-sup-norm coefficient vectors c of
/// sup_B |c_0 + sum c_i f_i|: the floor entering hypothesis (ii). Scans the
/// faces of the coefficient cube on a grid and keeps 80% of the minimum;
/// recorded as an estimate, not a certificate.
pub fn estimate_combination_floor(fields: &[ScalarField], ball: &Ball, face_grid: usize) -> f64 {
    let n = fields.len();
    let mut min_sup = f64::INFINITY;
    let mut consider = |c: &[f64]| {
        let fields = fields.to_vec();
        let c = c.to_vec();
        let combo = ScalarField::black_box(ball.dim(), move |x| {
            c[0] + fields
                .iter()
                .zip(&c[1..])
                .map(|(f, ci)| ci * f.eval(x))
                .sum::<f64>()
        });
        let (sup, _) = goodfun::sup_norm_on_ball(&combo, ball, 512);
        if sup < min_sup {
            min_sup = sup;
        }
    };
    // Faces of the sup-norm unit sphere with the pinned coordinate at +1;
    // c and -c have the same sup, so that is the whole sphere.
    let mut free = vec![0usize; n];
    loop {
        for pinned in 0..=n {
            let mut c = vec![0.0; n + 1];
            let mut fi = 0;
            for (slot, v) in c.iter_mut().enumerate() {
                if slot == pinned {
                    *v = 1.0;
                } else {
                    *v = -1.0 + 2.0 * free[fi] as f64 / (face_grid - 1) as f64;
                    fi += 1;
                }
            }
            consider(&c);
        }
        let mut done = true;
        for v in free.iter_mut().rev() {
            if *v + 1 < face_grid {
                *v += 1;
                done = false;
                break;
            }
            *v = 0;
        }
        if done {
            break;
        }
    }
    0.8 * min_sup
}

/// Per-t record of the Borel-Cantelli style scan: |E_t| estimates against
/// D (eps_t/rho)^alpha |B| with eps_t = e^{-gamma t}, plus partial sums.
#[derive(Debug, Clone, Serialize)]
pub struct DecayRow {
    pub t: Vec<u32>,
    pub t_total: u32,
    pub eps_t: f64,
    pub events: u64,
    pub samples: u64,
    pub measure: f64,
    pub ci_high_measure: f64,
    pub bound_measure: f64,
    pub status: RowStatus,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub rho: f64,
    pub big_d: f64,
    pub rows: Vec<DecayRow>,
    pub partial_sums: Vec<f64>,
    pub nondegeneracy_order: u32,
    pub all_non_vacuous_pass: bool,
}

pub struct DecayScanConfig {
    pub fields: Vec<ScalarField>,
    pub x0: f64,
    pub l_max: u32,
    pub ball: Ball,
    pub gamma: f64,
    pub t_budget: u32,
    pub c_good: f64,
    pub alpha: f64,
    pub rho: f64,
    pub n_d: u32,
    pub samples: u64,
    pub seed: u64,
    pub budget: u64,
}

/// Scans all integer flow vectors with total at most t_budget, estimating
/// |E_t| = |{x in B : delta(g_t Lambda_f(x)) <= e^{-gamma t}}| and
/// comparing with D (e^{-gamma t}/rho)^{1/dl} |B|,
/// D = (n+1) C (3^d N_d)^{n+1}. Degenerate parametrizations are rejected.
pub fn flow_decay_scan(cfg: &DecayScanConfig) -> Result<DecayReport, NondivError> {
    assert!(cfg.gamma > 0.0, "gamma must be positive");
    let n = cfg.fields.len();
    let order = goodfun::nondegeneracy_order(&cfg.fields, &[cfg.x0], cfg.l_max)
        .ok_or_else(|| NondivError::Inapplicable("map is degenerate at x0".into()))?;

    let big_d = (n as f64 + 1.0) * cfg.c_good * (3f64 * cfg.n_d as f64).powi(n as i32 + 1);
    let lo = cfg.ball.center[0] - cfg.ball.radius;
    let hi = cfg.ball.center[0] + cfg.ball.radius;
    let volume = cfg.ball.volume();
    let points = stats::stratified_points(lo, hi, cfg.samples as usize, cfg.seed);
    let f_vals: Vec<Vec<f64>> = points
        .iter()
        .map(|&x| cfg.fields.iter().map(|f| f.eval(&[x])).collect())
        .collect();

    let mut t_vectors = Vec::new();
    let mut t = vec![0u32; n];
    loop {
        if t.iter().sum::<u32>() > 0 {
            t_vectors.push(t.clone());
        }
        if !crate::dioph::advance_simplex(&mut t, cfg.t_budget) {
            break;
        }
    }

    let rows: Result<Vec<DecayRow>, NondivError> = t_vectors
        .par_iter()
        .map(|tvec| {
            let total: u32 = tvec.iter().sum();
            let eps_t = (-(cfg.gamma * total as f64)).exp();
            let tv = FlowVector::new(tvec.iter().map(|&v| v as f64).collect::<Vec<_>>())?;
            let mut events = 0u64;
            for fv in &f_vals {
                if lambda_flow_delta_below(fv, &tv, eps_t * (1.0 + 1e-12), cfg.budget)? {
                    events += 1;
                }
            }
            let (_, hi_frac) = stats::clopper_pearson(events, cfg.samples, 0.99);
            let bound_measure = if eps_t <= cfg.rho {
                big_d * (eps_t / cfg.rho).powf(cfg.alpha) * volume
            } else {
                f64::INFINITY
            };
            let measure = events as f64 / cfg.samples as f64 * volume;
            let ci_high_measure = hi_frac * volume;
            let status = if bound_measure >= volume {
                RowStatus::Vacuous
            } else if events == 0 {
                RowStatus::NoEvents
            } else if ci_high_measure <= bound_measure {
                RowStatus::Pass
            } else {
                RowStatus::Fail
            };
            Ok(DecayRow {
                t: tvec.clone(),
                t_total: total,
                eps_t,
                events,
                samples: cfg.samples,
                measure,
                ci_high_measure,
                bound_measure,
                status,
            })
        })
        .collect();
    let rows = rows?;

    // Partial sums of the measure estimates, ordered by total t.
    let mut by_total = rows.clone();
    by_total.sort_by_key(|r| (r.t_total, r.t.clone()));
    let mut acc = 0.0;
    let partial_sums: Vec<f64> = by_total
        .iter()
        .map(|r| {
            acc += r.measure;
            acc
        })
        .collect();
    let all = rows.iter().all(|r| r.status != RowStatus::Fail);
    Ok(DecayReport {
        rho: cfg.rho,
        big_d,
        rows,
        partial_sums,
        nondegeneracy_order: order,
        all_non_vacuous_pass: all,
    })
}
