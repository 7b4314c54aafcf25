//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured margins. Run with
//! `cargo test -p latflow --test acceptance -- --nocapture`.

use latflow::dioph::{self, Criterion, Target};
use latflow::exterior;
use latflow::goodfun::{self, Ball, GoodParams, Polynomial, ScalarField};
use latflow::lattice::{self, FlowVector, Lattice, DEFAULT_ENUM_BUDGET};
use latflow::linalg::Mat;
use latflow::marking::{self, MarkingInstance};
use latflow::nondivergence::{self, RowStatus};
use latflow::stats;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BUDGET: u64 = DEFAULT_ENUM_BUDGET;

/// Random unimodular basis whose inverse has bounded row sums, so the
/// independent oracle box is small enough to scan exhaustively.
fn bounded_instance(k: usize, rng: &mut ChaCha8Rng) -> Mat<i128> {
    let (entry_cap, inv_cap) = match k {
        2 => (40, 40.0),
        3 => (20, 20.0),
        _ => (8, 10.0),
    };
    loop {
        let m = lattice::random_unimodular(k, entry_cap, rng);
        let f = m.map(|&x| x as f64);
        if let Some(inv) = f.inverse() {
            if inv.opnorm_inf() <= inv_cap {
                return m;
            }
        }
    }
}

/// Criterion 1: delta() equals an independent brute-force enumeration over
/// an oversized certified box, exactly, on 500 random unimodular lattices.
#[test]
fn acceptance_1_delta_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC1);
    let mut checked = 0u64;
    for k in [2usize, 3, 4] {
        let per_dim = if k == 2 { 168 } else { 166 };
        for _ in 0..per_dim {
            let m = bounded_instance(k, &mut rng);
            let lat = Lattice::<f64>::from_integer_basis(&m).unwrap();
            let fast = lattice::delta(&lat).unwrap();
            let oracle = oracle_delta(lat.basis());
            assert_eq!(fast.value, oracle, "k={k} basis={m:?}");
            checked += 1;
        }
    }
    assert_eq!(checked, 500);
    println!("ACCEPTANCE-1 delta-oracle-equivalence: PASS (500 lattices, exact equality)");
}

/// Independent oracle: take the best norm in the +-3 pre-box as a radius,
/// then scan the certified box |m_i| <= ceil(rowsum_i(g^{-1}) * R) + 1 with
/// a plain odometer. No Gram-Schmidt, no pruning, no shared code path.
fn oracle_delta(basis: &Mat<f64>) -> f64 {
    let k = basis.nrows();
    let inv = basis.inverse().expect("invertible");
    let norm_of = |m: &[i64]| -> f64 {
        let mut best = 0.0f64;
        for i in 0..k {
            let mut acc = 0.0;
            for j in 0..k {
                acc += basis[(i, j)] * m[j] as f64;
            }
            best = best.max(acc.abs());
        }
        best
    };
    let mut seed = f64::INFINITY;
    let mut m = vec![-3i64; k];
    loop {
        if m.iter().any(|&c| c != 0) {
            seed = seed.min(norm_of(&m));
        }
        if !odometer(&mut m, 3) {
            break;
        }
    }
    let bounds: Vec<i64> = (0..k)
        .map(|i| {
            let rs: f64 = (0..k).map(|j| inv[(i, j)].abs()).sum();
            (rs * seed).ceil() as i64 + 1
        })
        .collect();
    let mut best = f64::INFINITY;
    let mut m: Vec<i64> = bounds.iter().map(|&b| -b).collect();
    loop {
        if m.iter().any(|&c| c != 0) {
            best = best.min(norm_of(&m));
        }
        if !odometer_bounds(&mut m, &bounds) {
            break;
        }
    }
    best
}

fn odometer(m: &mut [i64], b: i64) -> bool {
    for i in (0..m.len()).rev() {
        if m[i] < b {
            m[i] += 1;
            for v in m[i + 1..].iter_mut() {
                *v = -b;
            }
            return true;
        }
    }
    false
}

fn odometer_bounds(m: &mut [i64], bounds: &[i64]) -> bool {
    for i in (0..m.len()).rev() {
        if m[i] < bounds[i] {
            m[i] += 1;
            for (v, &bb) in m[i + 1..].iter_mut().zip(&bounds[i + 1..]) {
                *v = -bb;
            }
            return true;
        }
    }
    false
}

/// Continued-fraction convergent denominators of x, capped: q_k = a_k
/// q_{k-1} + q_{k-2} with q_{-1} = 0, q_0 = 1 (the integer part a_0 only
/// enters the numerators).
fn convergent_denominators(x: f64, q_cap: i64) -> Vec<i64> {
    let mut out = Vec::new();
    let a0 = x.floor();
    if x - a0 < 1e-12 {
        return out;
    }
    let mut xi = 1.0 / (x - a0);
    let (mut q_prev, mut q_cur) = (0i64, 1i64);
    for _ in 0..40 {
        let a = xi.floor();
        let next = a as i64 * q_cur + q_prev;
        if next > q_cap || next <= 0 {
            break;
        }
        if next > 1 {
            out.push(next);
        }
        q_prev = q_cur;
        q_cur = next;
        let frac = xi - a;
        if frac < 1e-12 {
            break;
        }
        xi = 1.0 / frac;
    }
    out
}

/// Criterion 2: the witness-to-flow chain on 1000 witnesses; the asserted
/// conclusion holds with zero failures and the product identity holds to
/// 1e-12 relative.
#[test]
fn acceptance_2_witness_chain() {
    let mut accepted = 0u64;
    let mut worst_margin = f64::INFINITY;
    let mut worst_identity = 0.0f64;

    // n = 1: continued-fraction convergents of a spread of irrationals.
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC2);
    let mut targets: Vec<f64> = vec![
        std::f64::consts::SQRT_2,
        (1.0 + 5f64.sqrt()) / 2.0,
        std::f64::consts::E,
        std::f64::consts::PI,
        std::f64::consts::LN_2,
        3f64.sqrt(),
        5f64.sqrt(),
        7f64.sqrt(),
    ];
    while targets.len() < 30 {
        targets.push(rng.gen_range(0.1..2.0));
    }
    for &x in &targets {
        let target = Target::Float(vec![x]);
        for q in convergent_denominators(x, 100_000) {
            match dioph::witness_to_flow(&target, &[q], BUDGET) {
                Ok(w) => {
                    accepted += 1;
                    worst_margin = worst_margin.min(w.margin);
                    let modulus: f64 = w.q.iter().map(|&qi| (qi.abs().max(1)) as f64).product();
                    let ident = w.r.powi(w.n as i32) * w.t.iter().sum::<f64>().exp();
                    worst_identity = worst_identity.max((ident - modulus).abs() / modulus);
                }
                Err(e) => panic!("convergent q={q} of {x} rejected: {e}"),
            }
        }
    }
    let n1_count = accepted;

    // n = 2: per-dyadic-shell best approximations by exhaustive search.
    let mut y_index = 0u64;
    while accepted < 1000 {
        let mut rng = stats::rng_for(0xACC2B, y_index);
        y_index += 1;
        let y = vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        let target = Target::Float(y.clone());
        let scan = dioph::best_exponent(&target, Criterion::DualMultiplicative, 500).unwrap();
        for rec in &scan.shells {
            if rec.exact_hit || rec.best_eps < 0.0 {
                continue;
            }
            let w = dioph::witness_to_flow(&target, &rec.q, BUDGET)
                .unwrap_or_else(|e| panic!("shell witness {:?} rejected: {e}", rec.q));
            accepted += 1;
            worst_margin = worst_margin.min(w.margin);
            let modulus: f64 = w.q.iter().map(|&qi| (qi.abs().max(1)) as f64).product();
            let ident = w.r.powi(w.n as i32) * w.t.iter().sum::<f64>().exp();
            worst_identity = worst_identity.max((ident - modulus).abs() / modulus);
            if accepted >= 1000 {
                break;
            }
        }
    }

    assert!(
        worst_margin >= -1e-9,
        "delta exceeded r: margin {worst_margin}"
    );
    assert!(
        worst_identity <= 1e-12,
        "product identity residual {worst_identity}"
    );
    println!(
        "ACCEPTANCE-2 witness-chain: PASS ({accepted} witnesses, {n1_count} from convergents, \
         min margin {worst_margin:.3e}, worst identity residual {worst_identity:.3e})"
    );
}

/// Criterion 3: the polynomial sublevel bound with the explicit constants,
/// 500 random polynomials per degree 1..=5, 12-point epsilon grids.
#[test]
fn acceptance_3_polynomial_sublevel_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC3);
    let mut checked_rows = 0u64;
    for degree in 1..=5u32 {
        let (c, alpha) = goodfun::good_constants_polynomial(degree).unwrap();
        for _ in 0..500 {
            let coeffs: Vec<f64> = (0..=degree).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f = ScalarField::poly(Polynomial::univariate(&coeffs));
            let a = rng.gen_range(-2.0..2.0);
            let len = rng.gen_range(0.2..3.0);
            let ball = Ball::new(vec![a + len / 2.0], len / 2.0, 0);
            let (sup, _) = goodfun::sup_norm_on_ball(&f, &ball, 512);
            if sup < 1e-9 {
                continue;
            }
            let eps_list: Vec<f64> = (0..12)
                .map(|i| sup * 10f64.powf(-4.0 * (11 - i) as f64 / 11.0))
                .collect();
            let report = goodfun::check_good_on_ball(&f, &ball, c, alpha, &eps_list, 2048).unwrap();
            assert!(
                report.all_pass,
                "degree {degree}, coeffs {coeffs:?}, ball {ball:?}: violation beyond error bar"
            );
            checked_rows += report.rows.len() as u64;
        }
    }
    println!("ACCEPTANCE-3 polynomial-sublevel: PASS ({checked_rows} rows, zero violations)");
}

/// Criterion 4: closed-form sheared-flow coordinates equal the exterior
/// matrix action coefficient-wise to 1e-10 on 200 random instances.
#[test]
fn acceptance_4_shear_coordinates_cross_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC4);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.gen_range(1..=3usize);
        let dim = n + 1;
        let mut w = exterior::MultiVector::zero(dim);
        for mask in 0..1usize << dim {
            w.set_coeff(mask, rng.gen_range(-5.0..5.0));
        }
        let f_vals: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let t =
            FlowVector::new((0..n).map(|_| rng.gen_range(0.0..2.0)).collect::<Vec<_>>()).unwrap();
        let closed = nondivergence::shear_flow_coordinates(&w, &f_vals, &t);
        let action = exterior::apply_matrix(&lattice::flow_shear_matrix(&f_vals, &t), &w);
        for mask in 0..1usize << dim {
            let diff = (closed.coeff(mask) - action.coeff(mask)).abs();
            let scale = 1.0 + action.coeff(mask).abs();
            worst = worst.max(diff / scale);
            assert!(
                diff <= 1e-10 * scale,
                "mask {mask:b}: closed {} vs action {}",
                closed.coeff(mask),
                action.coeff(mask)
            );
        }
    }
    println!("ACCEPTANCE-4 shear-coordinates: PASS (200 instances, worst rel diff {worst:.3e})");
}

/// The shared marking instance: power-curve coordinates, k = 3, tuned so
/// the candidate poset has nontrivial chains while every candidate clears
/// the hypothesis floor on the sample ball.
fn marking_instance() -> MarkingInstance {
    let fields = vec![
        ScalarField::poly(Polynomial::univariate(&[0.0, 1.0])),
        ScalarField::poly(Polynomial::univariate(&[0.0, 0.0, 1.0])),
    ];
    let (c, alpha) = goodfun::good_constants_polynomial(2).unwrap();
    MarkingInstance::flow_shear(
        fields,
        FlowVector::new(vec![1.5, 0.9]).unwrap(),
        Ball::new(vec![0.04], 0.035, 3),
        GoodParams::new(c, alpha, 0.3, 1, 3).unwrap(),
        2,
        BUDGET,
    )
    .unwrap()
}

/// Criterion 5: marked points satisfy delta(h(x) Z^k) >= eps - 1e-9 on a
/// 10^4-point sweep, zero violations, boundary points below 1%.
#[test]
fn acceptance_5_marking_inclusion() {
    let inst = marking_instance();
    // rho/3 puts the sample ball on both sides of the marking decision.
    let eps = inst.params.rho / 3.0;
    let report = marking::marked_implies_delta_check(&inst, eps, 10_000, 0xACC5).unwrap();
    assert_eq!(report.violations, 0, "{report:?}");
    assert!(
        report.boundary <= 100,
        "boundary fraction too high: {}",
        report.boundary
    );
    assert!(report.marked > 0, "degenerate sweep: no marked points");
    assert!(report.unmarked > 0, "degenerate sweep: no unmarked points");
    assert!(report.min_margin >= -1e-9);
    println!(
        "ACCEPTANCE-5 marking-inclusion: PASS (10000 points, {} marked, {} unmarked, \
         {} boundary, min margin {:.3e})",
        report.marked, report.unmarked, report.boundary, report.min_margin
    );
}

/// Criterion 6: the four inequality sweeps on desk-scale instances; every
/// non-vacuous row passes at its 99% upper confidence limit.
#[test]
fn acceptance_6_inequality_sweeps() {
    // (a) unipotent orbit, k = 2, T = 1000.
    let cfg = nondivergence::UnipotentSweepConfig {
        basis: Mat::identity(2),
        nilpotent: Mat::from_rows(vec![vec![0.0, 1.0], vec![0.0, 0.0]]),
        time_horizon: 1000.0,
        eps_grid: vec![0.5, 0.05, 5e-3, 5e-8, 5e-13],
        samples: 4000,
        seed: 0xACC6A,
        budget: BUDGET,
    };
    let res_a = nondivergence::unipotent_orbit_sweep(&cfg).unwrap();
    assert!(res_a.all_non_vacuous_pass, "{:?}", res_a.rows);
    let non_vacuous_a = res_a
        .rows
        .iter()
        .filter(|r| r.status != RowStatus::Vacuous)
        .count();

    // (b) unipotent orbit, k = 3, random basis, T = 100.
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC6B);
    let basis = lattice::random_unimodular(3, 8, &mut rng).map(|&x| x as f64);
    let rho = nondivergence::compute_rho(&basis, BUDGET).unwrap();
    let cfg = nondivergence::UnipotentSweepConfig {
        basis,
        nilpotent: Mat::from_rows(vec![
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, 0.0],
        ]),
        time_horizon: 100.0,
        eps_grid: (0..12)
            .map(|i| rho * 10f64.powf(-4.0 * (11 - i) as f64 / 11.0))
            .collect(),
        samples: 2000,
        seed: 0xACC6B,
        budget: BUDGET,
    };
    let res_b = nondivergence::unipotent_orbit_sweep(&cfg).unwrap();
    assert!(res_b.all_non_vacuous_pass, "{:?}", res_b.rows);

    // (c) sheared family at a fixed flow vector (k = 3), including rows in
    // the window where the bound is below one.
    let fields = vec![
        ScalarField::poly(Polynomial::univariate(&[0.0, 1.0])),
        ScalarField::poly(Polynomial::univariate(&[0.0, 0.0, 1.0])),
    ];
    let ball = Ball::new(vec![0.04], 0.035, 3);
    let rho54 = nondivergence::estimate_combination_floor(&fields, &ball, 9).min(0.32);
    let (c2, a2) = goodfun::good_constants_polynomial(2).unwrap();
    let cfg = nondivergence::ShearSweepConfig {
        fields: fields.clone(),
        ball,
        t: FlowVector::new(vec![1.5, 0.9]).unwrap(),
        eps_grid: vec![rho54 * 0.5, rho54 * 1e-2, rho54 * 1e-9, rho54 * 1e-12],
        c_good: c2,
        alpha: a2,
        rho: rho54,
        n_d: 2,
        samples: 2000,
        seed: 0xACC6C,
        budget: BUDGET,
    };
    let res_c = nondivergence::shear_family_sweep(&cfg).unwrap();
    assert!(res_c.all_non_vacuous_pass, "{:?}", res_c.rows);
    // At least one row where the upper confidence limit sits below a
    // sub-one bound: the inequality is checked with real statistical power.
    assert!(
        res_c
            .rows
            .iter()
            .any(|r| r.bound < 1.0 && r.ci_high <= r.bound),
        "no informative rows exercised: {:?}",
        res_c.rows
    );

    // (d) the marked-measure bound on the shared instance.
    let inst = marking_instance();
    let rho = inst.params.rho;
    let mut non_vacuous_d = 0;
    for eps in [rho * 0.5, rho * 1e-4, rho * 1e-9, rho * 1e-12] {
        let (exp, _) = marking::unmarked_measure_experiment(&inst, eps, 2000, 0xACC6D).unwrap();
        assert_ne!(exp.status, "FAIL", "{exp:?}");
        assert_ne!(exp.status, "INAPPLICABLE", "hypotheses must hold: {exp:?}");
        if exp.bound < 1.0 && exp.ci_high <= exp.bound {
            non_vacuous_d += 1;
        }
    }
    assert!(
        non_vacuous_d > 0,
        "marked-measure sweep never left the vacuous regime"
    );

    // (e) per-flow-vector decay scan with the Borel-Cantelli partial sums.
    let cfg = nondivergence::DecayScanConfig {
        fields,
        x0: 0.04,
        l_max: 3,
        ball: Ball::new(vec![0.04], 0.035, 3),
        gamma: 0.1,
        t_budget: 12,
        c_good: c2,
        alpha: 0.5,
        rho: rho54,
        n_d: 2,
        samples: 300,
        seed: 0xACC6E,
        budget: BUDGET,
    };
    let rep = nondivergence::flow_decay_scan(&cfg).unwrap();
    assert_eq!(rep.nondegeneracy_order, 2);
    assert!(rep.all_non_vacuous_pass);
    assert!(rep.partial_sums.windows(2).all(|w| w[1] >= w[0]));

    println!(
        "ACCEPTANCE-6 inequality-sweeps: PASS (orbit k=2: {} non-vacuous rows; orbit k=3 rho={:.3}; \
         shear rho={rho54:.3}; marked-measure {} informative rows; decay scan {} flow vectors)",
        non_vacuous_a,
        res_b.rho,
        non_vacuous_d,
        rep.rows.len()
    );
}

/// Criterion 7: strong-extremality demonstration. Power-curve points show
/// top-shell multiplicative exponents strictly below bottom-shell ones in
/// the median, while the truncated Liouville target keeps a shell exponent
/// above one.
#[test]
fn acceptance_7_extremality_demo() {
    let mut top = Vec::new();
    let mut bottom = Vec::new();
    for i in 0..50u64 {
        let mut rng = stats::rng_for(0xACC7, i);
        let x = rng.gen_range(0.15..1.15);
        let y = Target::Float(dioph::veronese(x, 2));
        let scan = dioph::best_exponent(&y, Criterion::DualMultiplicative, 1000).unwrap();
        let finite: Vec<&dioph::ShellRecord> =
            scan.shells.iter().filter(|s| !s.exact_hit).collect();
        assert!(finite.len() >= 4, "x={x}: too few shells");
        bottom.push(finite.first().unwrap().best_eps);
        top.push(finite.last().unwrap().best_eps);
    }
    let median = |v: &mut Vec<f64>| -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    let m_top = median(&mut top);
    let m_bottom = median(&mut bottom);
    assert!(
        m_top < m_bottom,
        "median top-shell exponent {m_top} not below bottom-shell {m_bottom}"
    );

    let liou = Target::liouville(4);
    let scan = dioph::best_exponent(&liou, Criterion::DualStandard, 1_000_000).unwrap();
    let witness_shell = scan
        .shells
        .iter()
        .filter(|s| !s.exact_hit)
        .map(|s| s.best_eps)
        .fold(0.0f64, f64::max);
    assert!(
        witness_shell > 1.0,
        "Liouville truncation shell exponent {witness_shell} <= 1"
    );
    println!(
        "ACCEPTANCE-7 extremality-demo: PASS (median top {m_top:.4} < median bottom {m_bottom:.4}; \
         Liouville shell exponent {witness_shell:.3})"
    );
}

/// Criterion 8 (library side): rerunning a scenario with identical config
/// and seed, and with different worker counts, yields byte-identical files.
/// The process-level check lives in the CLI crate's tests.
#[test]
fn acceptance_8_determinism() {
    use latflow::experiment::{run_config, ConfigMap};

    let configs = [
        "scenario = delta-scan\nseed = 11\n[params]\nk = 3\nbasis = random\ncount = 4\neps_grid = 0.9,0.2\n",
        "scenario = exponent-scan\nseed = 5\n[params]\ny = golden\ncriterion = dual-standard\nq_max = 512\n",
        "scenario = witness-demo\nseed = 9\n[params]\ny = sqrt2\nscan_qmax = 120\n",
    ];
    let base = std::env::temp_dir().join(format!("latflow-acc8-{}", std::process::id()));
    for (i, text) in configs.iter().enumerate() {
        let cfg = ConfigMap::parse(text).unwrap();
        let mut contents: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
        for (run, workers) in [(0usize, 1usize), (1, 2), (2, 1)] {
            let dir = base.join(format!("cfg{i}-run{run}"));
            let summary = run_config(&cfg, Some(&dir), Some(workers)).unwrap();
            let mut files: Vec<(String, Vec<u8>)> = summary
                .written
                .iter()
                .map(|p| {
                    (
                        p.file_name().unwrap().to_string_lossy().into_owned(),
                        std::fs::read(p).unwrap(),
                    )
                })
                .collect();
            files.sort();
            contents.push(files);
        }
        assert_eq!(
            contents[0], contents[1],
            "config {i}: workers changed the bytes"
        );
        assert_eq!(
            contents[0], contents[2],
            "config {i}: rerun changed the bytes"
        );
    }
    let _ = std::fs::remove_dir_all(&base);
    println!(
        "ACCEPTANCE-8 determinism: PASS (3 scenarios, reruns and worker counts byte-identical)"
    );
}
