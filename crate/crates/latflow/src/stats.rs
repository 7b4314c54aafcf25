//! Monte-Carlo helpers: Clopper-Pearson binomial intervals, deterministic
//! per-sample seed derivation, and stratified sampling of intervals.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Two-sided Clopper-Pearson interval for `successes` out of `trials` at
/// the given confidence level (e.g. 0.99).
pub fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(trials > 0, "empty sample");
    assert!(successes <= trials);
    let alpha = 1.0 - confidence;
    let (x, n) = (successes as f64, trials as f64);
    let lower = if successes == 0 {
        0.0
    } else {
        beta_inv(alpha / 2.0, x, n - x + 1.0)
    };
    let upper = if successes == trials {
        1.0
    } else {
        beta_inv(1.0 - alpha / 2.0, x + 1.0, n - x)
    };
    (lower, upper)
}

/// Inverse of the regularized incomplete beta I_p(a, b) by bisection.
fn beta_inv(target: f64, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if reg_inc_beta(mid, a, b) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Regularized incomplete beta via the Lentz continued fraction.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // Symmetry keeps the continued fraction in its fast-converging region.
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(x, a, b) / a
    } else {
        1.0 - ln_gamma_beta_tail(x, a, b)
    }
}

fn ln_gamma_beta_tail(x: f64, a: f64, b: f64) -> f64 {
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    ln_front.exp() * beta_cf(1.0 - x, b, a) / b
}

fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const TINY: f64 = 1e-300;
    let mut c = 1.0f64;
    let mut d = 1.0 - (a + b) * x / (a + 1.0);
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let mf = m as f64;
        // even step
        let num = mf * (b - mf) * x / ((a + 2.0 * mf - 1.0) * (a + 2.0 * mf));
        d = 1.0 + num * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + num / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        // odd step
        let num = -(a + mf) * (a + b + mf) * x / ((a + 2.0 * mf) * (a + 2.0 * mf + 1.0));
        d = 1.0 + num * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + num / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-15 {
            break;
        }
    }
    h
}

/// Lanczos log-gamma, |error| < 2e-10 for positive arguments.
pub fn ln_gamma(x: f64) -> f64 {
    const G: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let mut y = x;
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut ser = 1.000000000190015;
    for g in G {
        y += 1.0;
        ser += g / y;
    }
    -tmp + (2.5066282746310005 * ser / x).ln()
}

/// SplitMix64 step, used to derive independent per-sample seeds from a
/// single run seed so results do not depend on worker count or schedule.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e3779b97f4a7c15);
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

pub fn rng_for(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, index))
}

/// One uniform draw per equal-width stratum of [lo, hi]: unbiased for the
/// mean of an indicator, with lower variance than plain Monte Carlo.
pub fn stratified_points(lo: f64, hi: f64, n: usize, seed: u64) -> Vec<f64> {
    let width = (hi - lo) / n as f64;
    (0..n)
        .map(|i| {
            let mut rng = rng_for(seed, i as u64);
            use rand::Rng;
            let u: f64 = rng.gen_range(0.0..1.0);
            lo + (i as f64 + u) * width
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_factorials() {
        for n in 1..10u64 {
            let fact: f64 = (1..n).map(|k| k as f64).product();
            assert!((ln_gamma(n as f64) - fact.ln()).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn inc_beta_uniform_case() {
        // I_x(1,1) = x
        for x in [0.1, 0.5, 0.9] {
            assert!((reg_inc_beta(x, 1.0, 1.0) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn clopper_pearson_zero_successes_closed_form() {
        // upper = 1 - (alpha/2)^{1/n}
        let n = 2000u64;
        let (lo, hi) = clopper_pearson(0, n, 0.99);
        assert_eq!(lo, 0.0);
        let expect = 1.0 - (0.005f64).powf(1.0 / n as f64);
        assert!((hi - expect).abs() < 1e-9, "hi={hi} expect={expect}");
    }

    #[test]
    fn clopper_pearson_contains_truth_often() {
        // Interval at 99% should contain p for most simulated draws.
        use rand::Rng;
        let p = 0.3;
        let mut misses = 0;
        for trial in 0..200u64 {
            let mut rng = rng_for(17, trial);
            let n = 500;
            let x = (0..n).filter(|_| rng.gen_range(0.0..1.0) < p).count() as u64;
            let (lo, hi) = clopper_pearson(x, n as u64, 0.99);
            if p < lo || p > hi {
                misses += 1;
            }
        }
        assert!(misses <= 8, "misses={misses}");
    }

    #[test]
    fn stratified_points_cover_strata() {
        let pts = stratified_points(2.0, 4.0, 10, 5);
        for (i, p) in pts.iter().enumerate() {
            let lo = 2.0 + i as f64 * 0.2;
            assert!(*p >= lo && *p < lo + 0.2);
        }
        // deterministic
        assert_eq!(pts, stratified_points(2.0, 4.0, 10, 5));
    }

    #[test]
    fn derive_seed_spreads() {
        let a = derive_seed(1, 0);
        let b = derive_seed(1, 1);
        let c = derive_seed(2, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
