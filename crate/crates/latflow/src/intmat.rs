//! Exact integer matrix algorithms: column Hermite normal form and Smith
//! normal form with tracked multipliers. All arithmetic is i128; at the
//! dimensions and entry sizes this crate works with (k <= 8, entries well
//! below 2^40) nothing approaches overflow.

use crate::linalg::Mat;

/// Column Hermite normal form of a k x j integer matrix of full column rank.
///
/// Canonical shape: the first nonzero entry of column i sits at row r_i with
/// r_1 < r_2 < ... < r_j and is positive; in each pivot row, entries in
/// earlier columns are reduced into [0, pivot). Two integer matrices generate
/// the same subgroup of Z^k iff their column HNFs are equal.
pub fn hnf_columns(basis: &Mat<i128>) -> Mat<i128> {
    let k = basis.nrows();
    let j = basis.ncols();
    let mut h = basis.clone();

    let mut pivot_row = Vec::with_capacity(j);
    let mut next_col = 0usize;
    for row in 0..k {
        if next_col == j {
            break;
        }
        // Clear row `row` across columns next_col+1.. into column next_col
        // using extended gcd column operations.
        let mut any = h[(row, next_col)] != 0;
        for c in next_col + 1..j {
            if h[(row, c)] != 0 {
                any = true;
                let (a, b) = (h[(row, next_col)], h[(row, c)]);
                let (g, x, y) = xgcd(a, b);
                let (adiv, bdiv) = (a / g, b / g);
                for r in 0..k {
                    let u = h[(r, next_col)];
                    let v = h[(r, c)];
                    h[(r, next_col)] = x * u + y * v;
                    h[(r, c)] = -bdiv * u + adiv * v;
                }
            }
        }
        if !any {
            continue;
        }
        if h[(row, next_col)] < 0 {
            for r in 0..k {
                h[(r, next_col)] = -h[(r, next_col)];
            }
        }
        // Reduce earlier columns' entries in this pivot row into [0, pivot).
        let p = h[(row, next_col)];
        for c in 0..next_col {
            let q = h[(row, c)].div_euclid(p);
            if q != 0 {
                for r in 0..k {
                    let sub = q * h[(r, next_col)];
                    h[(r, c)] -= sub;
                }
            }
        }
        pivot_row.push(row);
        next_col += 1;
    }
    assert_eq!(
        next_col, j,
        "hnf_columns: input does not have full column rank"
    );
    h
}

/// Pivot row indices of a matrix already in column HNF.
pub fn hnf_pivot_rows(h: &Mat<i128>) -> Vec<usize> {
    (0..h.ncols())
        .map(|c| {
            (0..h.nrows())
                .find(|&r| h[(r, c)] != 0)
                .expect("zero column in HNF")
        })
        .collect()
}

/// Smith normal form of a k x j matrix: returns (divisors, pinv) where
/// `divisors` are the elementary divisors d_1 | d_2 | ... (nonnegative,
/// trailing zeros absent for full-rank input) and `pinv` is a k x k
/// unimodular matrix such that the original matrix equals
/// pinv * diag(divisors) * (some unimodular j x j matrix).
///
/// The first r columns of `pinv` (r = rank) generate the saturation
/// (real span intersected with Z^k) of the column span.
pub fn smith_with_left_inverse(basis: &Mat<i128>) -> (Vec<i128>, Mat<i128>) {
    let k = basis.nrows();
    let j = basis.ncols();
    let mut a = basis.clone();
    // Row ops L applied to `a` are mirrored as column ops L^{-1} on pinv,
    // preserving pinv * a = basis.
    let mut pinv: Mat<i128> = Mat::identity(k);

    let r = k.min(j);
    for t in 0..r {
        loop {
            // Find a nonzero pivot in the remaining block.
            let mut found = None;
            'search: for i in t..k {
                for c in t..j {
                    if a[(i, c)] != 0 {
                        found = Some((i, c));
                        break 'search;
                    }
                }
            }
            let (pi, pc) = match found {
                Some(p) => p,
                None => {
                    let divisors: Vec<i128> =
                        (0..t).map(|i| a[(i, i)]).filter(|&d| d != 0).collect();
                    return (divisors, pinv);
                }
            };
            if pi != t {
                swap_rows(&mut a, t, pi);
                // Row swap on `a` is its own inverse as a column swap on pinv.
                swap_cols(&mut pinv, t, pi);
            }
            if pc != t {
                swap_cols(&mut a, t, pc);
            }
            // Clear column t below the pivot with row ops. When the pivot
            // divides the entry, subtract a plain multiple so the pivot row
            // stays fixed; the gcd path strictly shrinks the pivot, so the
            // alternation terminates.
            let mut progressed = true;
            while progressed {
                progressed = false;
                for i in t + 1..k {
                    if a[(i, t)] != 0 {
                        if a[(i, t)] % a[(t, t)] == 0 {
                            let f = a[(i, t)] / a[(t, t)];
                            add_row(&mut a, i, t, -f);
                            // a <- (I - f E_{i,t}) a; mirror on pinv columns.
                            sub_col(&mut pinv, i, t, -f);
                        } else {
                            let (g, x, y) = xgcd(a[(t, t)], a[(i, t)]);
                            let (adiv, bdiv) = (a[(t, t)] / g, a[(i, t)] / g);
                            // rows: [t; i] <- [[x, y], [-bdiv, adiv]] * [t; i]
                            combine_rows(&mut a, t, i, x, y, -bdiv, adiv);
                            // pinv columns: multiply on the right by the
                            // inverse, [[adiv, -y], [bdiv, x]] on (t, i).
                            combine_cols(&mut pinv, t, i, adiv, bdiv, -y, x);
                        }
                    }
                }
                for c in t + 1..j {
                    if a[(t, c)] != 0 {
                        if a[(t, c)] % a[(t, t)] == 0 {
                            let f = a[(t, c)] / a[(t, t)];
                            sub_col(&mut a, t, c, f);
                        } else {
                            let (g, x, y) = xgcd(a[(t, t)], a[(t, c)]);
                            let (adiv, bdiv) = (a[(t, t)] / g, a[(t, c)] / g);
                            combine_cols(&mut a, t, c, x, y, -bdiv, adiv);
                            progressed = true;
                        }
                    }
                }
            }
            // Pivot must divide every remaining entry; if not, fold the
            // offending row in and restart this step.
            let p = a[(t, t)];
            let mut clean = true;
            'div: for i in t + 1..k {
                for c in t + 1..j {
                    if a[(i, c)] % p != 0 {
                        add_row(&mut a, t, i, 1);
                        sub_col(&mut pinv, t, i, 1);
                        clean = false;
                        break 'div;
                    }
                }
            }
            if clean {
                if a[(t, t)] < 0 {
                    for c in t..j {
                        a[(t, c)] = -a[(t, c)];
                    }
                    for rr in 0..k {
                        pinv[(rr, t)] = -pinv[(rr, t)];
                    }
                }
                break;
            }
        }
    }
    let divisors: Vec<i128> = (0..r).map(|i| a[(i, i)]).filter(|&d| d != 0).collect();
    (divisors, pinv)
}

/// Elementary divisors only.
pub fn elementary_divisors(basis: &Mat<i128>) -> Vec<i128> {
    smith_with_left_inverse(basis).0
}

fn swap_rows(m: &mut Mat<i128>, a: usize, b: usize) {
    for c in 0..m.ncols() {
        let tmp = m[(a, c)];
        m[(a, c)] = m[(b, c)];
        m[(b, c)] = tmp;
    }
}

fn swap_cols(m: &mut Mat<i128>, a: usize, b: usize) {
    for r in 0..m.nrows() {
        let tmp = m[(r, a)];
        m[(r, a)] = m[(r, b)];
        m[(r, b)] = tmp;
    }
}

/// rows (a, b) <- (xa*row_a + xb*row_b, ya*row_a + yb*row_b)
fn combine_rows(m: &mut Mat<i128>, a: usize, b: usize, xa: i128, xb: i128, ya: i128, yb: i128) {
    for c in 0..m.ncols() {
        let (u, v) = (m[(a, c)], m[(b, c)]);
        m[(a, c)] = xa * u + xb * v;
        m[(b, c)] = ya * u + yb * v;
    }
}

/// cols (a, b) <- (xa*col_a + ya*col_b, xb*col_a + yb*col_b)
fn combine_cols(m: &mut Mat<i128>, a: usize, b: usize, xa: i128, ya: i128, xb: i128, yb: i128) {
    for r in 0..m.nrows() {
        let (u, v) = (m[(r, a)], m[(r, b)]);
        m[(r, a)] = xa * u + ya * v;
        m[(r, b)] = xb * u + yb * v;
    }
}

fn add_row(m: &mut Mat<i128>, dst: usize, src: usize, f: i128) {
    for c in 0..m.ncols() {
        let add = f * m[(src, c)];
        m[(dst, c)] += add;
    }
}

fn sub_col(m: &mut Mat<i128>, src: usize, dst: usize, f: i128) {
    for r in 0..m.nrows() {
        let sub = f * m[(r, src)];
        m[(r, dst)] -= sub;
    }
}

/// Extended gcd: returns (g, x, y) with g = gcd(a,b) > 0 and x*a + y*b = g.
pub fn xgcd(a: i128, b: i128) -> (i128, i128, i128) {
    let (mut r0, mut r1) = (a, b);
    let (mut s0, mut s1) = (1i128, 0i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 < 0 {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

pub fn gcd_all(values: impl IntoIterator<Item = i128>) -> i128 {
    let mut g = 0i128;
    for v in values {
        g = xgcd(g, v).0;
        if g == 1 {
            return 1;
        }
    }
    g
}
