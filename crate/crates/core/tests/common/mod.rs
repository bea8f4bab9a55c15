#![allow(clippy::needless_range_loop)]

//! Independent reference computations used by the integration tests. Nothing
//! here calls into the library.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::f64::consts::PI;

use num_complex::Complex64;

/// Sensor indices straight from the two-subarray definition.
pub fn coprime_indices(m: i64, n: i64) -> Vec<i64> {
    let mut set = BTreeSet::new();
    for k in -(n - 1)..n {
        set.insert(m * k);
    }
    for k in -(m - 1)..m {
        set.insert(n * k);
    }
    set.into_iter().collect()
}

pub fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

pub fn coprime_pairs(max_n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for n in 2..=max_n {
        for m in 2..n {
            if gcd(m, n) == 1 {
                out.push((m, n));
            }
        }
    }
    out
}

/// Largest `h` such that every lag in `-h..=h` is a pairwise difference.
pub fn consecutive_half_width(indices: &[i64]) -> usize {
    let diffs: BTreeSet<i64> = indices.iter().flat_map(|a| indices.iter().map(move |b| a - b)).collect();
    let mut h = 0;
    while diffs.contains(&(h + 1)) {
        h += 1;
    }
    h as usize
}

/// Counts targets by direct enumeration: `K` self terms plus `K(K-1)/2`
/// distinct cross terms must fit in `MN + 1` smoothed virtual sensors minus one.
pub fn capacity(m: usize, n: usize) -> (usize, usize) {
    let mut kv = 0;
    for k in 1..1000 {
        let components = k + (0..k).map(|u| (u + 1..k).count()).sum::<usize>();
        if components <= m * n + 1 {
            kv = k;
        } else {
            break;
        }
    }
    (kv, m.min(n))
}

pub struct Src {
    pub theta: f64,
    pub r: f64,
}

fn p(s: f64, lambda: f64, t: &Src) -> f64 {
    -2.0 * PI / lambda * s * t.theta.sin()
}

fn q(s: f64, lambda: f64, t: &Src) -> f64 {
    PI / lambda * s * s * t.theta.cos().powi(2) / t.r
}

pub fn p_ij(s: &[f64], lambda: f64, t: &Src, i: usize, j: usize) -> f64 {
    p(s[i], lambda, t) - p(s[j], lambda, t)
}

pub fn q_ij(s: &[f64], lambda: f64, t: &Src, i: usize, j: usize) -> f64 {
    q(s[i], lambda, t) - q(s[j], lambda, t)
}

fn cis(x: f64) -> Complex64 {
    Complex64::new(x.cos(), x.sin())
}

/// Noise-free unit-power covariance element, summed per target.
pub fn r_elem(s: &[f64], lambda: f64, ts: &[Src], i: usize, j: usize) -> Complex64 {
    ts.iter().map(|t| cis(p_ij(s, lambda, t, i, j) + q_ij(s, lambda, t, i, j))).sum()
}

/// Mirrored covariance element predicted from first and second order terms.
pub fn r_a_elem(s: &[f64], lambda: f64, ts: &[Src], i: usize, j: usize) -> Complex64 {
    ts.iter().map(|t| cis(p_ij(s, lambda, t, i, j) - q_ij(s, lambda, t, i, j))).sum()
}

pub fn self_elem(s: &[f64], lambda: f64, ts: &[Src], i: usize, j: usize) -> Complex64 {
    ts.iter().map(|t| cis(2.0 * p_ij(s, lambda, t, i, j))).sum()
}

pub fn cross_elem(s: &[f64], lambda: f64, ts: &[Src], i: usize, j: usize) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (w, tw) in ts.iter().enumerate() {
        for (u, tu) in ts.iter().enumerate() {
            if u != w {
                acc += cis(
                    p_ij(s, lambda, tu, i, j) + p_ij(s, lambda, tw, i, j) + q_ij(s, lambda, tu, i, j)
                        - q_ij(s, lambda, tw, i, j),
                );
            }
        }
    }
    acc
}

/// Eigenvalues of a Hermitian matrix given row-major, ascending. Uses cyclic
/// Jacobi on the real symmetric embedding `[[A, -B], [B, A]]`, whose spectrum
/// is that of `A + jB` with every value doubled.
pub fn jacobi_eigenvalues(h: &[Vec<Complex64>]) -> Vec<f64> {
    let n = h.len();
    let m = 2 * n;
    let mut a = vec![vec![0.0; m]; m];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = h[i][j].re;
            a[i + n][j + n] = h[i][j].re;
            a[i][j + n] = -h[i][j].im;
            a[i + n][j] = h[i][j].im;
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..m).flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-28 {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut d: Vec<f64> = (0..m).map(|i| a[i][i]).collect();
    d.sort_by(f64::total_cmp);
    d.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect()
}

/// Brute-force minimum over all injective maps of the smaller side.
pub fn brute_assignment_cost(cost: &[Vec<f64>]) -> f64 {
    let rows = cost.len();
    let cols = cost.first().map_or(0, |r| r.len());
    fn go(cost: &[Vec<f64>], i: usize, used: &mut Vec<bool>, transpose: bool) -> f64 {
        let (rows, cols) = if transpose { (cost[0].len(), cost.len()) } else { (cost.len(), cost[0].len()) };
        if i == rows {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for j in 0..cols {
            if !used[j] {
                used[j] = true;
                let c = if transpose { cost[j][i] } else { cost[i][j] };
                best = best.min(c + go(cost, i + 1, used, transpose));
                used[j] = false;
            }
        }
        best
    }
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    if rows <= cols {
        go(cost, 0, &mut vec![false; cols], false)
    } else {
        go(cost, 0, &mut vec![false; rows], true)
    }
}
