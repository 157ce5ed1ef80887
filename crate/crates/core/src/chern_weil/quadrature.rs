//! Gauss–Legendre rules on `[0, 1]` and collapsed-square rules on the
//! 2-simplex.

use std::f64::consts::PI;

/// `n`-point Gauss–Legendre nodes and weights on `[0, 1]`; exact for
/// polynomials of degree `2n − 1`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "at least one node");
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Newton iteration on P_n from the usual cosine guess
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((1.0 - x) / 2.0, w / 2.0));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Nodes `(t_1, .., t_k)` and weights on the standard `k`-simplex
/// `{t_a ≥ 0, Σ t_a ≤ 1}`, for `k ∈ {1, 2}`. With `n` points per direction
/// the rule integrates polynomials of total degree `2n − 2` exactly
/// (`2n − 1` for `k = 1`).
pub fn simplex_rule(k: usize, n: usize) -> Vec<(Vec<f64>, f64)> {
    let gl = gauss_legendre(n);
    match k {
        0 => vec![(Vec::new(), 1.0)],
        1 => gl.into_iter().map(|(t, w)| (vec![t], w)).collect(),
        2 => {
            // ∫_{Δ²} f = ∫∫_{[0,1]²} f(u, (1 − u) v) (1 − u) du dv
            let mut out = Vec::with_capacity(n * n);
            for &(u, wu) in &gl {
                for &(v, wv) in &gl {
                    out.push((vec![u, (1.0 - u) * v], wu * wv * (1.0 - u)));
                }
            }
            out
        }
        _ => panic!("simplex rules are provided for k ≤ 2"),
    }
}

/// Points per direction that make [`simplex_rule`] exact for total degree
/// `degree`.
pub fn nodes_for_degree(k: usize, degree: usize) -> usize {
    match k {
        1 => degree / 2 + 1,
        _ => (degree + 2).div_ceil(2),
    }
}
