//! Independent reference implementations used by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use kdtpl::coupling::Couplet;
use kdtpl::pl::{pairwise_loglik, PairedSample, PlParams};
use kdtpl::spatial::PointSet;
use rand::Rng;

pub fn dist(points: &PointSet, a: usize, b: usize) -> f64 {
    let (ax, ay) = points.coords(a);
    let (bx, by) = points.coords(b);
    ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
}

/// The `k` nearest other points within `radius`, by (distance, id).
pub fn brute_knn(points: &PointSet, query: usize, k: usize, radius: f64) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = (0..points.len())
        .filter(|&j| j != query)
        .map(|j| (j, dist(points, query, j)))
        .filter(|&(_, d)| d <= radius)
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// Quadratic greedy pairing: scan ids in ascending order and take the nearest
/// free point within `radius`, ties to the lower id.
pub fn brute_greedy(points: &PointSet, radius: f64) -> Vec<(usize, usize, f64)> {
    let n = points.len();
    let mut used = vec![false; n];
    let mut out = Vec::new();
    for p in 0..n {
        if used[p] {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if j == p || used[j] {
                continue;
            }
            let d = dist(points, p, j);
            if d <= radius && best.is_none_or(|(bj, bd)| d < bd || (d == bd && j < bj)) {
                best = Some((j, d));
            }
        }
        if let Some((j, d)) = best {
            used[p] = true;
            used[j] = true;
            out.push((p, j, d));
        }
    }
    out
}

pub fn as_triples(cs: &[Couplet]) -> Vec<(usize, usize, f64)> {
    cs.iter().map(|c| (c.i, c.l, c.dist)).collect()
}

pub fn mean_pairwise(points: &PointSet) -> f64 {
    let n = points.len();
    let mut s = 0.0;
    for a in 0..n {
        for b in a + 1..n {
            s += dist(points, a, b);
        }
    }
    s / (n * (n - 1) / 2) as f64
}

pub fn uniform_points<R: Rng>(rng: &mut R, n: usize, side: f64) -> PointSet {
    PointSet::from_coords((0..n).map(|_| (rng.random::<f64>() * side, rng.random::<f64>() * side)))
        .unwrap()
}

/// `ln |det(m)|` by Gaussian elimination with partial pivoting.
pub fn dense_log_abs_det(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut acc = 0.0;
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))
            .unwrap();
        m.swap(c, piv);
        let d = m[c][c];
        assert!(d != 0.0, "singular");
        acc += d.abs().ln();
        for r in c + 1..n {
            let f = m[r][c] / d;
            if f != 0.0 {
                for k in c..n {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
    }
    acc
}

/// Central-difference gradient of the pairwise log-likelihood in
/// `(beta, sigma2, psi)`.
pub fn fd_score(s: &PairedSample, p: &PlParams) -> [f64; 3] {
    let f = |b: f64, s2: f64, ps: f64| pairwise_loglik(s, &PlParams::new(b, s2, ps)).unwrap();
    let h = [1e-5 * p.beta.abs().max(1.0), 1e-5 * p.sigma2, 1e-5];
    [
        (f(p.beta + h[0], p.sigma2, p.psi) - f(p.beta - h[0], p.sigma2, p.psi)) / (2.0 * h[0]),
        (f(p.beta, p.sigma2 + h[1], p.psi) - f(p.beta, p.sigma2 - h[1], p.psi)) / (2.0 * h[1]),
        (f(p.beta, p.sigma2, p.psi + h[2]) - f(p.beta, p.sigma2, p.psi - h[2])) / (2.0 * h[2]),
    ]
}

/// Analytic gradient of the pairwise log-likelihood, from the per-couple density.
pub fn analytic_score(s: &PairedSample, p: &PlParams) -> [f64; 3] {
    let (b, s2, ps) = (p.beta, p.sigma2, p.psi);
    let om = 1.0 - ps * ps;
    let (mut gb, mut gs, mut gp) = (0.0, 0.0, 0.0);
    for k in 0..s.q() {
        let (ei, el) = (s.y_i[k] - b * s.x_i[k], s.y_l[k] - b * s.x_l[k]);
        let qf = ei * ei - 2.0 * ps * ei * el + el * el;
        // d qf / d beta
        let dq =
            -2.0 * ei * s.x_i[k] - 2.0 * el * s.x_l[k] + 2.0 * ps * (s.x_i[k] * el + s.x_l[k] * ei);
        gb += -dq / (2.0 * s2 * om);
        gs += -1.0 / s2 + qf / (2.0 * s2 * s2 * om);
        gp += ps / om + (2.0 * ei * el) / (2.0 * s2 * om) - qf * 2.0 * ps / (2.0 * s2 * om * om);
    }
    [gb, gs, gp]
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
