use super::{pairwise_loglik, PairedSample, PlFit, PlParams};
use crate::error::{Error, Result};
use crate::optim::NelderMead;

const PSI_GRID: [f64; 7] = [-0.9, -0.6, -0.3, 0.0, 0.3, 0.6, 0.9];
const MAX_RESTARTS: usize = 12;

/// Maximizes the pairwise log-likelihood numerically, without using the
/// closed-form equations.
///
/// The search runs over `(beta, ln sigma2, atanh psi)` with Nelder–Mead from
/// one start per grid value of `psi`, then restarts from the best vertex until
/// a restart no longer improves the objective.
pub fn numerical_pl_mle(s: &PairedSample) -> Result<PlFit> {
    let q = s.q();
    if q < 3 {
        return Err(Error::InsufficientCouples {
            required: 3,
            got: q,
        });
    }
    let neg_loglik = |v: &[f64]| -> f64 {
        let p = PlParams::new(v[0], v[1].exp(), v[2].tanh());
        pairwise_loglik(s, &p).map(|l| -l).unwrap_or(f64::INFINITY)
    };

    let (sxy, sxx) = (0..q).fold((0.0, 0.0), |(sxy, sxx), k| {
        (
            sxy + s.x_i[k] * s.y_i[k] + s.x_l[k] * s.y_l[k],
            sxx + s.x_i[k] * s.x_i[k] + s.x_l[k] * s.x_l[k],
        )
    });
    let beta0 = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let var0 = s.residuals(beta0).map(|(a, b)| a * a + b * b).sum::<f64>() / (2 * q) as f64;
    if !(var0 > 0.0) {
        return Err(Error::NoConvergence(
            "zero residual variance at the start".into(),
        ));
    }
    let beta_step = 0.1 * beta0.abs().max(1.0);
    let steps = [beta_step, 0.2, 0.2];

    let nm = NelderMead::default();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut iterations = 0;
    for &psi0 in &PSI_GRID {
        let start = [beta0, var0.ln(), f64::atanh(psi0)];
        let m = nm.minimize(neg_loglik, &start, &steps);
        iterations += m.iterations;
        if best.as_ref().is_none_or(|(_, f)| m.f < *f) {
            best = Some((m.x, m.f));
        }
    }
    let (mut x, mut f) = best.expect("grid is nonempty");

    let mut converged = false;
    let small = [1e-3 * beta_step, 1e-3, 1e-3];
    for _ in 0..MAX_RESTARTS {
        let m = nm.minimize(neg_loglik, &x, &small);
        iterations += m.iterations;
        let gain = f - m.f;
        if m.f <= f {
            x = m.x;
            f = m.f;
        }
        if gain <= 1e-14 * (1.0 + f.abs()) {
            converged = true;
            break;
        }
    }
    if !f.is_finite() {
        return Err(Error::NoConvergence(
            "objective is not finite at the optimum".into(),
        ));
    }
    Ok(PlFit {
        params: PlParams::new(x[0], x[1].exp(), x[2].tanh()),
        iterations,
        converged,
        loglik: -f,
        q,
    })
}
