//! Derivative-free Nelder–Mead minimizer (standard coefficients).

#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    pub max_iter: usize,
    /// Stop once the spread of simplex values is below `f_tol * (1 + |f_best|)`
    pub f_tol: f64,
    /// ... and every vertex is within `x_tol` of the best one (max-norm).
    pub x_tol: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            f_tol: 1e-15,
            x_tol: 1e-11,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl NelderMead {
    /// Minimizes `f` from `x0` with an axis-aligned initial simplex of the given
    /// per-coordinate steps. Non-finite objective values are treated as +inf.
    pub fn minimize<F>(&self, mut f: F, x0: &[f64], steps: &[f64]) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
    {
        let dim = x0.len();
        let mut eval = |x: &[f64]| {
            let v = f(x);
            if v.is_finite() {
                v
            } else {
                f64::INFINITY
            }
        };
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
        simplex.push(x0.to_vec());
        for (j, step) in steps.iter().enumerate() {
            let mut v = x0.to_vec();
            v[j] += step;
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iter {
            iterations += 1;
            let mut idx: Vec<usize> = (0..=dim).collect();
            idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
            values = idx.iter().map(|&i| values[i]).collect();

            let best = values[0];
            let worst = values[dim];
            let spread = worst - best;
            let diameter = simplex[1..]
                .iter()
                .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if spread <= self.f_tol * (1.0 + best.abs()) && diameter <= self.x_tol {
                converged = true;
                break;
            }

            let mut centroid = vec![0.0; dim];
            for v in &simplex[..dim] {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / dim as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[dim])
                    .map(|(c, w)| c + t * (w - c))
                    .collect()
            };

            let xr = along(-alpha);
            let fr = eval(&xr);
            if fr < values[0] {
                let xe = along(-gamma);
                let fe = eval(&xe);
                if fe < fr {
                    simplex[dim] = xe;
                    values[dim] = fe;
                } else {
                    simplex[dim] = xr;
                    values[dim] = fr;
                }
                continue;
            }
            if fr < values[dim - 1] {
                simplex[dim] = xr;
                values[dim] = fr;
                continue;
            }
            // Outside contraction when the reflection beat the worst vertex,
            // inside contraction otherwise.
            let (xc, fc, target) = if fr < values[dim] {
                let xc = along(-rho);
                let fc = eval(&xc);
                (xc, fc, fr)
            } else {
                let xc = along(rho);
                let fc = eval(&xc);
                (xc, fc, values[dim])
            };
            if fc < target {
                simplex[dim] = xc;
                values[dim] = fc;
                continue;
            }
            let best = simplex[0].clone();
            for i in 1..=dim {
                let shrunk: Vec<f64> = best
                    .iter()
                    .zip(&simplex[i])
                    .map(|(b, x)| b + sigma * (x - b))
                    .collect();
                values[i] = eval(&shrunk);
                simplex[i] = shrunk;
            }
        }
        let best = (0..=dim)
            .min_by(|&a, &b| values[a].total_cmp(&values[b]))
            .unwrap_or(0);
        Minimum {
            x: simplex[best].clone(),
            f: values[best],
            iterations,
            converged,
        }
    }
}
