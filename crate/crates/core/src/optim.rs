//! Derivative-free Nelder-Mead simplex minimizer.
//!
//! All likelihood objectives in this crate are reparameterized onto the
//! unconstrained real line before optimization, so no bound handling is
//! needed here. Infeasible trial points may return `f64::INFINITY`.

/// Outcome of a simplex run.
#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct NelderMead {
    pub max_iterations: usize,
    /// Converged when (f_worst - f_best) < tol * (1 + |f_best|).
    pub tolerance: f64,
    /// Initial simplex displacement per coordinate.
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            max_iterations: 4000,
            tolerance: 1e-7,
            initial_step: 0.25,
        }
    }
}

impl NelderMead {
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> OptimResult {
        let dim = x0.len();
        let alpha = 1.0; // reflection
        let gamma = 2.0; // expansion
        let rho = 0.5; // contraction
        let sigma = 0.5; // shrink

        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
        simplex.push(x0.to_vec());
        for i in 0..dim {
            let mut p = x0.to_vec();
            let step = if p[i].abs() > 1.0 {
                self.initial_step * p[i].abs()
            } else {
                self.initial_step
            };
            p[i] += step;
            simplex.push(p);
        }
        let mut scores: Vec<f64> = simplex.iter().map(|p| f(p)).collect();

        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iterations {
            iterations += 1;
            let mut order: Vec<usize> = (0..=dim).collect();
            order.sort_by(|&i, &j| {
                scores[i]
                    .partial_cmp(&scores[j])
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            let best = order[0];
            let worst = order[dim];
            let second_worst = order[dim - 1];

            if scores[worst].is_finite()
                && (scores[worst] - scores[best]).abs()
                    < self.tolerance * (1.0 + scores[best].abs())
            {
                converged = true;
                break;
            }

            let mut centroid = vec![0.0; dim];
            for &idx in order.iter().take(dim) {
                for d in 0..dim {
                    centroid[d] += simplex[idx][d];
                }
            }
            for c in centroid.iter_mut() {
                *c /= dim as f64;
            }

            let reflected: Vec<f64> = (0..dim)
                .map(|d| centroid[d] + alpha * (centroid[d] - simplex[worst][d]))
                .collect();
            let f_r = f(&reflected);

            if f_r < scores[second_worst] && f_r >= scores[best] {
                simplex[worst] = reflected;
                scores[worst] = f_r;
                continue;
            }

            if f_r < scores[best] {
                let expanded: Vec<f64> = (0..dim)
                    .map(|d| centroid[d] + gamma * (reflected[d] - centroid[d]))
                    .collect();
                let f_e = f(&expanded);
                if f_e < f_r {
                    simplex[worst] = expanded;
                    scores[worst] = f_e;
                } else {
                    simplex[worst] = reflected;
                    scores[worst] = f_r;
                }
                continue;
            }

            let contracted: Vec<f64> = (0..dim)
                .map(|d| centroid[d] + rho * (simplex[worst][d] - centroid[d]))
                .collect();
            let f_c = f(&contracted);
            if f_c < scores[worst] {
                simplex[worst] = contracted;
                scores[worst] = f_c;
                continue;
            }

            for &idx in order.iter().skip(1) {
                for d in 0..dim {
                    simplex[idx][d] =
                        simplex[best][d] + sigma * (simplex[idx][d] - simplex[best][d]);
                }
                scores[idx] = f(&simplex[idx]);
            }
        }

        let best = (0..=dim)
            .min_by(|&i, &j| {
                scores[i]
                    .partial_cmp(&scores[j])
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        OptimResult {
            x: simplex[best].clone(),
            fx: scores[best],
            iterations,
            converged,
        }
    }
}
