//! Derivative-free local minimization (Nelder–Mead with dimension-adaptive coefficients).
//!
//! Constraints are handled by the caller: the objective is expected to evaluate at the
//! projection of its argument onto the admissible set plus a distance penalty.

#[derive(Clone, Copy, Debug)]
pub struct NelderMead {
    pub max_iters: usize,
    /// Relative spread of objective values across the simplex.
    pub ftol: f64,
    /// Largest coordinate distance between a vertex and the best vertex.
    pub xtol: f64,
    /// Simplex rebuilds around the best point after convergence.
    pub restarts: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            max_iters: 2000,
            ftol: 1e-8,
            xtol: 1e-7,
            restarts: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iters: usize,
    pub evals: usize,
    pub converged: bool,
}

impl NelderMead {
    pub fn minimize<F>(&self, mut f: F, x0: &[f64], step: &[f64]) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
    {
        let mut evals = 0usize;
        let mut eval = |x: &[f64]| {
            evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        let n = x0.len();
        if n == 0 {
            let fx = eval(x0);
            return Minimum { x: vec![], fx, iters: 0, evals: 1, converged: true };
        }

        let mut best_x = x0.to_vec();
        let mut best_f = eval(x0);
        let mut iters = 0;
        let mut converged = false;
        let mut scale = 1.0;
        for round in 0..=self.restarts {
            let (x, fx, it, conv) = self.run(&mut eval, &best_x, best_f, step, scale, self.max_iters.saturating_sub(iters));
            iters += it;
            let improved = best_f - fx;
            if fx <= best_f {
                best_x = x;
                best_f = fx;
            }
            converged = conv;
            if !conv || iters >= self.max_iters {
                break;
            }
            // a restart that barely moves means the first simplex had not collapsed early
            if round > 0 && improved <= self.ftol * (best_f.abs() + self.ftol) {
                break;
            }
            scale *= 0.1;
        }
        Minimum { x: best_x, fx: best_f, iters, evals, converged }
    }

    fn run<E>(&self, eval: &mut E, x0: &[f64], f0: f64, step: &[f64], scale: f64, budget: usize) -> (Vec<f64>, f64, usize, bool)
    where
        E: FnMut(&[f64]) -> f64,
    {
        let n = x0.len();
        let nf = n as f64;
        let alpha = 1.0;
        let gamma = 1.0 + 2.0 / nf;
        let rho = 0.75 - 1.0 / (2.0 * nf);
        let sigma = 1.0 - 1.0 / nf;

        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((x0.to_vec(), f0));
        for i in 0..n {
            let mut v = x0.to_vec();
            let h = step[i] * scale;
            v[i] += if h == 0.0 { 1e-4 } else { h };
            let fv = eval(&v);
            simplex.push((v, fv));
        }

        let mut centroid = vec![0.0; n];
        let mut trial = vec![0.0; n];
        let mut iters = 0;
        let mut converged = false;
        while iters < budget {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let f_best = simplex[0].1;
            let f_worst = simplex[n].1;
            let fspread = f_worst - f_best;
            let xspread = simplex[1..]
                .iter()
                .flat_map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if f_best.is_finite() && fspread <= self.ftol * (f_best.abs() + self.ftol) && xspread <= self.xtol.max(self.ftol) {
                converged = true;
                break;
            }
            iters += 1;

            centroid.fill(0.0);
            for (v, _) in &simplex[..n] {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / nf;
                }
            }
            let along = |coef: f64, out: &mut Vec<f64>, worst: &[f64]| {
                for ((o, c), w) in out.iter_mut().zip(&centroid).zip(worst) {
                    *o = c + coef * (c - w);
                }
            };

            let worst = simplex[n].0.clone();
            along(alpha, &mut trial, &worst);
            let fr = eval(&trial);
            if fr < f_best {
                let reflected = trial.clone();
                along(alpha * gamma, &mut trial, &worst);
                let fe = eval(&trial);
                simplex[n] = if fe < fr { (trial.clone(), fe) } else { (reflected, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (trial.clone(), fr);
                continue;
            }
            let (coef, bound) = if fr < f_worst { (alpha * rho, fr) } else { (-rho, f_worst) };
            along(coef, &mut trial, &worst);
            let fc = eval(&trial);
            if fc < bound {
                simplex[n] = (trial.clone(), fc);
                continue;
            }
            let best = simplex[0].0.clone();
            for (v, fv) in simplex.iter_mut().skip(1) {
                for (x, b) in v.iter_mut().zip(&best) {
                    *x = b + sigma * (*x - b);
                }
                *fv = eval(v);
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, fx) = simplex.swap_remove(0);
        (x, fx, iters, converged)
    }
}
