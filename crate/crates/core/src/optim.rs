//! Dense BFGS with Armijo backtracking, for small smooth problems.

#[derive(Debug, Clone)]
pub(crate) struct BfgsOptions {
    pub max_iter: usize,
    /// Converged when the largest gradient component falls below this.
    pub grad_tol: f64,
    /// Largest per-coordinate move in a single step.
    pub max_step: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct BfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn minimize<F>(mut objective: F, x0: Vec<f64>, opts: &BfgsOptions) -> BfgsOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0;
    let (mut f, mut g) = objective(&x);
    // inverse Hessian approximation, row-major
    let mut h = vec![0.0; n * n];
    let reset = |h: &mut Vec<f64>, scale: f64| {
        h.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            h[i * n + i] = scale;
        }
    };
    reset(&mut h, 1.0);
    let mut scaled = false;
    let mut iterations = 0;
    let mut stalls = 0;

    while iterations < opts.max_iter {
        let gnorm = inf_norm(&g);
        if gnorm <= opts.grad_tol {
            return BfgsOutcome { x, f, grad_norm: gnorm, iterations, converged: true };
        }
        iterations += 1;

        let mut dir: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
        let mut slope = dot(&dir, &g);
        if !(slope < 0.0) {
            reset(&mut h, 1.0);
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let longest = inf_norm(&dir);
        let mut step = if longest > opts.max_step { opts.max_step / longest } else { 1.0 };

        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            let (ft, gt) = objective(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            // no decrease along a descent direction: we are at the limit of
            // floating-point resolution
            if stalls > 0 {
                return BfgsOutcome { x, f, grad_norm: gnorm, iterations, converged: false };
            }
            stalls += 1;
            reset(&mut h, 1.0);
            scaled = false;
            continue;
        };
        stalls = 0;

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if !scaled {
                reset(&mut h, sy / dot(&y, &y));
                scaled = true;
            }
            // H <- (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
        }
        x = x_new;
        f = f_new;
        g = g_new;
    }
    let grad_norm = inf_norm(&g);
    BfgsOutcome { x, f, grad_norm, iterations, converged: grad_norm <= opts.grad_tol }
}
