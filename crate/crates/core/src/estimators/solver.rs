use super::{FitConfig, FitInfo};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Proximal gradient descent with backtracking on `smooth(x) + penalty(x)`.
///
/// `prox(z, step)` maps the gradient step `z` onto the proximal point of
/// `step · penalty` (or projects onto a constraint set). A step is accepted
/// only if it satisfies the quadratic upper-bound condition and does not
/// increase the composite objective, so the recorded trace is nonincreasing.
pub(crate) fn proximal_gradient<S, P, X>(
    mut x: Vec<f64>,
    smooth: S,
    penalty: P,
    prox: X,
    cfg: &FitConfig,
) -> (Vec<f64>, FitInfo)
where
    S: Fn(&[f64]) -> (f64, Vec<f64>),
    P: Fn(&[f64]) -> f64,
    X: Fn(&mut [f64], f64),
{
    prox(&mut x, 0.0);
    let (mut f, mut g) = smooth(&x);
    let mut total = f + penalty(&x);
    let mut trace = vec![total];
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;

    'outer: for iter in 1..=cfg.max_iters {
        iterations = iter;
        let mut z;
        let mut diff;
        let (fz, gz) = loop {
            z = x.iter().zip(&g).map(|(xi, gi)| xi - step * gi).collect::<Vec<_>>();
            prox(&mut z, step);
            diff = z.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>();
            let (fz, gz) = smooth(&z);
            let bound = f + dot(&g, &diff) + dot(&diff, &diff) / (2.0 * step);
            if fz <= bound + 1e-14 * f.abs().max(1.0) {
                break (fz, gz);
            }
            step *= 0.5;
            if step < 1e-20 {
                converged = true;
                break 'outer;
            }
        };
        let total_z = fz + penalty(&z);
        if total_z > total {
            // No representable descent left.
            converged = true;
            break;
        }
        let decrease = total - total_z;
        let step_norm = dot(&diff, &diff).sqrt();
        x = z;
        f = fz;
        g = gz;
        total = total_z;
        trace.push(total);
        if step_norm < cfg.step_tolerance || decrease < cfg.objective_tolerance {
            converged = true;
            break;
        }
        step = (step * 2.0).min(1e8);
    }

    (
        x,
        FitInfo {
            converged,
            iterations,
            objective_trace: trace,
        },
    )
}

/// In-place soft thresholding at level `t`.
pub(crate) fn soft_threshold(v: &mut [f64], t: f64) {
    for x in v {
        *x = x.signum() * (x.abs() - t).max(0.0);
    }
}
