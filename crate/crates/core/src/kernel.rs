//! RBF kernel primitives shared by the market generator and the kernel estimators.

/// `exp(−γ ‖a − b‖²)`.
#[inline]
pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * sq).exp()
}

/// Row-major Gram matrix of `points`.
pub fn gram<P: AsRef<[f64]>>(points: &[P], gamma: f64) -> Vec<f64> {
    let n = points.len();
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        g[i * n + i] = 1.0;
        for j in 0..i {
            let k = rbf(points[i].as_ref(), points[j].as_ref(), gamma);
            g[i * n + j] = k;
            g[j * n + i] = k;
        }
    }
    g
}

/// `y = G v` for a row-major square `G`.
pub fn sym_matvec(g: &[f64], v: &[f64], out: &mut [f64]) {
    let n = v.len();
    debug_assert_eq!(g.len(), n * n);
    for (i, o) in out.iter_mut().enumerate() {
        let row = &g[i * n..(i + 1) * n];
        *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

/// `vᵀ G v`.
pub fn quad_form(g: &[f64], v: &[f64]) -> f64 {
    let mut tmp = vec![0.0; v.len()];
    sym_matvec(g, v, &mut tmp);
    tmp.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Squared RKHS norm of `Σ coefs_i k(points_i, ·)`, computed without
/// materialising the Gram matrix.
pub fn expansion_norm_sq<P: AsRef<[f64]>>(points: &[P], coefs: &[f64], gamma: f64) -> f64 {
    let n = points.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += coefs[i] * coefs[i];
        let pi = points[i].as_ref();
        let mut row = 0.0;
        for j in 0..i {
            row += coefs[j] * rbf(pi, points[j].as_ref(), gamma);
        }
        acc += 2.0 * coefs[i] * row;
    }
    acc.max(0.0)
}

/// Evaluates `Σ coefs_i k(points_i, x)`.
pub fn expansion_eval<P: AsRef<[f64]>>(points: &[P], coefs: &[f64], gamma: f64, x: &[f64]) -> f64 {
    points
        .iter()
        .zip(coefs)
        .map(|(p, c)| c * rbf(p.as_ref(), x, gamma))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rbf_closed_forms() {
        let c = [0.2, -0.1, 0.4];
        assert_eq!(rbf(&c, &c, 0.5), 1.0);
        let x = [c[0] + 1.0, c[1] + 1.0, c[2]];
        assert!((rbf(&c, &x, 0.5) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn expansion_norm_agrees_with_gram_quadratic_form() {
        let pts = vec![vec![0.0, 0.5], vec![0.3, -0.2], vec![-0.9, 0.1]];
        let w = [1.0, -2.0, 0.5];
        let g = gram(&pts, 0.7);
        assert!((quad_form(&g, &w) - expansion_norm_sq(&pts, &w, 0.7)).abs() < 1e-12);
    }
}
