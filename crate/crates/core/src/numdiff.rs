//! Central finite differences for gradients and Hessians.

/// Central-difference gradient of `f` at `p` with step `step`.
pub fn gradient<F: Fn(&[f64]) -> f64>(f: F, p: &[f64], step: f64) -> Vec<f64> {
    let n = p.len();
    let mut q = p.to_vec();
    let mut out = vec![0.0; n];
    for i in 0..n {
        q[i] = p[i] + step;
        let fp = f(&q);
        q[i] = p[i] - step;
        let fm = f(&q);
        q[i] = p[i];
        out[i] = (fp - fm) / (2.0 * step);
    }
    out
}

/// Fourth-order five-point gradient: error `O(step⁴)` plus roundoff `O(ε/step)`.
pub fn gradient5<F: Fn(&[f64]) -> f64>(f: F, p: &[f64], step: f64) -> Vec<f64> {
    let n = p.len();
    let mut q = p.to_vec();
    let mut out = vec![0.0; n];
    let at = |i: usize, k: f64, q: &mut [f64]| {
        q[i] = p[i] + k * step;
        let v = f(q);
        q[i] = p[i];
        v
    };
    for (i, o) in out.iter_mut().enumerate() {
        let (f2, f1, m1, m2) = (at(i, 2.0, &mut q), at(i, 1.0, &mut q), at(i, -1.0, &mut q), at(i, -2.0, &mut q));
        *o = (8.0 * (f1 - m1) - (f2 - m2)) / (12.0 * step);
    }
    out
}

/// Central second-difference Hessian (row-major, `n * n`).
pub fn hessian<F: Fn(&[f64]) -> f64>(f: F, p: &[f64], step: f64) -> Vec<f64> {
    let n = p.len();
    let mut q = p.to_vec();
    let mut out = vec![0.0; n * n];
    let f0 = f(p);
    let h2 = step * step;
    for i in 0..n {
        q[i] = p[i] + step;
        let fp = f(&q);
        q[i] = p[i] - step;
        let fm = f(&q);
        q[i] = p[i];
        out[i * n + i] = (fp - 2.0 * f0 + fm) / h2;
        for j in (i + 1)..n {
            let mut corner = |si: f64, sj: f64| {
                q[i] = p[i] + si * step;
                q[j] = p[j] + sj * step;
                let v = f(&q);
                q[i] = p[i];
                q[j] = p[j];
                v
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0)) / (4.0 * h2);
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
    }
    out
}

/// Jacobian of a vector map by central differences; row `i` holds the
/// derivatives of component `i`.
pub fn jacobian<F: Fn(&[f64]) -> Vec<f64>>(f: F, p: &[f64], step: f64) -> Vec<Vec<f64>> {
    let n = p.len();
    let mut q = p.to_vec();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        q[j] = p[j] + step;
        let fp = f(&q);
        q[j] = p[j] - step;
        let fm = f(&q);
        q[j] = p[j];
        cols.push(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * step)).collect::<Vec<_>>());
    }
    let m = cols.first().map_or(0, Vec::len);
    (0..m).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_point_gradient_is_fourth_order() {
        let f = |p: &[f64]| (1.0 + p[0] * p[0] + p[1] * p[1]).sqrt();
        let p = [0.7, -0.4];
        let r = f(&p);
        let exact = [p[0] / r, p[1] / r];
        let g = gradient5(f, &p, 1e-3);
        assert!((g[0] - exact[0]).abs() < 1e-12 && (g[1] - exact[1]).abs() < 1e-12, "{g:?}");
        let coarse = gradient5(f, &p, 0.1);
        let fine = gradient5(f, &p, 0.05);
        let ratio = (coarse[0] - exact[0]).abs() / (fine[0] - exact[0]).abs();
        assert!((12.0..20.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn exact_on_quadratics() {
        let f = |p: &[f64]| 3.0 * p[0] * p[0] + p[0] * p[1] - 2.0 * p[1] * p[1];
        let g = gradient(f, &[0.5, -1.0], 1e-3);
        assert!((g[0] - 2.0).abs() < 1e-9 && (g[1] - 4.5).abs() < 1e-9);
        let h = hessian(f, &[0.5, -1.0], 1e-3);
        let want = [6.0, 1.0, 1.0, -4.0];
        for (a, b) in h.iter().zip(want) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn jacobian_of_linear_map() {
        let j = jacobian(|p| vec![p[0] + 2.0 * p[1], -p[1]], &[1.0, 1.0], 1e-4);
        assert!((j[0][1] - 2.0).abs() < 1e-10 && (j[1][1] + 1.0).abs() < 1e-10);
        assert!(j[1][0].abs() < 1e-12);
    }
}
