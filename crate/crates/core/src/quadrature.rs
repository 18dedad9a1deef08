//! Deterministic quadrature rules shared by the constants cross-check, the
//! energy integrals and the sphere averages of the generalized kernel.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss-Legendre rule on [a, b]: `panels` equal panels with
/// `order` nodes each.
pub fn composite_gauss(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let width = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * width;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((mid + 0.5 * width * xi, 0.5 * width * wi));
        }
    }
    out
}

/// Double-exponential (tanh-sinh) rule on [a, b] with `n` nodes.
///
/// This is the trapezoid rule applied after the substitution
/// `x = m + h tanh(pi/2 sinh t)`; it stays spectrally accurate for
/// integrands with algebraic endpoint singularities such as `|cos θ|^q`
/// next to `θ = π/2`.
pub fn tanh_sinh(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    const T_MAX: f64 = 3.5;
    let step = 2.0 * T_MAX / n as f64;
    let half = 0.5 * (b - a);
    (0..n)
        .map(|k| {
            let t = -T_MAX + (k as f64 + 0.5) * step;
            let u = 0.5 * PI * t.sinh();
            // distance to the nearer endpoint, computed without cancellation
            let e = (-2.0 * u.abs()).exp();
            let gap = 2.0 * half * e / (1.0 + e);
            let x = if u < 0.0 { a + gap } else { b - gap };
            let cu = u.cosh();
            let w = step * half * 0.5 * PI * t.cosh() / (cu * cu);
            (x, w)
        })
        .collect()
}

/// Integral of `f` over the unit sphere S^{N-1} with respect to H^{N-1},
/// for N in {1, 2, 3}.
///
/// N = 1 sums over the two points {-1, +1}. N = 2 integrates on the angle,
/// N = 3 uses a product rule on (θ, φ) with the sin θ weight. Angular pieces
/// are split where z₁ = 0 so kinks of |z₁|^q sit at panel endpoints.
pub fn sphere_integral<F>(dim: usize, resolution: usize, mut f: F) -> Option<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    match dim {
        1 => Some(f(&[1.0]) + f(&[-1.0])),
        2 => {
            let per_piece = (resolution / 2).max(8);
            let mut total = 0.0;
            for (a, b) in [(-0.5 * PI, 0.5 * PI), (0.5 * PI, 1.5 * PI)] {
                for (theta, w) in tanh_sinh(a, b, per_piece) {
                    total += w * f(&[theta.cos(), theta.sin()]);
                }
            }
            Some(total)
        }
        3 => {
            let per_piece = (resolution / 2).max(8);
            let n_phi = (resolution / 32).max(16);
            let d_phi = 2.0 * PI / n_phi as f64;
            let mut total = 0.0;
            for (a, b) in [(0.0, 0.5 * PI), (0.5 * PI, PI)] {
                for (theta, w) in tanh_sinh(a, b, per_piece) {
                    let (st, ct) = theta.sin_cos();
                    let mut ring = 0.0;
                    for j in 0..n_phi {
                        let phi = j as f64 * d_phi;
                        let (sp, cp) = phi.sin_cos();
                        ring += f(&[ct, st * cp, st * sp]);
                    }
                    total += w * st * ring * d_phi;
                }
            }
            Some(total)
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // degree 15 is the exactness limit for 8 nodes
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert_relative_eq!(integral, 2.0 / 15.0, max_relative = 1e-13);
        let total: f64 = w.iter().sum();
        assert_relative_eq!(total, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn tanh_sinh_handles_endpoint_singularity() {
        let rule = tanh_sinh(0.0, 1.0, 200);
        let integral: f64 = rule.iter().map(|(x, w)| w * x.sqrt().recip()).sum();
        assert_relative_eq!(integral, 2.0, max_relative = 1e-8);
    }

    #[test]
    fn sphere_integral_of_one_is_area() {
        assert_eq!(sphere_integral(1, 16, |_| 1.0), Some(2.0));
        assert_relative_eq!(
            sphere_integral(2, 256, |_| 1.0).unwrap(),
            2.0 * PI,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            sphere_integral(3, 256, |_| 1.0).unwrap(),
            4.0 * PI,
            max_relative = 1e-12
        );
        assert!(sphere_integral(4, 256, |_| 1.0).is_none());
    }
}
