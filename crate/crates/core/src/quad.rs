//! Quadrature toolbox shared across modules: adaptive Gauss-Kronrod,
//! composite Gauss-Legendre, power-law weighted rules for weakly singular
//! integrands, Filon-type oscillatory integrals, and Neville extrapolation.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// 15-point Kronrod abscissae (descending), with the embedded 7-point Gauss
/// rule at the odd indices.
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// One Gauss-Kronrod 7-15 panel. Returns (kronrod value, |K - G| estimate).
fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (i, &x) in XGK.iter().enumerate().take(7) {
        let dx = half * x;
        let fsum = f(center - dx) + f(center + dx);
        kronrod += fsum * WGK[i];
        if i % 2 == 1 {
            gauss += fsum * WG[i / 2];
        }
    }
    kronrod *= half;
    gauss *= half;
    let raw = (kronrod - gauss).norm();
    // Sharpen the raw difference the way QUADPACK does.
    let err = if raw > 0.0 {
        (200.0 * raw).powf(1.5).min(raw).max(raw * 1e-3)
    } else {
        0.0
    };
    (kronrod, err)
}

/// Adaptive bisection built on the 7-15 pair, absolute tolerance.
pub fn adaptive_gk<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    max_panels: usize,
) -> Result<Complex64> {
    if a == b {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let (v, e) = gk15(f, a, b);
    // (neg error, a, b, value, err) max-heap substitute on a Vec.
    let mut panels = vec![(a, b, v, e)];
    let mut total_err: f64 = e;
    while total_err > tol && panels.len() < max_panels {
        // Split the worst panel.
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (pa, pb, _, pe) = panels.swap_remove(idx);
        let mid = 0.5 * (pa + pb);
        if mid <= pa || mid >= pb {
            // Interval exhausted at machine precision; keep the estimate.
            total_err -= pe;
            panels.push((pa, pb, gk15(f, pa, pb).0, 0.0));
            continue;
        }
        let (v1, e1) = gk15(f, pa, mid);
        let (v2, e2) = gk15(f, mid, pb);
        total_err = total_err - pe + e1 + e2;
        panels.push((pa, mid, v1, e1));
        panels.push((mid, pb, v2, e2));
    }
    let sum = panels
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, p| acc + p.2);
    if total_err > tol.max(1e-14) * 50.0 {
        return Err(Error::QuadratureFailure {
            tol,
            err: total_err,
        });
    }
    Ok(sum)
}

pub fn adaptive_gk_real<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    max_panels: usize,
) -> Result<f64> {
    adaptive_gk(&|x| Complex64::new(f(x), 0.0), a, b, tol, max_panels).map(|v| v.re)
}

/// Gauss-Legendre rule of given order on [-1, 1], by Golub-Welsch.
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let n = order;
        let mut jacobi = nalgebra::DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let kf = k as f64;
            let off = kf / (4.0 * kf * kf - 1.0).sqrt();
            jacobi[(k - 1, k)] = off;
            jacobi[(k, k - 1)] = off;
        }
        let eig = nalgebra::SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], 2.0 * v0 * v0)
            })
            .collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        GaussLegendre {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn integrate<F: Fn(f64) -> Complex64>(&self, f: F, a: f64, b: f64) -> Complex64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut acc = Complex64::new(0.0, 0.0);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += f(c + h * x) * *w;
        }
        acc * h
    }

    /// Composite rule with panels of width at most `panel`.
    pub fn integrate_composite<F: Fn(f64) -> Complex64>(
        &self,
        f: F,
        a: f64,
        b: f64,
        panel: f64,
    ) -> Complex64 {
        if b <= a {
            return Complex64::new(0.0, 0.0);
        }
        let count = (((b - a) / panel).ceil() as usize).max(1);
        let width = (b - a) / count as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..count {
            let pa = a + k as f64 * width;
            acc += self.integrate(&f, pa, pa + width);
        }
        acc
    }
}

/// Weakly singular integral over [0, b]: computes
/// `int_0^b f(p) p^{-kappa} dp`, 0 <= kappa < 1, by the power substitution
/// `v = p^{1-kappa}` which removes the weight exactly.
pub fn power_weighted_lower<F: Fn(f64) -> Complex64>(
    f: &F,
    kappa: f64,
    b: f64,
    tol: f64,
) -> Result<Complex64> {
    assert!((0.0..1.0).contains(&kappa));
    if b <= 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let gamma = 1.0 / (1.0 - kappa);
    let vmax = b.powf(1.0 - kappa);
    let g = |v: f64| {
        if v <= 0.0 {
            f(0.0.max(v))
        } else {
            f(v.powf(gamma))
        }
    };
    Ok(adaptive_gk(&g, 0.0, vmax, tol * (1.0 - kappa), 4000)? * gamma)
}

/// Filon-Simpson quadrature of `int_a^b amp(x) exp(-i omega x) dx`.
///
/// The amplitude is resolved by `step` (panels of that width, quadratic fit),
/// the oscillation is handled exactly by the moment formulas, so the cost is
/// independent of `omega`.
pub fn oscillatory_integral<F: Fn(f64) -> Complex64>(
    amp: &F,
    a: f64,
    b: f64,
    step: f64,
    omega: f64,
) -> Complex64 {
    if b <= a {
        return Complex64::new(0.0, 0.0);
    }
    let count = (((b - a) / step).ceil() as usize).max(1);
    let width = (b - a) / count as f64;
    let half = 0.5 * width;
    let theta = omega * half;
    let mut acc = Complex64::new(0.0, 0.0);
    if theta.abs() < 0.5 {
        // Slow phase: ordinary Gauss on the full product is stable.
        let gl = GaussLegendre::new(8);
        let i = Complex64::i();
        return gl.integrate_composite(
            |x| amp(x) * (-i * omega * x).exp(),
            a,
            b,
            width,
        );
    }
    let (m0, m1, m2) = filon_moments(theta);
    let mut left = amp(a);
    for k in 0..count {
        let x0 = a + k as f64 * width;
        let xm = x0 + half;
        let x2 = x0 + width;
        let fm = amp(xm);
        let right = amp(x2);
        // Quadratic through the three samples in s = (x - xm)/half.
        let c0 = fm;
        let c1 = (right - left) * 0.5;
        let c2 = (right + left) * 0.5 - fm;
        let phase = (-Complex64::i() * omega * xm).exp();
        acc += phase * (c0 * m0 + c1 * m1 + c2 * m2) * half;
        left = right;
    }
    acc
}

/// Moments int_{-1}^{1} s^k exp(-i theta s) ds for k = 0, 1, 2.
fn filon_moments(theta: f64) -> (Complex64, Complex64, Complex64) {
    let (s, c) = theta.sin_cos();
    let t = theta;
    let m0 = Complex64::new(2.0 * s / t, 0.0);
    let m1 = Complex64::new(0.0, 2.0 * (t * c - s) / (t * t));
    let m2 = Complex64::new((2.0 * t * t * s + 4.0 * t * c - 4.0 * s) / (t * t * t), 0.0);
    (m0, m1, m2)
}

/// Neville polynomial extrapolation of the samples (xs, ys) to `x`.
/// Returns the value and the magnitude of the last correction.
pub fn neville_extrapolate(xs: &[f64], ys: &[Complex64], x: f64) -> (Complex64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(!xs.is_empty());
    let n = xs.len();
    let mut tab: Vec<Complex64> = ys.to_vec();
    let mut last = tab[n - 1];
    for m in 1..n {
        for i in 0..n - m {
            let denom = xs[i] - xs[i + m];
            tab[i] = ((x - xs[i + m]) * tab[i] - (x - xs[i]) * tab[i + 1]) / denom;
        }
        last = tab[0];
    }
    let err = if n >= 2 {
        (last - {
            // Extrapolation with one fewer point, for the error estimate.
            let (v, _) = neville_raw(&xs[..n - 1], &ys[..n - 1], x);
            v
        })
        .norm()
    } else {
        0.0
    };
    (last, err)
}

fn neville_raw(xs: &[f64], ys: &[Complex64], x: f64) -> (Complex64, f64) {
    let n = xs.len();
    let mut tab: Vec<Complex64> = ys.to_vec();
    for m in 1..n {
        for i in 0..n - m {
            let denom = xs[i] - xs[i + m];
            tab[i] = ((x - xs[i + m]) * tab[i] - (x - xs[i]) * tab[i + 1]) / denom;
        }
    }
    (tab[0], 0.0)
}

/// Least-squares slope of log(err) against log(eps).
pub fn loglog_slope(eps: &[f64], err: &[f64]) -> Result<f64> {
    if eps.len() != err.len() || eps.len() < 2 {
        return Err(Error::DegenerateFit {
            context: "need at least two positive samples".into(),
        });
    }
    if err.iter().any(|&e| e <= 0.0) || eps.iter().any(|&e| e <= 0.0) {
        return Err(Error::DegenerateFit {
            context: "nonpositive value in log-log fit".into(),
        });
    }
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit {
            context: "all abscissae equal".into(),
        });
    }
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gk_polynomial_exact() {
        let v = adaptive_gk_real(&|x| x * x * x - 2.0 * x + 1.0, -1.0, 3.0, 1e-12, 100).unwrap();
        // int = [x^4/4 - x^2 + x] from -1 to 3
        assert_relative_eq!(v, 24.0, epsilon = 1e-10);
    }

    #[test]
    fn gk_sqrt_singularity() {
        let v = adaptive_gk_real(&|x: f64| x.sqrt(), 0.0, 1.0, 1e-10, 4000).unwrap();
        assert_relative_eq!(v, 2.0 / 3.0, epsilon = 1e-8);
    }

    #[test]
    fn gl_order_and_composite() {
        let gl = GaussLegendre::new(6);
        let v = gl.integrate(|x| Complex64::new(x.powi(10), 0.0), 0.0, 1.0);
        assert_relative_eq!(v.re, 1.0 / 11.0, epsilon = 1e-12);
        let c = gl.integrate_composite(|x| Complex64::new(x.cos(), 0.0), 0.0, 2.0, 0.1);
        assert_relative_eq!(c.re, 2.0_f64.sin(), epsilon = 1e-12);
    }

    #[test]
    fn power_weight_matches_closed_form() {
        // int_0^1 p^{-1/2} dp = 2, with f = 1.
        let v = power_weighted_lower(&|_| Complex64::new(1.0, 0.0), 0.5, 1.0, 1e-12).unwrap();
        assert_relative_eq!(v.re, 2.0, epsilon = 1e-10);
        // int_0^2 cos(p) p^{-1/3} dp against adaptive reference.
        let f = |p: f64| Complex64::new(p.cos(), 0.0);
        let v = power_weighted_lower(&f, 1.0 / 3.0, 2.0, 1e-11).unwrap();
        let reference =
            adaptive_gk_real(&|p: f64| p.cos() * p.powf(-1.0 / 3.0), 1e-12, 2.0, 1e-11, 8000)
                .unwrap();
        assert_relative_eq!(v.re, reference, epsilon = 1e-6);
    }

    #[test]
    fn filon_against_direct() {
        // int_0^10 exp(-x) exp(-i omega x) dx = (1 - exp(-10(1+i omega)))/(1 + i omega)
        for &omega in &[0.05, 3.0, 40.0, 400.0] {
            let v = oscillatory_integral(
                &|x: f64| Complex64::new((-x).exp(), 0.0),
                0.0,
                10.0,
                0.02,
                omega,
            );
            let denom = Complex64::new(1.0, omega);
            let exact = (Complex64::new(1.0, 0.0)
                - (Complex64::new(-10.0, -10.0 * omega)).exp())
                / denom;
            assert!((v - exact).norm() < 1e-6, "omega={omega}: {v} vs {exact}");
        }
    }

    #[test]
    fn neville_extrapolates_quadratic() {
        let xs = [0.4, 0.2, 0.1];
        let ys: Vec<Complex64> = xs
            .iter()
            .map(|&d| Complex64::new(3.0 + 2.0 * d - d * d, 0.0))
            .collect();
        let (v, err) = neville_extrapolate(&xs, &ys, 0.0);
        assert_relative_eq!(v.re, 3.0, epsilon = 1e-12);
        assert!(err < 0.2);
    }

    #[test]
    fn slope_fit() {
        let eps = [0.4, 0.2, 0.1];
        let err = [0.4, 0.2, 0.1];
        assert_relative_eq!(loglog_slope(&eps, &err).unwrap(), 1.0, epsilon = 1e-12);
    }
}
