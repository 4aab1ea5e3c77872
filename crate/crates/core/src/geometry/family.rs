//! Defining functions for generalized Radon transform families.
//!
//! A family supplies x = Phi(t, y) together with analytic first and second
//! derivatives and the integration weights b (forward) and w (backprojection).
//! Construction cross-checks the analytic derivatives against central finite
//! differences and probes the rank assumptions at pseudo-random points.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A defining function Phi(t, y) with analytic derivatives, in the original
/// data coordinates.
pub trait Family: Send + Sync {
    /// Ambient dimension n.
    fn dim_ambient(&self) -> usize;
    /// Submanifold dimension N, 1 <= N <= n-1.
    fn dim_manifold(&self) -> usize;
    fn phi(&self, t: &[f64], y: &[f64]) -> DVector<f64>;
    /// n x (N + n) Jacobian with respect to the combined variables (t, y).
    fn phi_jacobian(&self, t: &[f64], y: &[f64]) -> DMatrix<f64>;
    /// One (N + n) x (N + n) Hessian per component of x.
    fn phi_hessian(&self, t: &[f64], y: &[f64]) -> Vec<DMatrix<f64>>;
    fn weight_b(&self, _x: &[f64], _y: &[f64]) -> f64 {
        1.0
    }
    fn weight_w(&self, _x: &[f64], _y: &[f64]) -> f64 {
        1.0
    }
    /// Box (t_lo, t_hi, y_lo, y_hi) where derivative and rank probes run.
    fn probe_box(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>);
    /// A t-box guaranteed to contain the part of S_y within `radius` of
    /// `center`. Returns lo > hi when the intersection is empty.
    fn t_window(&self, y: &[f64], center: &[f64], radius: f64) -> (Vec<f64>, Vec<f64>);
}

/// Report of the construction-time derivative and rank probes.
#[derive(Debug, Clone)]
pub struct ProbeReport {
    pub max_jacobian_rel_err: f64,
    pub max_hessian_rel_err: f64,
    pub min_phi_t_rank_ratio: f64,
    pub min_phi_ty_rank_ratio: f64,
}

/// A validated family handle. Cheap to clone.
#[derive(Clone)]
pub struct GrtFamily {
    inner: Arc<dyn Family>,
    probe: ProbeReport,
}

impl GrtFamily {
    /// Wraps a defining function, checking analytic derivatives against
    /// central differences (relative 1e-6) and the rank assumptions at
    /// pseudo-random probe points.
    pub fn new(inner: impl Family + 'static) -> Result<Self> {
        let inner: Arc<dyn Family> = Arc::new(inner);
        let probe = probe_family(inner.as_ref())?;
        Ok(GrtFamily { inner, probe })
    }

    pub fn probe_report(&self) -> &ProbeReport {
        &self.probe
    }

    pub fn n(&self) -> usize {
        self.inner.dim_ambient()
    }

    pub fn cap_n(&self) -> usize {
        self.inner.dim_manifold()
    }

    pub fn phi(&self, t: &[f64], y: &[f64]) -> DVector<f64> {
        self.inner.phi(t, y)
    }

    pub fn phi_jacobian(&self, t: &[f64], y: &[f64]) -> DMatrix<f64> {
        self.inner.phi_jacobian(t, y)
    }

    pub fn phi_hessian(&self, t: &[f64], y: &[f64]) -> Vec<DMatrix<f64>> {
        self.inner.phi_hessian(t, y)
    }

    pub fn weight_b(&self, x: &[f64], y: &[f64]) -> f64 {
        self.inner.weight_b(x, y)
    }

    pub fn weight_w(&self, x: &[f64], y: &[f64]) -> f64 {
        self.inner.weight_w(x, y)
    }

    pub fn t_window(&self, y: &[f64], center: &[f64], radius: f64) -> (Vec<f64>, Vec<f64>) {
        self.inner.t_window(y, center, radius)
    }

    /// Gram matrix of S_y at (t, y): G_jk = Phi_tj . Phi_tk.
    pub fn gram_sigma(&self, t: &[f64], y: &[f64]) -> DMatrix<f64> {
        let jac = self.phi_jacobian(t, y);
        let nt = self.cap_n();
        let phi_t = jac.columns(0, nt).into_owned();
        phi_t.transpose() * phi_t
    }
}

fn rank_ratio(m: &DMatrix<f64>, expected: usize) -> f64 {
    let svd = m.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if sv.is_empty() || sv[0] == 0.0 || sv.len() < expected {
        return 0.0;
    }
    sv[expected - 1] / sv[0]
}

fn probe_family(fam: &dyn Family) -> Result<ProbeReport> {
    let n = fam.dim_ambient();
    let nt = fam.dim_manifold();
    if nt == 0 || nt >= n {
        return Err(Error::config("require 1 <= N <= n-1"));
    }
    let (tlo, thi, ylo, yhi) = fam.probe_box();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e3779b97f4a7c15);
    let mut report = ProbeReport {
        max_jacobian_rel_err: 0.0,
        max_hessian_rel_err: 0.0,
        min_phi_t_rank_ratio: f64::INFINITY,
        min_phi_ty_rank_ratio: f64::INFINITY,
    };
    for _ in 0..8 {
        let t: Vec<f64> = (0..nt)
            .map(|i| rng.gen_range(tlo[i]..=thi[i]))
            .collect();
        let y: Vec<f64> = (0..n).map(|i| rng.gen_range(ylo[i]..=yhi[i])).collect();
        let jac = fam.phi_jacobian(&t, &y);
        let hess = fam.phi_hessian(&t, &y);
        let m = nt + n;
        let scale = jac.norm().max(1.0);
        // Central differences of phi against the Jacobian.
        let h = 1e-5;
        for col in 0..m {
            let mut tp = t.clone();
            let mut tm = t.clone();
            let mut yp = y.clone();
            let mut ym = y.clone();
            if col < nt {
                tp[col] += h;
                tm[col] -= h;
            } else {
                yp[col - nt] += h;
                ym[col - nt] -= h;
            }
            let fd = (fam.phi(&tp, &yp) - fam.phi(&tm, &ym)) / (2.0 * h);
            for row in 0..n {
                let err = (fd[row] - jac[(row, col)]).abs() / scale;
                report.max_jacobian_rel_err = report.max_jacobian_rel_err.max(err);
            }
            // Jacobian differences against the Hessians.
            let jp = fam.phi_jacobian(&tp, &yp);
            let jm = fam.phi_jacobian(&tm, &ym);
            let jd = (jp - jm) / (2.0 * h);
            let hscale = hess
                .iter()
                .map(|hm| hm.norm())
                .fold(1.0_f64, f64::max);
            for row in 0..n {
                for col2 in 0..m {
                    let err = (jd[(row, col2)] - hess[row][(col2, col)]).abs() / hscale;
                    report.max_hessian_rel_err = report.max_hessian_rel_err.max(err);
                }
            }
        }
        report.min_phi_t_rank_ratio = report
            .min_phi_t_rank_ratio
            .min(rank_ratio(&jac.columns(0, nt).into_owned(), nt));
        report.min_phi_ty_rank_ratio = report.min_phi_ty_rank_ratio.min(rank_ratio(&jac, n));
    }
    let tol = 2e-5;
    if report.max_jacobian_rel_err > tol || report.max_hessian_rel_err > 20.0 * tol {
        return Err(Error::config(format!(
            "analytic derivatives disagree with finite differences (jac {:.2e}, hess {:.2e})",
            report.max_jacobian_rel_err, report.max_hessian_rel_err
        )));
    }
    Ok(report)
}

/// 2D parallel-beam lines: Phi(t, (p, alpha)) = p theta + t theta_perp,
/// theta = (cos alpha, sin alpha).
#[derive(Debug, Clone)]
pub struct ParallelBeam2;

fn theta(alpha: f64) -> (f64, f64) {
    (alpha.cos(), alpha.sin())
}

impl Family for ParallelBeam2 {
    fn dim_ambient(&self) -> usize {
        2
    }

    fn dim_manifold(&self) -> usize {
        1
    }

    fn phi(&self, t: &[f64], y: &[f64]) -> DVector<f64> {
        let (c, s) = theta(y[1]);
        let p = y[0];
        DVector::from_vec(vec![p * c - t[0] * s, p * s + t[0] * c])
    }

    fn phi_jacobian(&self, t: &[f64], y: &[f64]) -> DMatrix<f64> {
        let (c, s) = theta(y[1]);
        let p = y[0];
        // columns: t, p, alpha
        DMatrix::from_row_slice(
            2,
            3,
            &[-s, c, -p * s - t[0] * c, c, s, p * c - t[0] * s],
        )
    }

    fn phi_hessian(&self, t: &[f64], y: &[f64]) -> Vec<DMatrix<f64>> {
        let (c, s) = theta(y[1]);
        let p = y[0];
        // variable order (t, p, alpha)
        let h0 = DMatrix::from_row_slice(
            3,
            3,
            &[
                0.0, 0.0, -c, //
                0.0, 0.0, -s, //
                -c, -s, -p * c + t[0] * s,
            ],
        );
        let h1 = DMatrix::from_row_slice(
            3,
            3,
            &[
                0.0, 0.0, -s, //
                0.0, 0.0, c, //
                -s, c, -p * s - t[0] * c,
            ],
        );
        vec![h0, h1]
    }

    fn probe_box(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        (
            vec![-1.5],
            vec![1.5],
            vec![0.3, -0.8],
            vec![1.6, 0.8],
        )
    }

    fn t_window(&self, y: &[f64], center: &[f64], radius: f64) -> (Vec<f64>, Vec<f64>) {
        let (c, s) = theta(y[1]);
        // Signed distance of the line from `center` along theta.
        let d = y[0] - (center[0] * c + center[1] * s);
        if d.abs() > radius {
            return (vec![1.0], vec![-1.0]);
        }
        let half = (radius * radius - d * d).sqrt();
        let tc = -center[0] * s + center[1] * c;
        (vec![-tc - half - 1e-9], vec![-tc + half + 1e-9])
    }
}

/// Circles of radius r centered on the unit circle:
/// Phi(t, (sigma, r)) = (cos sigma + r cos t, sin sigma + r sin t).
#[derive(Debug, Clone)]
pub struct CircularArcs2;

impl Family for CircularArcs2 {
    fn dim_ambient(&self) -> usize {
        2
    }

    fn dim_manifold(&self) -> usize {
        1
    }

    fn phi(&self, t: &[f64], y: &[f64]) -> DVector<f64> {
        let (cs, ss) = theta(y[0]);
        let (ct, st) = theta(t[0]);
        let r = y[1];
        DVector::from_vec(vec![cs + r * ct, ss + r * st])
    }

    fn phi_jacobian(&self, t: &[f64], y: &[f64]) -> DMatrix<f64> {
        let (cs, ss) = theta(y[0]);
        let (ct, st) = theta(t[0]);
        let r = y[1];
        // columns: t, sigma, r
        DMatrix::from_row_slice(2, 3, &[-r * st, -ss, ct, r * ct, cs, st])
    }

    fn phi_hessian(&self, t: &[f64], y: &[f64]) -> Vec<DMatrix<f64>> {
        let (cs, ss) = theta(y[0]);
        let (ct, st) = theta(t[0]);
        let r = y[1];
        let h0 = DMatrix::from_row_slice(
            3,
            3,
            &[
                -r * ct, 0.0, -st, //
                0.0, -cs, 0.0, //
                -st, 0.0, 0.0,
            ],
        );
        let h1 = DMatrix::from_row_slice(
            3,
            3,
            &[
                -r * st, 0.0, ct, //
                0.0, -ss, 0.0, //
                ct, 0.0, 0.0,
            ],
        );
        vec![h0, h1]
    }

    fn probe_box(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        (
            vec![2.0],
            vec![4.0],
            vec![-0.6, 0.3],
            vec![0.6, 0.8],
        )
    }

    fn t_window(&self, _y: &[f64], _center: &[f64], _radius: f64) -> (Vec<f64>, Vec<f64>) {
        (vec![-std::f64::consts::PI], vec![std::f64::consts::PI])
    }
}

/// Degenerate family: all lines through one fixed point. The p coordinate is
/// ignored, so the rank assumption on Phi_(t,y) fails where it matters.
#[derive(Debug, Clone)]
pub struct FanThroughPoint {
    pub center: [f64; 2],
}

impl Family for FanThroughPoint {
    fn dim_ambient(&self) -> usize {
        2
    }

    fn dim_manifold(&self) -> usize {
        1
    }

    fn phi(&self, t: &[f64], y: &[f64]) -> DVector<f64> {
        let (c, s) = theta(y[1]);
        DVector::from_vec(vec![self.center[0] - t[0] * s, self.center[1] + t[0] * c])
    }

    fn phi_jacobian(&self, t: &[f64], y: &[f64]) -> DMatrix<f64> {
        let (c, s) = theta(y[1]);
        DMatrix::from_row_slice(2, 3, &[-s, 0.0, -t[0] * c, c, 0.0, -t[0] * s])
    }

    fn phi_hessian(&self, t: &[f64], y: &[f64]) -> Vec<DMatrix<f64>> {
        let (c, s) = theta(y[1]);
        let h0 = DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 0.0, -c, 0.0, 0.0, 0.0, -c, 0.0, t[0] * s],
        );
        let h1 = DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 0.0, -s, 0.0, 0.0, 0.0, -s, 0.0, -t[0] * c],
        );
        vec![h0, h1]
    }

    fn probe_box(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        (
            vec![0.5],
            vec![1.5],
            vec![0.5, -0.8],
            vec![1.5, 0.8],
        )
    }

    fn t_window(&self, _y: &[f64], _center: &[f64], radius: f64) -> (Vec<f64>, Vec<f64>) {
        (vec![-2.0 * radius], vec![2.0 * radius])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parallel_beam_probes_pass() {
        let fam = GrtFamily::new(ParallelBeam2).unwrap();
        assert!(fam.probe_report().max_jacobian_rel_err < 1e-6);
        assert!(fam.probe_report().min_phi_ty_rank_ratio > 0.1);
    }

    #[test]
    fn arcs_probes_pass() {
        GrtFamily::new(CircularArcs2).unwrap();
    }

    #[test]
    fn line_t_window_covers_disk_chord() {
        let fam = GrtFamily::new(ParallelBeam2).unwrap();
        let y = [0.5, 0.3];
        let (lo, hi) = fam.t_window(&y, &[0.0, 0.0], 1.0);
        // Endpoints of the window must be outside the unit disk.
        for t in [lo[0], hi[0]] {
            let x = fam.phi(&[t], &y);
            assert!(x.norm() >= 1.0 - 1e-6);
        }
        assert_relative_eq!(
            hi[0] - lo[0],
            2.0 * (1.0_f64 - 0.25).sqrt() + 2e-9,
            epsilon = 1e-7
        );
    }
}
