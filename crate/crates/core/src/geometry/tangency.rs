//! Tangency pairs: points (t0, y0) where S_{y0} is tangent to Sigma.

use nalgebra::{DMatrix, DVector};

use super::family::GrtFamily;
use super::surface::InterfaceSurface;
use crate::error::{Error, Result};

pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 50;

/// A solved tangency configuration in original coordinates.
#[derive(Debug, Clone)]
pub struct TangencyPair {
    pub t0: DVector<f64>,
    pub y0: DVector<f64>,
    pub x0: DVector<f64>,
    /// Conormal d_x Psi(x0) of the (unscaled) surface.
    pub xi0: DVector<f64>,
    pub residual_point: f64,
    pub residual_tangency: f64,
}

/// Value, gradient and Hessian of (Psi o Phi)(t, y) with respect to the
/// combined variables (t, y), in original coordinates.
pub fn psi_phi_derivs(
    family: &GrtFamily,
    surface: &InterfaceSurface,
    t: &[f64],
    y: &[f64],
) -> (f64, DVector<f64>, DMatrix<f64>) {
    let x = family.phi(t, y);
    let jac = family.phi_jacobian(t, y);
    let hess = family.phi_hessian(t, y);
    let xs = x.as_slice();
    let value = surface.psi(xs);
    let grad_psi = surface.grad(xs);
    let hess_psi = surface.hess(xs);
    let grad = jac.transpose() * &grad_psi;
    let mut h = jac.transpose() * hess_psi * &jac;
    for (k, hk) in hess.iter().enumerate() {
        h += hk * grad_psi[k];
    }
    (value, grad, h)
}

fn pair_from(
    family: &GrtFamily,
    surface: &InterfaceSurface,
    t: DVector<f64>,
    y: DVector<f64>,
    anchor: Option<&[f64]>,
) -> TangencyPair {
    let x0 = family.phi(t.as_slice(), y.as_slice());
    let (_, grad, _) = psi_phi_derivs(family, surface, t.as_slice(), y.as_slice());
    let nt = family.cap_n();
    let residual_tangency = grad.rows(0, nt).norm();
    let residual_point = match anchor {
        Some(a) => (&x0 - DVector::from_column_slice(a)).norm(),
        None => surface.psi(x0.as_slice()).abs(),
    };
    let xi0 = surface.grad(x0.as_slice()) / surface.scale();
    TangencyPair {
        t0: t,
        y0: y,
        x0,
        xi0,
        residual_point,
        residual_tangency,
    }
}

/// Solves Psi(Phi(t,y)) = 0, (Psi o Phi)_t(t,y) = 0 by a damped
/// Gauss-Newton iteration taking minimum-norm steps. The system is
/// underdetermined; the solver lands on the solution manifold near the seed.
pub fn solve_tangency(
    family: &GrtFamily,
    surface: &InterfaceSurface,
    seed_t: &[f64],
    seed_y: &[f64],
) -> Result<TangencyPair> {
    let nt = family.cap_n();
    let n = family.n();
    let m = nt + n;
    let mut u = DVector::from_iterator(m, seed_t.iter().chain(seed_y.iter()).copied());

    let eval = |u: &DVector<f64>| -> (DVector<f64>, DMatrix<f64>) {
        let t = u.rows(0, nt).iter().copied().collect::<Vec<_>>();
        let y = u.rows(nt, n).iter().copied().collect::<Vec<_>>();
        let (val, grad, hess) = psi_phi_derivs(family, surface, &t, &y);
        let mut f = DVector::zeros(1 + nt);
        f[0] = val;
        for i in 0..nt {
            f[1 + i] = grad[i];
        }
        let mut jac = DMatrix::zeros(1 + nt, m);
        jac.row_mut(0).copy_from(&grad.transpose());
        for i in 0..nt {
            jac.row_mut(1 + i).copy_from(&hess.row(i));
        }
        (f, jac)
    };

    let (mut f, mut jac) = eval(&u);
    for _ in 0..NEWTON_MAX_ITER {
        if f.norm() < NEWTON_TOL {
            let t = u.rows(0, nt).into_owned();
            let y = u.rows(nt, n).into_owned();
            // The tangency Jacobian must stay away from singularity.
            let (_, _, hess) =
                psi_phi_derivs(family, surface, t.as_slice(), y.as_slice());
            let tt = hess.view((0, 0), (nt, nt)).into_owned();
            let det_tt = tt.determinant();
            if det_tt.abs() < 1e-12 {
                return Err(Error::SingularJacobian {
                    context: format!("det (Psi o Phi)_tt = {det_tt:.3e} at solution"),
                });
            }
            return Ok(pair_from(family, surface, t, y, None));
        }
        // Minimum-norm Gauss-Newton step: J^T (J J^T)^{-1} f.
        let jjt = &jac * jac.transpose();
        let rhs = f.clone();
        let sol = jjt
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::SingularJacobian {
                context: "rank-deficient tangency system".into(),
            })?;
        let step = jac.transpose() * sol;
        // Damped backtracking on the residual norm.
        let mut lambda = 1.0;
        let base = f.norm();
        loop {
            let cand = &u - &step * lambda;
            let (fc, jc) = eval(&cand);
            if fc.norm() < base * (1.0 - 0.25 * lambda) || lambda < 1e-4 {
                u = cand;
                f = fc;
                jac = jc;
                break;
            }
            lambda *= 0.5;
        }
    }
    Err(Error::NoConvergence {
        iters: NEWTON_MAX_ITER,
        residual: f.norm(),
    })
}

/// Solves Phi(t, y) = x0, xi0 . Phi_t(t, y) = 0 with x0 prescribed on Sigma.
/// The Jacobian of this square system is the Bolker matrix.
pub fn solve_tangency_anchored(
    family: &GrtFamily,
    surface: &InterfaceSurface,
    seed_t: &[f64],
    seed_y: &[f64],
    x0: &[f64],
) -> Result<TangencyPair> {
    let nt = family.cap_n();
    let n = family.n();
    let m = nt + n;
    if surface.psi(x0).abs() > 1e-8 {
        return Err(Error::config("anchor point x0 does not lie on Sigma"));
    }
    let xi0 = surface.grad(x0);
    let mut u = DVector::from_iterator(m, seed_t.iter().chain(seed_y.iter()).copied());

    let eval = |u: &DVector<f64>| -> (DVector<f64>, DMatrix<f64>) {
        let t = u.rows(0, nt).iter().copied().collect::<Vec<_>>();
        let y = u.rows(nt, n).iter().copied().collect::<Vec<_>>();
        let jac = family.phi_jacobian(&t, &y);
        let hess = family.phi_hessian(&t, &y);
        let x = family.phi(&t, &y);
        let mut f = DVector::zeros(m);
        let mut big = DMatrix::zeros(m, m);
        for i in 0..n {
            f[i] = x[i] - x0[i];
            big.row_mut(i).copy_from(&jac.row(i));
        }
        // xi0 . Phi_t rows with the Hessian contraction.
        let mut xi_h = DMatrix::zeros(m, m);
        for (k, hk) in hess.iter().enumerate() {
            xi_h += hk * xi0[k];
        }
        let jt = jac.columns(0, nt).into_owned();
        let g = jt.transpose() * &xi0;
        for i in 0..nt {
            f[n + i] = g[i];
            big.row_mut(n + i).copy_from(&xi_h.row(i));
        }
        (f, big)
    };

    let (mut f, mut jac) = eval(&u);
    for _ in 0..NEWTON_MAX_ITER {
        if f.norm() < NEWTON_TOL {
            let t = u.rows(0, nt).into_owned();
            let y = u.rows(nt, n).into_owned();
            return Ok(pair_from(family, surface, t, y, Some(x0)));
        }
        let det = jac.determinant();
        if det.abs() < 1e-12 {
            return Err(Error::SingularJacobian {
                context: format!("Bolker-system Jacobian determinant {det:.3e}"),
            });
        }
        let step = jac
            .clone()
            .lu()
            .solve(&f)
            .ok_or_else(|| Error::SingularJacobian {
                context: "Bolker-system solve failed".into(),
            })?;
        let mut lambda = 1.0;
        let base = f.norm();
        loop {
            let cand = &u - &step * lambda;
            let (fc, jc) = eval(&cand);
            if fc.norm() < base * (1.0 - 0.25 * lambda) || lambda < 1e-4 {
                u = cand;
                f = fc;
                jac = jc;
                break;
            }
            lambda *= 0.5;
        }
    }
    Err(Error::NoConvergence {
        iters: NEWTON_MAX_ITER,
        residual: f.norm(),
    })
}
