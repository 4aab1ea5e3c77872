//! Adapted coordinate frames at a tangency pair.
//!
//! The frame realizes the coordinate normalizations: an orthogonal x-rotation
//! aligning the first axis with d_x Psi and the trailing N axes with the
//! tangent space of S_{y0}, an orthogonal y-rotation U built from the SVD of
//! the first-group Jacobian, and a scaling of Psi making (Psi o Phi)_{y1} = 1.
//! All downstream matrices (M and blocks, C, Q, curvature difference,
//! determinant factors) are computed here in adapted coordinates.

use nalgebra::{DMatrix, DVector};

use super::family::GrtFamily;
use super::surface::InterfaceSurface;
use super::tangency::{psi_phi_derivs, TangencyPair};
use crate::error::{Error, Result};

/// Residuals of the frame normalizations, recorded at construction.
#[derive(Debug, Clone)]
pub struct FrameResiduals {
    /// |(Psi o Phi)_{y1} - 1| after adaptation.
    pub y1_normalization: f64,
    /// max |(Psi o Phi)_{y_perp}|.
    pub y_perp: f64,
    /// Misalignment of d_x Psi with the first adapted x-axis.
    pub x_grad_align: f64,
    /// max |Phi_t| components in the first x-group.
    pub phi_t_first_group: f64,
    /// max |Phi^{(1)}_{y-tilde}|.
    pub phi_first_ytilde: f64,
    /// ||U^T U - I||_inf.
    pub u_orthogonality: f64,
    /// Relative gap |det C * det M11 - det M| / |det M|.
    pub det_c_identity: f64,
    /// ||Q - Q^T||_inf before symmetrization.
    pub q_asymmetry: f64,
    /// Relative agreement of the two chi routes.
    pub chi_identity: f64,
    /// Smallest kept/largest dropped singular-value ratio in the y-split.
    pub svd_gap: f64,
}

/// Everything the adapted coordinates provide at a tangency pair.
#[derive(Debug, Clone)]
pub struct AdaptedFrame {
    pub n: usize,
    pub cap_n: usize,
    pub t0: DVector<f64>,
    pub y0: DVector<f64>,
    pub x0: DVector<f64>,
    /// y-rotation: y_original = U y_adapted + y0.
    pub u: DMatrix<f64>,
    /// x-rotation: x_original = x0 + R x_adapted.
    pub x_rotation: DMatrix<f64>,
    /// Psi_adapted = psi_scale * Psi_original (negative when flipped).
    pub psi_scale: f64,
    /// Whether the surface orientation was flipped to make the curvature
    /// difference negative definite.
    pub flipped: bool,
    /// Unit conormal Theta of Gamma at y0, in original data coordinates.
    pub theta_original: DVector<f64>,
    /// |d_x Psi_adapted(x0)|.
    pub xi0_norm: f64,
    pub m: DMatrix<f64>,
    pub m11: DMatrix<f64>,
    pub m12: DMatrix<f64>,
    pub m21: DMatrix<f64>,
    pub m22: DMatrix<f64>,
    pub c_mat: DMatrix<f64>,
    pub q_mat: DMatrix<f64>,
    /// (Psi o Phi)_tt at the base point, adapted scaling.
    pub psiphi_tt: DMatrix<f64>,
    /// Signature (n_plus - n_minus) of (Psi o Phi)_tt.
    pub sgn_psiphi_tt: i32,
    /// Curvature difference matrix (second fundamental forms).
    pub dsf: DMatrix<f64>,
    pub dx1_dy1: f64,
    pub dy1_dx1: f64,
    /// d^2 X_1 / (d x-tilde d y-tilde).
    pub d2x1: DMatrix<f64>,
    pub chi: f64,
    pub gram_sigma_det: f64,
    /// dY0/d y-tilde at 0, adapted coordinates (n x N).
    pub y0_prime: DMatrix<f64>,
    pub residuals: FrameResiduals,
}

impl AdaptedFrame {
    /// Adapted y for an original data point.
    pub fn y_adapted(&self, y_original: &[f64]) -> DVector<f64> {
        let d = DVector::from_column_slice(y_original) - &self.y0;
        self.u.transpose() * d
    }

    /// Original data point for an adapted y.
    pub fn y_original(&self, y_adapted: &[f64]) -> DVector<f64> {
        &self.u * DVector::from_column_slice(y_adapted) + &self.y0
    }

    pub fn x_adapted(&self, x_original: &[f64]) -> DVector<f64> {
        let d = DVector::from_column_slice(x_original) - &self.x0;
        self.x_rotation.transpose() * d
    }

    pub fn x_original(&self, x_adapted: &[f64]) -> DVector<f64> {
        &self.x_rotation * DVector::from_column_slice(x_adapted) + &self.x0
    }

    /// Interior unit normal at x0 (the adapted x1 axis), original coords.
    pub fn interior_normal(&self) -> DVector<f64> {
        self.x_rotation.column(0).into_owned()
    }

    /// w(x0, y0) from the family, for prediction constants.
    pub fn base_weight_w(&self, family: &GrtFamily) -> f64 {
        family.weight_w(self.x0.as_slice(), self.y0.as_slice())
    }

    pub fn base_weight_b(&self, family: &GrtFamily) -> f64 {
        family.weight_b(self.x0.as_slice(), self.y0.as_slice())
    }
}

/// Gram-Schmidt in the given priority order; vectors that are dependent on
/// earlier ones are dropped.
fn orthonormalize(cands: Vec<DVector<f64>>, dim: usize) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(dim);
    for mut v in cands {
        for b in &basis {
            let c = b.dot(&v);
            v -= b * c;
        }
        let norm = v.norm();
        if norm > 1e-10 {
            basis.push(v / norm);
        }
        if basis.len() == dim {
            break;
        }
    }
    basis
}

struct Definiteness {
    negative: bool,
    positive: bool,
}

fn definiteness(m: &DMatrix<f64>) -> Definiteness {
    let eig = m.clone().symmetric_eigen();
    let mut neg = true;
    let mut pos = true;
    for &e in eig.eigenvalues.iter() {
        if e >= 0.0 {
            neg = false;
        }
        if e <= 0.0 {
            pos = false;
        }
    }
    Definiteness {
        negative: neg,
        positive: pos,
    }
}

fn signature(m: &DMatrix<f64>) -> i32 {
    let eig = m.clone().symmetric_eigen();
    eig.eigenvalues
        .iter()
        .map(|&e| if e > 0.0 { 1 } else { -1 })
        .sum()
}

/// Builds the adapted frame; flips the surface orientation when needed so
/// that the implemented branch always carries a negative definite curvature
/// difference.
pub fn build_adapted_frame(
    family: &GrtFamily,
    surface: &InterfaceSurface,
    pair: &TangencyPair,
) -> Result<AdaptedFrame> {
    if pair.residual_tangency > 1e-8 || pair.residual_point > 1e-8 {
        return Err(Error::config(format!(
            "tangency pair residuals too large: point {:.2e}, tangency {:.2e}",
            pair.residual_point, pair.residual_tangency
        )));
    }
    let frame = build_with_sign(family, surface, pair, 1.0)?;
    if definiteness(&frame.dsf).positive {
        let mut flipped = build_with_sign(family, surface, pair, -1.0)?;
        flipped.flipped = true;
        return Ok(flipped);
    }
    Ok(frame)
}

fn build_with_sign(
    family: &GrtFamily,
    surface: &InterfaceSurface,
    pair: &TangencyPair,
    sign: f64,
) -> Result<AdaptedFrame> {
    let n = family.n();
    let nt = family.cap_n();
    let m_dim = n + nt;
    let work = surface.scaled(sign);
    let t0 = pair.t0.clone();
    let y0 = pair.y0.clone();
    let x0 = pair.x0.clone();
    let ts = t0.as_slice();
    let ys = y0.as_slice();

    let jac_or = family.phi_jacobian(ts, ys);
    let hess_or = family.phi_hessian(ts, ys);
    let xi_w = work.grad(x0.as_slice());
    let xi_norm_raw = xi_w.norm();
    if xi_norm_raw < 1e-12 {
        return Err(Error::config("surface gradient vanishes at x0"));
    }
    let xi_hat = &xi_w / xi_norm_raw;

    // x-rotation: first column along the conormal, trailing N columns along
    // the tangent space of S_{y0}.
    let phi_t = jac_or.columns(0, nt).into_owned();
    let svd_t = phi_t.clone().svd(true, false);
    let ut = svd_t.u.as_ref().expect("svd with u");
    let sv_max = svd_t.singular_values.max();
    if svd_t.singular_values.min() < 1e-10 * sv_max.max(1.0) {
        return Err(Error::NondegeneracyViolated {
            context: "rank of Phi_t below N (G1)".into(),
            det: svd_t.singular_values.min(),
        });
    }
    let mut cands = vec![xi_hat.clone()];
    // Middle block: anything orthogonal to both the conormal and S_{y0}.
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        cands.push(e);
    }
    let mut head = orthonormalize(
        {
            let mut v = vec![xi_hat.clone()];
            v.extend((0..nt).map(|k| ut.column(k).into_owned()));
            v
        },
        nt + 1,
    );
    if head.len() != nt + 1 {
        return Err(Error::NondegeneracyViolated {
            context: "Phi_t not transverse to the conormal".into(),
            det: 0.0,
        });
    }
    let tangent_basis: Vec<DVector<f64>> = head.drain(1..).collect();
    let mut ordered = vec![xi_hat.clone()];
    let mut completion = orthonormalize(
        {
            let mut v = vec![xi_hat.clone()];
            v.extend(tangent_basis.iter().cloned());
            v.extend(cands.into_iter().skip(1));
            v
        },
        n,
    );
    // completion = [xi_hat, tangent..., middle...]; reorder to
    // [xi_hat, middle..., tangent...].
    let tangent: Vec<DVector<f64>> = completion.drain(1..=nt).collect();
    ordered.extend(completion.into_iter().skip(1));
    ordered.extend(tangent);
    let mut x_rot = DMatrix::zeros(n, n);
    for (i, v) in ordered.iter().enumerate() {
        x_rot.set_column(i, v);
    }

    // First x-group rows of the y-Jacobian, adapted x only.
    let jac_x = x_rot.transpose() * &jac_or;
    let a = jac_x.view((0, nt), (n - nt, n)).into_owned();

    // y-rotation: first column along Theta, remaining first-group columns in
    // the row space of A, null space last.
    let theta_row = a.row(0).transpose();
    let theta_norm = theta_row.norm();
    if theta_norm < 1e-12 {
        return Err(Error::NondegeneracyViolated {
            context: "pullback conormal vanishes (G2)".into(),
            det: theta_norm,
        });
    }
    let theta_hat = theta_row / theta_norm;
    let svd_a = a.clone().svd(false, true);
    let vt = svd_a.v_t.as_ref().expect("svd with v_t");
    let mut sv: Vec<f64> = svd_a.singular_values.iter().copied().collect();
    sv.sort_by(|p, q| q.total_cmp(p));
    let svd_gap = if sv.len() >= n - nt && sv[0] > 0.0 {
        sv[n - nt - 1] / sv[0]
    } else {
        0.0
    };
    if svd_gap < 1e-10 {
        return Err(Error::NondegeneracyViolated {
            context: "rank of Phi^(1)_y below n-N (G2)".into(),
            det: svd_gap,
        });
    }
    let mut y_cands = vec![theta_hat.clone()];
    // Row space directions (largest singular values first), then null space.
    let mut order: Vec<usize> = (0..svd_a.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd_a.singular_values[j].total_cmp(&svd_a.singular_values[i]));
    for &i in &order {
        y_cands.push(vt.row(i).transpose());
    }
    // Any remaining directions (A has only n-N rows of V available).
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        y_cands.push(e);
    }
    let y_basis = orthonormalize(y_cands, n);
    if y_basis.len() != n {
        return Err(Error::NondegeneracyViolated {
            context: "could not complete the y-coordinate basis".into(),
            det: 0.0,
        });
    }
    let mut u_mat = DMatrix::zeros(n, n);
    for (i, v) in y_basis.iter().enumerate() {
        u_mat.set_column(i, v);
    }

    // Normalize (Psi o Phi)_{y1} = 1.
    let (_, grad_or, hess_or_psiphi) = psi_phi_derivs(family, &work, ts, ys);
    let grad_y = grad_or.rows(nt, n).into_owned();
    let dydir = u_mat.column(0).dot(&grad_y);
    if dydir <= 0.0 {
        return Err(Error::config(
            "orientation fix failed: (Psi o Phi)_{y1} <= 0 along Theta",
        ));
    }
    let psi_scale0 = 1.0 / dydir;
    let psi_scale = sign * psi_scale0;
    let xi0_norm = psi_scale0 * xi_norm_raw;

    // Adapted combined-variable transform: (t, y) -> (t, U y + y0).
    let mut t_map = DMatrix::identity(m_dim, m_dim);
    t_map.view_mut((nt, nt), (n, n)).copy_from(&u_mat);

    let jac_ad = &jac_x * &t_map;
    let mut hess_ad: Vec<DMatrix<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut h = DMatrix::zeros(m_dim, m_dim);
        for k in 0..n {
            h += &hess_or[k] * x_rot[(k, i)];
        }
        hess_ad.push(t_map.transpose() * h * &t_map);
    }
    let psiphi_grad = t_map.transpose() * &grad_or * psi_scale0;
    let psiphi_hess = t_map.transpose() * &hess_or_psiphi * &t_map * psi_scale0;

    let tt = psiphi_hess.view((0, 0), (nt, nt)).into_owned();
    let det_tt = tt.determinant();
    if det_tt.abs() < 1e-12 {
        return Err(Error::NondegeneracyViolated {
            context: "(Psi o Phi)_tt".into(),
            det: det_tt,
        });
    }
    let phi2_t = jac_ad.view((n - nt, 0), (nt, nt)).into_owned();
    let det_phi2_t = phi2_t.determinant();
    if det_phi2_t.abs() < 1e-12 {
        return Err(Error::NondegeneracyViolated {
            context: "det Phi_t^(2)".into(),
            det: det_phi2_t,
        });
    }

    // Curvature difference from (Psi o Phi)_tt = |xi| Phi_t^(2)T dsf Phi_t^(2).
    let inv_phi2_t = phi2_t
        .clone()
        .try_inverse()
        .expect("checked determinant above");
    let dsf = inv_phi2_t.transpose() * &tt * &inv_phi2_t / xi0_norm;
    let dsf = (&dsf + dsf.transpose()) * 0.5;

    // Bolker matrix in adapted coordinates.
    let mut m_mat = DMatrix::zeros(m_dim, m_dim);
    m_mat.view_mut((0, 0), (n, m_dim)).copy_from(&jac_ad);
    // xi0 . Phi = xi0_norm * (first adapted component); t-rows of its Hessian.
    let xi_rows = &hess_ad[0] * xi0_norm;
    m_mat
        .view_mut((n, 0), (nt, m_dim))
        .copy_from(&xi_rows.view((0, 0), (nt, m_dim)));
    let det_m = m_mat.determinant();
    if det_m.abs() < 1e-10 {
        return Err(Error::BolkerViolated { det: det_m });
    }
    let m11 = m_mat.view((0, 0), (n, n)).into_owned();
    let m12 = m_mat.view((0, n), (n, nt)).into_owned();
    let m21 = m_mat.view((n, 0), (nt, n)).into_owned();
    let m22 = m_mat.view((n, n), (nt, nt)).into_owned();
    let det_m11 = m11.determinant();
    if det_m11.abs() < 1e-12 {
        return Err(Error::SplitInvalid { det: det_m11 });
    }
    let m11_lu = m11.clone().lu();
    let c_mat = &m22 - &m21 * m11_lu.solve(&m12).expect("det checked");
    let q_raw = c_mat.transpose()
        * tt.clone().lu().solve(&c_mat).expect("det checked");
    let q_asymmetry = (&q_raw - q_raw.transpose()).abs().max();
    let q_mat = (&q_raw + q_raw.transpose()) * 0.5;

    // Determinant factors of the closed-form constants.
    let dx1_dy1 = jac_ad[(0, nt)];
    if dx1_dy1 <= 0.0 {
        return Err(Error::config("dX1/dy1 <= 0 after adaptation"));
    }
    let phi1_tt = hess_ad[0].view((0, 0), (nt, nt)).into_owned();
    let phi1_t_ytilde = hess_ad[0].view((0, n), (nt, nt)).into_owned();
    let phi2_ytilde = jac_ad.view((n - nt, n), (nt, nt)).into_owned();
    let l_mat = &phi1_tt * &inv_phi2_t;
    let d2x1 = inv_phi2_t.transpose() * (&phi1_t_ytilde - &l_mat * &phi2_ytilde);
    let gram_sigma = family.gram_sigma(ts, ys);
    let gram_sigma_det = gram_sigma.determinant();
    let det_c = c_mat.determinant();
    let chi = gram_sigma_det.sqrt() / det_c.abs();
    let chi_x1 = dx1_dy1.powi(nt as i32) / d2x1.determinant().abs();
    let chi_identity = (chi - chi_x1).abs() / chi.abs().max(1e-300);

    // Tangent frame of T_{x0} at y0.
    let m12_sol = m11_lu.solve(&m12).expect("det checked");
    let mut y0_prime = DMatrix::zeros(n, nt);
    for r in 0..(n - nt) {
        for c in 0..nt {
            y0_prime[(r, c)] = -m12_sol[(nt + r, c)];
        }
    }
    for c in 0..nt {
        y0_prime[(n - nt + c, c)] = 1.0;
    }

    let residuals = FrameResiduals {
        y1_normalization: (psiphi_grad[nt] - 1.0).abs(),
        y_perp: (0..n - 1)
            .map(|i| psiphi_grad[nt + 1 + i].abs())
            .fold(0.0, f64::max),
        x_grad_align: {
            let g_ad = x_rot.transpose() * &xi_w * psi_scale0;
            (0..n - 1).map(|i| g_ad[i + 1].abs()).fold(0.0, f64::max)
        },
        phi_t_first_group: jac_ad
            .view((0, 0), (n - nt, nt))
            .abs()
            .max(),
        phi_first_ytilde: jac_ad
            .view((0, n), (n - nt, nt))
            .abs()
            .max(),
        u_orthogonality: (u_mat.transpose() * &u_mat - DMatrix::identity(n, n))
            .abs()
            .max(),
        det_c_identity: (det_c * det_m11 - det_m).abs() / det_m.abs(),
        q_asymmetry,
        chi_identity,
        svd_gap,
    };

    Ok(AdaptedFrame {
        n,
        cap_n: nt,
        t0,
        y0,
        x0,
        theta_original: u_mat.column(0).into_owned(),
        u: u_mat,
        x_rotation: x_rot,
        psi_scale,
        flipped: sign < 0.0,
        xi0_norm,
        sgn_psiphi_tt: signature(&tt),
        m: m_mat,
        m11,
        m12,
        m21,
        m22,
        c_mat,
        q_mat,
        psiphi_tt: tt,
        dsf,
        dx1_dy1,
        dy1_dx1: 1.0 / dx1_dy1,
        d2x1,
        chi,
        gram_sigma_det,
        y0_prime,
        residuals,
    })
}

/// |det Q|^{1/2} through the X1 determinant route, packaged with the
/// block-route value for comparison.
#[derive(Debug, Clone, Copy)]
pub struct QDeterminantRoutes {
    pub via_x1: f64,
    pub via_block: f64,
}

impl QDeterminantRoutes {
    pub fn relative_gap(&self) -> f64 {
        (self.via_x1 - self.via_block).abs() / self.via_block.abs().max(1e-300)
    }
}

pub fn q_via_x1(frame: &AdaptedFrame) -> QDeterminantRoutes {
    let nt = frame.cap_n as i32;
    let via_x1 = (frame.dx1_dy1.powi(nt) * frame.dsf.determinant())
        .abs()
        .powf(-0.5)
        * frame.d2x1.determinant().abs();
    QDeterminantRoutes {
        via_x1,
        via_block: frame.q_mat.determinant().abs().sqrt(),
    }
}
