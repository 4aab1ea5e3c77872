//! Interface surfaces Sigma = { Psi(x) = 0 } with analytic derivatives.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

/// A smooth level-set description of the singular surface.
pub trait Surface: Send + Sync {
    fn dim(&self) -> usize;
    fn psi(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64]) -> DVector<f64>;
    fn hess(&self, x: &[f64]) -> DMatrix<f64>;
}

/// Surface handle carrying an overall scale (used to realize the
/// normalization (Psi o Phi)_{y1} = 1 and the definiteness flip).
#[derive(Clone)]
pub struct InterfaceSurface {
    inner: Arc<dyn Surface>,
    scale: f64,
}

impl InterfaceSurface {
    pub fn new(inner: impl Surface + 'static) -> Self {
        InterfaceSurface {
            inner: Arc::new(inner),
            scale: 1.0,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        InterfaceSurface {
            inner: self.inner.clone(),
            scale: self.scale * factor,
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn psi(&self, x: &[f64]) -> f64 {
        self.scale * self.inner.psi(x)
    }

    pub fn grad(&self, x: &[f64]) -> DVector<f64> {
        self.inner.grad(x) * self.scale
    }

    pub fn hess(&self, x: &[f64]) -> DMatrix<f64> {
        self.inner.hess(x) * self.scale
    }
}

/// Disk phantom boundary: Psi(x) = radius - |x - center|, positive inside.
#[derive(Debug, Clone)]
pub struct Disk {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Surface for Disk {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn psi(&self, x: &[f64]) -> f64 {
        let d: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        self.radius - d
    }

    fn grad(&self, x: &[f64]) -> DVector<f64> {
        let u: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let d = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        DVector::from_vec(u.iter().map(|v| -v / d).collect())
    }

    fn hess(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let u: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let d = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] = u[i] * u[j] / (d * d * d) - if i == j { 1.0 / d } else { 0.0 };
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn disk_gradient_matches_fd() {
        let disk = Disk {
            center: vec![0.3, 0.41],
            radius: 1.0,
        };
        let x = [1.2, 0.7];
        let g = disk.grad(&x);
        let h = 1e-6;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (disk.psi(&xp) - disk.psi(&xm)) / (2.0 * h);
            assert_relative_eq!(g[i], fd, epsilon = 1e-8);
        }
        let hess = disk.hess(&x);
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (disk.grad(&xp) - disk.grad(&xm)) / (2.0 * h);
            for j in 0..2 {
                assert_relative_eq!(hess[(j, i)], fd[j], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn scaling_and_flip() {
        let s = InterfaceSurface::new(Disk {
            center: vec![0.0, 0.0],
            radius: 1.0,
        });
        let f = s.scaled(-2.0);
        assert_relative_eq!(f.psi(&[0.5, 0.0]), -1.0, epsilon = 1e-14);
    }
}
