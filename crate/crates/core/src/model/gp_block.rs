//! Non-centred GP blocks `f = σ · L(ℓ) · z` with reverse-mode gradients.

use nalgebra::DMatrix;

use crate::gp::{cholesky_with_jitter, periodic_unit, periodic_unit_dlog_ell, sqexp_unit, sqexp_unit_dlog_ell};
use crate::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum KernelKind {
    /// Entries are raw lags; period 53.
    Periodic,
    /// Entries are squared distances.
    SqExp,
}

/// Pairwise input geometry of one GP block.
///
/// Kernels are evaluated once per distinct distance and scattered into the
/// matrix, since regular inputs repeat the same few distances.
#[derive(Debug, Clone)]
pub(crate) struct GpGeometry {
    pub kind: KernelKind,
    n: usize,
    /// Distinct lags (absolute) or squared distances.
    levels: Vec<f64>,
    /// Column-major `n × n` index into `levels`.
    level_of: Vec<u32>,
}

/// Factor of the unit-variance kernel at one length scale.
pub(crate) struct GpFactor {
    pub l: DMatrix<f64>,
    ell: f64,
}

impl GpGeometry {
    fn from_dist(kind: KernelKind, dist: DMatrix<f64>) -> Self {
        let mut levels: Vec<f64> = dist.iter().copied().collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        let level_of = dist
            .iter()
            .map(|d| levels.binary_search_by(|l| l.total_cmp(d)).expect("level present") as u32)
            .collect();
        Self {
            kind,
            n: dist.nrows(),
            levels,
            level_of,
        }
    }

    pub fn periodic(inputs: &[f64]) -> Self {
        let n = inputs.len();
        let dist = DMatrix::from_fn(n, n, |i, j| (inputs[i] - inputs[j]).abs());
        Self::from_dist(KernelKind::Periodic, dist)
    }

    pub fn sqexp(inputs: &[Vec<f64>]) -> Self {
        let n = inputs.len();
        let dist = DMatrix::from_fn(n, n, |i, j| crate::gp::sq_dist(&inputs[i], &inputs[j]));
        Self::from_dist(KernelKind::SqExp, dist)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    fn scatter(&self, k: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let vals: Vec<f64> = self.levels.iter().map(|&d| k(d)).collect();
        DMatrix::from_iterator(self.n, self.n, self.level_of.iter().map(|&i| vals[i as usize]))
    }

    fn unit(&self, ell: f64) -> DMatrix<f64> {
        match self.kind {
            KernelKind::Periodic => self.scatter(|d| periodic_unit(d, ell)),
            KernelKind::SqExp => self.scatter(|d| sqexp_unit(d, ell)),
        }
    }

    fn unit_dlog_ell(&self, ell: f64) -> DMatrix<f64> {
        match self.kind {
            KernelKind::Periodic => self.scatter(|d| periodic_unit_dlog_ell(d, ell)),
            KernelKind::SqExp => self.scatter(|d| sqexp_unit_dlog_ell(d, ell)),
        }
    }

    pub fn factor(&self, ell: f64, block: &str) -> Result<GpFactor, ModelError> {
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(ModelError::NonFinite(format!("{block}: length scale {ell}")));
        }
        let chol = cholesky_with_jitter(&self.unit(ell))?;
        Ok(GpFactor { l: chol.l, ell })
    }

    /// `σ · L · z`
    pub fn forward(&self, f: &GpFactor, sigma: f64, z: &[f64]) -> Vec<f64> {
        let n = self.size();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += f.l[(i, j)] * z[j];
            }
            out[i] = sigma * acc;
        }
        out
    }

    /// Given `fbar = ∂/∂f`, returns `(∂/∂log σ, ∂/∂log ℓ)` and adds
    /// `∂/∂z` into `gz`.
    pub fn backward(
        &self,
        f: &GpFactor,
        sigma: f64,
        z: &[f64],
        field: &[f64],
        fbar: &[f64],
        gz: &mut [f64],
    ) -> (f64, f64) {
        let n = self.size();
        let g_log_sigma: f64 = field.iter().zip(fbar).map(|(a, b)| a * b).sum();
        // u = Lᵀ fbar
        let mut u = vec![0.0; n];
        for j in 0..n {
            let mut acc = 0.0;
            for i in j..n {
                acc += f.l[(i, j)] * fbar[i];
            }
            u[j] = acc;
            gz[j] += sigma * acc;
        }
        if n == 0 || u.iter().all(|&v| v == 0.0) || z.iter().all(|&v| v == 0.0) {
            return (g_log_sigma, 0.0);
        }
        // dL = L Φ(L⁻¹ D L⁻ᵀ)
        let d = self.unit_dlog_ell(f.ell);
        let x = f.l.solve_lower_triangular(&d).expect("factor has nonzero diagonal");
        let a = f
            .l
            .solve_lower_triangular(&x.transpose())
            .expect("factor has nonzero diagonal");
        let mut g_log_ell = 0.0;
        for j in 0..n {
            let zj = z[j];
            if zj == 0.0 {
                continue;
            }
            g_log_ell += 0.5 * u[j] * zj * a[(j, j)];
            for i in j + 1..n {
                g_log_ell += u[i] * zj * a[(i, j)];
            }
        }
        (g_log_sigma, sigma * g_log_ell)
    }
}
