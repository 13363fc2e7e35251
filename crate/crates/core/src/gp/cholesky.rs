use nalgebra::{Cholesky, DMatrix};

use crate::GpError;

/// Diagonal jitter tried in order until the factorization succeeds.
pub const JITTER_LADDER: [f64; 4] = [0.0, 1e-10, 1e-8, 1e-6];

/// Lower-triangular `L` with `L Lᵀ = K + jitter·I`.
#[derive(Debug, Clone)]
pub struct JitteredCholesky {
    pub l: DMatrix<f64>,
    pub jitter: f64,
}

/// Cholesky factor of a nominally PSD matrix, escalating diagonal jitter
/// through [`JITTER_LADDER`].
pub fn cholesky_with_jitter(k: &DMatrix<f64>) -> Result<JitteredCholesky, GpError> {
    let n = k.nrows();
    if k.ncols() != n {
        return Err(GpError::Dimension {
            expected: n,
            got: k.ncols(),
        });
    }
    for &jitter in &JITTER_LADDER {
        let mut m = k.clone();
        if jitter > 0.0 {
            for i in 0..n {
                m[(i, i)] += jitter;
            }
        }
        if let Some(c) = Cholesky::new(m) {
            let l = c.unpack();
            if l.iter().all(|v| v.is_finite()) {
                if jitter > 0.0 {
                    log::debug!("cholesky of {n}x{n} matrix needed jitter {jitter:e}");
                }
                return Ok(JitteredCholesky { l, jitter });
            }
        }
    }
    let diag = k.diagonal();
    Err(GpError::NotPositiveDefinite {
        max_jitter: JITTER_LADDER[JITTER_LADDER.len() - 1],
        min_diag: diag.iter().cloned().fold(f64::INFINITY, f64::min),
        max_diag: diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        size: n,
    })
}
