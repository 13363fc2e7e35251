use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::bspline::{KnotVector, CUBIC};
use super::cholesky::cholesky_with_jitter;
use super::kernel::SqExpKernel;
use crate::GpError;

/// Default threshold below which a basis product is treated as absent.
pub const DEFAULT_PRUNE_EPS: f64 = 1e-6;

/// Tensor-product cubic B-spline design over site coordinates in `[-1, 1]²`.
///
/// Only the `(g, h)` products that reach above the prune threshold at some
/// site are kept; `active` lists them in row-major `(g, h)` order and the
/// design is stored sparsely, one row per site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineSurface {
    pub n: usize,
    pub knots: KnotVector,
    pub active: Vec<(usize, usize)>,
    rows: Vec<Vec<(u32, f64)>>,
}

impl SplineSurface {
    pub fn n_sites(&self) -> usize {
        self.rows.len()
    }

    /// Number of retained weights `M`.
    pub fn n_weights(&self) -> usize {
        self.active.len()
    }

    pub fn row(&self, site: usize) -> &[(u32, f64)] {
        &self.rows[site]
    }

    /// `B · w`
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(c, b)| b * w[c as usize]).sum())
            .collect()
    }

    /// `Bᵀ · v`, accumulated into `out`.
    pub fn apply_transpose_into(&self, v: &[f64], out: &mut [f64]) {
        for (r, &vs) in self.rows.iter().zip(v) {
            if vs == 0.0 {
                continue;
            }
            for &(c, b) in r {
                out[c as usize] += b * vs;
            }
        }
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_sites(), self.n_weights());
        for (s, r) in self.rows.iter().enumerate() {
            for &(c, b) in r {
                m[(s, c as usize)] = b;
            }
        }
        m
    }

    /// Basis indices rescaled to `[-1, 1]` per axis, the GP inputs.
    pub fn index_coords(&self) -> Vec<Vec<f64>> {
        let scale = |i: usize| {
            if self.n > 1 {
                2.0 * i as f64 / (self.n - 1) as f64 - 1.0
            } else {
                0.0
            }
        };
        self.active.iter().map(|&(g, h)| vec![scale(g), scale(h)]).collect()
    }

    /// Sparse triplets `(site, column, value)` for debugging dumps.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(s, r)| r.iter().map(move |&(c, b)| (s, c as usize, b)))
            .collect()
    }
}

/// Builds the pruned tensor-product design for sites at `(lon, lat)`.
pub fn build_spline_surface(
    lon: &[f64],
    lat: &[f64],
    n: usize,
    prune_eps: f64,
) -> Result<SplineSurface, GpError> {
    if n < CUBIC + 1 {
        return Err(GpError::TooFewBasis(n));
    }
    if lon.len() != lat.len() {
        return Err(GpError::Dimension {
            expected: lon.len(),
            got: lat.len(),
        });
    }
    let knots = KnotVector::clamped_uniform(n, CUBIC, -1.0, 1.0)?;
    let mut per_site = Vec::with_capacity(lon.len());
    let mut col_max = vec![0.0f64; n * n];
    for (&x, &y) in lon.iter().zip(lat) {
        let (gx, bx) = knots.nonzero_basis(x)?;
        let (gy, by) = knots.nonzero_basis(y)?;
        let mut entries = Vec::with_capacity(bx.len() * by.len());
        for (a, &vx) in bx.iter().enumerate() {
            for (b, &vy) in by.iter().enumerate() {
                let col = (gx + a) * n + (gy + b);
                let v = vx * vy;
                col_max[col] = col_max[col].max(v.abs());
                entries.push((col, v));
            }
        }
        per_site.push(entries);
    }
    let mut remap = vec![u32::MAX; n * n];
    let mut active = Vec::new();
    for (col, &m) in col_max.iter().enumerate() {
        if m > prune_eps {
            remap[col] = active.len() as u32;
            active.push((col / n, col % n));
        }
    }
    let rows = per_site
        .into_iter()
        .map(|entries| {
            let mut r: Vec<(u32, f64)> = entries
                .into_iter()
                .filter(|&(c, _)| remap[c] != u32::MAX)
                .map(|(c, v)| (remap[c], v))
                .collect();
            r.sort_by_key(|&(c, _)| c);
            r
        })
        .collect();
    Ok(SplineSurface {
        n,
        knots,
        active,
        rows,
    })
}

/// Site-level field `B · L_w · z` where `L_w` factors the kernel over the
/// surface's active basis indices.
pub fn project_weights(
    z_raw: &[f64],
    surface: &SplineSurface,
    kernel: &SqExpKernel,
) -> Result<Vec<f64>, GpError> {
    let m = surface.n_weights();
    if z_raw.len() != m {
        return Err(GpError::Dimension {
            expected: m,
            got: z_raw.len(),
        });
    }
    let k = kernel.gram(&surface.index_coords());
    let chol = cholesky_with_jitter(&k)?;
    let w = &chol.l * DVector::from_column_slice(z_raw);
    Ok(surface.apply(w.as_slice()))
}
