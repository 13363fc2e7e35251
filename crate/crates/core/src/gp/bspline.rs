use serde::{Deserialize, Serialize};

use crate::GpError;

pub const CUBIC: usize = 3;

/// Clamped (open uniform) knot vector: `degree + 1` repeated knots at each
/// end of `[lo, hi]` and equally spaced interior knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    knots: Vec<f64>,
    n_basis: usize,
    degree: usize,
}

impl KnotVector {
    pub fn clamped_uniform(n_basis: usize, degree: usize, lo: f64, hi: f64) -> Result<Self, GpError> {
        if n_basis < degree + 1 {
            return Err(GpError::TooFewBasis(n_basis));
        }
        let intervals = n_basis - degree;
        let mut knots = Vec::with_capacity(n_basis + degree + 1);
        knots.extend(std::iter::repeat_n(lo, degree));
        for i in 0..=intervals {
            knots.push(lo + (hi - lo) * i as f64 / intervals as f64);
        }
        knots.extend(std::iter::repeat_n(hi, degree));
        // pin the ends exactly
        let last = knots.len() - 1 - degree;
        knots[last] = hi;
        Ok(Self {
            knots,
            n_basis,
            degree,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn span_range(&self) -> (f64, f64) {
        (self.knots[self.degree], self.knots[self.n_basis])
    }

    fn find_span(&self, x: f64) -> usize {
        let (p, n) = (self.degree, self.n_basis);
        if x >= self.knots[n] {
            return n - 1;
        }
        // largest i in [p, n-1] with knots[i] <= x
        let mut lo = p;
        let mut hi = n;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if x < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// The `degree + 1` possibly-nonzero basis values at `x` and the index of
    /// the first of them.
    pub fn nonzero_basis(&self, x: f64) -> Result<(usize, Vec<f64>), GpError> {
        let (lo, hi) = self.span_range();
        let tol = 1e-12 * (hi - lo);
        if !(x >= lo - tol && x <= hi + tol) {
            return Err(GpError::OutOfSpan { x, lo, hi });
        }
        let x = x.clamp(lo, hi);
        let p = self.degree;
        let span = self.find_span(x);
        let mut values = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        values[0] = 1.0;
        for j in 1..=p {
            left[j] = x - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = values[r] / (right[r + 1] + left[j - r]);
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        Ok((span - p, values))
    }

    /// Full basis row of length `n_basis`.
    pub fn basis_row(&self, x: f64) -> Result<Vec<f64>, GpError> {
        let (first, vals) = self.nonzero_basis(x)?;
        let mut row = vec![0.0; self.n_basis];
        row[first..first + vals.len()].copy_from_slice(&vals);
        Ok(row)
    }
}

/// Cubic basis row over a clamped uniform knot vector on `[-1, 1]`.
pub fn bspline_basis_row(x: f64, knots: &KnotVector) -> Result<Vec<f64>, GpError> {
    knots.basis_row(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Plain recursive Cox–de Boor, 0/0 := 0.
    fn cox_de_boor(i: usize, p: usize, x: f64, t: &[f64]) -> f64 {
        if p == 0 {
            return if t[i] <= x && x < t[i + 1] { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = t[i + p] - t[i];
        if d1 > 0.0 {
            v += (x - t[i]) / d1 * cox_de_boor(i, p - 1, x, t);
        }
        let d2 = t[i + p + 1] - t[i + 1];
        if d2 > 0.0 {
            v += (t[i + p + 1] - x) / d2 * cox_de_boor(i + 1, p - 1, x, t);
        }
        v
    }

    #[test]
    fn knot_layout() {
        let k = KnotVector::clamped_uniform(6, CUBIC, -1.0, 1.0).unwrap();
        let expected = [-1.0, -1.0, -1.0, -1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0, 1.0, 1.0, 1.0];
        for (a, b) in k.knots().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(KnotVector::clamped_uniform(3, CUBIC, -1.0, 1.0).is_err());
    }

    #[test]
    fn matches_recursive_oracle_at_midpoint() {
        let k = KnotVector::clamped_uniform(10, CUBIC, -1.0, 1.0).unwrap();
        let row = bspline_basis_row(0.0, &k).unwrap();
        for (i, v) in row.iter().enumerate() {
            let oracle = cox_de_boor(i, CUBIC, 0.0, k.knots());
            assert!((v - oracle).abs() < 1e-14, "basis {i}: {v} vs {oracle}");
        }
    }

    #[test]
    fn matches_oracle_randomly() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let k = KnotVector::clamped_uniform(7, CUBIC, -1.0, 1.0).unwrap();
        for _ in 0..200 {
            let x: f64 = rng.random_range(-1.0..1.0);
            let row = k.basis_row(x).unwrap();
            for (i, v) in row.iter().enumerate() {
                assert!((v - cox_de_boor(i, CUBIC, x, k.knots())).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn partition_of_unity_and_nonnegativity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let k = KnotVector::clamped_uniform(12, CUBIC, -1.0, 1.0).unwrap();
        let mut xs: Vec<f64> = (0..1000).map(|_| rng.random_range(-1.0..=1.0)).collect();
        xs.extend(k.knots().iter().copied());
        for x in xs {
            let row = k.basis_row(x).unwrap();
            assert!(row.iter().all(|&v| v >= 0.0));
            assert!(row.iter().filter(|&&v| v != 0.0).count() <= CUBIC + 1);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn outside_span() {
        let k = KnotVector::clamped_uniform(5, CUBIC, -1.0, 1.0).unwrap();
        assert!(k.basis_row(1.01).is_err());
        assert!(k.basis_row(f64::NAN).is_err());
        assert_eq!(k.basis_row(1.0).unwrap()[4], 1.0);
        assert_eq!(k.basis_row(-1.0).unwrap()[0], 1.0);
    }
}
