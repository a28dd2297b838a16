use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out += scale * a aᵀ` for a row-major `f × f` matrix.
#[inline]
pub(crate) fn add_outer(out: &mut [f64], a: &[f64], scale: f64) {
    let f = a.len();
    for r in 0..f {
        let s = scale * a[r];
        for c in 0..f {
            out[r * f + c] += s * a[c];
        }
    }
}

#[inline]
pub(crate) fn axpy(out: &mut [f64], a: &[f64], scale: f64) {
    for (o, x) in out.iter_mut().zip(a) {
        *o += scale * x;
    }
}

/// `out = m v` for a row-major square matrix.
pub(crate) fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let f = v.len();
    (0..f).map(|r| dot(&m[r * f..(r + 1) * f], v)).collect()
}

/// Gram matrix `Σ_rows x xᵀ` of a row-major `n × f` factor block.
pub(crate) fn gram(rows: &[f64], f: usize) -> Vec<f64> {
    let mut g = vec![0.0; f * f];
    for x in rows.chunks_exact(f) {
        add_outer(&mut g, x, 1.0);
    }
    g
}

/// Solves `a x = b` for symmetric positive definite `a`.
pub(crate) fn solve_spd(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let f = b.len();
    let m = DMatrix::from_row_slice(f, f, a);
    let rhs = DVector::from_column_slice(b);
    let x = match m.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::InvalidArgument("singular normal equations".into()))?,
    };
    Ok(x.iter().copied().collect())
}

pub(crate) fn uniform_init(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-0.01..0.01)).collect()
}
