//! Dense LU solves for the small linear systems of policy evaluation.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

/// Systems whose reciprocal condition estimate falls below this are singular.
pub(crate) const RCOND_MIN: f64 = 1e-13;

pub(crate) struct Factored {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

/// Factors `a` (row-major, `n × n`) with partial pivoting.
///
/// Returns the reciprocal condition estimate on failure. The estimate is the
/// ratio of smallest to largest pivot magnitude, which is cheap and adequate
/// to separate unichain systems from multichain ones.
pub(crate) fn factor(n: usize, a: &[f64]) -> Result<Factored, f64> {
    let m = DMatrix::from_row_slice(n, n, a);
    let lu = m.lu();
    let u = lu.u();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        let p = libm::fabs(u[(i, i)]);
        lo = lo.min(p);
        hi = hi.max(p);
    }
    let rcond = if hi > 0.0 { lo / hi } else { 0.0 };
    if !(rcond >= RCOND_MIN) {
        return Err(rcond);
    }
    Ok(Factored { lu })
}

impl Factored {
    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = DVector::from_column_slice(b);
        // Factorization succeeded with nonzero pivots, so the solve cannot fail.
        let x = self.lu.solve(&rhs).expect("nonsingular factorization");
        x.iter().copied().collect()
    }
}
