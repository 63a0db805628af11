//! Random stochastically monotone matrices and the two benchmark
//! environments built from them.
//!
//! Matrices are generated on the grid of multiples of 2⁻⁴⁸. Every row sum
//! and every tail sum `F_ij = Σ_{y≥j} P_iy` of a generated matrix is then
//! exactly representable, so rows sum to exactly 1 and the monotonicity
//! check below involves no rounding.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::arm::{Arm, BanditInstance, RewardModel};
use crate::{Error, Matrix, Result};

const GRID_BITS: i32 = 48;
const UNIT: i64 = 1 << GRID_BITS;

/// Benchmark environment family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    /// Machine maintenance: all arms earn, passive reward falls with the state.
    A,
    /// Only active arms earn, increasing in the state.
    B,
}

impl EnvKind {
    pub fn reward_model(self) -> RewardModel {
        match self {
            EnvKind::A => RewardModel::A,
            EnvKind::B => RewardModel::B,
        }
    }

    /// `(r_passive, r_active)` on states `0..s`.
    pub fn rewards(self, s: usize) -> (Vec<f64>, Vec<f64>) {
        let top = ((s - 1) * (s - 1)) as f64;
        match self {
            EnvKind::A => ((0..s).map(|x| top - (x * x) as f64).collect(), vec![0.5 * top; s]),
            EnvKind::B => (vec![0.0; s], (0..s).map(|x| (x * x) as f64).collect()),
        }
    }
}

/// Spread parameter used by the benchmark environments.
pub fn default_spread(s: usize) -> f64 {
    0.5 / s as f64
}

/// Every row jumps to state 0.
pub fn reset_matrix(s: usize) -> Matrix {
    let mut row = vec![0.0; s];
    row[0] = 1.0;
    Matrix::repeat_row(&row)
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: i64, hi: i64) -> i64 {
    if hi <= lo {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Random `s × s` stochastically monotone matrix with spread `d`.
///
/// Row 0 puts mass in `[1 − d, 1]` on state 0 and spreads the rest left to
/// right, the last entry taking the remainder. The last column then rises
/// row by row by at most `d`; the remaining entries of each row are filled
/// right to left between the monotonicity lower bound and that bound plus
/// `d`, and column 0 takes whatever mass is left.
pub fn random_monotone_matrix<R: Rng + ?Sized>(s: usize, d: f64, rng: &mut R) -> Result<Matrix> {
    if s < 2 {
        return Err(Error::InvalidArgument("monotone matrices need at least 2 states".into()));
    }
    if !(0.0..=1.0).contains(&d) {
        return Err(Error::InvalidArgument(alloc::format!("spread {d} outside [0, 1]")));
    }
    let spread = libm::floor(d * UNIT as f64) as i64;
    let mut p = vec![vec![0i64; s]; s];

    p[0][0] = uniform(rng, UNIT - spread, UNIT);
    let mut left = UNIT - p[0][0];
    for j in 1..s - 1 {
        p[0][j] = uniform(rng, 0, left);
        left -= p[0][j];
    }
    p[0][s - 1] += left;

    for i in 1..s {
        let above = p[i - 1][s - 1];
        p[i][s - 1] = uniform(rng, above, (above + spread).min(UNIT));
    }

    // Tail sums of the previous row, F_{i-1, j}.
    let mut tail_prev = tails(&p[0]);
    for i in 1..s {
        let mut tail = p[i][s - 1];
        for j in (1..s - 1).rev() {
            let lower = tail_prev[j] - tail;
            let cap = UNIT - tail;
            let lo = lower.max(0);
            let hi = (lower + spread).min(cap).max(lo);
            p[i][j] = uniform(rng, lo, hi);
            tail += p[i][j];
        }
        p[i][0] = UNIT - tail;
        tail_prev = tails(&p[i]);
    }

    let scale = 1.0 / UNIT as f64;
    let rows: Vec<Vec<f64>> = p.iter().map(|r| r.iter().map(|&x| x as f64 * scale).collect()).collect();
    Ok(Matrix::from_rows(&rows).expect("square"))
}

fn tails(row: &[i64]) -> Vec<i64> {
    let mut out = vec![0; row.len() + 1];
    for j in (0..row.len()).rev() {
        out[j] = out[j + 1] + row[j];
    }
    out
}

/// First `(i, j)` with `F_ij > F_{i+1,j}`, where `F_ij = Σ_{y≥j} P_iy`.
/// Monotonicity over all row pairs `i ≤ l` follows from adjacent rows.
pub fn monotonicity_violation(p: &Matrix) -> Option<(usize, usize)> {
    let n = p.rows();
    let tail = |i: usize| -> Vec<f64> {
        let mut out = vec![0.0; n + 1];
        for j in (0..n).rev() {
            out[j] = out[j + 1] + p[(i, j)];
        }
        out
    };
    let mut prev = tail(0);
    for i in 1..n {
        let cur = tail(i);
        if let Some(j) = (0..n).find(|&j| prev[j] > cur[j]) {
            return Some((i - 1, j));
        }
        prev = cur;
    }
    None
}

pub fn is_stochastically_monotone(p: &Matrix) -> bool {
    monotonicity_violation(p).is_none()
}

/// `n` arms with reset-on-activate dynamics, monotone passive dynamics of
/// spread `0.5 / s`, budget 1, and the rewards of `kind`.
pub fn make_environment<R: Rng + ?Sized>(kind: EnvKind, n: usize, s: usize, rng: &mut R) -> Result<BanditInstance> {
    if n == 0 {
        return Err(Error::InvalidArgument("environment needs at least one arm".into()));
    }
    let passive = (0..n)
        .map(|_| random_monotone_matrix(s, default_spread(s), rng))
        .collect::<Result<Vec<_>>>()?;
    with_passive_dynamics(kind, passive)
}

/// Benchmark environment around the given passive matrices.
pub fn with_passive_dynamics(kind: EnvKind, passive: Vec<Matrix>) -> Result<BanditInstance> {
    let arms = passive
        .into_iter()
        .map(|p| {
            let s = p.rows();
            let (r_passive, r_active) = kind.rewards(s);
            Arm::new(p, reset_matrix(s), r_passive, r_active)
        })
        .collect::<Result<Vec<_>>>()?;
    BanditInstance::new(arms, 1, kind.reward_model())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn zero_spread_gives_first_unit_rows() {
        let p = random_monotone_matrix(4, 0.0, &mut seeded(1)).unwrap();
        assert_eq!(p, reset_matrix(4));
    }

    #[test]
    fn generated_rows_are_exact_and_monotone() {
        let mut rng = seeded(5);
        for s in [2, 3, 5, 10] {
            for d in [0.01, default_spread(s), 0.9] {
                let p = random_monotone_matrix(s, d, &mut rng).unwrap();
                for row in p.iter_rows() {
                    assert_eq!(row.iter().sum::<f64>(), 1.0);
                    assert!(row.iter().all(|&x| x >= 0.0));
                }
                assert!(is_stochastically_monotone(&p), "s={s} d={d}: {p:?}");
            }
        }
    }

    #[test]
    fn bad_parameters_rejected() {
        assert!(random_monotone_matrix(1, 0.1, &mut seeded(1)).is_err());
        assert!(random_monotone_matrix(3, -0.1, &mut seeded(1)).is_err());
        assert!(random_monotone_matrix(3, f64::NAN, &mut seeded(1)).is_err());
    }

    #[test]
    fn monotonicity_violation_located() {
        let p = Matrix::from_rows(&[[0.2, 0.8], [0.5, 0.5]]).unwrap();
        assert_eq!(monotonicity_violation(&p), Some((0, 1)));
        let q = Matrix::from_rows(&[[0.5, 0.5], [0.2, 0.8]]).unwrap();
        assert_eq!(monotonicity_violation(&q), None);
    }

    #[test]
    fn environment_rewards() {
        let (r0, r1) = EnvKind::A.rewards(10);
        assert_eq!((r0[0], r0[9], r1[3]), (81.0, 0.0, 40.5));
        let (r0, r1) = EnvKind::B.rewards(10);
        assert_eq!((r0[4], r1[9], r1[0]), (0.0, 81.0, 0.0));
    }

    #[test]
    fn benchmark_environment_shape() {
        let inst = make_environment(EnvKind::B, 3, 5, &mut seeded(2)).unwrap();
        assert!(inst.validate().is_empty());
        assert_eq!((inst.num_arms(), inst.budget, inst.r_max), (3, 1, 16.0));
        for arm in &inst.arms {
            assert_eq!(arm.p_active, reset_matrix(5));
            assert!(is_stochastically_monotone(&arm.p_passive));
        }
        assert!(make_environment(EnvKind::A, 0, 5, &mut seeded(2)).is_err());
    }
}
