#![allow(dead_code)]

use rand::Rng;
use rblab_core::bayes::sample_dirichlet;
use rblab_core::envgen::{random_monotone_matrix, reset_matrix, EnvKind};
use rblab_core::rng::StreamRng;
use rblab_core::{Arm, Matrix};

/// Matrix with independent uniform-Dirichlet rows.
pub fn dirichlet_matrix(s: usize, rng: &mut StreamRng) -> Matrix {
    let mut p = Matrix::zeros(s, s);
    for i in 0..s {
        sample_dirichlet(&vec![1.0; s], rng, p.row_mut(i));
    }
    p
}

pub fn uniform_rewards(s: usize, rng: &mut StreamRng) -> Vec<f64> {
    (0..s).map(|_| rng.random::<f64>()).collect()
}

/// Reset-on-activate arm with a monotone passive matrix and `kind` rewards.
pub fn benchmark_arm(kind: EnvKind, s: usize, d: f64, rng: &mut StreamRng) -> Arm {
    let (r0, r1) = kind.rewards(s);
    Arm::new(random_monotone_matrix(s, d, rng).unwrap(), reset_matrix(s), r0, r1).unwrap()
}

/// Arm with Dirichlet dynamics under both actions and uniform rewards.
pub fn generic_arm(s: usize, rng: &mut StreamRng) -> Arm {
    let p0 = dirichlet_matrix(s, rng);
    let p1 = dirichlet_matrix(s, rng);
    let r0 = uniform_rewards(s, rng);
    let r1 = uniform_rewards(s, rng);
    Arm::new(p0, p1, r0, r1).unwrap()
}
