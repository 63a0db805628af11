//! Dirichlet posteriors over unknown transition rows.
//!
//! Each (arm, state, action) row carries independent Dirichlet parameters.
//! Observing a transition `(s, a) → s'` adds one to parameter `s'` of that
//! row, which is the exact conjugate update.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use rand_distr::{Distribution, Gamma};

use crate::arm::check_stochastic;
use crate::{Error, Matrix, Result};

/// Which actions' dynamics are unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnMode {
    BothActions,
    /// Active dynamics are known; only passive rows are learned.
    PassiveOnly,
}

/// Posterior of one arm. Row `(s, a)` lives at `s * 2 + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmPosterior {
    num_states: usize,
    prior: Vec<f64>,
    counts: Vec<f64>,
    visits: Vec<u64>,
    transitions: Vec<u64>,
    known_active: Option<Matrix>,
}

impl ArmPosterior {
    fn new(num_states: usize, prior: Vec<f64>) -> Self {
        let rows = 2 * num_states;
        Self {
            num_states,
            counts: prior.clone(),
            prior,
            visits: vec![0; rows],
            transitions: vec![0; rows * num_states],
            known_active: None,
        }
    }

    /// Rebuilds a posterior from its prior and transition counts.
    pub fn from_counts(
        num_states: usize,
        prior: Vec<f64>,
        transitions: Vec<u64>,
        known_active: Option<Matrix>,
    ) -> Result<Self> {
        let rows = 2 * num_states;
        if prior.len() != rows * num_states || transitions.len() != rows * num_states {
            return Err(Error::InvalidPrior(format!("count blocks must have {} entries", rows * num_states)));
        }
        check_prior(&prior)?;
        if let Some(p) = &known_active {
            check_stochastic(p)?;
            if p.rows() != num_states {
                return Err(Error::InvalidPrior(format!("known active matrix is not {num_states}x{num_states}")));
            }
        }
        let counts = prior.iter().zip(&transitions).map(|(p, &n)| p + n as f64).collect();
        let visits = transitions.chunks(num_states).map(|r| r.iter().sum()).collect();
        Ok(Self { num_states, prior, counts, visits, transitions, known_active })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    fn row(&self, s: usize, a: u8) -> core::ops::Range<usize> {
        let k = s * 2 + usize::from(a);
        k * self.num_states..(k + 1) * self.num_states
    }

    pub fn prior(&self, s: usize, a: u8) -> &[f64] {
        &self.prior[self.row(s, a)]
    }

    pub fn counts(&self, s: usize, a: u8) -> &[f64] {
        &self.counts[self.row(s, a)]
    }

    pub fn transitions(&self, s: usize, a: u8) -> &[u64] {
        &self.transitions[self.row(s, a)]
    }

    pub fn visits(&self, s: usize, a: u8) -> u64 {
        self.visits[s * 2 + usize::from(a)]
    }

    pub fn visit_counts(&self) -> &[u64] {
        &self.visits
    }

    pub fn known_active(&self) -> Option<&Matrix> {
        self.known_active.as_ref()
    }

    /// Number of observed transitions.
    pub fn steps(&self) -> u64 {
        self.visits.iter().sum()
    }
}

fn check_prior(prior: &[f64]) -> Result<()> {
    match prior.iter().find(|&&c| !(c > 0.0 && c.is_finite())) {
        Some(c) => Err(Error::InvalidPrior(format!("Dirichlet parameters must be positive, got {c}"))),
        None => Ok(()),
    }
}

/// Empirical transition frequencies of one row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalRow {
    /// `N(s,a,·) / max(1, N(s,a))`; all zeros when unvisited.
    pub probs: Vec<f64>,
    pub visited: bool,
}

/// One posterior draw of an arm's dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledDynamics {
    pub p_passive: Matrix,
    pub p_active: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    arms: Vec<ArmPosterior>,
}

impl Posterior {
    /// All-ones Dirichlet prior on every row of every arm.
    pub fn uniform(sizes: &[usize]) -> Self {
        Self { arms: sizes.iter().map(|&s| ArmPosterior::new(s, vec![1.0; 2 * s * s])).collect() }
    }

    /// Prior given row by row: `prior(arm, state, action)`.
    pub fn init_prior<F>(sizes: &[usize], mut prior: F) -> Result<Self>
    where
        F: FnMut(usize, usize, u8) -> Vec<f64>,
    {
        let mut arms = Vec::with_capacity(sizes.len());
        for (i, &s) in sizes.iter().enumerate() {
            let mut block = Vec::with_capacity(2 * s * s);
            for state in 0..s {
                for a in 0..2u8 {
                    let row = prior(i, state, a);
                    if row.len() != s {
                        return Err(Error::InvalidPrior(format!(
                            "arm {i} row ({state},{a}) has {} parameters, expected {s}",
                            row.len()
                        )));
                    }
                    check_prior(&row)?;
                    block.extend(row);
                }
            }
            arms.push(ArmPosterior::new(s, block));
        }
        Ok(Self { arms })
    }

    pub fn from_arms(arms: Vec<ArmPosterior>) -> Result<Self> {
        let modes = arms.iter().map(|a| a.known_active.is_some());
        if modes.clone().any(|k| k) && !modes.clone().all(|k| k) {
            return Err(Error::InvalidPrior("known active dynamics must be given for all arms or none".into()));
        }
        Ok(Self { arms })
    }

    /// Switches to [`LearnMode::PassiveOnly`] with the given active matrices.
    pub fn with_known_active(mut self, active: Vec<Matrix>) -> Result<Self> {
        if active.len() != self.arms.len() {
            return Err(Error::InvalidArgument(format!(
                "{} known matrices for {} arms",
                active.len(),
                self.arms.len()
            )));
        }
        for (arm, p) in self.arms.iter_mut().zip(active) {
            check_stochastic(&p)?;
            if p.rows() != arm.num_states {
                return Err(Error::InvalidArgument("known active matrix has the wrong size".into()));
            }
            arm.known_active = Some(p);
        }
        Ok(self)
    }

    pub fn mode(&self) -> LearnMode {
        if self.arms.first().is_some_and(|a| a.known_active.is_some()) {
            LearnMode::PassiveOnly
        } else {
            LearnMode::BothActions
        }
    }

    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn arm(&self, i: usize) -> &ArmPosterior {
        &self.arms[i]
    }

    pub fn arms(&self) -> &[ArmPosterior] {
        &self.arms
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.arms.iter().map(|a| a.num_states).collect()
    }

    /// Conjugate update for the transition `(s, a) → next` of arm `i`.
    pub fn observe(&mut self, i: usize, s: usize, a: u8, next: usize) -> Result<()> {
        let limit = self.arms.len();
        let arm = self.arms.get_mut(i).ok_or(Error::OutOfRange { what: "arm", index: i, limit })?;
        let n = arm.num_states;
        for (what, index) in [("state", s), ("next state", next)] {
            if index >= n {
                return Err(Error::OutOfRange { what, index, limit: n });
            }
        }
        if a > 1 {
            return Err(Error::OutOfRange { what: "action", index: usize::from(a), limit: 2 });
        }
        let k = s * 2 + usize::from(a);
        arm.counts[k * n + next] += 1.0;
        arm.transitions[k * n + next] += 1;
        arm.visits[k] += 1;
        Ok(())
    }

    /// Visit counts of all arms, concatenated in arm order.
    pub fn write_visit_counts(&self, out: &mut Vec<u64>) {
        out.clear();
        for arm in &self.arms {
            out.extend_from_slice(&arm.visits);
        }
    }

    /// Normalized Dirichlet parameters of a row.
    pub fn posterior_mean(&self, i: usize, s: usize, a: u8) -> Vec<f64> {
        let row = self.arms[i].counts(s, a);
        let total: f64 = row.iter().sum();
        row.iter().map(|c| c / total).collect()
    }

    pub fn empirical_row(&self, i: usize, s: usize, a: u8) -> EmpiricalRow {
        let arm = &self.arms[i];
        let visits = arm.visits(s, a);
        let denom = visits.max(1) as f64;
        EmpiricalRow { probs: arm.transitions(s, a).iter().map(|&c| c as f64 / denom).collect(), visited: visits > 0 }
    }

    /// Draws every unknown row from its Dirichlet posterior.
    pub fn sample_model<R: RngCore + ?Sized>(&self, rng: &mut R) -> Vec<SampledDynamics> {
        self.arms
            .iter()
            .map(|arm| {
                let n = arm.num_states;
                let mut p_passive = Matrix::zeros(n, n);
                let mut p_active = Matrix::zeros(n, n);
                for s in 0..n {
                    sample_dirichlet(arm.counts(s, 0), rng, p_passive.row_mut(s));
                    match &arm.known_active {
                        Some(known) => p_active.row_mut(s).copy_from_slice(known.row(s)),
                        None => sample_dirichlet(arm.counts(s, 1), rng, p_active.row_mut(s)),
                    }
                }
                SampledDynamics { p_passive, p_active }
            })
            .collect()
    }

    /// Verifies the count-conservation invariants.
    pub fn check_invariants(&self) -> Result<()> {
        for (i, arm) in self.arms.iter().enumerate() {
            let n = arm.num_states;
            for k in 0..2 * n {
                let row = k * n..(k + 1) * n;
                let total: u64 = arm.transitions[row.clone()].iter().sum();
                if total != arm.visits[k] {
                    return Err(Error::InvalidPrior(format!("arm {i} row {k}: transitions sum {total} ≠ visits")));
                }
                for j in row {
                    if arm.counts[j] != arm.prior[j] + arm.transitions[j] as f64 {
                        return Err(Error::InvalidPrior(format!("arm {i}: counts drifted from prior + transitions")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Writes one Dirichlet(`alpha`) draw into `out`, summing to 1.
pub fn sample_dirichlet<R: RngCore + ?Sized>(alpha: &[f64], rng: &mut R, out: &mut [f64]) {
    for (o, &a) in out.iter_mut().zip(alpha) {
        // Parameters are validated positive and finite.
        *o = Gamma::new(a, 1.0).expect("positive shape").sample(rng);
    }
    let total: f64 = out.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        // Every gamma draw underflowed; fall back to the dominant parameter.
        let best = (0..alpha.len()).fold(0, |b, j| if alpha[j] > alpha[b] { j } else { b });
        out.iter_mut().enumerate().for_each(|(j, o)| *o = f64::from(u8::from(j == best)));
        return;
    }
    out.iter_mut().for_each(|o| *o /= total);
    // Put the rounding remainder on the largest entry so the row sums to 1.
    let big = (0..out.len()).fold(0, |b, j| if out[j] > out[b] { j } else { b });
    let rest: f64 = out.iter().enumerate().filter(|(j, _)| *j != big).map(|(_, v)| v).sum();
    out[big] = (1.0 - rest).max(0.0);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn uniform_prior_rows() {
        let post = Posterior::uniform(&[2, 3]);
        assert_eq!(post.arm(1).counts(2, 1), &[1.0, 1.0, 1.0]);
        assert_eq!(post.posterior_mean(0, 1, 0), vec![0.5, 0.5]);
        assert_eq!(post.mode(), LearnMode::BothActions);
        post.check_invariants().unwrap();
    }

    #[test]
    fn observe_updates_one_entry() {
        let mut post = Posterior::uniform(&[3]);
        post.observe(0, 1, 1, 2).unwrap();
        assert_eq!(post.arm(0).counts(1, 1), &[1.0, 1.0, 2.0]);
        assert_eq!(post.arm(0).visits(1, 1), 1);
        assert_eq!(post.arm(0).visits(1, 0), 0);
        assert_eq!(post.arm(0).steps(), 1);
        let mean = post.posterior_mean(0, 1, 1);
        assert_eq!(mean, vec![0.25, 0.25, 0.5]);
        post.check_invariants().unwrap();
    }

    #[test]
    fn observe_range_checks() {
        let mut post = Posterior::uniform(&[2]);
        assert!(matches!(post.observe(1, 0, 0, 0), Err(Error::OutOfRange { what: "arm", .. })));
        assert!(matches!(post.observe(0, 2, 0, 0), Err(Error::OutOfRange { what: "state", .. })));
        assert!(matches!(post.observe(0, 0, 0, 5), Err(Error::OutOfRange { what: "next state", .. })));
        assert!(matches!(post.observe(0, 0, 2, 0), Err(Error::OutOfRange { what: "action", .. })));
        assert_eq!(post, Posterior::uniform(&[2]));
    }

    #[test]
    fn invalid_priors_rejected() {
        assert!(Posterior::init_prior(&[2], |_, _, _| vec![1.0, 0.0]).is_err());
        assert!(Posterior::init_prior(&[2], |_, _, _| vec![1.0, f64::NAN]).is_err());
        assert!(Posterior::init_prior(&[2], |_, _, _| vec![1.0]).is_err());
        let post = Posterior::init_prior(&[2], |_, s, a| vec![1.0 + s as f64, 1.0 + f64::from(a)]).unwrap();
        assert_eq!(post.arm(0).prior(1, 1), &[2.0, 2.0]);
    }

    #[test]
    fn empirical_row_of_unvisited_state() {
        let mut post = Posterior::uniform(&[3]);
        let row = post.empirical_row(0, 0, 0);
        assert!(!row.visited);
        assert_eq!(row.probs, vec![0.0; 3]);
        post.observe(0, 0, 0, 1).unwrap();
        post.observe(0, 0, 0, 1).unwrap();
        post.observe(0, 0, 0, 2).unwrap();
        post.observe(0, 0, 0, 1).unwrap();
        let row = post.empirical_row(0, 0, 0);
        assert!(row.visited);
        assert_eq!(row.probs, vec![0.0, 0.75, 0.25]);
    }

    #[test]
    fn huge_concentration_pins_the_sample() {
        let target = [0.1, 0.6, 0.3];
        let post = Posterior::init_prior(&[3], |_, _, _| target.iter().map(|p| p * 1e9).collect()).unwrap();
        let draw = post.sample_model(&mut seeded(4));
        for s in 0..3 {
            for (a, b) in draw[0].p_passive.row(s).iter().zip(target) {
                assert!((a - b).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn samples_are_seed_deterministic_and_stochastic() {
        let mut post = Posterior::uniform(&[4, 2]);
        post.observe(0, 3, 1, 0).unwrap();
        let a = post.sample_model(&mut seeded(9));
        let b = post.sample_model(&mut seeded(9));
        assert_eq!(a, b);
        for d in &a {
            for p in [&d.p_passive, &d.p_active] {
                check_stochastic(p).unwrap();
            }
        }
    }

    #[test]
    fn known_active_rows_are_copied() {
        let known = Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0]]).unwrap();
        let post = Posterior::uniform(&[2]).with_known_active(vec![known.clone()]).unwrap();
        assert_eq!(post.mode(), LearnMode::PassiveOnly);
        assert_eq!(post.sample_model(&mut seeded(1))[0].p_active, known);
        assert!(Posterior::uniform(&[2, 2]).with_known_active(vec![known]).is_err());
    }

    #[test]
    fn from_counts_round_trip() {
        let mut post = Posterior::uniform(&[2]);
        for (s, a, x) in [(0, 0, 1), (1, 1, 0), (1, 1, 0), (0, 1, 1)] {
            post.observe(0, s, a, x).unwrap();
        }
        let arm = post.arm(0);
        let rebuilt =
            ArmPosterior::from_counts(2, arm.prior.clone(), arm.transitions.clone(), None).unwrap();
        assert_eq!(&rebuilt, arm);
    }

    #[test]
    fn dirichlet_underflow_falls_back_to_dominant_parameter() {
        let mut out = [0.0; 3];
        sample_dirichlet(&[1e-300, 1e-300, 2e-300], &mut seeded(3), &mut out);
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(out.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }
}
