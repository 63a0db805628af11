use rblab_core::eval::joint_policy_gain;
use rblab_core::rng::StreamRng;
use rblab_core::sim::{rollout_gain, GainEstimate};
use rblab_core::{BanditInstance, Error as CoreError, WhittleTable};

use crate::config::BaselineMethod;
use crate::error::{Error, Result};

/// Average reward of the index policy of `tables` on `instance`.
///
/// `ExactJoint` solves the joint chain (zero standard error) and fails with
/// a size error beyond oracle scale; use `LongRollout` there.
pub fn estimate_baseline_gain(
    instance: &BanditInstance,
    tables: &WhittleTable,
    method: BaselineMethod,
    horizon: usize,
    reps: usize,
    rng: &mut StreamRng,
) -> Result<GainEstimate> {
    Ok(match method {
        BaselineMethod::ExactJoint => match joint_policy_gain(instance, tables) {
            Ok(mean) => GainEstimate { mean, stderr: 0.0 },
            Err(e @ CoreError::TooLarge { .. }) => {
                return Err(Error::Config(format!("exact_joint baseline: {e}; use long_rollout for instances this large")))
            }
            Err(e) => return Err(e.into()),
        },
        BaselineMethod::LongRollout => rollout_gain(instance, tables, horizon, reps, rng)?,
    })
}
