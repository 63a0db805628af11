//! Run-trace export: one CSV row per step plus a JSON list of episodes.
//!
//! CSV columns are `algorithm,t,episode,state,action,reward,cumulative_reward,regret`.
//! `state` and `action` join the per-arm values with `;`. `episode` is 0 for
//! algorithms without episodes, and `regret` is empty when no baseline gain
//! is supplied.

use std::io::Write;

use rblab_core::sim::RunTrace;
use rblab_core::tsde::EpisodeRecord;
use serde::Serialize;

use crate::error::Result;
use crate::SCHEMA_VERSION;

fn join<T: ToString>(values: impl Iterator<Item = T>) -> String {
    values.map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

pub fn write_trace_csv<W: Write>(out: W, trace: &RunTrace, baseline_gain: Option<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["algorithm", "t", "episode", "state", "action", "reward", "cumulative_reward", "regret"])?;
    let labels = trace.episode_labels();
    let name = trace.algorithm.name();
    for t in 1..=trace.horizon() {
        let cumulative = trace.cumulative[t - 1];
        let regret = baseline_gain.map(|g| (t as f64 * g - cumulative).to_string()).unwrap_or_default();
        w.write_record([
            name.to_string(),
            t.to_string(),
            labels[t - 1].to_string(),
            join(trace.state_at(t).iter()),
            join(trace.actions_at(t).iter().map(|&a| u8::from(a))),
            trace.rewards[t - 1].to_string(),
            cumulative.to_string(),
            regret,
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Serialize)]
struct EpisodeJson<'a> {
    k: usize,
    start: usize,
    length: usize,
    trigger: &'a str,
    sample_seed: u64,
    resampled: bool,
}

#[derive(Serialize)]
struct EpisodesJson<'a> {
    schema_version: u32,
    algorithm: &'a str,
    horizon: usize,
    episodes: Vec<EpisodeJson<'a>>,
}

pub fn episodes_json(trace: &RunTrace) -> String {
    let doc = EpisodesJson {
        schema_version: SCHEMA_VERSION,
        algorithm: trace.algorithm.name(),
        horizon: trace.horizon(),
        episodes: trace.episodes.iter().map(episode_json).collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("episode list serializes");
    text.push('\n');
    text
}

fn episode_json(e: &EpisodeRecord) -> EpisodeJson<'_> {
    EpisodeJson {
        k: e.k,
        start: e.start,
        length: e.length,
        trigger: e.trigger.name(),
        sample_seed: e.sample_seed,
        resampled: e.resampled,
    }
}
