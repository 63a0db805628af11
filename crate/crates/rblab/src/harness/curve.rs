use serde::Serialize;

use crate::config::AlgorithmName;

/// Mean regret over sample paths at every `t = 0..=T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretCurve {
    pub n: usize,
    pub algorithm: AlgorithmName,
    pub paths: usize,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

/// `t·Ĵ − Σ_{τ≤t} r_τ` for `t = 0..=T`, from per-step rewards.
pub fn path_regret(gain: f64, rewards: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(rewards.len() + 1);
    out.push(0.0);
    let mut total = 0.0;
    for (t, r) in rewards.iter().enumerate() {
        total += r;
        out.push((t + 1) as f64 * gain - total);
    }
    out
}

impl RegretCurve {
    /// Averages per-path regret series, all of equal length, in the given
    /// order.
    pub fn from_paths(n: usize, algorithm: AlgorithmName, series: &[Vec<f64>]) -> Self {
        let p = series.len();
        let len = series.first().map_or(0, Vec::len);
        let mut mean = vec![0.0; len];
        let mut stderr = vec![0.0; len];
        for t in 0..len {
            let m = series.iter().map(|s| s[t]).sum::<f64>() / p as f64;
            mean[t] = m;
            if p > 1 {
                let var = series.iter().map(|s| (s[t] - m) * (s[t] - m)).sum::<f64>() / (p - 1) as f64;
                stderr[t] = (var / p as f64).sqrt();
            }
        }
        Self { n, algorithm, paths: p, mean, stderr }
    }

    pub fn horizon(&self) -> usize {
        self.mean.len().saturating_sub(1)
    }

    /// `regret(t) / √t`, zero at `t = 0`.
    pub fn normalized(&self) -> Vec<f64> {
        self.mean.iter().enumerate().map(|(t, m)| if t == 0 { 0.0 } else { m / (t as f64).sqrt() }).collect()
    }

    pub fn final_regret(&self) -> f64 {
        *self.mean.last().unwrap_or(&0.0)
    }

    /// Least-squares slope of `ln regret` against `ln t` over `t ∈ [from, to]`,
    /// or `None` when some mean regret there is not positive.
    pub fn log_log_slope(&self, from: usize, to: usize) -> Option<f64> {
        let to = to.min(self.horizon());
        let (mut sx, mut sy, mut sxx, mut sxy, mut k) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for t in from.max(1)..=to {
            let y = self.mean[t];
            if !(y > 0.0) {
                return None;
            }
            let (x, y) = ((t as f64).ln(), y.ln());
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            k += 1.0;
        }
        let denom = k * sxx - sx * sx;
        (k >= 2.0 && denom > 0.0).then(|| (k * sxy - sx * sy) / denom)
    }
}
