//! Seedable arrival generators for bursty, queue-driven and mixed traffic.
//!
//! Every generator is a pure function of `(spec, t, dt)`. Noise draws are keyed
//! on the seed and the timestamp, so the same instant always yields the same
//! count no matter how many other instants were sampled before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadKind {
    /// Rectangular spikes of `burst_amplitude × base_rate` on a fixed period.
    Bursty,
    /// Piecewise-linear ramps and plateaus given by `ramps`.
    QueueDriven,
    /// A latency-sensitive stream plus periodic bulk batches.
    Mixed,
}

/// One ramp of a queue-driven profile: the rate moves linearly from its
/// previous level to `rate` over `[start, end]`, then holds there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampSegment {
    pub start: f64,
    pub end: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadSpec {
    pub kind: WorkloadKind,
    /// Requests per second outside bursts.
    pub base_rate: f64,
    pub burst_amplitude: f64,
    pub burst_duration: f64,
    pub burst_interval: f64,
    /// Start of the first burst or batch window.
    pub burst_offset: f64,
    /// Share of the mean rate delivered as batches (mixed only).
    pub batch_fraction: f64,
    /// Standard deviation of the log-normal noise factor.
    pub noise_std: f64,
    pub seed: u64,
    /// Ramp segments, ordered and non-overlapping (queue-driven only).
    pub ramps: Vec<RampSegment>,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            kind: WorkloadKind::Bursty,
            base_rate: 50.0,
            burst_amplitude: 4.0,
            burst_duration: 60.0,
            burst_interval: 600.0,
            burst_offset: 300.0,
            batch_fraction: 0.0,
            noise_std: 0.0,
            seed: 0,
            ramps: Vec::new(),
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |field: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(
                    format!("workload.{field}"),
                    format!("must be finite and >= 0, got {v}"),
                ))
            }
        };
        nonneg("base_rate", self.base_rate)?;
        nonneg("noise_std", self.noise_std)?;
        nonneg("burst_offset", self.burst_offset)?;
        if !(self.burst_amplitude.is_finite() && self.burst_amplitude >= 1.0) {
            return Err(Error::config(
                "workload.burst_amplitude",
                format!("must be >= 1, got {}", self.burst_amplitude),
            ));
        }
        if !(0.0..=1.0).contains(&self.batch_fraction) {
            return Err(Error::config(
                "workload.batch_fraction",
                format!("must lie in [0, 1], got {}", self.batch_fraction),
            ));
        }
        if matches!(self.kind, WorkloadKind::Bursty | WorkloadKind::Mixed) {
            if !(self.burst_interval.is_finite() && self.burst_interval > 0.0) {
                return Err(Error::config(
                    "workload.burst_interval",
                    format!("must be > 0, got {}", self.burst_interval),
                ));
            }
            if !(self.burst_duration > 0.0 && self.burst_duration <= self.burst_interval) {
                return Err(Error::config(
                    "workload.burst_duration",
                    format!(
                        "must lie in (0, burst_interval = {}], got {}",
                        self.burst_interval, self.burst_duration
                    ),
                ));
            }
        }
        let mut prev_end = f64::NEG_INFINITY;
        for (i, seg) in self.ramps.iter().enumerate() {
            let ok = seg.start.is_finite()
                && seg.end.is_finite()
                && seg.start >= prev_end
                && seg.end >= seg.start
                && seg.rate.is_finite()
                && seg.rate >= 0.0;
            if !ok {
                return Err(Error::config(
                    format!("workload.ramps[{i}]"),
                    "segments need start <= end, rate >= 0, and must not overlap the previous one",
                ));
            }
            prev_end = seg.end;
        }
        Ok(())
    }

    /// Position inside the periodic window schedule, if any window has started.
    fn window_phase(&self, t: f64) -> Option<f64> {
        let since = t - self.burst_offset;
        (since >= 0.0).then(|| since.rem_euclid(self.burst_interval))
    }

    fn in_window(&self, t: f64) -> bool {
        self.window_phase(t)
            .is_some_and(|phase| phase < self.burst_duration)
    }

    /// Noiseless arrival rate at instant `t`, requests per second.
    pub fn rate_at(&self, t: f64) -> f64 {
        match self.kind {
            WorkloadKind::Bursty => {
                if self.in_window(t) {
                    self.base_rate * self.burst_amplitude
                } else {
                    self.base_rate
                }
            }
            WorkloadKind::QueueDriven => self.ramp_rate(t),
            WorkloadKind::Mixed => {
                let stream = (1.0 - self.batch_fraction) * self.base_rate;
                let batch = if self.in_window(t) {
                    self.batch_fraction * self.base_rate * self.burst_interval / self.burst_duration
                } else {
                    0.0
                };
                stream + batch
            }
        }
    }

    fn ramp_rate(&self, t: f64) -> f64 {
        let mut level = self.base_rate;
        for seg in &self.ramps {
            if t < seg.start {
                return level;
            }
            if t < seg.end {
                let frac = (t - seg.start) / (seg.end - seg.start);
                return level + (seg.rate - level) * frac;
            }
            level = seg.rate;
        }
        level
    }

    /// Long-run mean rate for the periodic kinds; `None` for queue-driven.
    pub fn long_run_mean_rate(&self) -> Option<f64> {
        match self.kind {
            WorkloadKind::Bursty => Some(
                self.base_rate
                    * (1.0
                        + (self.burst_amplitude - 1.0) * self.burst_duration / self.burst_interval),
            ),
            WorkloadKind::Mixed => Some(self.base_rate),
            WorkloadKind::QueueDriven => None,
        }
    }

    /// Burst onsets strictly before `horizon` (bursty kind only).
    pub fn burst_onsets(&self, horizon: f64) -> Vec<f64> {
        if self.kind != WorkloadKind::Bursty {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut t = self.burst_offset;
        while t < horizon {
            out.push(t);
            t += self.burst_interval;
        }
        out
    }

    /// Multiplicative noise factor for instant `t`; exactly 1 when noiseless.
    fn noise_factor(&self, t: f64) -> f64 {
        if self.noise_std == 0.0 {
            return 1.0;
        }
        let key = splitmix64(self.seed ^ splitmix64(t.to_bits()));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let z: f64 = StandardNormal.sample(&mut rng);
        // mean-one log-normal
        (self.noise_std * z - 0.5 * self.noise_std * self.noise_std).exp()
    }

    /// Requests arriving in `[t, t + dt)`, rounded to a whole count.
    pub fn arrivals_at(&self, t: f64, dt: f64) -> Result<f64> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidInput(format!("t must be >= 0, got {t}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidInput(format!("dt must be > 0, got {dt}")));
        }
        let expected = self.rate_at(t) * dt * self.noise_factor(t);
        Ok(expected.max(0.0).round())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
