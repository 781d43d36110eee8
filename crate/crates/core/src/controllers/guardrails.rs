//! Bounds, stabilization, cooldown and step limits applied to a candidate target.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{Constraint, ControllerConfig};

/// The guardrail knobs, separated from [`ControllerConfig`] so the HPA
/// baselines can reuse the same machinery with their own profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardrailPolicy {
    pub min_replicas: u32,
    pub max_replicas: u32,
    pub max_step_up: u32,
    pub max_step_down: u32,
    pub scale_up_stabilization: f64,
    pub scale_down_stabilization: f64,
    pub cooldown_after_scale_up: f64,
    /// Relative scale-down size at or below which the change is skipped.
    pub scale_down_tolerance: Option<f64>,
    /// Mark scale-downs to the candidate as cost-floor releases.
    pub cost_aware: bool,
}

impl From<&ControllerConfig> for GuardrailPolicy {
    fn from(cfg: &ControllerConfig) -> Self {
        GuardrailPolicy {
            min_replicas: cfg.min_replicas,
            max_replicas: cfg.max_replicas,
            max_step_up: cfg.max_step_up,
            max_step_down: cfg.max_step_down,
            scale_up_stabilization: cfg.scale_up_stabilization,
            scale_down_stabilization: cfg.scale_down_stabilization,
            cooldown_after_scale_up: cfg.cooldown_after_scale_up,
            scale_down_tolerance: (cfg.tolerance_band > 0.0).then_some(cfg.tolerance_band),
            cost_aware: true,
        }
    }
}

/// Recent candidates and the last applied scale-up.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScaleHistory {
    recommendations: VecDeque<(f64, u32)>,
    pub last_scale_up: Option<f64>,
}

impl ScaleHistory {
    /// Remember this interval's candidate and the outcome applied for it.
    pub fn record(&mut self, now: f64, candidate: u32, current: u32, applied: u32, keep: f64) {
        self.recommendations.push_back((now, candidate));
        while let Some(&(t, _)) = self.recommendations.front() {
            if now - t > keep {
                self.recommendations.pop_front();
            } else {
                break;
            }
        }
        if applied > current {
            self.last_scale_up = Some(now);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.recommendations.is_empty()
    }

    fn within(&self, now: f64, window: f64) -> impl Iterator<Item = u32> + '_ {
        self.recommendations
            .iter()
            .filter(move |(t, _)| now - *t < window)
            .map(|&(_, n)| n)
    }
}

/// Shape `candidate` into an applied target.
///
/// Rules run in a fixed order: cooldown, stabilization, scale-down tolerance,
/// step clamp, bound clamp. Every rule that changes the value is listed in
/// the returned constraints, in the order it fired.
pub fn enforce_guardrails(
    candidate: u32,
    current: u32,
    now: f64,
    policy: &GuardrailPolicy,
    history: &ScaleHistory,
) -> (u32, Vec<Constraint>) {
    let mut applied = Vec::new();
    let mut value = candidate;

    if value < current {
        if let Some(up) = history.last_scale_up {
            if now - up <= policy.cooldown_after_scale_up {
                value = current;
                applied.push(Constraint::CooldownHold);
            }
        }
    }

    if value < current {
        let peak = history
            .within(now, policy.scale_down_stabilization)
            .fold(value, u32::max);
        let stabilized = peak.min(current);
        if stabilized != value {
            value = stabilized;
            applied.push(Constraint::StabilizationHold);
        }
    } else if value > current {
        let floor = history
            .within(now, policy.scale_up_stabilization)
            .fold(value, u32::min);
        let stabilized = floor.max(current);
        if stabilized != value {
            value = stabilized;
            applied.push(Constraint::StabilizationHold);
        }
    }

    if value < current {
        if let Some(tol) = policy.scale_down_tolerance {
            let shrink = f64::from(current - value) / f64::from(current);
            if shrink <= tol + 1e-12 {
                value = current;
                applied.push(Constraint::ToleranceSkip);
            }
        }
    }

    let upper = current.saturating_add(policy.max_step_up);
    let lower = current.saturating_sub(policy.max_step_down);
    let stepped = value.clamp(lower, upper);
    if stepped != value {
        value = stepped;
        applied.push(Constraint::StepLimit);
    }

    let bounded = value.clamp(policy.min_replicas, policy.max_replicas);
    if bounded != value {
        value = bounded;
        applied.push(Constraint::BoundClamp);
    }

    if policy.cost_aware && value < current && value == candidate {
        applied.push(Constraint::CostFloor);
    }

    (value, applied)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy() -> GuardrailPolicy {
        GuardrailPolicy {
            min_replicas: 1,
            max_replicas: 50,
            max_step_up: 6,
            max_step_down: 4,
            scale_up_stabilization: 0.0,
            scale_down_stabilization: 0.0,
            cooldown_after_scale_up: 60.0,
            scale_down_tolerance: None,
            cost_aware: true,
        }
    }

    #[test]
    fn no_op_when_candidate_is_current() {
        let out = enforce_guardrails(7, 7, 100.0, &policy(), &ScaleHistory::default());
        assert_eq!(out, (7, vec![]));
    }

    #[test]
    fn step_clamp_on_large_jump() {
        let out = enforce_guardrails(20, 4, 100.0, &policy(), &ScaleHistory::default());
        assert_eq!(out, (10, vec![Constraint::StepLimit]));
    }

    #[test]
    fn cooldown_blocks_scale_down() {
        let mut h = ScaleHistory::default();
        h.record(90.0, 8, 4, 8, 600.0);
        let out = enforce_guardrails(1, 8, 100.0, &policy(), &h);
        assert_eq!(out, (8, vec![Constraint::CooldownHold]));
        // cooldown boundary is inclusive
        let out = enforce_guardrails(6, 8, 150.0, &policy(), &h);
        assert_eq!(out.0, 8);
        let out = enforce_guardrails(6, 8, 151.0, &policy(), &h);
        assert_eq!(out, (6, vec![Constraint::CostFloor]));
    }

    #[test]
    fn scale_down_uses_window_maximum() {
        let p = GuardrailPolicy {
            scale_down_stabilization: 60.0,
            cooldown_after_scale_up: 0.0,
            ..policy()
        };
        let mut h = ScaleHistory::default();
        h.record(0.0, 9, 10, 10, 600.0);
        h.record(15.0, 8, 10, 10, 600.0);
        let out = enforce_guardrails(5, 10, 30.0, &p, &h);
        assert_eq!(out, (9, vec![Constraint::StabilizationHold]));
        // entries older than the window drop out
        let out = enforce_guardrails(7, 10, 80.0, &p, &h);
        assert_eq!(out, (7, vec![Constraint::CostFloor]));
    }

    #[test]
    fn window_aggregate_equal_to_current_holds() {
        let p = GuardrailPolicy {
            scale_down_stabilization: 60.0,
            ..policy()
        };
        let mut h = ScaleHistory::default();
        h.record(0.0, 12, 10, 10, 600.0);
        let out = enforce_guardrails(4, 10, 30.0, &p, &h);
        assert_eq!(out, (10, vec![Constraint::StabilizationHold]));
    }

    #[test]
    fn scale_up_uses_window_minimum() {
        let p = GuardrailPolicy {
            scale_up_stabilization: 60.0,
            ..policy()
        };
        let mut h = ScaleHistory::default();
        h.record(0.0, 6, 5, 5, 600.0);
        let out = enforce_guardrails(9, 5, 30.0, &p, &h);
        assert_eq!(out, (6, vec![Constraint::StabilizationHold]));
    }

    #[test]
    fn tolerance_skips_small_scale_down() {
        let p = GuardrailPolicy {
            scale_down_tolerance: Some(0.1),
            cooldown_after_scale_up: 0.0,
            ..policy()
        };
        let h = ScaleHistory::default();
        assert_eq!(
            enforce_guardrails(9, 10, 0.0, &p, &h),
            (10, vec![Constraint::ToleranceSkip])
        );
        assert_eq!(
            enforce_guardrails(8, 10, 0.0, &p, &h),
            (8, vec![Constraint::CostFloor])
        );
    }

    #[test]
    fn bounds_clamp_last() {
        let p = GuardrailPolicy {
            min_replicas: 3,
            cooldown_after_scale_up: 0.0,
            ..policy()
        };
        let out = enforce_guardrails(0, 4, 0.0, &p, &ScaleHistory::default());
        assert_eq!(out, (3, vec![Constraint::BoundClamp]));
        let out = enforce_guardrails(52, 48, 0.0, &policy(), &ScaleHistory::default());
        assert_eq!(out, (50, vec![Constraint::BoundClamp]));
    }
}
