//! Recommendation-only vertical sizing.

/// Headroom multiplied onto the observed 90th percentile.
pub const VPA_SAFETY_MARGIN: f64 = 1.15;

/// Recommended per-replica request given `usage_history` as fractions of
/// `current_request`. Uses the nearest-rank 90th percentile.
///
/// Returns `None` for an empty history. The value is advisory only.
pub fn vpa_recommend(usage_history: &[f64], current_request: f64) -> Option<f64> {
    let mut usage: Vec<f64> = usage_history
        .iter()
        .copied()
        .filter(|u| u.is_finite())
        .collect();
    if usage.is_empty() {
        return None;
    }
    let rank = ((0.9 * usage.len() as f64).ceil() as usize).clamp(1, usage.len());
    let (_, p90, _) = usage.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Some(*p90 * current_request * VPA_SAFETY_MARGIN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_usage() {
        let r = vpa_recommend(&[0.4; 12], 1.0).unwrap();
        assert!((r - 0.46).abs() < 1e-12);
    }

    #[test]
    fn single_sample() {
        let r = vpa_recommend(&[0.3], 2.0).unwrap();
        assert!((r - 0.3 * 2.0 * 1.15).abs() < 1e-12);
    }

    #[test]
    fn empty_history_has_no_recommendation() {
        assert_eq!(vpa_recommend(&[], 1.0), None);
    }

    #[test]
    fn matches_sorted_percentile() {
        // 0.2, 0.3, ..., 1.0 in shuffled order
        let history = [0.7, 0.2, 1.0, 0.5, 0.9, 0.3, 0.6, 0.4, 0.8];
        let mut sorted = history.to_vec();
        sorted.sort_by(f64::total_cmp);
        let rank = (0.9f64 * sorted.len() as f64).ceil() as usize;
        let expected = sorted[rank - 1] * 1.15;
        assert_eq!(vpa_recommend(&history, 1.0), Some(expected));
    }
}
