//! Metric-vs-abstention curves and the normalized AUC (nAUC).
//!
//! Queries are abstained on one at a time, lowest confidence first. The
//! curve records the mean metric of the kept queries at abstention rates
//! `i/N` for `i = 0..N`, and
//! `nAUC = (AUC_actual − AUC_baseline) / (AUC_oracle − AUC_baseline)`
//! where the baseline is flat at the overall mean and the oracle abstains
//! on the worst queries first.

use serde::Serialize;

use crate::error::{Error, Result};

/// One query's metric and confidence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbstentionItem {
    pub query_id: String,
    pub metric: f64,
    pub confidence: f64,
}

impl AbstentionItem {
    pub fn new(query_id: impl Into<String>, metric: f64, confidence: f64) -> Self {
        Self {
            query_id: query_id.into(),
            metric,
            confidence,
        }
    }
}

/// How queries with equal confidence are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// Expectation over all orderings within a tie group.
    #[default]
    Average,
    /// Keep input order.
    Stable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbstentionCurve {
    /// `(abstention_rate, mean_metric)` of the confidence-ordered curve.
    pub points: Vec<(f64, f64)>,
    pub oracle_points: Vec<(f64, f64)>,
    pub auc_actual: f64,
    pub auc_baseline: f64,
    pub auc_oracle: f64,
}

impl AbstentionCurve {
    /// Normalized AUC; 0 when the oracle does not beat the baseline.
    pub fn nauc(&self) -> f64 {
        let span = self.auc_oracle - self.auc_baseline;
        if span <= 1e-12 * self.auc_baseline.abs().max(1.0) {
            return 0.0;
        }
        (self.auc_actual - self.auc_baseline) / span
    }
}

/// Mean metric of the kept queries after abstaining on `i = 0..N` items
/// taken in `order`. `groups` gives the tie groups as `[start, end)` ranges
/// over `order`; within a group the removed sum is its expected value.
fn kept_means(metrics: &[f64], order: &[usize], groups: &[(usize, usize)]) -> Vec<f64> {
    let n = order.len();
    let total: f64 = metrics.iter().sum();
    let mut out = Vec::with_capacity(n);
    let mut removed_before_group = 0.0;
    for &(start, end) in groups {
        let group_sum: f64 = order[start..end].iter().map(|&j| metrics[j]).sum();
        let size = (end - start) as f64;
        for i in start..end {
            let removed = removed_before_group + (i - start) as f64 / size * group_sum;
            out.push((total - removed) / (n - i) as f64);
        }
        removed_before_group += group_sum;
    }
    out
}

fn tie_groups(keys: &[f64], order: &[usize], rule: TieRule) -> Vec<(usize, usize)> {
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=order.len() {
        let split = i == order.len() || rule == TieRule::Stable || keys[order[i]] != keys[order[start]];
        if split {
            groups.push((start, i));
            start = i;
        }
    }
    groups
}

fn ascending_order(keys: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
    order
}

fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

fn curve_points(means: Vec<f64>) -> Vec<(f64, f64)> {
    let n = means.len() as f64;
    means.into_iter().enumerate().map(|(i, m)| (i as f64 / n, m)).collect()
}

pub fn abstention_curve(items: &[AbstentionItem], rule: TieRule) -> Result<AbstentionCurve> {
    if items.len() < 2 {
        return Err(Error::EmptyInput("abstention needs at least two queries"));
    }
    if let Some(bad) = items.iter().find(|x| !x.metric.is_finite() || x.confidence.is_nan()) {
        return Err(Error::InvalidConfig(format!(
            "query `{}` has a non-finite metric or NaN confidence",
            bad.query_id
        )));
    }
    let metrics: Vec<f64> = items.iter().map(|x| x.metric).collect();
    let confidences: Vec<f64> = items.iter().map(|x| x.confidence).collect();

    let order = ascending_order(&confidences);
    let groups = tie_groups(&confidences, &order, rule);
    let points = curve_points(kept_means(&metrics, &order, &groups));

    let oracle_order = ascending_order(&metrics);
    let oracle_groups = tie_groups(&metrics, &oracle_order, TieRule::Average);
    let oracle_points = curve_points(kept_means(&metrics, &oracle_order, &oracle_groups));

    let mean = metrics.iter().sum::<f64>() / metrics.len() as f64;
    let last_rate = points.last().map_or(0.0, |p| p.0);
    Ok(AbstentionCurve {
        auc_actual: trapezoid(&points),
        auc_oracle: trapezoid(&oracle_points),
        auc_baseline: mean * last_rate,
        points,
        oracle_points,
    })
}

/// nAUC with tie groups averaged.
pub fn nauc_abstention(items: &[AbstentionItem]) -> Result<f64> {
    Ok(abstention_curve(items, TieRule::Average)?.nauc())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn items(metrics: &[f64], conf: &[f64]) -> Vec<AbstentionItem> {
        metrics
            .iter()
            .zip(conf)
            .enumerate()
            .map(|(i, (m, c))| AbstentionItem::new(format!("q{i}"), *m, *c))
            .collect()
    }

    /// Brute force: remove the first `i` of an explicit order, average the rest.
    fn brute_auc(metrics: &[f64], order: &[usize]) -> f64 {
        let n = metrics.len();
        let mut ys = Vec::new();
        for i in 0..n {
            let kept: Vec<f64> = order[i..].iter().map(|&j| metrics[j]).collect();
            ys.push(kept.iter().sum::<f64>() / kept.len() as f64);
        }
        let mut auc = 0.0;
        for i in 0..n - 1 {
            auc += (1.0 / n as f64) * (ys[i] + ys[i + 1]) / 2.0;
        }
        auc
    }

    #[test]
    fn oracle_ordered_confidence_gives_one() {
        let m = [0.2, 0.9, 0.5, 1.0, 0.0];
        let nauc = nauc_abstention(&items(&m, &m)).unwrap();
        assert!((nauc - 1.0).abs() < 1e-9);
        let c = [2.0, 9.0, 5.0, 10.0, 0.0];
        assert!((nauc_abstention(&items(&m, &c)).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_confidence_gives_zero() {
        let m = [0.2, 0.9, 0.5, 1.0, 0.0, 0.3];
        let nauc = nauc_abstention(&items(&m, &[0.7; 6])).unwrap();
        assert!(nauc.abs() < 1e-9);
    }

    #[test]
    fn identical_metrics_give_zero() {
        let m = [0.4; 5];
        assert_eq!(nauc_abstention(&items(&m, &[1.0, 2.0, 3.0, 4.0, 5.0])).unwrap(), 0.0);
    }

    #[test]
    fn anti_correlated_four_query_instance() {
        let m = [0.2, 0.5, 0.9, 1.0];
        let c = [4.0, 3.0, 2.0, 1.0];
        let curve = abstention_curve(&items(&m, &c), TieRule::Average).unwrap();
        let actual = brute_auc(&m, &[3, 2, 1, 0]);
        let oracle = brute_auc(&m, &[0, 1, 2, 3]);
        let baseline = 0.65 * 0.75;
        assert!((curve.auc_actual - actual).abs() < 1e-12);
        assert!((curve.auc_oracle - oracle).abs() < 1e-12);
        assert!((curve.auc_baseline - baseline).abs() < 1e-12);
        let expected = (actual - baseline) / (oracle - baseline);
        assert!((curve.nauc() - expected).abs() < 1e-12);
        assert!(curve.nauc() < 0.0);
        // Hand values: actual kept means 0.65, 0.5333.., 0.35, 0.2; oracle 0.65, 0.8, 0.95, 1.0.
        assert!((actual - 0.25 * (0.65 / 2.0 + 1.6 / 3.0 + 0.35 + 0.1)).abs() < 1e-12);
        // Worse than the mirrored oracle: the normalized value leaves [-1, 1].
        assert!((expected + 77.0 / 75.0).abs() < 1e-9);
    }

    #[test]
    fn stable_rule_keeps_input_order() {
        let m = [0.2, 0.5, 0.9, 1.0];
        let curve = abstention_curve(&items(&m, &[1.0; 4]), TieRule::Stable).unwrap();
        assert!((curve.auc_actual - brute_auc(&m, &[0, 1, 2, 3])).abs() < 1e-12);
        assert!((curve.nauc() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rates_are_strictly_increasing_in_unit_interval() {
        let curve = abstention_curve(&items(&[0.1, 0.4, 0.2], &[3.0, 1.0, 2.0]), TieRule::Average).unwrap();
        let rates: Vec<f64> = curve.points.iter().map(|p| p.0).collect();
        assert_eq!(rates, vec![0.0, 1.0 / 3.0, 2.0 / 3.0]);
        assert!((curve.points[0].1 - 0.7 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_short_or_bad_input() {
        assert!(nauc_abstention(&items(&[0.1], &[0.1])).is_err());
        assert!(nauc_abstention(&items(&[0.1, f64::NAN], &[0.1, 0.2])).is_err());
    }

    /// Expected removed-set curve over every tie permutation, by enumeration.
    fn permutation_average_auc(metrics: &[f64], conf: &[f64]) -> f64 {
        fn permutations(v: Vec<usize>) -> Vec<Vec<usize>> {
            if v.len() <= 1 {
                return vec![v];
            }
            let mut out = Vec::new();
            for i in 0..v.len() {
                let mut rest = v.clone();
                let head = rest.remove(i);
                for mut p in permutations(rest) {
                    p.insert(0, head);
                    out.push(p);
                }
            }
            out
        }
        let all = permutations((0..metrics.len()).collect());
        let valid: Vec<&Vec<usize>> = all
            .iter()
            .filter(|p| p.windows(2).all(|w| conf[w[0]] <= conf[w[1]]))
            .collect();
        valid.iter().map(|p| brute_auc(metrics, p)).sum::<f64>() / valid.len() as f64
    }

    proptest! {
        #[test]
        fn average_rule_equals_permutation_expectation(
            metrics in prop::collection::vec(0.0f64..1.0, 2..6),
            conf_levels in prop::collection::vec(0u8..3, 6),
        ) {
            let conf: Vec<f64> = conf_levels[..metrics.len()].iter().map(|&c| c as f64).collect();
            let curve = abstention_curve(&items(&metrics, &conf), TieRule::Average).unwrap();
            prop_assert!((curve.auc_actual - permutation_average_auc(&metrics, &conf)).abs() < 1e-12);
        }

        #[test]
        fn actual_curve_bounded_by_oracle(
            metrics in prop::collection::vec(0.0f64..1.0, 2..30),
            conf in prop::collection::vec(-1.0f64..1.0, 30),
        ) {
            let curve = abstention_curve(&items(&metrics, &conf[..metrics.len()]), TieRule::Average).unwrap();
            for (a, o) in curve.points.iter().zip(&curve.oracle_points) {
                prop_assert!(a.1 <= o.1 + 1e-12);
            }
            prop_assert!(curve.nauc() <= 1.0 + 1e-9);
            let anti: Vec<f64> = metrics.iter().map(|m| -m).collect();
            let worst = abstention_curve(&items(&metrics, &anti), TieRule::Average).unwrap();
            prop_assert!(curve.nauc() >= worst.nauc() - 1e-9);
        }

        #[test]
        fn invariant_to_query_order(
            metrics in prop::collection::vec(0.0f64..1.0, 2..20),
            conf in prop::collection::vec(0u8..4, 20),
            rot in 0usize..20,
        ) {
            let conf: Vec<f64> = conf[..metrics.len()].iter().map(|&c| c as f64).collect();
            let mut xs = items(&metrics, &conf);
            let a = nauc_abstention(&xs).unwrap();
            let r = rot % xs.len();
            xs.rotate_left(r);
            let b = nauc_abstention(&xs).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
