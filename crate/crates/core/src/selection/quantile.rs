use serde::{Deserialize, Serialize};

use super::Metric;
use crate::error::{Error, Result};

pub const NUM_INTERVALS: usize = 100;

/// Percentile boundaries q0..q100 of one metric over the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable {
    pub metric: Metric,
    pub boundaries: Vec<f64>,
}

impl QuantileTable {
    /// Empirical quantiles by linear interpolation between order statistics
    /// (position `j/100 · (n-1)` in the sorted values).
    pub fn fit(metric: Metric, values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "quantiles of {metric} need at least 2 values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite {metric} value")));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let last = (sorted.len() - 1) as f64;
        let boundaries = (0..=NUM_INTERVALS)
            .map(|j| {
                let pos = j as f64 * last / NUM_INTERVALS as f64;
                let lo = pos.floor() as usize;
                let frac = pos - lo as f64;
                if frac == 0.0 || lo + 1 >= sorted.len() {
                    return sorted[lo];
                }
                let (a, b) = (sorted[lo], sorted[lo + 1]);
                let q = a + frac * (b - a);
                // an interior interpolant must stay strictly below the upper
                // order statistic, or ranks stop determining interval indices
                if a < b && q >= b {
                    b.next_down()
                } else {
                    q
                }
            })
            .collect();
        Ok(QuantileTable { metric, boundaries })
    }

    pub fn min(&self) -> f64 {
        self.boundaries[0]
    }

    pub fn max(&self) -> f64 {
        self.boundaries[NUM_INTERVALS]
    }

    /// Interval index in 0..=99: the number of q1..q100 strictly below `value`,
    /// clamped.
    pub fn interval(&self, value: f64) -> Result<usize> {
        if !value.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite {} value", self.metric)));
        }
        let below = self.boundaries[1..].partition_point(|&b| b < value);
        Ok(below.min(NUM_INTERVALS - 1))
    }

    /// Midpoint score `(i + 0.5) / 100` of the interval `value` falls into.
    pub fn interval_score(&self, value: f64) -> Result<f64> {
        Ok(midpoint(self.interval(value)?))
    }
}

pub fn midpoint(interval: usize) -> f64 {
    (interval as f64 + 0.5) / NUM_INTERVALS as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid() {
        let values: Vec<f64> = (1..=101).map(f64::from).collect();
        let t = QuantileTable::fit(Metric::Ppl, &values).unwrap();
        let expected: Vec<f64> = (1..=101).map(f64::from).collect();
        assert_eq!(t.boundaries, expected);
    }

    #[test]
    fn constant_values() {
        let t = QuantileTable::fit(Metric::Ent, &[3.5; 40]).unwrap();
        assert!(t.boundaries.iter().all(|&b| b == 3.5));
        assert_eq!(t.interval_score(3.5).unwrap(), 0.005);
        assert_eq!(t.interval_score(4.0).unwrap(), 0.995);
    }

    #[test]
    fn median_by_sort_and_index() {
        let mut values: Vec<f64> = (0..=200).map(f64::from).collect();
        values.reverse();
        let t = QuantileTable::fit(Metric::Sim, &values).unwrap();
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(t.boundaries[50], sorted[100]);
        assert_eq!(t.boundaries[50], 100.0);
    }

    #[test]
    fn extremes_and_outside() {
        let values: Vec<f64> = (0..57).map(|i| (i as f64).sqrt()).collect();
        let t = QuantileTable::fit(Metric::Ppl, &values).unwrap();
        assert_eq!(t.interval_score(t.min()).unwrap(), 0.005);
        assert_eq!(t.interval_score(t.max()).unwrap(), 0.995);
        assert_eq!(t.interval_score(-10.0).unwrap(), 0.005);
        assert_eq!(t.interval_score(1e9).unwrap(), 0.995);
        assert!(t.interval_score(f64::NAN).is_err());
    }

    #[test]
    fn rank_150_of_200() {
        // brute-force: q_j sits at sorted position j·199/100; count j in 1..=100 with
        // that position strictly before the 0-based rank 149
        let values: Vec<f64> = (1..=200).map(|i| i as f64 * 0.37 + 5.0).collect();
        let t = QuantileTable::fit(Metric::Ppl, &values).unwrap();
        let rank0 = 149usize;
        let oracle = (1..=100usize)
            .filter(|&j| (j as f64 * 199.0 / 100.0) < rank0 as f64)
            .count()
            .min(99);
        assert_eq!(oracle, 74);
        assert_eq!(t.interval_score(values[rank0]).unwrap(), 0.745);
    }

    #[test]
    fn errors() {
        assert!(QuantileTable::fit(Metric::Ppl, &[1.0]).is_err());
        assert!(QuantileTable::fit(Metric::Ppl, &[1.0, f64::INFINITY]).is_err());
    }
}
