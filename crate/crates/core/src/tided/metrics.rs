//! Entropy and novelty metrics over windowed feature values.

use std::collections::BTreeMap;

use crate::scalar::Real;
use crate::stats::TimeWindowSeries;
use crate::tided::TidedError;
use crate::time::{Timestamp, Windowing};
use crate::Metric;

/// Shannon entropy in bits of a count histogram. Zero counts contribute
/// nothing; an empty histogram has zero entropy.
pub fn entropy<F: Real>(counts: impl IntoIterator<Item = u64>) -> F {
    let counts: Vec<u64> = counts.into_iter().filter(|&c| c > 0).collect();
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return F::zero();
    }
    let total_f = F::from_count(total);
    let mut h = F::zero();
    for c in counts {
        let p = F::from_count(c) / total_f;
        h += -(p * p.log2());
    }
    h
}

/// Entropy divided by its maximum `log2(n)` for the `n` distinct values
/// observed, yielding a scale-free measure in `[0, 1]`. A single distinct
/// value normalizes to zero; no values at all is an error.
pub fn normalized_entropy<F: Real>(
    counts: impl IntoIterator<Item = u64>,
) -> Result<F, TidedError> {
    let counts: Vec<u64> = counts.into_iter().filter(|&c| c > 0).collect();
    if counts.is_empty() {
        return Err(TidedError::EmptyInput);
    }
    if counts.len() == 1 {
        return Ok(F::zero());
    }
    let max = F::from_count(counts.len() as u64).log2();
    Ok(entropy::<F>(counts) / max)
}

/// Per-window value histograms for one feature, the shared input of the
/// series metrics below. All metrics over the same capture use the same
/// window boundaries.
#[derive(Debug, Clone)]
pub struct WindowedCounts {
    pub windowing: Windowing,
    pub windows: Vec<BTreeMap<u64, u64>>,
}

impl WindowedCounts {
    pub fn new(windowing: Windowing) -> Self {
        let windows = vec![BTreeMap::new(); windowing.n];
        WindowedCounts { windowing, windows }
    }

    pub fn collect(events: impl IntoIterator<Item = (Timestamp, u64)>, windowing: Windowing) -> Self {
        let mut wc = WindowedCounts::new(windowing);
        for (ts, value) in events {
            wc.add(ts, value);
        }
        wc
    }

    pub fn add(&mut self, ts: Timestamp, value: u64) {
        let idx = self.windowing.index_of(ts);
        *self.windows[idx].entry(value).or_insert(0) += 1;
    }

    /// Union histogram over the whole span.
    pub fn merged(&self) -> BTreeMap<u64, u64> {
        let mut out = BTreeMap::new();
        for w in &self.windows {
            for (v, c) in w {
                *out.entry(*v).or_insert(0) += c;
            }
        }
        out
    }
}

/// Entropy of each window's histogram. Empty windows score zero.
pub fn entropy_series(wc: &WindowedCounts) -> TimeWindowSeries {
    TimeWindowSeries {
        windowing: wc.windowing,
        values: wc
            .windows
            .iter()
            .map(|w| entropy::<Metric>(w.values().copied()))
            .collect(),
    }
}

/// Number of never-before-seen values appearing in each window. The series
/// sums to the number of distinct values in the capture.
pub fn novelty_distribution(wc: &WindowedCounts) -> TimeWindowSeries {
    let mut seen = std::collections::BTreeSet::new();
    let values = wc
        .windows
        .iter()
        .map(|w| {
            let mut fresh = 0u64;
            for v in w.keys() {
                if seen.insert(*v) {
                    fresh += 1;
                }
            }
            fresh as Metric
        })
        .collect();
    TimeWindowSeries {
        windowing: wc.windowing,
        values,
    }
}

/// Normalized entropy of the novelty series, treating each window as a
/// symbol weighted by its novelty count. Captures that discover values at a
/// steady pace score near one; front-loaded discovery scores low. Zero when
/// no values were ever seen.
pub fn novelty_normalized_entropy(novelty: &TimeWindowSeries) -> Metric {
    let counts: Vec<u64> = novelty.values.iter().map(|&v| v as u64).collect();
    normalized_entropy::<Metric>(counts).unwrap_or(0.0)
}

/// Entropy of everything seen up to and including each window; the final
/// value equals the whole-capture entropy.
pub fn cumulative_entropy_series(wc: &WindowedCounts) -> TimeWindowSeries {
    let mut merged: BTreeMap<u64, u64> = BTreeMap::new();
    let values = wc
        .windows
        .iter()
        .map(|w| {
            for (v, c) in w {
                *merged.entry(*v).or_insert(0) += c;
            }
            entropy::<Metric>(merged.values().copied())
        })
        .collect();
    TimeWindowSeries {
        windowing: wc.windowing,
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: Metric, b: Metric) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn uniform_counts_hit_log2_n() {
        for n in [2u64, 4, 8, 16, 1024] {
            let h = entropy::<Metric>(std::iter::repeat_n(7, n as usize));
            assert_close(h, (n as Metric).log2());
        }
    }

    #[test]
    fn skewed_example() {
        assert_close(entropy::<Metric>([3u64, 1]), 0.811278124459133);
    }

    #[test]
    fn empty_and_zero_counts() {
        assert_eq!(entropy::<Metric>([]), 0.0);
        assert_eq!(entropy::<Metric>([0u64, 0]), 0.0);
    }

    #[test]
    fn normalized_bounds_and_edges() {
        assert!(matches!(
            normalized_entropy::<Metric>([]),
            Err(TidedError::EmptyInput)
        ));
        assert_eq!(normalized_entropy::<Metric>([42u64]).unwrap(), 0.0);
        assert_close(normalized_entropy::<Metric>([5u64, 5, 5]).unwrap(), 1.0);
        let v = normalized_entropy::<Metric>([90u64, 5, 5]).unwrap();
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn novelty_sums_to_distinct_count() {
        let w = Windowing::new(Timestamp(0), Timestamp(3_000_000), 3);
        let events = [
            (Timestamp(0), 10u64),
            (Timestamp(100), 11),
            (Timestamp(1_100_000), 10), // repeat, not novel
            (Timestamp(1_200_000), 12),
            (Timestamp(2_500_000), 13),
        ];
        let wc = WindowedCounts::collect(events, w);
        let nov = novelty_distribution(&wc);
        assert_eq!(nov.values, vec![2.0, 1.0, 1.0]);
        let total: Metric = nov.values.iter().sum();
        assert_eq!(total as u64, 4);
        assert_close(novelty_normalized_entropy(&nov), 1.5 / (3.0 as Metric).log2());
    }

    #[test]
    fn cumulative_ends_at_whole_capture_entropy() {
        let w = Windowing::new(Timestamp(0), Timestamp(2_000_000), 2);
        let events = [
            (Timestamp(0), 1u64),
            (Timestamp(10), 1),
            (Timestamp(20), 1),
            (Timestamp(1_500_000), 2),
        ];
        let wc = WindowedCounts::collect(events, w);
        let cum = cumulative_entropy_series(&wc);
        assert_close(cum.values[0], 0.0); // only one value so far
        assert_close(cum.values[1], entropy::<Metric>([3u64, 1]));
    }

    #[test]
    fn single_packet_series() {
        let w = Windowing::new(Timestamp(500), Timestamp(500), 4);
        let wc = WindowedCounts::collect([(Timestamp(500), 9u64)], w);
        let es = entropy_series(&wc);
        assert_eq!(es.values, vec![0.0, 0.0, 0.0, 0.0]);
        let nov = novelty_distribution(&wc);
        assert_eq!(nov.values, vec![1.0, 0.0, 0.0, 0.0]);
    }
}
