//! Complementary-rate timestamp planning.
//!
//! The injected attack should be loud where the background is quiet and
//! quiet where it is loud, so the merged capture stays plausible. For each
//! background window the planner inverts the observed packet rate against
//! the busiest window, then lays attack packets on that per-window rate
//! with a small deterministic jitter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::stats::StatsDb;
use crate::time::{Timestamp, Windowing};

/// Planned rates never drop below this fraction of the requested rate, so
/// the attack keeps making progress through the busiest background windows.
pub const RATE_FLOOR_FRACTION: f64 = 0.05;

/// Fraction of the local packet spacing each timestamp may be displaced by.
/// Displacements are anchored to a fixed nominal grid, so jitter never
/// accumulates and per-window packet counts stay within one of the plan.
const JITTER_FRACTION: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct TimestampPlan {
    /// One timestamp per attack packet, non-decreasing.
    pub timestamps: Vec<Timestamp>,
    /// Planned rate for each background window, packets per second. Empty
    /// when the background gave no usable rate profile.
    pub window_rates: Vec<f64>,
    /// The background windowing the rates refer to.
    pub windowing: Option<Windowing>,
}

/// Per-window attack rates complementary to the background profile:
/// `rate * (1 - b_i / max(b))`, floored at [`RATE_FLOOR_FRACTION`].
pub fn complementary_rates(background: &[f64], rate: f64) -> Vec<f64> {
    let peak = background.iter().copied().fold(0.0_f64, f64::max);
    if peak <= 0.0 {
        return vec![rate; background.len()];
    }
    background
        .iter()
        .map(|b| (rate * (1.0 - b / peak)).max(RATE_FLOOR_FRACTION * rate))
        .collect()
}

fn plan_timestamps(
    profile: Option<(&Windowing, &[f64])>,
    start: Timestamp,
    budget: usize,
    rate: f64,
    seed: u64,
) -> Vec<Timestamp> {
    assert!(rate > 0.0, "attack rate must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rate_at = |offset_micros: f64| -> f64 {
        match profile {
            Some((w, rates)) if !rates.is_empty() => {
                let abs = start.0 + offset_micros as u64;
                if abs >= w.end.0 {
                    rate
                } else {
                    rates[w.index_of(Timestamp(abs))]
                }
            }
            _ => rate,
        }
    };

    let mut out = Vec::with_capacity(budget);
    let mut nominal = 0.0_f64; // microseconds past start
    let mut prev = 0u64;
    for k in 0..budget {
        let r = rate_at(nominal);
        let spacing = 1e6 / r;
        // the first packet lands exactly on the requested start time
        let delta = if k == 0 {
            0.0
        } else {
            rng.gen_range(-JITTER_FRACTION..=JITTER_FRACTION)
        };
        let ts = (nominal + delta * spacing).round().max(0.0) as u64;
        let ts = ts.max(prev);
        prev = ts;
        out.push(Timestamp(start.0 + ts));
        nominal += spacing;
    }
    out
}

/// Plans `budget` timestamps starting at `start`, rate-shaped against the
/// background's per-window packet rates. Beyond the end of the background
/// capture (and whenever no profile exists) the plan runs at the full
/// requested rate.
pub fn complementary_rate_plan(
    db: &StatsDb,
    start: Timestamp,
    budget: usize,
    rate: f64,
    seed: u64,
) -> TimestampPlan {
    let profile = db.interval.get("packet_rate").and_then(|series| {
        let peak = series.values.iter().copied().fold(0.0_f64, f64::max);
        if series.values.is_empty() || peak <= 0.0 {
            None
        } else {
            Some((series.windowing, complementary_rates(&series.values, rate)))
        }
    });
    let timestamps = plan_timestamps(
        profile.as_ref().map(|(w, r)| (w, r.as_slice())),
        start,
        budget,
        rate,
        seed,
    );
    let (windowing, window_rates) = match profile {
        Some((w, r)) => (Some(w), r),
        None => (None, Vec::new()),
    };
    TimestampPlan {
        timestamps,
        window_rates,
        windowing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_complement_the_background() {
        // quiet window gets nearly the full rate, busiest gets the floor
        let r = complementary_rates(&[90.0, 10.0], 1000.0);
        assert!((r[0] - 50.0).abs() < 1e-9); // floor: 0.05 * 1000
        assert!((r[1] - 1000.0 * (1.0 - 10.0 / 90.0)).abs() < 1e-9);
        assert!((r[1] - 888.888888888889).abs() < 1e-6);
    }

    #[test]
    fn silent_background_gets_full_rate() {
        let r = complementary_rates(&[0.0, 0.0], 250.0);
        assert_eq!(r, vec![250.0, 250.0]);
    }

    #[test]
    fn first_timestamp_is_exact_and_order_holds() {
        let start = Timestamp(5_000_000);
        let ts = plan_timestamps(None, start, 500, 100.0, 9);
        assert_eq!(ts[0], start);
        assert!(ts.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn gaps_stay_within_jitter_band() {
        let ts = plan_timestamps(None, Timestamp(0), 2000, 1000.0, 3);
        let spacing = 1e3; // microseconds at 1000 pps
        for pair in ts.windows(2) {
            let gap = (pair[1].0 - pair[0].0) as f64;
            // 1 microsecond of slack for rounding
            assert!(gap >= 0.9 * spacing - 1.0 && gap <= 1.1 * spacing + 1.0, "gap {gap}");
        }
    }

    #[test]
    fn window_counts_match_the_plan_within_one() {
        let w = Windowing::new(Timestamp(0), Timestamp(10_000_000), 2);
        let rates = [40.0, 160.0];
        // enough budget to cover both windows and run past the end
        let ts = plan_timestamps(Some((&w, &rates)), Timestamp(0), 1200, 200.0, 7);
        let mut counts = [0usize; 2];
        let mut past_end = 0usize;
        for t in &ts {
            if t.0 >= w.end.0 {
                past_end += 1;
            } else {
                counts[w.index_of(*t)] += 1;
            }
        }
        // each window spans 5 seconds
        assert!((counts[0] as f64 - 200.0).abs() <= 1.0, "window 0: {}", counts[0]);
        assert!((counts[1] as f64 - 800.0).abs() <= 1.0, "window 1: {}", counts[1]);
        assert!(past_end > 0);
    }

    #[test]
    fn plans_are_deterministic_per_seed() {
        let a = plan_timestamps(None, Timestamp(0), 100, 50.0, 42);
        let b = plan_timestamps(None, Timestamp(0), 100, 50.0, 42);
        let c = plan_timestamps(None, Timestamp(0), 100, 50.0, 43);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
