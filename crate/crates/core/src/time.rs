//! Microsecond timestamps and equal-width time windows.

use serde::{Deserialize, Serialize};

/// Absolute capture time, microseconds since the UNIX epoch.
///
/// PCAP record headers carry 32-bit seconds, so the full range fits a `u64`
/// with room to spare. Nanosecond captures are truncated to microseconds at
/// parse time; merge and label logic all runs at this resolution.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub fn from_secs_micros(secs: u32, micros: u32) -> Self {
        Timestamp(secs as u64 * 1_000_000 + micros as u64)
    }

    /// Rounds to the nearest microsecond. Negative inputs clamp to zero.
    pub fn from_secs_f64(secs: f64) -> Self {
        if secs <= 0.0 {
            return Timestamp(0);
        }
        Timestamp((secs * 1e6).round() as u64)
    }

    pub fn secs(&self) -> u32 {
        (self.0 / 1_000_000) as u32
    }

    pub fn subsec_micros(&self) -> u32 {
        (self.0 % 1_000_000) as u32
    }

    pub fn as_secs_f64(&self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn saturating_sub(&self, other: Timestamp) -> u64 {
        self.0.saturating_sub(other.0)
    }

    /// ISO-8601 UTC with microsecond precision, e.g.
    /// `2023-01-01T00:00:30.000000Z`.
    pub fn to_iso8601(&self) -> String {
        use chrono::{DateTime, Utc};
        let dt = DateTime::<Utc>::from_timestamp(self.secs() as i64, self.subsec_micros() * 1000)
            .expect("timestamp in range");
        dt.format("%Y-%m-%dT%H:%M:%S%.6fZ").to_string()
    }
}

/// Partition of a capture span into `n` equal windows.
///
/// Windows are half-open except the last, which is closed so the final
/// packet of the capture lands inside the partition. Index math is integer
/// rational arithmetic, so a timestamp exactly on a boundary always falls in
/// the window that starts there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Windowing {
    pub start: Timestamp,
    pub end: Timestamp,
    pub n: usize,
}

impl Windowing {
    pub fn new(start: Timestamp, end: Timestamp, n: usize) -> Self {
        assert!(n > 0, "window count must be positive");
        Windowing { start, end, n }
    }

    /// Window count for a span when a fixed window length in seconds is
    /// requested instead of a count. Zero-duration spans get one window.
    pub fn with_window_seconds(start: Timestamp, end: Timestamp, seconds: f64) -> Self {
        assert!(seconds > 0.0, "window length must be positive");
        let span = end.saturating_sub(start) as f64 / 1e6;
        let n = (span / seconds).ceil() as usize;
        Windowing::new(start, end, n.max(1))
    }

    pub fn duration_micros(&self) -> u64 {
        self.end.saturating_sub(self.start)
    }

    /// Width of one window in seconds.
    pub fn window_seconds(&self) -> f64 {
        self.duration_micros() as f64 / 1e6 / self.n as f64
    }

    /// Index of the window containing `ts`. Timestamps at or past the end
    /// clamp into the last window; a zero-duration span maps everything to
    /// window 0.
    pub fn index_of(&self, ts: Timestamp) -> usize {
        let dur = self.duration_micros();
        if dur == 0 || ts <= self.start {
            return 0;
        }
        let off = ts.saturating_sub(self.start);
        let idx = (off as u128 * self.n as u128 / dur as u128) as usize;
        idx.min(self.n - 1)
    }

    /// Start time of window `i` (floor of the exact rational boundary).
    pub fn window_start(&self, i: usize) -> Timestamp {
        let dur = self.duration_micros() as u128;
        Timestamp(self.start.0 + (dur * i as u128 / self.n as u128) as u64)
    }

    pub fn starts(&self) -> Vec<Timestamp> {
        (0..self.n).map(|i| self.window_start(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamp_round_trip() {
        let ts = Timestamp::from_secs_micros(1_672_531_200, 123_456);
        assert_eq!(ts.secs(), 1_672_531_200);
        assert_eq!(ts.subsec_micros(), 123_456);
        assert_eq!(ts.to_iso8601(), "2023-01-01T00:00:00.123456Z");
    }

    #[test]
    fn boundary_lands_in_starting_window() {
        let w = Windowing::new(Timestamp(0), Timestamp(40_000_000), 4);
        assert_eq!(w.index_of(Timestamp(0)), 0);
        assert_eq!(w.index_of(Timestamp(9_999_999)), 0);
        assert_eq!(w.index_of(Timestamp(10_000_000)), 1);
        assert_eq!(w.index_of(Timestamp(39_999_999)), 3);
        // end of span is closed into the last window
        assert_eq!(w.index_of(Timestamp(40_000_000)), 3);
        assert_eq!(w.index_of(Timestamp(99_000_000)), 3);
    }

    #[test]
    fn degenerate_span_uses_window_zero() {
        let w = Windowing::new(Timestamp(5), Timestamp(5), 10);
        assert_eq!(w.index_of(Timestamp(5)), 0);
        assert_eq!(w.index_of(Timestamp(400)), 0);
    }

    #[test]
    fn window_starts_are_exact_on_divisible_spans() {
        let w = Windowing::new(Timestamp(0), Timestamp(40_000_000), 4);
        let starts: Vec<u64> = w.starts().iter().map(|t| t.0).collect();
        assert_eq!(starts, vec![0, 10_000_000, 20_000_000, 30_000_000]);
    }

    #[test]
    fn seconds_based_construction() {
        let w = Windowing::with_window_seconds(Timestamp(0), Timestamp(10_500_000), 2.0);
        assert_eq!(w.n, 6);
    }
}
