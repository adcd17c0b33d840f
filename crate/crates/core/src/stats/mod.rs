//! Background-capture statistics: per-file totals, per-host behavior, field
//! value distributions, per-connection timing, and packet-rate time series.

mod cache;
mod compute;

pub use cache::{content_hash, load_or_compute, stats_cache_path, CacheOutcome};
pub use compute::compute_statistics;

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pcap::{MacAddr, PcapError};
use crate::time::{Timestamp, Windowing};
use crate::Metric;

/// Bumped whenever the serialized layout changes; cached files with another
/// version are recomputed.
pub const STATS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error(transparent)]
    Pcap(#[from] PcapError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("host {0} does not appear in the capture")]
    UnknownHost(Ipv4Addr),
    #[error("unknown field {0:?}")]
    UnknownField(String),
}

/// Header fields a value distribution is tracked for.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Ttl,
    Mss,
    WindowSize,
    Tos,
    Protocol,
    SrcPort,
    DstPort,
    SrcIp,
    DstIp,
}

impl Field {
    pub const ALL: [Field; 9] = [
        Field::Ttl,
        Field::Mss,
        Field::WindowSize,
        Field::Tos,
        Field::Protocol,
        Field::SrcPort,
        Field::DstPort,
        Field::SrcIp,
        Field::DstIp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Field::Ttl => "ttl",
            Field::Mss => "mss",
            Field::WindowSize => "window_size",
            Field::Tos => "tos",
            Field::Protocol => "protocol",
            Field::SrcPort => "src_port",
            Field::DstPort => "dst_port",
            Field::SrcIp => "src_ip",
            Field::DstIp => "dst_ip",
        }
    }
}

impl FromStr for Field {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self, StatsError> {
        Field::ALL
            .iter()
            .find(|f| f.name() == s)
            .copied()
            .ok_or_else(|| StatsError::UnknownField(s.to_string()))
    }
}

/// Value histogram for one header field. Values are widened to `u64`
/// (IP addresses as their big-endian integer form).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldDistribution {
    counts: BTreeMap<u64, u64>,
}

impl FieldDistribution {
    pub fn add(&mut self, value: u64) {
        *self.counts.entry(value).or_insert(0) += 1;
    }

    pub fn get(&self, value: u64) -> u64 {
        self.counts.get(&value).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    /// Ascending by value.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts.iter().map(|(v, c)| (*v, *c))
    }

    pub fn values(&self) -> impl Iterator<Item = u64> + '_ {
        self.counts.keys().copied()
    }

    pub fn counts(&self) -> impl Iterator<Item = u64> + '_ {
        self.counts.values().copied()
    }

    /// Value with the highest count; ties resolve to the smaller value.
    pub fn most_used(&self) -> Option<u64> {
        let mut best: Option<(u64, u64)> = None;
        for (v, c) in self.iter() {
            match best {
                Some((_, bc)) if c <= bc => {}
                _ => best = Some((v, c)),
            }
        }
        best.map(|(v, _)| v)
    }

    /// Count-weighted mean of the values.
    pub fn mean(&self) -> Option<Metric> {
        let total = self.total();
        if total == 0 {
            return None;
        }
        let sum: u128 = self.iter().map(|(v, c)| v as u128 * c as u128).sum();
        Some(sum as Metric / total as Metric)
    }
}

impl FromIterator<u64> for FieldDistribution {
    fn from_iter<I: IntoIterator<Item = u64>>(iter: I) -> Self {
        let mut d = FieldDistribution::default();
        for v in iter {
            d.add(v);
        }
        d
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FileStats {
    pub packet_count: u64,
    pub ipv4_packet_count: u64,
    /// Frames that failed header parsing; counted in totals only.
    pub unparsed_frames: u64,
    pub capture_start: Timestamp,
    pub capture_end: Timestamp,
    pub duration_seconds: f64,
    pub total_bytes: u64,
    pub avg_packet_size: f64,
    pub avg_packet_rate: f64,
    /// Packets with a non-empty payload above the deepest parsed header.
    pub payload_packet_count: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HostStats {
    pub pkts_sent: u64,
    pub pkts_received: u64,
    pub bytes_sent: u64,
    pub bytes_received: u64,
    /// TCP ports this host answered on with SYN+ACK.
    pub ports_open: BTreeSet<u16>,
    pub ttl_sent: FieldDistribution,
    pub window_sent: FieldDistribution,
    pub mss_sent: FieldDistribution,
    /// Most recently observed source MAC.
    pub mac: Option<MacAddr>,
}

/// Direction-free connection key: the smaller `(ip, port)` endpoint sorts
/// first so both directions of a flow collapse onto one entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FiveTuple {
    pub ip_a: Ipv4Addr,
    pub port_a: u16,
    pub ip_b: Ipv4Addr,
    pub port_b: u16,
    pub protocol: u8,
}

impl FiveTuple {
    pub fn canonical(
        src_ip: Ipv4Addr,
        src_port: u16,
        dst_ip: Ipv4Addr,
        dst_port: u16,
        protocol: u8,
    ) -> Self {
        if (src_ip, src_port) <= (dst_ip, dst_port) {
            FiveTuple {
                ip_a: src_ip,
                port_a: src_port,
                ip_b: dst_ip,
                port_b: dst_port,
                protocol,
            }
        } else {
            FiveTuple {
                ip_a: dst_ip,
                port_a: dst_port,
                ip_b: src_ip,
                port_b: src_port,
                protocol,
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConnStats {
    pub packet_count: u64,
    pub first_ts: Timestamp,
    pub last_ts: Timestamp,
    /// Packets per second over the connection's own span; zero for
    /// single-packet or zero-duration connections.
    pub avg_packet_rate: f64,
    /// Mean of successive same-connection interarrival gaps, seconds.
    pub mean_interarrival: f64,
    /// Population standard deviation of those gaps, seconds.
    pub stddev_interarrival: f64,
}

/// One value per window over a capture span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeWindowSeries {
    pub windowing: Windowing,
    pub values: Vec<Metric>,
}

impl TimeWindowSeries {
    pub fn window_starts(&self) -> Vec<Timestamp> {
        self.windowing.starts()
    }
}

/// How a capture span is split into windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WindowSpec {
    /// Fixed number of equal windows over the span.
    Count(usize),
    /// Fixed window length in seconds; the count follows from the span.
    Seconds(f64),
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec::Count(100)
    }
}

impl WindowSpec {
    pub fn resolve(&self, start: Timestamp, end: Timestamp) -> Windowing {
        match *self {
            WindowSpec::Count(n) => Windowing::new(start, end, n.max(1)),
            WindowSpec::Seconds(s) => Windowing::with_window_seconds(start, end, s),
        }
    }

    /// Filename fragment distinguishing cache entries for different specs.
    pub fn cache_key(&self) -> String {
        match *self {
            WindowSpec::Count(n) => format!("w{n}"),
            WindowSpec::Seconds(s) => format!("{}ms", (s * 1000.0).round() as u64),
        }
    }
}

/// Everything the generators and audits need from a background capture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsDb {
    pub format_version: u32,
    /// SHA-224 of the capture file bytes, lowercase hex.
    pub content_hash: String,
    pub window_spec: WindowSpec,
    pub file: FileStats,
    pub hosts: BTreeMap<Ipv4Addr, HostStats>,
    pub fields: BTreeMap<Field, FieldDistribution>,
    pub connections: Vec<(FiveTuple, ConnStats)>,
    pub interval: BTreeMap<String, TimeWindowSeries>,
    /// Capture timestamps, delta-encoded when serialized; kept so rate
    /// series can be re-windowed without another pass over the file.
    #[serde(with = "delta_encoded")]
    pub packet_ts: Vec<u64>,
}

impl StatsDb {
    /// A db with zero observations. Queries behave as on a real empty
    /// capture; mainly useful as a neutral background in tests.
    pub fn empty(window_spec: WindowSpec) -> StatsDb {
        StatsDb {
            format_version: STATS_FORMAT_VERSION,
            content_hash: String::new(),
            window_spec,
            file: FileStats::default(),
            hosts: BTreeMap::new(),
            fields: Field::ALL
                .iter()
                .map(|f| (*f, FieldDistribution::default()))
                .collect(),
            connections: Vec::new(),
            interval: BTreeMap::new(),
            packet_ts: Vec::new(),
        }
    }

    pub fn distribution(&self, field: Field) -> &FieldDistribution {
        // every field has an entry, written at construction
        &self.fields[&field]
    }

    /// Most frequent value of a field, ties resolving to the smaller value.
    pub fn most_used(&self, field: Field) -> Option<u64> {
        self.distribution(field).most_used()
    }

    pub fn host(&self, ip: Ipv4Addr) -> Option<&HostStats> {
        self.hosts.get(&ip)
    }

    pub fn open_ports(&self, ip: Ipv4Addr) -> Result<&BTreeSet<u16>, StatsError> {
        self.hosts
            .get(&ip)
            .map(|h| &h.ports_open)
            .ok_or(StatsError::UnknownHost(ip))
    }

    /// Host with the highest sent-plus-received packet total; ties resolve
    /// to the numerically smallest address.
    pub fn most_active_host(&self) -> Option<Ipv4Addr> {
        let mut best: Option<(Ipv4Addr, u64)> = None;
        for (ip, h) in &self.hosts {
            let activity = h.pkts_sent + h.pkts_received;
            match best {
                Some((_, b)) if activity <= b => {}
                _ => best = Some((*ip, activity)),
            }
        }
        best.map(|(ip, _)| ip)
    }

    /// Uniformly random host, deterministic in the seed.
    pub fn random_host(&self, seed: u64) -> Option<Ipv4Addr> {
        if self.hosts.is_empty() {
            return None;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let idx = rng.gen_range(0..self.hosts.len());
        self.hosts.keys().nth(idx).copied()
    }

    /// Packets per second over `n` equal windows of the capture span.
    pub fn packet_rate_series(&self, n: usize) -> TimeWindowSeries {
        let w = WindowSpec::Count(n).resolve(self.file.capture_start, self.file.capture_end);
        rate_series(&self.packet_ts, w)
    }

    /// Count-weighted mean MSS across the capture.
    pub fn avg_mss(&self) -> Option<Metric> {
        self.distribution(Field::Mss).mean()
    }

    pub fn connection(&self, tuple: &FiveTuple) -> Option<&ConnStats> {
        self.connections
            .binary_search_by(|(t, _)| t.cmp(tuple))
            .ok()
            .map(|i| &self.connections[i].1)
    }
}

/// Buckets timestamps into a windowing and divides by window width.
pub(crate) fn rate_series(ts_micros: &[u64], w: Windowing) -> TimeWindowSeries {
    let mut counts = vec![0u64; w.n];
    for &t in ts_micros {
        counts[w.index_of(Timestamp(t))] += 1;
    }
    let width = w.window_seconds();
    let values = counts
        .into_iter()
        .map(|c| if width > 0.0 { c as Metric / width } else { 0.0 })
        .collect();
    TimeWindowSeries {
        windowing: w,
        values,
    }
}

/// Serializes a sorted timestamp vector as first-order deltas to keep the
/// cache file small.
mod delta_encoded {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(ts: &[u64], s: S) -> Result<S::Ok, S::Error> {
        let mut deltas = Vec::with_capacity(ts.len());
        let mut prev = 0u64;
        for &t in ts {
            deltas.push(t.wrapping_sub(prev));
            prev = t;
        }
        deltas.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u64>, D::Error> {
        let deltas = Vec::<u64>::deserialize(d)?;
        let mut out = Vec::with_capacity(deltas.len());
        let mut acc = 0u64;
        for d in deltas {
            acc = acc.wrapping_add(d);
            out.push(acc);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn most_used_breaks_ties_low() {
        let d: FieldDistribution = [5u64, 3, 3, 5, 7].into_iter().collect();
        assert_eq!(d.most_used(), Some(3));
    }

    #[test]
    fn field_names_round_trip() {
        for f in Field::ALL {
            assert_eq!(f.name().parse::<Field>().unwrap(), f);
        }
        assert!(matches!(
            "bogus".parse::<Field>(),
            Err(StatsError::UnknownField(_))
        ));
    }

    #[test]
    fn five_tuple_directionless() {
        let a = FiveTuple::canonical(
            Ipv4Addr::new(10, 0, 0, 2),
            80,
            Ipv4Addr::new(10, 0, 0, 1),
            50000,
            6,
        );
        let b = FiveTuple::canonical(
            Ipv4Addr::new(10, 0, 0, 1),
            50000,
            Ipv4Addr::new(10, 0, 0, 2),
            80,
            6,
        );
        assert_eq!(a, b);
        assert_eq!(a.ip_a, Ipv4Addr::new(10, 0, 0, 1));
    }

    #[test]
    fn distribution_mean() {
        let d: FieldDistribution = [1460u64, 1460, 536].into_iter().collect();
        let m = d.mean().unwrap();
        assert!((m - (1460.0 * 2.0 + 536.0) / 3.0).abs() < 1e-12);
    }
}
