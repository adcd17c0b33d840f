//! Dataset-quality audit: entropy-based diversity metrics, checksum and
//! port validity, and the report files that carry them.

pub mod metrics;
pub mod report;

pub use metrics::{
    cumulative_entropy_series, entropy, entropy_series, normalized_entropy,
    novelty_distribution, novelty_normalized_entropy, WindowedCounts,
};
pub use report::emit_report;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pcap::packet::parse_packet;
use crate::pcap::{ParsedPacket, PcapError, PcapReader};
use crate::stats::{Field, StatsDb, TimeWindowSeries, WindowSpec};
use crate::tables;
use crate::Metric;

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Checksum-cleanness warnings only fire once a capture has enough TCP
/// traffic for a zero-error count to be suspicious.
pub const CLEANNESS_MIN_TCP: u64 = 1000;

#[derive(Debug, Error)]
pub enum TidedError {
    #[error("empty input: no values to normalize over")]
    EmptyInput,
    #[error("capture contains no packets")]
    EmptyCapture,
    #[error(transparent)]
    Pcap(#[from] PcapError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Header features whose value diversity is audited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiversityFeature {
    SrcIp,
    DstIp,
    Ttl,
    Mss,
    WindowSize,
    Tos,
}

impl DiversityFeature {
    pub const ALL: [DiversityFeature; 6] = [
        DiversityFeature::SrcIp,
        DiversityFeature::DstIp,
        DiversityFeature::Ttl,
        DiversityFeature::Mss,
        DiversityFeature::WindowSize,
        DiversityFeature::Tos,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DiversityFeature::SrcIp => "src_ip",
            DiversityFeature::DstIp => "dst_ip",
            DiversityFeature::Ttl => "ttl",
            DiversityFeature::Mss => "mss",
            DiversityFeature::WindowSize => "window_size",
            DiversityFeature::Tos => "tos",
        }
    }

    /// Value of this feature in a packet, if the packet carries it.
    pub fn extract(&self, pkt: &ParsedPacket) -> Option<u64> {
        let ip = pkt.ipv4.as_ref()?;
        match self {
            DiversityFeature::SrcIp => Some(u32::from(ip.src) as u64),
            DiversityFeature::DstIp => Some(u32::from(ip.dst) as u64),
            DiversityFeature::Ttl => Some(ip.ttl as u64),
            DiversityFeature::Tos => Some(ip.tos as u64),
            DiversityFeature::Mss => pkt.tcp().and_then(|t| t.mss()).map(u64::from),
            DiversityFeature::WindowSize => pkt.tcp().map(|t| t.window as u64),
        }
    }
}

/// Diversity metrics for one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityResult {
    pub feature: DiversityFeature,
    pub distinct_values: u64,
    /// Normalized entropy over the whole capture; zero when the feature
    /// never occurs.
    pub normalized_entropy: Metric,
    pub entropy_series: TimeWindowSeries,
    pub novelty_series: TimeWindowSeries,
    pub novelty_normalized_entropy: Metric,
    pub cumulative_entropy_series: TimeWindowSeries,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ChecksumValidity {
    /// TCP packets whose checksum could be recomputed (not truncated).
    pub checked: u64,
    pub correct: u64,
    pub incorrect: u64,
    /// `incorrect / checked`, zero when nothing was checked.
    pub incorrect_ratio: Metric,
}

impl ChecksumValidity {
    fn observe(&mut self, ok: bool) {
        self.checked += 1;
        if ok {
            self.correct += 1;
        } else {
            self.incorrect += 1;
        }
    }

    fn finalize(&mut self) {
        if self.checked > 0 {
            self.incorrect_ratio = self.incorrect as Metric / self.checked as Metric;
        }
    }
}

/// Destination-port census against the bundled assignment snapshot.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortValidity {
    /// Packets addressed to port zero, which never carries real traffic.
    pub port_zero: u64,
    /// Ports 1-1023.
    pub well_known: u64,
    /// Ports 1024-49151.
    pub registered: u64,
    /// Ports 49152-65535.
    pub dynamic: u64,
    /// Packets to a non-dynamic port with no entry in the snapshot.
    pub unassigned: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TidedWarning {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TidedReport {
    pub format_version: u32,
    pub source: String,
    pub content_hash: String,
    pub packet_count: u64,
    /// Share of packets carrying a payload; absent for empty captures.
    pub payload_availability: Option<Metric>,
    pub checksums: ChecksumValidity,
    pub ports: PortValidity,
    pub diversity: Vec<DiversityResult>,
    pub warnings: Vec<TidedWarning>,
    pub notes: Vec<String>,
}

/// Share of packets with a non-empty payload above the deepest parsed
/// header.
pub fn payload_availability(db: &StatsDb) -> Result<Metric, TidedError> {
    if db.file.packet_count == 0 {
        return Err(TidedError::EmptyCapture);
    }
    Ok(db.file.payload_packet_count as Metric / db.file.packet_count as Metric)
}

/// Buckets the destination-port distribution into IANA ranges and counts
/// traffic to ports the bundled snapshot does not know.
pub fn port_validity(db: &StatsDb) -> PortValidity {
    let mut v = PortValidity::default();
    for (port, count) in db.distribution(Field::DstPort).iter() {
        let port = port as u16;
        match port {
            0 => v.port_zero += count,
            1..=1023 => v.well_known += count,
            1024..=49151 => v.registered += count,
            _ => v.dynamic += count,
        }
        if (1..=49151).contains(&port) && !tables::is_assigned(port) {
            v.unassigned += count;
        }
    }
    v
}

/// Verifies every non-truncated TCP checksum in a capture.
pub fn checksum_validity(path: &Path) -> Result<ChecksumValidity, TidedError> {
    let mut reader = PcapReader::open(path)?;
    let magic = reader.meta().magic;
    let mut v = ChecksumValidity::default();
    for rec in &mut reader {
        let rec = rec?;
        if let Ok(pkt) = parse_packet(&rec, magic) {
            if let Some(ok) = pkt.verify_tcp_checksum() {
                v.observe(ok);
            }
        }
    }
    v.finalize();
    Ok(v)
}

/// Streams the capture once and assembles the full report: per-feature
/// diversity series, checksum and port validity, and any warnings.
pub fn run_audit(path: &Path, db: &StatsDb, spec: WindowSpec) -> Result<TidedReport, TidedError> {
    let windowing = spec.resolve(db.file.capture_start, db.file.capture_end);
    let mut counts: BTreeMap<DiversityFeature, WindowedCounts> = DiversityFeature::ALL
        .iter()
        .map(|f| (*f, WindowedCounts::new(windowing)))
        .collect();
    let mut checksums = ChecksumValidity::default();

    let mut reader = PcapReader::open(path)?;
    let magic = reader.meta().magic;
    for rec in &mut reader {
        let rec = rec?;
        let Ok(pkt) = parse_packet(&rec, magic) else {
            continue;
        };
        for feature in DiversityFeature::ALL {
            if let Some(value) = feature.extract(&pkt) {
                counts.get_mut(&feature).unwrap().add(pkt.ts, value);
            }
        }
        if let Some(ok) = pkt.verify_tcp_checksum() {
            checksums.observe(ok);
        }
    }
    checksums.finalize();

    let diversity: Vec<DiversityResult> = DiversityFeature::ALL
        .iter()
        .map(|feature| {
            let wc = &counts[feature];
            let merged = wc.merged();
            let novelty = novelty_distribution(wc);
            DiversityResult {
                feature: *feature,
                distinct_values: merged.len() as u64,
                normalized_entropy: normalized_entropy::<Metric>(merged.values().copied())
                    .unwrap_or(0.0),
                entropy_series: entropy_series(wc),
                novelty_normalized_entropy: novelty_normalized_entropy(&novelty),
                novelty_series: novelty,
                cumulative_entropy_series: cumulative_entropy_series(wc),
            }
        })
        .collect();

    let ports = port_validity(db);
    let mut warnings = Vec::new();
    if checksums.incorrect == 0 && checksums.checked >= CLEANNESS_MIN_TCP {
        warnings.push(TidedWarning {
            code: "clean_checksums".into(),
            message: format!(
                "all {} TCP checksums are correct; real captures nearly always \
                 contain some corruption, so this looks synthetic or scrubbed",
                checksums.checked
            ),
        });
    }
    if ports.port_zero > 0 {
        warnings.push(TidedWarning {
            code: "port_zero".into(),
            message: format!(
                "{} packets addressed to port 0, which does not occur in real traffic",
                ports.port_zero
            ),
        });
    }

    let mut notes = Vec::new();
    let payload = match payload_availability(db) {
        Ok(v) => Some(v),
        Err(_) => {
            notes.push("capture is empty; availability and entropy metrics are degenerate".into());
            None
        }
    };

    Ok(TidedReport {
        format_version: REPORT_FORMAT_VERSION,
        source: path.display().to_string(),
        content_hash: db.content_hash.clone(),
        packet_count: db.file.packet_count,
        payload_availability: payload,
        checksums,
        ports,
        diversity,
        warnings,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_names() {
        let names: Vec<&str> = DiversityFeature::ALL.iter().map(|f| f.name()).collect();
        assert_eq!(
            names,
            vec!["src_ip", "dst_ip", "ttl", "mss", "window_size", "tos"]
        );
    }

    #[test]
    fn checksum_ratio() {
        let mut v = ChecksumValidity::default();
        for i in 0..100 {
            v.observe(i >= 7);
        }
        v.finalize();
        assert_eq!(v.incorrect, 7);
        assert!((v.incorrect_ratio - 0.07).abs() < 1e-12);
    }
}
