//! The single streaming pass that fills a [`StatsDb`].

use std::collections::BTreeMap;
use std::net::Ipv4Addr;
use std::path::Path;

use crate::pcap::packet::parse_packet;
use crate::pcap::{PcapReader, Transport};
use crate::stats::{
    content_hash, rate_series, ConnStats, Field, FieldDistribution, FileStats, FiveTuple,
    HostStats, StatsDb, StatsError, TimeWindowSeries, WindowSpec, STATS_FORMAT_VERSION,
};
use crate::time::Timestamp;

#[derive(Default)]
struct ConnAccum {
    count: u64,
    first: Timestamp,
    last: Timestamp,
    sum_gap: f64,
    sum_gap_sq: f64,
}

/// Reads the capture once and derives every statistics family. The window
/// spec only affects the precomputed interval series; all other fields are
/// window-independent.
pub fn compute_statistics(path: &Path, spec: WindowSpec) -> Result<StatsDb, StatsError> {
    let hash = content_hash(path)?;
    let mut reader = PcapReader::open(path)?;
    let magic = reader.meta().magic;

    let mut file = FileStats::default();
    let mut hosts: BTreeMap<Ipv4Addr, HostStats> = BTreeMap::new();
    let mut fields: BTreeMap<Field, FieldDistribution> = Field::ALL
        .iter()
        .map(|f| (*f, FieldDistribution::default()))
        .collect();
    let mut conns: BTreeMap<FiveTuple, ConnAccum> = BTreeMap::new();
    let mut packet_ts: Vec<u64> = Vec::new();
    let mut start = Timestamp(u64::MAX);
    let mut end = Timestamp(0);

    for rec in &mut reader {
        let rec = rec?;
        let ts = rec.timestamp(magic);
        file.packet_count += 1;
        file.total_bytes += rec.orig_len as u64;
        packet_ts.push(ts.0);
        start = start.min(ts);
        end = end.max(ts);

        let pkt = match parse_packet(&rec, magic) {
            Ok(p) => p,
            Err(_) => {
                file.unparsed_frames += 1;
                continue;
            }
        };
        let Some(ip) = &pkt.ipv4 else { continue };
        file.ipv4_packet_count += 1;
        if !pkt.payload.is_empty() {
            file.payload_packet_count += 1;
        }

        fields.get_mut(&Field::Ttl).unwrap().add(ip.ttl as u64);
        fields.get_mut(&Field::Tos).unwrap().add(ip.tos as u64);
        fields
            .get_mut(&Field::Protocol)
            .unwrap()
            .add(ip.protocol as u64);
        fields
            .get_mut(&Field::SrcIp)
            .unwrap()
            .add(u32::from(ip.src) as u64);
        fields
            .get_mut(&Field::DstIp)
            .unwrap()
            .add(u32::from(ip.dst) as u64);

        let wire_bytes = rec.orig_len as u64;
        {
            let sender = hosts.entry(ip.src).or_default();
            sender.pkts_sent += 1;
            sender.bytes_sent += wire_bytes;
            sender.mac = Some(pkt.eth.src);
            sender.ttl_sent.add(ip.ttl as u64);
            if let Transport::Tcp(tcp) = &pkt.transport {
                sender.window_sent.add(tcp.window as u64);
                if let Some(mss) = tcp.mss() {
                    sender.mss_sent.add(mss as u64);
                }
                if tcp.is_syn_ack() {
                    sender.ports_open.insert(tcp.src_port);
                }
            }
        }
        {
            let receiver = hosts.entry(ip.dst).or_default();
            receiver.pkts_received += 1;
            receiver.bytes_received += wire_bytes;
        }

        let ports = match &pkt.transport {
            Transport::Tcp(t) => {
                fields
                    .get_mut(&Field::WindowSize)
                    .unwrap()
                    .add(t.window as u64);
                if let Some(mss) = t.mss() {
                    fields.get_mut(&Field::Mss).unwrap().add(mss as u64);
                }
                Some((t.src_port, t.dst_port))
            }
            Transport::Udp(u) => Some((u.src_port, u.dst_port)),
            _ => None,
        };
        if let Some((sport, dport)) = ports {
            fields.get_mut(&Field::SrcPort).unwrap().add(sport as u64);
            fields.get_mut(&Field::DstPort).unwrap().add(dport as u64);

            let key = FiveTuple::canonical(ip.src, sport, ip.dst, dport, ip.protocol);
            let acc = conns.entry(key).or_insert_with(|| ConnAccum {
                count: 0,
                first: ts,
                last: ts,
                sum_gap: 0.0,
                sum_gap_sq: 0.0,
            });
            if acc.count > 0 {
                let gap = ts.saturating_sub(acc.last) as f64 / 1e6;
                acc.sum_gap += gap;
                acc.sum_gap_sq += gap * gap;
            }
            acc.count += 1;
            acc.first = acc.first.min(ts);
            acc.last = acc.last.max(ts);
        }
    }

    if file.packet_count == 0 {
        start = Timestamp(0);
        end = Timestamp(0);
    }
    file.capture_start = start;
    file.capture_end = end;
    file.duration_seconds = end.saturating_sub(start) as f64 / 1e6;
    if file.packet_count > 0 {
        file.avg_packet_size = file.total_bytes as f64 / file.packet_count as f64;
    }
    if file.duration_seconds > 0.0 {
        file.avg_packet_rate = file.packet_count as f64 / file.duration_seconds;
    }

    let connections: Vec<(FiveTuple, ConnStats)> = conns
        .into_iter()
        .map(|(key, acc)| {
            let gaps = (acc.count - 1) as f64;
            let span = acc.last.saturating_sub(acc.first) as f64 / 1e6;
            let mean = if gaps > 0.0 { acc.sum_gap / gaps } else { 0.0 };
            let var = if gaps > 0.0 {
                (acc.sum_gap_sq / gaps - mean * mean).max(0.0)
            } else {
                0.0
            };
            (
                key,
                ConnStats {
                    packet_count: acc.count,
                    first_ts: acc.first,
                    last_ts: acc.last,
                    avg_packet_rate: if span > 0.0 { acc.count as f64 / span } else { 0.0 },
                    mean_interarrival: mean,
                    stddev_interarrival: var.sqrt(),
                },
            )
        })
        .collect();

    let windowing = spec.resolve(start, end);
    let mut interval: BTreeMap<String, TimeWindowSeries> = BTreeMap::new();
    interval.insert("packet_rate".into(), rate_series(&packet_ts, windowing));

    Ok(StatsDb {
        format_version: STATS_FORMAT_VERSION,
        content_hash: hash,
        window_spec: spec,
        file,
        hosts,
        fields,
        connections,
        interval,
        packet_ts,
    })
}
