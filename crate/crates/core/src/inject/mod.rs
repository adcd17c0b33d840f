//! Merging generated attacks into a background capture.
//!
//! The background streams through untouched: record payload bytes are
//! copied verbatim, with only the container header rewritten to the
//! canonical microsecond little-endian form (nanosecond inputs truncate).
//! Attack packets are serialized fresh and interleaved by timestamp. The
//! merge is stable: on equal timestamps the background packet leads,
//! followed by attacks in the order they were listed.

use std::io::Write;
use std::path::Path;

use crate::attack::GeneratedAttack;
use crate::pcap::{CaptureMeta, PacketRecord, PcapReader, PcapWriter, Result};
use crate::time::Timestamp;

/// One attack's span in the merged capture, for the label sidecar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelEntry {
    pub name: String,
    pub start: Timestamp,
    pub end: Timestamp,
    pub packet_count: u64,
    pub params_digest: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InjectReport {
    pub background_packets: u64,
    pub attack_packets: u64,
    pub labels: Vec<LabelEntry>,
}

/// Converts a record's timestamp to microseconds while keeping the payload
/// bytes and the original wire length exactly as captured.
fn canonical_record(rec: PacketRecord, nanos: bool) -> PacketRecord {
    PacketRecord {
        ts_frac: if nanos { rec.ts_frac / 1000 } else { rec.ts_frac },
        ..rec
    }
}

fn record_ts(rec: &PacketRecord) -> Timestamp {
    Timestamp::from_secs_micros(rec.ts_secs, rec.ts_frac)
}

/// Streams `background` into `out` with the attacks merged in, and returns
/// the label entries describing where each attack landed.
pub fn merge_into<W: Write>(
    background: &Path,
    attacks: &[GeneratedAttack],
    out: W,
) -> Result<InjectReport> {
    let mut reader = PcapReader::open(background)?;
    let in_meta = reader.meta();
    let nanos = in_meta.magic.is_nanosecond();
    // generated packets may be longer than the background's snap length
    let out_meta = CaptureMeta::canonical(in_meta.snaplen.max(65535));
    let mut writer = PcapWriter::new(out, &out_meta)?;

    let mut report = InjectReport::default();
    for attack in attacks {
        let (Some(start), Some(end)) = (attack.start(), attack.end()) else {
            continue; // nothing was generated, nothing to label
        };
        report.labels.push(LabelEntry {
            name: attack.name.clone(),
            start,
            end,
            packet_count: attack.packets.len() as u64,
            params_digest: attack.params_digest.clone(),
        });
    }

    let mut bg_next = match reader.next() {
        Some(rec) => Some(canonical_record(rec?, nanos)),
        None => None,
    };
    let mut cursors: Vec<usize> = vec![0; attacks.len()];

    loop {
        // earliest pending attack packet, first-listed attack winning ties
        let mut best: Option<(usize, Timestamp)> = None;
        for (i, attack) in attacks.iter().enumerate() {
            if let Some(pkt) = attack.packets.get(cursors[i]) {
                if best.is_none_or(|(_, ts)| pkt.ts < ts) {
                    best = Some((i, pkt.ts));
                }
            }
        }

        match (&bg_next, best) {
            (Some(rec), Some((i, ats))) => {
                if record_ts(rec) <= ats {
                    writer.write_record(bg_next.as_ref().unwrap())?;
                    report.background_packets += 1;
                    bg_next = match reader.next() {
                        Some(rec) => Some(canonical_record(rec?, nanos)),
                        None => None,
                    };
                } else {
                    writer.write_record(&attacks[i].packets[cursors[i]].to_record())?;
                    report.attack_packets += 1;
                    cursors[i] += 1;
                }
            }
            (Some(_), None) => {
                writer.write_record(bg_next.as_ref().unwrap())?;
                report.background_packets += 1;
                bg_next = match reader.next() {
                    Some(rec) => Some(canonical_record(rec?, nanos)),
                    None => None,
                };
            }
            (None, Some((i, _))) => {
                writer.write_record(&attacks[i].packets[cursors[i]].to_record())?;
                report.attack_packets += 1;
                cursors[i] += 1;
            }
            (None, None) => break,
        }
    }

    writer.finish()?;
    Ok(report)
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Writes the label sidecar: one `<attack>` element per injected attack,
/// timestamps in ISO-8601 UTC at microsecond precision.
pub fn write_labels<W: Write>(mut w: W, labels: &[LabelEntry]) -> std::io::Result<()> {
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    if labels.is_empty() {
        writeln!(w, r#"<labels version="1"/>"#)?;
        return Ok(());
    }
    writeln!(w, r#"<labels version="1">"#)?;
    for l in labels {
        writeln!(w, "  <attack>")?;
        writeln!(w, "    <name>{}</name>", xml_escape(&l.name))?;
        writeln!(w, "    <start>{}</start>", l.start.to_iso8601())?;
        writeln!(w, "    <end>{}</end>", l.end.to_iso8601())?;
        writeln!(w, "    <packet_count>{}</packet_count>", l.packet_count)?;
        writeln!(
            w,
            "    <params_digest>{}</params_digest>",
            xml_escape(&l.params_digest)
        )?;
        writeln!(w, "  </attack>")?;
    }
    writeln!(w, "</labels>")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcap::packet::tcp_flags;
    use crate::pcap::{read_pcap, write_pcap, MacAddr, PacketBuilder, ParsedPacket};
    use std::net::Ipv4Addr;

    fn mac(n: u8) -> MacAddr {
        MacAddr([0x02, 0, 0, 0, 0, n])
    }

    fn pkt(ts_micros: u64, sport: u16) -> ParsedPacket {
        PacketBuilder::tcp(
            mac(1),
            mac(2),
            Ipv4Addr::new(10, 0, 0, 1),
            Ipv4Addr::new(10, 0, 0, 2),
            sport,
            80,
            tcp_flags::SYN,
        )
        .ts(Timestamp(ts_micros))
        .build()
    }

    fn attack(name: &str, packets: Vec<ParsedPacket>) -> GeneratedAttack {
        GeneratedAttack {
            name: name.into(),
            packets,
            params_digest: "d".repeat(56),
        }
    }

    #[test]
    fn merge_keeps_order_and_background_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let bg_path = dir.path().join("bg.pcap");
        let bg_packets = [pkt(1_000_000, 10000), pkt(3_000_000, 10001)];
        let bg_records: Vec<_> = bg_packets.iter().map(|p| p.to_record()).collect();
        write_pcap(&bg_path, &CaptureMeta::default(), &bg_records).unwrap();

        // one attack packet ties a background timestamp exactly
        let a = attack("a", vec![pkt(1_000_000, 20000), pkt(2_000_000, 20001)]);
        let mut out = Vec::new();
        let report = merge_into(&bg_path, &[a], &mut out).unwrap();
        assert_eq!(report.background_packets, 2);
        assert_eq!(report.attack_packets, 2);

        let tmp = dir.path().join("merged.pcap");
        std::fs::write(&tmp, &out).unwrap();
        let (_, records) = read_pcap(&tmp).unwrap();
        assert_eq!(records.len(), 4);
        let stamps: Vec<u64> = records.iter().map(|r| record_ts(r).0).collect();
        assert_eq!(stamps, vec![1_000_000, 1_000_000, 2_000_000, 3_000_000]);
        // the tie resolves to the background record, byte-identical
        assert_eq!(records[0].data, bg_records[0].data);
        assert_eq!(records[3].data, bg_records[1].data);
        // labels describe the attack span
        assert_eq!(report.labels.len(), 1);
        assert_eq!(report.labels[0].start, Timestamp(1_000_000));
        assert_eq!(report.labels[0].end, Timestamp(2_000_000));
        assert_eq!(report.labels[0].packet_count, 2);
    }

    #[test]
    fn equal_stamped_attacks_keep_listing_order() {
        let dir = tempfile::tempdir().unwrap();
        let bg_path = dir.path().join("bg.pcap");
        write_pcap(&bg_path, &CaptureMeta::default(), &[]).unwrap();

        let first = attack("first", vec![pkt(5_000_000, 30000)]);
        let second = attack("second", vec![pkt(5_000_000, 40000)]);
        let mut out = Vec::new();
        merge_into(&bg_path, &[first, second], &mut out).unwrap();

        let tmp = dir.path().join("merged.pcap");
        std::fs::write(&tmp, &out).unwrap();
        let (_, records) = read_pcap(&tmp).unwrap();
        let sports: Vec<u16> = records
            .iter()
            .map(|r| u16::from_be_bytes([r.data[34], r.data[35]]))
            .collect();
        assert_eq!(sports, vec![30000, 40000]);
    }

    #[test]
    fn labels_xml_layout() {
        let mut out = Vec::new();
        write_labels(&mut out, &[]).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<labels version=\"1\"/>\n"
        );

        let entry = LabelEntry {
            name: "portscan".into(),
            start: Timestamp::from_secs_micros(1_672_531_200, 0),
            end: Timestamp::from_secs_micros(1_672_531_230, 500_000),
            packet_count: 3,
            params_digest: "ab".repeat(28),
        };
        let mut out = Vec::new();
        write_labels(&mut out, &[entry]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("<labels version=\"1\">"));
        assert!(text.contains("<start>2023-01-01T00:00:00.000000Z</start>"));
        assert!(text.contains("<end>2023-01-01T00:00:30.500000Z</end>"));
        assert!(text.contains("<packet_count>3</packet_count>"));
        assert!(text.ends_with("</labels>\n"));
    }

    #[test]
    fn escaping_covers_xml_metacharacters() {
        assert_eq!(xml_escape("a<b>&\"c'"), "a&lt;b&gt;&amp;&quot;c&apos;");
    }
}
