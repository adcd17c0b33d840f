//! End-to-end run through the public API: synthesize a background capture,
//! compute its statistics, generate attacks from the registry, merge them
//! in, and audit the result.

use std::collections::BTreeMap;

use pcapforge_core::attack::{find_attack, validate_and_default, GeneratedAttack};
use pcapforge_core::inject::{merge_into, write_labels};
use pcapforge_core::pcap::{read_pcap, serialize_packet};
use pcapforge_core::stats::{compute_statistics, StatsDb, WindowSpec};
use pcapforge_core::synth::{write_background, BackgroundProfile};
use pcapforge_core::tided::run_audit;
use pcapforge_core::time::Timestamp;

fn generate(
    name: &str,
    user: &BTreeMap<String, String>,
    db: &StatsDb,
    seed: u64,
) -> GeneratedAttack {
    let desc = find_attack(name).unwrap();
    let params = validate_and_default(name, &(desc.schema)(), user, db, seed).unwrap();
    (desc.generate)(&params, db).unwrap()
}

#[test]
fn synthesize_analyze_inject_audit() {
    let dir = tempfile::tempdir().unwrap();
    let bg_path = dir.path().join("bg.pcap");
    let profile = BackgroundProfile {
        seed: 3,
        packets: 4000,
        hosts: 12,
        ..BackgroundProfile::default()
    };
    write_background(&bg_path, &profile).unwrap();
    let db = compute_statistics(&bg_path, WindowSpec::default()).unwrap();
    assert_eq!(db.file.packet_count, 4000);

    let scan = generate(
        "portscan",
        &BTreeMap::from([("ports".to_string(), "1-300".to_string())]),
        &db,
        7,
    );
    let flood = generate("syn_flood", &BTreeMap::new(), &db, 8);
    assert!(!scan.packets.is_empty());
    assert!(!flood.packets.is_empty());

    // same inputs, same packets, byte for byte
    let scan_again = generate(
        "portscan",
        &BTreeMap::from([("ports".to_string(), "1-300".to_string())]),
        &db,
        7,
    );
    assert_eq!(scan.params_digest, scan_again.params_digest);
    assert_eq!(scan.packets.len(), scan_again.packets.len());
    for (a, b) in scan.packets.iter().zip(&scan_again.packets) {
        assert_eq!(a.ts, b.ts);
        assert_eq!(serialize_packet(a, true), serialize_packet(b, true));
    }

    let attacks = vec![scan, flood];
    let mut merged_bytes = Vec::new();
    let report = merge_into(&bg_path, &attacks, &mut merged_bytes).unwrap();
    assert_eq!(report.background_packets, 4000);
    assert_eq!(
        report.attack_packets,
        attacks.iter().map(|a| a.packets.len() as u64).sum::<u64>()
    );
    assert_eq!(report.labels.len(), 2);
    for (label, attack) in report.labels.iter().zip(&attacks) {
        assert_eq!(label.name, attack.name);
        assert_eq!(label.packet_count, attack.packets.len() as u64);
        assert_eq!(label.params_digest, attack.params_digest);
        assert!(label.start <= label.end);
    }

    let merged_path = dir.path().join("merged.pcap");
    std::fs::write(&merged_path, &merged_bytes).unwrap();
    let (_, merged) = read_pcap(&merged_path).unwrap();
    assert_eq!(
        merged.len() as u64,
        report.background_packets + report.attack_packets
    );

    // merged output is time-sorted
    let mut last = Timestamp(0);
    for rec in &merged {
        let ts = Timestamp::from_secs_micros(rec.ts_secs, rec.ts_frac);
        assert!(ts >= last, "merge broke timestamp order at {ts:?}");
        last = ts;
    }

    // the background survives as an untouched subsequence
    let (_, bg_records) = read_pcap(&bg_path).unwrap();
    let mut next_bg = 0;
    for rec in &merged {
        if next_bg < bg_records.len() && *rec == bg_records[next_bg] {
            next_bg += 1;
        }
    }
    assert_eq!(next_bg, bg_records.len(), "background records lost or reordered");

    // label sidecar is structurally sound
    let mut xml = Vec::new();
    write_labels(&mut xml, &report.labels).unwrap();
    let xml = String::from_utf8(xml).unwrap();
    assert!(xml.starts_with(r#"<?xml version="1.0" encoding="UTF-8"?>"#));
    assert_eq!(xml.matches("<attack>").count(), 2);
    assert_eq!(xml.matches("</attack>").count(), 2);
    assert!(xml.contains("<name>portscan</name>"));
    assert!(xml.contains("<name>syn_flood</name>"));
    for label in &report.labels {
        assert_eq!(label.params_digest.len(), 56); // SHA-224 hex
        assert!(xml.contains(&label.params_digest));
    }

    // audit the merged capture
    let merged_db = compute_statistics(&merged_path, WindowSpec::default()).unwrap();
    let audit = run_audit(&merged_path, &merged_db, WindowSpec::default()).unwrap();
    assert_eq!(audit.packet_count, merged.len() as u64);
    assert_eq!(audit.diversity.len(), 6);
    for d in &audit.diversity {
        assert!((0.0..=1.0 + 1e-12).contains(&d.normalized_entropy));
        assert!(d.distinct_values > 0, "no values for {:?}", d.feature);
    }
    // generated checksums are all correct, which the audit flags once
    // enough TCP traffic accumulates
    assert!(audit.checksums.checked >= 1000);
    assert_eq!(audit.checksums.incorrect, 0);
    assert!(audit.warnings.iter().any(|w| w.code == "clean_checksums"));
}
