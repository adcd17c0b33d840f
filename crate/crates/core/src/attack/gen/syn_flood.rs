//! TCP SYN flood against one service port.
//!
//! Every SYN uses a fresh random source port, sequence number and window;
//! TTLs are drawn from the background so the flood blends in. The victim
//! answers with SYN+ACKs until its backlog saturates, then goes silent.

use rand::Rng;

use crate::attack::gen::{assemble, dynamic_port, reply_latency, rng_for, HostProfile};
use crate::attack::plan::complementary_rate_plan;
use crate::attack::sample::draw_or;
use crate::attack::schema::{DefaultSource, ParamSchema, ParamSpec, ParamType, StatsDefault, VictimKind};
use crate::attack::{mac_for_host, AttackError, AttackParams, GeneratedAttack};
use crate::pcap::packet::tcp_flags;
use crate::pcap::PacketBuilder;
use crate::stats::{Field, StatsDb};
use crate::time::Timestamp;

pub fn schema() -> ParamSchema {
    ParamSchema::common(true, VictimKind::Single, "2000")
        .with(ParamSpec {
            key: "packets",
            ty: ParamType::Int,
            default: DefaultSource::Constant("5000"),
            help: "number of SYN packets to send",
        })
        .with(ParamSpec {
            key: "port",
            ty: ParamType::Int,
            default: DefaultSource::Stats(StatsDefault::MostUsedOpenPort),
            help: "destination port; defaults to the victim's busiest open port",
        })
        .with(ParamSpec {
            key: "attacker_ips",
            ty: ParamType::IpList,
            default: DefaultSource::Constant(""),
            help: "extra source addresses cycled through for a distributed flood",
        })
        .with(ParamSpec {
            key: "reply_cutoff",
            ty: ParamType::Float,
            default: DefaultSource::Constant("0.7"),
            help: "fraction of the flood the victim still answers before it drowns",
        })
}

pub fn generate(params: &AttackParams, db: &StatsDb) -> Result<GeneratedAttack, AttackError> {
    let total = params.int("packets") as usize;
    if total == 0 {
        return Err(AttackError::InvalidValue {
            key: "packets".into(),
            reason: "need at least one packet".into(),
        });
    }
    let cutoff = params.float("reply_cutoff");
    if !(0.0..=1.0).contains(&cutoff) {
        return Err(AttackError::InvalidValue {
            key: "reply_cutoff".into(),
            reason: "must lie in [0, 1]".into(),
        });
    }
    let port = params.int("port");
    if port > u16::MAX as u64 {
        return Err(AttackError::InvalidValue {
            key: "port".into(),
            reason: "not a 16-bit port".into(),
        });
    }
    let port = port as u16;

    let mut sources = vec![params.attacker()];
    for ip in params.ips("attacker_ips") {
        if !sources.contains(ip) {
            sources.push(*ip);
        }
    }
    let source_macs: Vec<_> = sources
        .iter()
        .enumerate()
        .map(|(i, ip)| {
            if i == 0 {
                params.attacker_mac()
            } else {
                mac_for_host(db, *ip, params.seed)
            }
        })
        .collect();

    let plan = complementary_rate_plan(db, params.start_time, total, params.intensity, params.seed);
    let victim = params.victim();
    let vmac = params.victim_mac();
    let mut profile_rng = rng_for(params.seed, "syn_flood profiles");
    let victim_profile = HostProfile::from_host(db, victim, &mut profile_rng);
    let ttl_dist = db.distribution(Field::Ttl);
    let mut rng = rng_for(params.seed, "syn_flood packets");

    let replies_until = (cutoff * total as f64).floor() as usize;
    let mut packets = Vec::with_capacity(total + replies_until);
    for (k, ts) in plan.timestamps.iter().enumerate() {
        let src = sources[k % sources.len()];
        let smac = source_macs[k % sources.len()];
        let sport = dynamic_port(&mut rng);
        let seq: u32 = rng.gen();
        // flood tools fabricate the window; this is the one field that
        // deliberately ignores the background
        let window: u16 = rng.gen();
        let ttl = draw_or(ttl_dist, &mut rng, 64) as u8;

        packets.push(
            PacketBuilder::tcp(smac, vmac, src, victim, sport, port, tcp_flags::SYN)
                .ts(*ts)
                .seq(seq)
                .ttl(ttl)
                .window(window)
                .identification(rng.gen())
                .build(),
        );

        if k < replies_until {
            let lat = reply_latency(&mut rng);
            let mut syn_ack = PacketBuilder::tcp(
                vmac,
                smac,
                victim,
                src,
                port,
                sport,
                tcp_flags::SYN | tcp_flags::ACK,
            )
            .ts(Timestamp(ts.0 + lat))
            .seq(rng.gen())
            .ack_num(seq.wrapping_add(1))
            .ttl(victim_profile.ttl)
            .window(victim_profile.window)
            .identification(rng.gen());
            if let Some(mss) = victim_profile.mss {
                syn_ack = syn_ack.mss(mss);
            }
            packets.push(syn_ack.build());
        }
    }

    Ok(assemble(params, packets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{derived_mac, ParamValue};
    use crate::stats::WindowSpec;
    use std::collections::BTreeMap;

    fn params(extra: BTreeMap<String, ParamValue>) -> AttackParams {
        AttackParams {
            attack_name: "syn_flood".into(),
            seed: 33,
            attacker_ip: Some("10.3.0.1".parse().unwrap()),
            victim_ips: vec!["10.3.0.2".parse().unwrap()],
            attacker_mac: Some(derived_mac(33, b"a")),
            victim_mac: Some(derived_mac(33, b"v")),
            start_time: Timestamp(0),
            intensity: 5000.0,
            extra,
        }
    }

    fn base_extra(packets: u64) -> BTreeMap<String, ParamValue> {
        BTreeMap::from([
            ("packets".to_string(), ParamValue::Int(packets)),
            ("port".to_string(), ParamValue::Int(80)),
            ("attacker_ips".to_string(), ParamValue::IpList(vec![])),
            ("reply_cutoff".to_string(), ParamValue::Float(0.7)),
        ])
    }

    #[test]
    fn reply_volume_follows_the_cutoff() {
        let db = StatsDb::empty(WindowSpec::default());
        let got = generate(&params(base_extra(1000)), &db).unwrap();
        let syns = got
            .packets
            .iter()
            .filter_map(|p| p.tcp())
            .filter(|t| t.is_syn_only())
            .count();
        let syn_acks = got
            .packets
            .iter()
            .filter_map(|p| p.tcp())
            .filter(|t| t.is_syn_ack())
            .count();
        assert_eq!(syns, 1000);
        assert_eq!(syn_acks, 700);
    }

    #[test]
    fn distributed_sources_cycle() {
        let db = StatsDb::empty(WindowSpec::default());
        let mut extra = base_extra(30);
        extra.insert(
            "attacker_ips".to_string(),
            ParamValue::IpList(vec!["10.3.0.8".parse().unwrap(), "10.3.0.9".parse().unwrap()]),
        );
        let got = generate(&params(extra), &db).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for p in &got.packets {
            if p.tcp().is_some_and(|t| t.is_syn_only()) {
                seen.insert(p.ipv4.as_ref().unwrap().src);
            }
        }
        assert_eq!(seen.len(), 3);
    }

    #[test]
    fn bad_cutoff_is_rejected() {
        let db = StatsDb::empty(WindowSpec::default());
        let mut extra = base_extra(10);
        extra.insert("reply_cutoff".to_string(), ParamValue::Float(1.5));
        assert!(matches!(
            generate(&params(extra), &db).unwrap_err(),
            AttackError::InvalidValue { .. }
        ));
    }
}
