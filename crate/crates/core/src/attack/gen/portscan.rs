//! TCP SYN scan against one host.
//!
//! Probes the most common service ports in a seeded random order. Ports the
//! background shows the victim answering on complete a half-open handshake
//! (SYN, SYN+ACK, attacker RST); the rest are refused with RST+ACK.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::attack::gen::{assemble, dynamic_port, reply_latency, rng_for, HostProfile};
use crate::attack::plan::complementary_rate_plan;
use crate::attack::schema::{DefaultSource, ParamSchema, ParamSpec, ParamType, StatsDefault, VictimKind};
use crate::attack::{AttackError, AttackParams, GeneratedAttack};
use crate::pcap::packet::tcp_flags;
use crate::pcap::PacketBuilder;
use crate::stats::StatsDb;
use crate::time::Timestamp;

pub fn schema() -> ParamSchema {
    ParamSchema::common(true, VictimKind::Single, "1000").with(ParamSpec {
        key: "ports",
        ty: ParamType::Ports,
        default: DefaultSource::Stats(StatsDefault::TopPorts(1000)),
        help: "ports to probe; defaults to the 1000 most common services",
    })
}

pub fn generate(params: &AttackParams, db: &StatsDb) -> Result<GeneratedAttack, AttackError> {
    // duplicate user entries collapse; probe order is a seeded shuffle
    let mut ports: Vec<u16> = Vec::new();
    for &p in params.ports("ports") {
        if !ports.contains(&p) {
            ports.push(p);
        }
    }
    if ports.is_empty() {
        return Err(AttackError::InvalidValue {
            key: "ports".into(),
            reason: "nothing to scan".into(),
        });
    }
    ports.shuffle(&mut rng_for(params.seed, "portscan order"));

    let plan = complementary_rate_plan(
        db,
        params.start_time,
        ports.len(),
        params.intensity,
        params.seed,
    );

    let attacker = params.attacker();
    let victim = params.victim();
    let amac = params.attacker_mac();
    let vmac = params.victim_mac();
    let open = db
        .host(victim)
        .map(|h| h.ports_open.clone())
        .unwrap_or_default();

    let mut profile_rng = rng_for(params.seed, "portscan profiles");
    let attacker_profile = HostProfile::from_global(db, &mut profile_rng);
    let victim_profile = HostProfile::from_host(db, victim, &mut profile_rng);
    let mut rng = rng_for(params.seed, "portscan probes");

    let mut packets = Vec::with_capacity(ports.len() * 3);
    for (port, ts) in ports.iter().zip(&plan.timestamps) {
        let sport = dynamic_port(&mut rng);
        let isn: u32 = rng.gen();
        let latency = reply_latency(&mut rng);

        let mut syn = PacketBuilder::tcp(amac, vmac, attacker, victim, sport, *port, tcp_flags::SYN)
            .ts(*ts)
            .seq(isn)
            .ttl(attacker_profile.ttl)
            .window(attacker_profile.window)
            .identification(rng.gen());
        if let Some(mss) = attacker_profile.mss {
            syn = syn.mss(mss);
        }
        packets.push(syn.build());

        if open.contains(port) {
            let visn: u32 = rng.gen();
            let mut syn_ack = PacketBuilder::tcp(
                vmac,
                amac,
                victim,
                attacker,
                *port,
                sport,
                tcp_flags::SYN | tcp_flags::ACK,
            )
            .ts(Timestamp(ts.0 + latency))
            .seq(visn)
            .ack_num(isn.wrapping_add(1))
            .ttl(victim_profile.ttl)
            .window(victim_profile.window)
            .identification(rng.gen());
            if let Some(mss) = victim_profile.mss {
                syn_ack = syn_ack.mss(mss);
            }
            packets.push(syn_ack.build());

            // half-open close: the scanner tears the connection down
            packets.push(
                PacketBuilder::tcp(amac, vmac, attacker, victim, sport, *port, tcp_flags::RST)
                    .ts(Timestamp(ts.0 + 2 * latency))
                    .seq(isn.wrapping_add(1))
                    .ttl(attacker_profile.ttl)
                    .window(0)
                    .identification(rng.gen())
                    .build(),
            );
        } else {
            packets.push(
                PacketBuilder::tcp(
                    vmac,
                    amac,
                    victim,
                    attacker,
                    *port,
                    sport,
                    tcp_flags::RST | tcp_flags::ACK,
                )
                .ts(Timestamp(ts.0 + latency))
                .ack_num(isn.wrapping_add(1))
                .ttl(victim_profile.ttl)
                .window(0)
                .identification(rng.gen())
                .build(),
            );
        }
    }

    Ok(assemble(params, packets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{derived_mac, validate_and_default};
    use crate::stats::WindowSpec;
    use std::collections::{BTreeMap, BTreeSet};

    fn empty_db_params(ports: &str) -> (AttackParams, StatsDb) {
        let db = StatsDb::empty(WindowSpec::default());
        let params = AttackParams {
            attack_name: "portscan".into(),
            seed: 5,
            attacker_ip: Some("10.1.1.1".parse().unwrap()),
            victim_ips: vec!["10.1.1.2".parse().unwrap()],
            attacker_mac: Some(derived_mac(5, b"a")),
            victim_mac: Some(derived_mac(5, b"v")),
            start_time: Timestamp(10_000_000),
            intensity: 1000.0,
            extra: BTreeMap::from([(
                "ports".to_string(),
                crate::attack::ParamValue::Ports(
                    ports
                        .split(',')
                        .map(|p| p.parse().unwrap())
                        .collect(),
                ),
            )]),
        };
        (params, db)
    }

    #[test]
    fn default_schema_probes_one_thousand_distinct_ports() {
        let db = StatsDb::empty(WindowSpec::default());
        let mut user = BTreeMap::new();
        user.insert("attacker_ip".to_string(), "10.1.1.1".to_string());
        user.insert("victim_ip".to_string(), "10.1.1.2".to_string());
        let params = validate_and_default("portscan", &schema(), &user, &db, 9).unwrap();
        let got = generate(&params, &db).unwrap();
        let probed: BTreeSet<u16> = got
            .packets
            .iter()
            .filter_map(|p| p.tcp())
            .filter(|t| t.is_syn_only())
            .map(|t| t.dst_port)
            .collect();
        assert_eq!(probed.len(), 1000);
    }

    #[test]
    fn closed_ports_are_refused() {
        let (params, db) = empty_db_params("80,443");
        let got = generate(&params, &db).unwrap();
        // no open-port knowledge: every probe answered by RST+ACK
        assert_eq!(got.packets.len(), 4);
        let rsts: Vec<_> = got
            .packets
            .iter()
            .filter_map(|p| p.tcp())
            .filter(|t| t.has(tcp_flags::RST) && t.has(tcp_flags::ACK))
            .collect();
        assert_eq!(rsts.len(), 2);
        for p in &got.packets {
            assert!(p.verify_tcp_checksum().unwrap());
        }
    }

    #[test]
    fn replies_follow_their_probe() {
        let (params, db) = empty_db_params("22,25,110,143");
        let got = generate(&params, &db).unwrap();
        let mut last = Timestamp(0);
        for p in &got.packets {
            assert!(p.ts >= last);
            last = p.ts;
        }
    }
}
