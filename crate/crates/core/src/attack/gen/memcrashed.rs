//! Memcached amplification trigger.
//!
//! Small UDP `stats` requests are sent to memcached servers with the source
//! address spoofed to the victim, so the (much larger) answers would land
//! there. Only the trigger packets are generated; the capture is recorded
//! on the attacker's segment, before any amplified response exists.

use rand::Rng;

use crate::attack::gen::{assemble, dynamic_port, rng_for};
use crate::attack::plan::complementary_rate_plan;
use crate::attack::sample::draw_or;
use crate::attack::schema::{DefaultSource, ParamSchema, ParamSpec, ParamType, StatsDefault, VictimKind};
use crate::attack::{derived_mac, mac_for_host, AttackError, AttackParams, GeneratedAttack};
use crate::pcap::PacketBuilder;
use crate::stats::{Field, StatsDb};

const MEMCACHED_PORT: u16 = 11211;

/// Binary-protocol frame header for `stats` over UDP: request id 0x0001,
/// sequence 0, datagram count 1, then the ASCII command.
pub(crate) fn stats_payload() -> Vec<u8> {
    let mut p = vec![0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00];
    p.extend_from_slice(b"stats\r\n");
    p
}

pub fn schema() -> ParamSchema {
    ParamSchema::common(false, VictimKind::Single, "1500")
        .with(ParamSpec {
            key: "servers",
            ty: ParamType::IpList,
            default: DefaultSource::Stats(StatsDefault::RandomServers(5)),
            help: "memcached servers abused as amplifiers",
        })
        .with(ParamSpec {
            key: "packets",
            ty: ParamType::Int,
            default: DefaultSource::Constant("2000"),
            help: "number of trigger requests to send",
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
    let servers = params.ips("servers");
    if servers.is_empty() {
        return Err(AttackError::InvalidValue {
            key: "servers".into(),
            reason: "need at least one amplifier".into(),
        });
    }

    let plan = complementary_rate_plan(db, params.start_time, total, params.intensity, params.seed);
    let victim = params.victim();
    // frames leave the attacker's NIC, whose hardware address the spoofed
    // IP header does not hide
    let attacker_mac = derived_mac(params.seed, b"memcrashed sender");
    let server_macs: Vec<_> = servers
        .iter()
        .map(|s| mac_for_host(db, *s, params.seed))
        .collect();
    let ttl_dist = db.distribution(Field::Ttl);
    let mut rng = rng_for(params.seed, "memcrashed packets");
    let payload = stats_payload();

    let mut packets = Vec::with_capacity(total);
    for (k, ts) in plan.timestamps.iter().enumerate() {
        let idx = k % servers.len();
        packets.push(
            PacketBuilder::udp(
                attacker_mac,
                server_macs[idx],
                victim,
                servers[idx],
                dynamic_port(&mut rng),
                MEMCACHED_PORT,
            )
            .ts(*ts)
            .ttl(draw_or(ttl_dist, &mut rng, 64) as u8)
            .identification(rng.gen())
            .payload(payload.clone())
            .build(),
        );
    }

    Ok(assemble(params, packets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{derived_mac, ParamValue};
    use crate::stats::WindowSpec;
    use crate::time::Timestamp;
    use std::collections::BTreeMap;

    #[test]
    fn requests_alternate_over_servers_with_spoofed_source() {
        let db = StatsDb::empty(WindowSpec::default());
        let victim: std::net::Ipv4Addr = "10.4.0.2".parse().unwrap();
        let servers: Vec<std::net::Ipv4Addr> =
            vec!["10.4.1.1".parse().unwrap(), "10.4.1.2".parse().unwrap()];
        let params = AttackParams {
            attack_name: "memcrashed".into(),
            seed: 44,
            attacker_ip: None,
            victim_ips: vec![victim],
            attacker_mac: None,
            victim_mac: Some(derived_mac(44, b"v")),
            start_time: Timestamp(0),
            intensity: 1000.0,
            extra: BTreeMap::from([
                ("servers".to_string(), ParamValue::IpList(servers.clone())),
                ("packets".to_string(), ParamValue::Int(6)),
            ]),
        };
        let got = generate(&params, &db).unwrap();
        assert_eq!(got.packets.len(), 6);
        for (k, p) in got.packets.iter().enumerate() {
            let ip = p.ipv4.as_ref().unwrap();
            assert_eq!(ip.src, victim);
            assert_eq!(ip.dst, servers[k % 2]);
            let udp = p.udp().unwrap();
            assert_eq!(udp.dst_port, MEMCACHED_PORT);
            assert_eq!(p.payload, stats_payload());
        }
    }
}
