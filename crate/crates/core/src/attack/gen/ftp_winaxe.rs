//! Malicious FTP server overflowing a connecting client.
//!
//! The victim is the client: it connects to the attacker's port 21, receives
//! a normal-looking greeting, then an oversized response that models the
//! overflow. The oversized body is seeded filler, not exploit code; only its
//! length matters for the traffic shape.

use rand::Rng;

use crate::attack::gen::{assemble, dynamic_port, rng_for, HostProfile};
use crate::attack::plan::complementary_rate_plan;
use crate::attack::schema::{DefaultSource, ParamSchema, ParamSpec, ParamType, VictimKind};
use crate::attack::{AttackError, AttackParams, GeneratedAttack};
use crate::pcap::packet::tcp_flags;
use crate::pcap::PacketBuilder;
use crate::stats::StatsDb;

const FTP_PORT: u16 = 21;
/// Largest payload one packet can carry: a 65535-byte datagram minus the
/// minimal IP and TCP headers.
const MAX_PAYLOAD: usize = 65535 - 20 - 20;

pub fn schema() -> ParamSchema {
    ParamSchema::common(true, VictimKind::Single, "50").with(ParamSpec {
        key: "payload_size",
        ty: ParamType::Int,
        default: DefaultSource::Constant("2048"),
        help: "size of the overflowing response in bytes",
    })
}

pub fn generate(params: &AttackParams, db: &StatsDb) -> Result<GeneratedAttack, AttackError> {
    let payload_size = params.int("payload_size") as usize;
    if payload_size == 0 {
        return Err(AttackError::InvalidValue {
            key: "payload_size".into(),
            reason: "must be positive".into(),
        });
    }
    if payload_size > MAX_PAYLOAD {
        return Err(AttackError::PayloadTooLarge {
            got: payload_size,
            max: MAX_PAYLOAD,
        });
    }

    let plan = complementary_rate_plan(db, params.start_time, 7, params.intensity, params.seed);
    let t = &plan.timestamps;
    let server = params.attacker();
    let client = params.victim();
    let smac = params.attacker_mac();
    let cmac = params.victim_mac();

    let mut profile_rng = rng_for(params.seed, "ftp_winaxe profiles");
    let server_profile = HostProfile::from_global(db, &mut profile_rng);
    let client_profile = HostProfile::from_host(db, client, &mut profile_rng);
    let mut rng = rng_for(params.seed, "ftp_winaxe session");

    let sport = dynamic_port(&mut rng);
    let c_isn: u32 = rng.gen();
    let s_isn: u32 = rng.gen();
    let banner = b"220 FTP server ready.\r\n".to_vec();
    let mut overflow = vec![0u8; payload_size];
    rng.fill(overflow.as_mut_slice());

    let client_pkt = |flags, seq: u32, ack: u32| {
        PacketBuilder::tcp(cmac, smac, client, server, sport, FTP_PORT, flags)
            .seq(seq)
            .ack_num(ack)
            .ttl(client_profile.ttl)
            .window(client_profile.window)
    };
    let server_pkt = |flags, seq: u32, ack: u32| {
        PacketBuilder::tcp(smac, cmac, server, client, FTP_PORT, sport, flags)
            .seq(seq)
            .ack_num(ack)
            .ttl(server_profile.ttl)
            .window(server_profile.window)
    };

    let c_next = c_isn.wrapping_add(1);
    let s_next = s_isn.wrapping_add(1);
    let s_after_banner = s_next.wrapping_add(banner.len() as u32);
    let s_after_overflow = s_after_banner.wrapping_add(overflow.len() as u32);

    let mut syn = client_pkt(tcp_flags::SYN, c_isn, 0).ts(t[0]).identification(rng.gen());
    if let Some(mss) = client_profile.mss {
        syn = syn.mss(mss);
    }
    let mut syn_ack = server_pkt(tcp_flags::SYN | tcp_flags::ACK, s_isn, c_next)
        .ts(t[1])
        .identification(rng.gen());
    if let Some(mss) = server_profile.mss {
        syn_ack = syn_ack.mss(mss);
    }

    let packets = vec![
        syn.build(),
        syn_ack.build(),
        client_pkt(tcp_flags::ACK, c_next, s_next)
            .ts(t[2])
            .identification(rng.gen())
            .build(),
        server_pkt(tcp_flags::PSH | tcp_flags::ACK, s_next, c_next)
            .ts(t[3])
            .identification(rng.gen())
            .payload(banner)
            .build(),
        client_pkt(tcp_flags::ACK, c_next, s_after_banner)
            .ts(t[4])
            .identification(rng.gen())
            .build(),
        server_pkt(tcp_flags::PSH | tcp_flags::ACK, s_after_banner, c_next)
            .ts(t[5])
            .identification(rng.gen())
            .payload(overflow)
            .build(),
        client_pkt(tcp_flags::ACK, c_next, s_after_overflow)
            .ts(t[6])
            .identification(rng.gen())
            .build(),
    ];

    Ok(assemble(params, packets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{derived_mac, ParamValue};
    use crate::stats::WindowSpec;
    use crate::time::Timestamp;
    use std::collections::BTreeMap;

    fn params(size: u64) -> AttackParams {
        AttackParams {
            attack_name: "ftp_winaxe".into(),
            seed: 55,
            attacker_ip: Some("10.5.0.1".parse().unwrap()),
            victim_ips: vec!["10.5.0.2".parse().unwrap()],
            attacker_mac: Some(derived_mac(55, b"a")),
            victim_mac: Some(derived_mac(55, b"v")),
            start_time: Timestamp(3_000_000),
            intensity: 50.0,
            extra: BTreeMap::from([("payload_size".to_string(), ParamValue::Int(size))]),
        }
    }

    #[test]
    fn session_shape_and_overflow_size() {
        let db = StatsDb::empty(WindowSpec::default());
        let got = generate(&params(4096), &db).unwrap();
        assert_eq!(got.packets.len(), 7);
        // client opens toward port 21
        let syn = got.packets[0].tcp().unwrap();
        assert!(syn.is_syn_only());
        assert_eq!(syn.dst_port, FTP_PORT);
        assert_eq!(got.packets[0].ipv4.as_ref().unwrap().src, "10.5.0.2".parse::<std::net::Ipv4Addr>().unwrap());
        // banner then overflow, both from the server
        assert!(got.packets[3].payload.starts_with(b"220 "));
        assert_eq!(got.packets[5].payload.len(), 4096);
        // final ack covers banner plus overflow
        let last = got.packets[6].tcp().unwrap();
        let syn_ack = got.packets[1].tcp().unwrap();
        assert_eq!(
            last.ack,
            syn_ack.seq.wrapping_add(1 + 23 + 4096)
        );
        for p in &got.packets {
            assert_eq!(p.verify_tcp_checksum(), Some(true));
        }
    }

    #[test]
    fn oversized_payload_is_rejected() {
        let db = StatsDb::empty(WindowSpec::default());
        let err = generate(&params(70_000), &db).unwrap_err();
        assert!(matches!(
            err,
            AttackError::PayloadTooLarge { got: 70_000, max: MAX_PAYLOAD }
        ));
    }
}
