//! Replay of a recorded two-host exchange against new endpoints.
//!
//! A template is an ordinary capture of one attacker talking to one victim.
//! Replay keeps every payload byte and the relative TCP sequence structure,
//! but swaps in the configured addresses, fresh initial sequence numbers and
//! background-plausible attacker header fields, then re-times the packets on
//! the injection plan. Nothing from the original endpoints survives.

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attack::sample::draw;
use crate::attack::schema::{DefaultSource, ParamSchema, ParamSpec, ParamType, VictimKind};
use crate::attack::{AttackError, AttackParams};
use crate::pcap::packet::tcp_flags;
use crate::pcap::{parse_packet, MacAddr, ParsedPacket, PcapReader, Transport};
use crate::stats::{Field, StatsDb};
use crate::time::Timestamp;

/// A loaded template with its two roles identified.
#[derive(Debug, Clone)]
pub struct TemplatePcap {
    /// IPv4 packets in capture order; non-IP frames are dropped on load.
    pub packets: Vec<ParsedPacket>,
    pub attacker: Ipv4Addr,
    pub victim: Ipv4Addr,
    pub attacker_mac: MacAddr,
    pub victim_mac: MacAddr,
}

/// Reads a template capture and identifies the attacker as the host sending
/// the first pure SYN. Exactly two IPv4 hosts may appear.
pub fn load_template(path: &Path) -> Result<TemplatePcap, AttackError> {
    let mut reader = PcapReader::open(path)?;
    let magic = reader.meta().magic;
    let mut packets = Vec::new();
    for rec in &mut reader {
        let pkt = parse_packet(&rec?, magic)?;
        if pkt.ipv4.is_some() {
            packets.push(pkt);
        }
    }

    let mut hosts = BTreeSet::new();
    for p in &packets {
        let ip = p.ipv4.as_ref().unwrap();
        hosts.insert(ip.src);
        hosts.insert(ip.dst);
    }
    if hosts.len() != 2 {
        return Err(AttackError::AmbiguousTemplate(hosts.len()));
    }

    let attacker = packets
        .iter()
        .find(|p| p.tcp().is_some_and(|t| t.is_syn_only()))
        .map(|p| p.ipv4.as_ref().unwrap().src)
        .ok_or(AttackError::NoTcp)?;
    let victim = hosts.into_iter().find(|h| *h != attacker).unwrap();

    let mac_of = |role: Ipv4Addr| {
        packets
            .iter()
            .find(|p| p.ipv4.as_ref().unwrap().src == role)
            .map(|p| p.eth.src)
            // a silent role still appears as a frame destination
            .or_else(|| {
                packets
                    .iter()
                    .find(|p| p.ipv4.as_ref().unwrap().dst == role)
                    .map(|p| p.eth.dst)
            })
            .unwrap_or(MacAddr::ZERO)
    };

    Ok(TemplatePcap {
        attacker_mac: mac_of(attacker),
        victim_mac: mac_of(victim),
        packets,
        attacker,
        victim,
    })
}

/// Overwrites the value of a kind-2 MSS option in place, if one exists.
fn set_mss_option(options: &mut [u8], mss: u16) {
    let mut i = 0;
    while i < options.len() {
        match options[i] {
            0 => return,
            1 => i += 1,
            2 if i + 3 < options.len() && options[i + 1] == 4 => {
                options[i + 2..i + 4].copy_from_slice(&mss.to_be_bytes());
                return;
            }
            _ => {
                if i + 1 >= options.len() {
                    return;
                }
                i += (options[i + 1] as usize).max(2);
            }
        }
    }
}

/// Rewrites template packets onto the resolved endpoints and timestamps.
///
/// Per template connection and direction a fresh random initial sequence
/// number replaces the recorded one; sequence and acknowledgment numbers
/// keep their offsets relative to it, so the byte stream stays coherent.
/// Attacker TTL and MSS are redrawn once from the background (hosts keep one
/// value), the attacker window per packet; all stay untouched when the
/// background has no observations. Payloads are copied verbatim.
pub fn rewrite_template(
    tpl: &TemplatePcap,
    params: &AttackParams,
    db: &StatsDb,
    plan: &[Timestamp],
) -> Result<Vec<ParsedPacket>, AttackError> {
    if plan.len() != tpl.packets.len() {
        return Err(AttackError::LengthMismatch {
            plan: plan.len(),
            template: tpl.packets.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x7e3a_11ce);
    let attacker_ttl = draw(db.distribution(Field::Ttl), &mut rng);
    let attacker_mss = draw(db.distribution(Field::Mss), &mut rng);
    let new_attacker = params.attacker();
    let new_victim = params.victim();
    let new_attacker_mac = params.attacker_mac();
    let new_victim_mac = params.victim_mac();

    // directional key -> (recorded base seq, fresh base seq)
    let mut bases: BTreeMap<(Ipv4Addr, u16, Ipv4Addr, u16), (u32, u32)> = BTreeMap::new();
    let mut out = Vec::with_capacity(tpl.packets.len());
    for (pkt, ts) in tpl.packets.iter().zip(plan) {
        let mut p = pkt.clone();
        p.ts = *ts;
        let orig = pkt.ipv4.as_ref().unwrap();
        let from_attacker = orig.src == tpl.attacker;

        let ip = p.ipv4.as_mut().unwrap();
        ip.src = if from_attacker { new_attacker } else { new_victim };
        ip.dst = if from_attacker { new_victim } else { new_attacker };
        p.eth.src = if from_attacker { new_attacker_mac } else { new_victim_mac };
        p.eth.dst = if from_attacker { new_victim_mac } else { new_attacker_mac };
        if from_attacker {
            if let Some(t) = attacker_ttl {
                ip.ttl = t as u8;
            }
        }

        if let Transport::Tcp(tcp) = &mut p.transport {
            // keyed on the recorded addresses so both directions of one
            // template connection stay linked after the remap
            let fwd = (orig.src, tcp.src_port, orig.dst, tcp.dst_port);
            let seq = tcp.seq;
            let (old_base, new_base) = *bases.entry(fwd).or_insert_with(|| (seq, rng.gen()));
            tcp.seq = new_base.wrapping_add(tcp.seq.wrapping_sub(old_base));
            if tcp.has(tcp_flags::ACK) {
                let rev = (orig.dst, tcp.dst_port, orig.src, tcp.src_port);
                if let Some((ro, rn)) = bases.get(&rev) {
                    tcp.ack = rn.wrapping_add(tcp.ack.wrapping_sub(*ro));
                }
            }
            if from_attacker {
                if let Some(w) = draw(db.distribution(Field::WindowSize), &mut rng) {
                    tcp.window = w as u16;
                }
                if tcp.mss().is_some() {
                    if let Some(m) = attacker_mss {
                        set_mss_option(&mut tcp.options, m as u16);
                    }
                }
            }
        }
        out.push(p);
    }
    Ok(out)
}

/// Schema shared by every template-driven attack.
pub fn recipe_schema() -> ParamSchema {
    ParamSchema::common(true, VictimKind::Single, "20").with(ParamSpec {
        key: "template",
        ty: ParamType::Path,
        default: DefaultSource::Required,
        help: "capture of the original two-host exchange to replay",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::derived_mac;
    use crate::pcap::{write_pcap, CaptureMeta, PacketBuilder};
    use crate::stats::WindowSpec;
    use std::collections::BTreeMap as Map;

    fn mac(n: u8) -> MacAddr {
        MacAddr([0x02, 0, 0, 0, 0, n])
    }

    fn handshake(a: Ipv4Addr, v: Ipv4Addr) -> Vec<ParsedPacket> {
        let syn = PacketBuilder::tcp(mac(1), mac(2), a, v, 50000, 80, tcp_flags::SYN)
            .ts(Timestamp(1_000_000))
            .seq(1000)
            .mss(1400)
            .build();
        let syn_ack = PacketBuilder::tcp(
            mac(2),
            mac(1),
            v,
            a,
            80,
            50000,
            tcp_flags::SYN | tcp_flags::ACK,
        )
        .ts(Timestamp(1_100_000))
        .seq(5000)
        .ack_num(1001)
        .build();
        let data = PacketBuilder::tcp(
            mac(1),
            mac(2),
            a,
            v,
            50000,
            80,
            tcp_flags::PSH | tcp_flags::ACK,
        )
        .ts(Timestamp(1_200_000))
        .seq(1001)
        .ack_num(5001)
        .payload(b"GET / HTTP/1.0\r\n\r\n".to_vec())
        .build();
        vec![syn, syn_ack, data]
    }

    fn template() -> TemplatePcap {
        let a: Ipv4Addr = "172.16.0.9".parse().unwrap();
        let v: Ipv4Addr = "172.16.0.80".parse().unwrap();
        TemplatePcap {
            packets: handshake(a, v),
            attacker: a,
            victim: v,
            attacker_mac: mac(1),
            victim_mac: mac(2),
        }
    }

    fn params() -> AttackParams {
        AttackParams {
            attack_name: "template_exploit".into(),
            seed: 11,
            attacker_ip: Some("10.0.0.100".parse().unwrap()),
            victim_ips: vec!["10.0.0.200".parse().unwrap()],
            attacker_mac: Some(derived_mac(11, b"a")),
            victim_mac: Some(derived_mac(11, b"v")),
            start_time: Timestamp(2_000_000),
            intensity: 10.0,
            extra: Map::new(),
        }
    }

    #[test]
    fn endpoints_are_fully_replaced() {
        let tpl = template();
        let db = StatsDb::empty(WindowSpec::default());
        let plan: Vec<Timestamp> = (0..3).map(|i| Timestamp(2_000_000 + i * 100_000)).collect();
        let out = rewrite_template(&tpl, &params(), &db, &plan).unwrap();
        for p in &out {
            let ip = p.ipv4.as_ref().unwrap();
            assert!(ip.src != tpl.attacker && ip.src != tpl.victim);
            assert!(ip.dst != tpl.attacker && ip.dst != tpl.victim);
            assert!(p.eth.src != tpl.attacker_mac && p.eth.src != tpl.victim_mac);
            assert!(p.eth.dst != tpl.attacker_mac && p.eth.dst != tpl.victim_mac);
        }
        assert_eq!(out[2].payload, b"GET / HTTP/1.0\r\n\r\n");
        assert_eq!(out[1].ts, Timestamp(2_100_000));
    }

    #[test]
    fn sequence_offsets_survive_the_isn_swap() {
        let tpl = template();
        let db = StatsDb::empty(WindowSpec::default());
        let plan: Vec<Timestamp> = (0..3).map(|i| Timestamp(2_000_000 + i)).collect();
        let out = rewrite_template(&tpl, &params(), &db, &plan).unwrap();
        let syn = out[0].tcp().unwrap();
        let syn_ack = out[1].tcp().unwrap();
        let data = out[2].tcp().unwrap();
        assert_ne!(syn.seq, 1000); // fresh ISN
        assert_eq!(data.seq, syn.seq.wrapping_add(1));
        assert_eq!(syn_ack.ack, syn.seq.wrapping_add(1));
        assert_eq!(data.ack, syn_ack.seq.wrapping_add(1));
        // empty background leaves the recorded MSS alone
        assert_eq!(syn.mss(), Some(1400));
    }

    #[test]
    fn plan_length_must_match() {
        let tpl = template();
        let db = StatsDb::empty(WindowSpec::default());
        let err = rewrite_template(&tpl, &params(), &db, &[Timestamp(0)]).unwrap_err();
        assert!(matches!(
            err,
            AttackError::LengthMismatch { plan: 1, template: 3 }
        ));
    }

    fn write_fixture(path: &std::path::Path, pkts: &[ParsedPacket]) {
        let records: Vec<_> = pkts.iter().map(|p| p.to_record()).collect();
        write_pcap(path, &CaptureMeta::default(), &records).unwrap();
    }

    #[test]
    fn loader_identifies_roles_and_rejects_crowds() {
        let dir = tempfile::tempdir().unwrap();
        let a: Ipv4Addr = "172.16.0.9".parse().unwrap();
        let v: Ipv4Addr = "172.16.0.80".parse().unwrap();

        let good = dir.path().join("pair.pcap");
        write_fixture(&good, &handshake(a, v));
        let tpl = load_template(&good).unwrap();
        assert_eq!(tpl.attacker, a);
        assert_eq!(tpl.victim, v);
        assert_eq!(tpl.attacker_mac, mac(1));
        assert_eq!(tpl.packets.len(), 3);

        let crowded = dir.path().join("crowd.pcap");
        let mut pkts = handshake(a, v);
        pkts.push(
            PacketBuilder::udp(mac(3), mac(2), "172.16.0.33".parse().unwrap(), v, 5353, 53)
                .ts(Timestamp(1_300_000))
                .build(),
        );
        write_fixture(&crowded, &pkts);
        assert!(matches!(
            load_template(&crowded).unwrap_err(),
            AttackError::AmbiguousTemplate(3)
        ));

        let no_syn = dir.path().join("nosyn.pcap");
        let udp_only = vec![PacketBuilder::udp(mac(1), mac(2), a, v, 1234, 53)
            .ts(Timestamp(1_000_000))
            .build()];
        write_fixture(&no_syn, &udp_only);
        assert!(matches!(load_template(&no_syn).unwrap_err(), AttackError::NoTcp));
    }
}
