//! Peer-to-peer bot chatter following a user-supplied schedule.
//!
//! The schedule is a CSV with columns `time_offset,src_bot,dst_bot,
//! message_type,payload_size`; offsets are seconds relative to the attack
//! start. Bot names are bound to addresses three ways: explicitly via
//! `bot_ips`, to shuffled background hosts with `reuse_hosts`, or to fresh
//! addresses from 10.66.0.0/16 that avoid every background host.

use std::collections::BTreeMap;
use std::fs::File;
use std::net::Ipv4Addr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Deserialize;

use crate::attack::gen::{assemble, rng_for};
use crate::attack::schema::{DefaultSource, ParamSchema, ParamSpec, ParamType, VictimKind};
use crate::attack::{derived_mac, AttackError, AttackParams, GeneratedAttack};
use crate::pcap::packet::tcp_flags;
use crate::pcap::{MacAddr, PacketBuilder};
use crate::stats::StatsDb;
use crate::time::Timestamp;

const FRESH_NET: [u8; 2] = [10, 66];

#[derive(Debug, Deserialize)]
struct Row {
    time_offset: f64,
    src_bot: String,
    dst_bot: String,
    message_type: String,
    payload_size: usize,
}

pub fn schema() -> ParamSchema {
    ParamSchema::common(false, VictimKind::None, "100")
        .with(ParamSpec {
            key: "schedule",
            ty: ParamType::Path,
            default: DefaultSource::Required,
            help: "CSV of time_offset,src_bot,dst_bot,message_type,payload_size",
        })
        .with(ParamSpec {
            key: "bot_ips",
            ty: ParamType::IpList,
            default: DefaultSource::Constant(""),
            help: "explicit addresses for the bots, in order of first appearance",
        })
        .with(ParamSpec {
            key: "reuse_hosts",
            ty: ParamType::Bool,
            default: DefaultSource::Constant("false"),
            help: "bind bots to existing background hosts instead of new addresses",
        })
        .with(ParamSpec {
            key: "tcp",
            ty: ParamType::Bool,
            default: DefaultSource::Constant("false"),
            help: "send messages over established TCP instead of UDP",
        })
        .with(ParamSpec {
            key: "port",
            ty: ParamType::Int,
            default: DefaultSource::Constant("8444"),
            help: "peer port used on both ends",
        })
}

fn read_schedule(path: &std::path::Path) -> Result<Vec<Row>, AttackError> {
    let mut rdr = csv::Reader::from_reader(File::open(path)?);
    let headers = rdr
        .headers()
        .map_err(|e| AttackError::CsvParse {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| AttackError::CsvParse {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: Row = record
            .deserialize(Some(&headers))
            .map_err(|e| AttackError::CsvParse {
                line,
                msg: e.to_string(),
            })?;
        if !row.time_offset.is_finite() || row.time_offset < 0.0 {
            return Err(AttackError::CsvParse {
                line,
                msg: format!("time_offset {} is not a non-negative number", row.time_offset),
            });
        }
        if row.src_bot == row.dst_bot {
            return Err(AttackError::CsvParse {
                line,
                msg: format!("bot {:?} cannot message itself", row.src_bot),
            });
        }
        rows.push(row);
    }
    // stable, so same-instant messages keep their file order
    rows.sort_by(|a, b| a.time_offset.partial_cmp(&b.time_offset).unwrap());
    Ok(rows)
}

/// Bot names in order of first appearance; the binding order users see.
fn bot_names(rows: &[Row]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for row in rows {
        for n in [&row.src_bot, &row.dst_bot] {
            if !names.iter().any(|x| x == n) {
                names.push(n.clone());
            }
        }
    }
    names
}

fn bind_addresses(
    names: &[String],
    params: &AttackParams,
    db: &StatsDb,
) -> Result<BTreeMap<String, Ipv4Addr>, AttackError> {
    let explicit = params.ips("bot_ips");
    if !explicit.is_empty() {
        if explicit.len() < names.len() {
            return Err(AttackError::UnboundBot(names[explicit.len()].clone()));
        }
        return Ok(names
            .iter()
            .zip(explicit)
            .map(|(n, ip)| (n.clone(), *ip))
            .collect());
    }

    if params.boolean("reuse_hosts") {
        let mut hosts: Vec<Ipv4Addr> = db.hosts.keys().copied().collect();
        if hosts.len() < names.len() {
            return Err(AttackError::InsufficientHosts {
                needed: names.len(),
                available: hosts.len(),
            });
        }
        hosts.shuffle(&mut rng_for(params.seed, "p2p_botnet hosts"));
        return Ok(names
            .iter()
            .zip(hosts)
            .map(|(n, ip)| (n.clone(), ip))
            .collect());
    }

    // fresh addresses, skipping anything the background already uses
    let mut out = BTreeMap::new();
    let mut k = 0u32;
    for name in names {
        let ip = loop {
            let third = k / 254;
            let fourth = 1 + (k % 254);
            k += 1;
            if third > 255 {
                return Err(AttackError::InsufficientHosts {
                    needed: names.len(),
                    available: 254 * 256,
                });
            }
            let candidate = Ipv4Addr::new(FRESH_NET[0], FRESH_NET[1], third as u8, fourth as u8);
            if !db.hosts.contains_key(&candidate) {
                break candidate;
            }
        };
        out.insert(name.clone(), ip);
    }
    Ok(out)
}

pub fn generate(params: &AttackParams, db: &StatsDb) -> Result<GeneratedAttack, AttackError> {
    let rows = read_schedule(params.path("schedule"))?;
    if rows.is_empty() {
        return Err(AttackError::InvalidValue {
            key: "schedule".into(),
            reason: "schedule has no rows".into(),
        });
    }
    let port = params.int("port");
    if port == 0 || port > u16::MAX as u64 {
        return Err(AttackError::InvalidValue {
            key: "port".into(),
            reason: "not a 16-bit port".into(),
        });
    }
    let port = port as u16;
    let tcp = params.boolean("tcp");
    let max_payload = if tcp { 65535 - 40 } else { 65535 - 28 };

    let names = bot_names(&rows);
    let addresses = bind_addresses(&names, params, db)?;
    let macs: BTreeMap<&String, MacAddr> = names
        .iter()
        .map(|n| (n, derived_mac(params.seed, format!("bot:{n}").as_bytes())))
        .collect();

    let mut rng = rng_for(params.seed, "p2p_botnet payloads");
    let mut isn_rng = rng_for(params.seed, "p2p_botnet isns");
    // directed byte counter per bot pair; long-lived connections are
    // assumed, so no handshakes appear in the excerpt
    let mut seq: BTreeMap<(Ipv4Addr, Ipv4Addr), u32> = BTreeMap::new();

    let mut packets = Vec::with_capacity(rows.len());
    for row in &rows {
        if row.payload_size > max_payload {
            return Err(AttackError::PayloadTooLarge {
                got: row.payload_size,
                max: max_payload,
            });
        }
        let src = addresses[&row.src_bot];
        let dst = addresses[&row.dst_bot];
        let smac = macs[&row.src_bot];
        let dmac = macs[&row.dst_bot];
        let ts = Timestamp(params.start_time.0 + (row.time_offset * 1e6).round() as u64);

        // message tag, a separator, then deterministic filler to size
        let mut payload = row.message_type.clone().into_bytes();
        payload.push(0);
        if payload.len() > row.payload_size {
            payload.truncate(row.payload_size);
        } else {
            let mut filler = vec![0u8; row.payload_size - payload.len()];
            rng.fill(filler.as_mut_slice());
            payload.extend(filler);
        }

        if tcp {
            let s = *seq
                .entry((src, dst))
                .or_insert_with(|| isn_rng.gen());
            let ack = seq.get(&(dst, src)).copied().unwrap_or(0);
            packets.push(
                PacketBuilder::tcp(
                    smac,
                    dmac,
                    src,
                    dst,
                    port,
                    port,
                    tcp_flags::PSH | tcp_flags::ACK,
                )
                .ts(ts)
                .seq(s)
                .ack_num(ack)
                .identification(rng.gen())
                .payload(payload)
                .build(),
            );
            *seq.get_mut(&(src, dst)).unwrap() = s.wrapping_add(row.payload_size as u32);
        } else {
            packets.push(
                PacketBuilder::udp(smac, dmac, src, dst, port, port)
                    .ts(ts)
                    .identification(rng.gen())
                    .payload(payload)
                    .build(),
            );
        }
    }

    Ok(assemble(params, packets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::ParamValue;
    use crate::stats::{HostStats, WindowSpec};
    use std::io::Write;

    fn schedule_file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn params(extra: BTreeMap<String, ParamValue>) -> AttackParams {
        AttackParams {
            attack_name: "p2p_botnet".into(),
            seed: 66,
            attacker_ip: None,
            victim_ips: vec![],
            attacker_mac: None,
            victim_mac: None,
            start_time: Timestamp(10_000_000),
            intensity: 100.0,
            extra,
        }
    }

    fn base_extra(path: &std::path::Path) -> BTreeMap<String, ParamValue> {
        BTreeMap::from([
            ("schedule".to_string(), ParamValue::Path(path.to_path_buf())),
            ("bot_ips".to_string(), ParamValue::IpList(vec![])),
            ("reuse_hosts".to_string(), ParamValue::Bool(false)),
            ("tcp".to_string(), ParamValue::Bool(false)),
            ("port".to_string(), ParamValue::Int(8444)),
        ])
    }

    const SCHEDULE: &str = "time_offset,src_bot,dst_bot,message_type,payload_size\n\
                            0.5,alpha,beta,hello,32\n\
                            0.0,beta,alpha,hello,32\n\
                            1.5,alpha,gamma,peer_list,128\n";

    #[test]
    fn fresh_addresses_follow_the_schedule_order() {
        let f = schedule_file(SCHEDULE);
        let db = StatsDb::empty(WindowSpec::default());
        let got = generate(&params(base_extra(f.path())), &db).unwrap();
        assert_eq!(got.packets.len(), 3);
        // rows re-sorted by offset: beta->alpha first
        assert_eq!(got.packets[0].ts, Timestamp(10_000_000));
        assert_eq!(got.packets[2].ts, Timestamp(11_500_000));
        for p in &got.packets {
            let ip = p.ipv4.as_ref().unwrap();
            assert_eq!(ip.src.octets()[0], 10);
            assert_eq!(ip.src.octets()[1], 66);
            assert_eq!(p.udp().unwrap().dst_port, 8444);
        }
        assert!(got.packets[2].payload.starts_with(b"peer_list\0"));
        assert_eq!(got.packets[2].payload.len(), 128);
    }

    #[test]
    fn reuse_requires_enough_hosts() {
        let f = schedule_file(SCHEDULE);
        let mut db = StatsDb::empty(WindowSpec::default());
        db.hosts.insert("10.0.0.1".parse().unwrap(), HostStats::default());
        let mut extra = base_extra(f.path());
        extra.insert("reuse_hosts".to_string(), ParamValue::Bool(true));
        let err = generate(&params(extra), &db).unwrap_err();
        assert!(matches!(
            err,
            AttackError::InsufficientHosts { needed: 3, available: 1 }
        ));
    }

    #[test]
    fn explicit_bindings_must_cover_every_bot() {
        let f = schedule_file(SCHEDULE);
        let db = StatsDb::empty(WindowSpec::default());
        let mut extra = base_extra(f.path());
        extra.insert(
            "bot_ips".to_string(),
            ParamValue::IpList(vec!["10.9.0.1".parse().unwrap(), "10.9.0.2".parse().unwrap()]),
        );
        let err = generate(&params(extra), &db).unwrap_err();
        // first two names bound (beta, alpha after sort), gamma left over
        assert!(matches!(err, AttackError::UnboundBot(name) if name == "gamma"));
    }

    #[test]
    fn tcp_mode_advances_sequence_numbers() {
        let f = schedule_file(
            "time_offset,src_bot,dst_bot,message_type,payload_size\n\
             0.0,a,b,m1,10\n\
             1.0,a,b,m2,10\n",
        );
        let db = StatsDb::empty(WindowSpec::default());
        let mut extra = base_extra(f.path());
        extra.insert("tcp".to_string(), ParamValue::Bool(true));
        let got = generate(&params(extra), &db).unwrap();
        let first = got.packets[0].tcp().unwrap();
        let second = got.packets[1].tcp().unwrap();
        assert_eq!(second.seq, first.seq.wrapping_add(10));
    }

    #[test]
    fn malformed_rows_carry_line_numbers() {
        let f = schedule_file(
            "time_offset,src_bot,dst_bot,message_type,payload_size\n\
             0.0,a,b,m1,10\n\
             -3.0,a,b,m2,10\n",
        );
        let db = StatsDb::empty(WindowSpec::default());
        let err = generate(&params(base_extra(f.path())), &db).unwrap_err();
        assert!(matches!(err, AttackError::CsvParse { line: 3, .. }));
    }
}
