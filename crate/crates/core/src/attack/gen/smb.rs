//! SMB traffic shapes: a negotiate sweep and a NBT buffer-pinning flood.

use rand::Rng;

use crate::attack::gen::{assemble, dynamic_port, reply_latency, rng_for, HostProfile};
use crate::attack::plan::complementary_rate_plan;
use crate::attack::schema::{DefaultSource, ParamSchema, ParamSpec, ParamType, VictimKind};
use crate::attack::{mac_for_host, AttackError, AttackParams, GeneratedAttack};
use crate::pcap::packet::tcp_flags;
use crate::pcap::PacketBuilder;
use crate::stats::StatsDb;
use crate::time::Timestamp;

const SMB_PORT: u16 = 445;

/// Classic dialect list a legacy client offers during negotiation.
const DIALECTS: &[&str] = &[
    "PC NETWORK PROGRAM 1.0",
    "LANMAN1.0",
    "Windows for Workgroups 3.1a",
    "LM1.2X002",
    "LANMAN2.1",
    "NT LM 0.12",
];

fn netbios(message: Vec<u8>) -> Vec<u8> {
    let mut out = vec![0x00, 0x00];
    out.extend_from_slice(&(message.len() as u16).to_be_bytes());
    out.extend(message);
    out
}

fn smb1_header(command: u8, flags2: u16) -> Vec<u8> {
    let mut h = Vec::with_capacity(32);
    h.extend_from_slice(&[0xFF, b'S', b'M', b'B']);
    h.push(command);
    h.extend_from_slice(&[0, 0, 0, 0]); // status
    h.push(0x18); // flags: canonical paths, case insensitive
    h.extend_from_slice(&flags2.to_le_bytes());
    h.extend_from_slice(&[0; 12]); // pid-high, signature, reserved
    h.extend_from_slice(&0u16.to_le_bytes()); // tid
    h.extend_from_slice(&0x1234u16.to_le_bytes()); // pid
    h.extend_from_slice(&0u16.to_le_bytes()); // uid
    h.extend_from_slice(&1u16.to_le_bytes()); // mid
    h
}

/// SMB_COM_NEGOTIATE request offering the classic dialect list.
pub(crate) fn negotiate_request() -> Vec<u8> {
    let mut msg = smb1_header(0x72, 0xC853);
    msg.push(0); // word count
    let mut dialects = Vec::new();
    for d in DIALECTS {
        dialects.push(0x02); // buffer-format: dialect string
        dialects.extend_from_slice(d.as_bytes());
        dialects.push(0);
    }
    msg.extend_from_slice(&(dialects.len() as u16).to_le_bytes());
    msg.extend(dialects);
    netbios(msg)
}

/// SMB_COM_NEGOTIATE response choosing NT LM 0.12.
pub(crate) fn negotiate_response() -> Vec<u8> {
    let mut msg = smb1_header(0x72, 0xC853);
    msg.push(17); // word count
    msg.extend_from_slice(&5u16.to_le_bytes()); // dialect index: NT LM 0.12
    msg.push(0x03); // security mode: user level, challenge/response
    msg.extend_from_slice(&50u16.to_le_bytes()); // max mpx count
    msg.extend_from_slice(&1u16.to_le_bytes()); // max vcs
    msg.extend_from_slice(&16644u32.to_le_bytes()); // max buffer size
    msg.extend_from_slice(&65536u32.to_le_bytes()); // max raw size
    msg.extend_from_slice(&0u32.to_le_bytes()); // session key
    msg.extend_from_slice(&0x0000E3FDu32.to_le_bytes()); // capabilities
    msg.extend_from_slice(&[0; 8]); // system time
    msg.extend_from_slice(&0u16.to_le_bytes()); // timezone
    msg.push(8); // challenge length
    let challenge = [0x5A, 0x13, 0x77, 0xC4, 0x02, 0x9E, 0xE1, 0x40];
    msg.extend_from_slice(&(challenge.len() as u16).to_le_bytes()); // byte count
    msg.extend_from_slice(&challenge);
    netbios(msg)
}

pub fn scan_schema() -> ParamSchema {
    ParamSchema::common(true, VictimKind::Many, "200")
}

/// One session per victim. Hosts the background shows listening on 445 get
/// the full negotiate exchange; the rest refuse the connection.
pub fn generate_scan(params: &AttackParams, db: &StatsDb) -> Result<GeneratedAttack, AttackError> {
    let plan = complementary_rate_plan(
        db,
        params.start_time,
        params.victim_ips.len(),
        params.intensity,
        params.seed,
    );
    let attacker = params.attacker();
    let amac = params.attacker_mac();
    let mut profile_rng = rng_for(params.seed, "smb_scan profiles");
    let attacker_profile = HostProfile::from_global(db, &mut profile_rng);
    let mut rng = rng_for(params.seed, "smb_scan sessions");

    let request = negotiate_request();
    let response = negotiate_response();
    let mut packets = Vec::new();

    for (victim, session_start) in params.victim_ips.iter().zip(&plan.timestamps) {
        let victim = *victim;
        // the schema's victim_mac applies to the first victim; others come
        // from the background or a derived address
        let vmac = if victim == params.victim() {
            params.victim_mac()
        } else {
            mac_for_host(db, victim, params.seed)
        };
        let victim_profile = HostProfile::from_host(db, victim, &mut profile_rng);
        let sport = dynamic_port(&mut rng);
        let a_isn: u32 = rng.gen();
        let lat = reply_latency(&mut rng);
        let at = |step: u64| Timestamp(session_start.0 + step * lat);
        let open = db
            .host(victim)
            .is_some_and(|h| h.ports_open.contains(&SMB_PORT));

        let mut syn = PacketBuilder::tcp(amac, vmac, attacker, victim, sport, SMB_PORT, tcp_flags::SYN)
            .ts(at(0))
            .seq(a_isn)
            .ttl(attacker_profile.ttl)
            .window(attacker_profile.window)
            .identification(rng.gen());
        if let Some(mss) = attacker_profile.mss {
            syn = syn.mss(mss);
        }
        packets.push(syn.build());

        if !open {
            packets.push(
                PacketBuilder::tcp(
                    vmac,
                    amac,
                    victim,
                    attacker,
                    SMB_PORT,
                    sport,
                    tcp_flags::RST | tcp_flags::ACK,
                )
                .ts(at(1))
                .ack_num(a_isn.wrapping_add(1))
                .ttl(victim_profile.ttl)
                .window(0)
                .identification(rng.gen())
                .build(),
            );
            continue;
        }

        let v_isn: u32 = rng.gen();
        let a_next = a_isn.wrapping_add(1);
        let v_next = v_isn.wrapping_add(1);
        let a_pkt = |flags, ts, seq: u32, ack: u32| {
            PacketBuilder::tcp(amac, vmac, attacker, victim, sport, SMB_PORT, flags)
                .ts(ts)
                .seq(seq)
                .ack_num(ack)
                .ttl(attacker_profile.ttl)
                .window(attacker_profile.window)
        };
        let v_pkt = |flags, ts, seq: u32, ack: u32| {
            PacketBuilder::tcp(vmac, amac, victim, attacker, SMB_PORT, sport, flags)
                .ts(ts)
                .seq(seq)
                .ack_num(ack)
                .ttl(victim_profile.ttl)
                .window(victim_profile.window)
        };

        let mut syn_ack = v_pkt(tcp_flags::SYN | tcp_flags::ACK, at(1), v_isn, a_next);
        if let Some(mss) = victim_profile.mss {
            syn_ack = syn_ack.mss(mss);
        }
        packets.push(syn_ack.identification(rng.gen()).build());
        packets.push(a_pkt(tcp_flags::ACK, at(2), a_next, v_next).identification(rng.gen()).build());

        // negotiate exchange
        packets.push(
            a_pkt(tcp_flags::PSH | tcp_flags::ACK, at(3), a_next, v_next)
                .identification(rng.gen())
                .payload(request.clone())
                .build(),
        );
        let a_after_req = a_next.wrapping_add(request.len() as u32);
        packets.push(
            v_pkt(tcp_flags::PSH | tcp_flags::ACK, at(4), v_next, a_after_req)
                .identification(rng.gen())
                .payload(response.clone())
                .build(),
        );
        let v_after_resp = v_next.wrapping_add(response.len() as u32);

        // orderly close, attacker first
        packets.push(
            a_pkt(tcp_flags::FIN | tcp_flags::ACK, at(5), a_after_req, v_after_resp)
                .identification(rng.gen())
                .build(),
        );
        let a_after_fin = a_after_req.wrapping_add(1);
        packets.push(
            v_pkt(tcp_flags::ACK, at(6), v_after_resp, a_after_fin)
                .identification(rng.gen())
                .build(),
        );
        packets.push(
            v_pkt(tcp_flags::FIN | tcp_flags::ACK, at(7), v_after_resp, a_after_fin)
                .identification(rng.gen())
                .build(),
        );
        packets.push(
            a_pkt(tcp_flags::ACK, at(8), a_after_fin, v_after_resp.wrapping_add(1))
                .identification(rng.gen())
                .build(),
        );
    }

    Ok(assemble(params, packets))
}

pub fn loris_schema() -> ParamSchema {
    ParamSchema::common(true, VictimKind::Single, "300").with(ParamSpec {
        key: "connections",
        ty: ParamType::Int,
        default: DefaultSource::Constant("1024"),
        help: "TCP connections opened and left holding an NBT allocation",
    })
}

/// Opens many connections from distinct source ports, each parking a
/// maximum-length NetBIOS session header on the server.
pub fn generate_loris(params: &AttackParams, db: &StatsDb) -> Result<GeneratedAttack, AttackError> {
    let connections = params.int("connections") as usize;
    if connections == 0 {
        return Err(AttackError::InvalidValue {
            key: "connections".into(),
            reason: "need at least one connection".into(),
        });
    }
    let plan = complementary_rate_plan(
        db,
        params.start_time,
        connections,
        params.intensity,
        params.seed,
    );
    let attacker = params.attacker();
    let victim = params.victim();
    let amac = params.attacker_mac();
    let vmac = params.victim_mac();
    let mut profile_rng = rng_for(params.seed, "smbloris profiles");
    let attacker_profile = HostProfile::from_global(db, &mut profile_rng);
    let victim_profile = HostProfile::from_host(db, victim, &mut profile_rng);
    let mut rng = rng_for(params.seed, "smbloris connections");

    // walk the whole dynamic range so source ports collide as late as
    // possible
    let port_base: u16 = rng.gen_range(0..16384);
    // NBT session message claiming the 17-bit maximum length; the server
    // pins 128 KiB per connection waiting for a body that never comes
    let nbt = vec![0x00, 0x01, 0xFF, 0xFF];

    let mut packets = Vec::with_capacity(connections * 4);
    for (i, start) in plan.timestamps.iter().enumerate() {
        let sport = 49152 + ((port_base as usize + i) % 16384) as u16;
        let a_isn: u32 = rng.gen();
        let v_isn: u32 = rng.gen();
        let lat = reply_latency(&mut rng);

        let mut syn =
            PacketBuilder::tcp(amac, vmac, attacker, victim, sport, SMB_PORT, tcp_flags::SYN)
                .ts(*start)
                .seq(a_isn)
                .ttl(attacker_profile.ttl)
                .window(attacker_profile.window)
                .identification(rng.gen());
        if let Some(mss) = attacker_profile.mss {
            syn = syn.mss(mss);
        }
        packets.push(syn.build());

        let mut syn_ack = PacketBuilder::tcp(
            vmac,
            amac,
            victim,
            attacker,
            SMB_PORT,
            sport,
            tcp_flags::SYN | tcp_flags::ACK,
        )
        .ts(Timestamp(start.0 + lat))
        .seq(v_isn)
        .ack_num(a_isn.wrapping_add(1))
        .ttl(victim_profile.ttl)
        .window(victim_profile.window)
        .identification(rng.gen());
        if let Some(mss) = victim_profile.mss {
            syn_ack = syn_ack.mss(mss);
        }
        packets.push(syn_ack.build());

        packets.push(
            PacketBuilder::tcp(amac, vmac, attacker, victim, sport, SMB_PORT, tcp_flags::ACK)
                .ts(Timestamp(start.0 + 2 * lat))
                .seq(a_isn.wrapping_add(1))
                .ack_num(v_isn.wrapping_add(1))
                .ttl(attacker_profile.ttl)
                .window(attacker_profile.window)
                .identification(rng.gen())
                .build(),
        );
        packets.push(
            PacketBuilder::tcp(
                amac,
                vmac,
                attacker,
                victim,
                sport,
                SMB_PORT,
                tcp_flags::PSH | tcp_flags::ACK,
            )
            .ts(Timestamp(start.0 + 3 * lat))
            .seq(a_isn.wrapping_add(1))
            .ack_num(v_isn.wrapping_add(1))
            .ttl(attacker_profile.ttl)
            .window(attacker_profile.window)
            .identification(rng.gen())
            .payload(nbt.clone())
            .build(),
        );
    }

    Ok(assemble(params, packets))
}
