//! Deterministic synthesis of plausible background traffic.
//!
//! Produces captures with complete TCP conversations, UDP exchanges and
//! ICMP echoes between a small population of hosts, each host keeping
//! consistent link-layer addresses, TTLs and TCP options. Useful for demos
//! and as reproducible fixtures; the same profile always yields the same
//! bytes.

use std::net::Ipv4Addr;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::pcap::packet::tcp_flags;
use crate::pcap::{CaptureMeta, MacAddr, PacketBuilder, ParsedPacket, PcapWriter, Result};
use crate::time::Timestamp;

const SERVER_PORTS: &[u16] = &[22, 25, 53, 80, 110, 143, 443, 445, 993, 8080];
const TTLS: &[u8] = &[64, 128, 255];
const WINDOWS: &[u16] = &[8192, 29200, 64240, 65535];
const MSSES: &[u16] = &[1380, 1400, 1460];

/// Shape of a synthesized capture.
#[derive(Debug, Clone)]
pub struct BackgroundProfile {
    pub seed: u64,
    pub start: Timestamp,
    /// Capture span in seconds; packets spread evenly with jitter.
    pub duration: f64,
    pub packets: usize,
    pub hosts: usize,
}

impl Default for BackgroundProfile {
    fn default() -> Self {
        BackgroundProfile {
            seed: 0,
            start: Timestamp::from_secs_micros(1_700_000_000, 0),
            duration: 60.0,
            packets: 2000,
            hosts: 8,
        }
    }
}

struct Host {
    ip: Ipv4Addr,
    mac: MacAddr,
    ttl: u8,
    window: u16,
    mss: u16,
    next_id: u16,
}

struct World {
    hosts: Vec<Host>,
    rng: ChaCha8Rng,
}

impl World {
    fn new(profile: &BackgroundProfile) -> Self {
        assert!(profile.hosts >= 2, "need at least two hosts");
        let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
        let hosts = (0..profile.hosts)
            .map(|i| Host {
                ip: Ipv4Addr::new(192, 168, 1, 10 + i as u8),
                mac: MacAddr([0x02, 0x16, 0x80, 0x01, 0x01, 10 + i as u8]),
                ttl: *TTLS.choose(&mut rng).unwrap(),
                window: *WINDOWS.choose(&mut rng).unwrap(),
                mss: *MSSES.choose(&mut rng).unwrap(),
                next_id: rng.gen(),
            })
            .collect();
        World { hosts, rng }
    }

    fn pair(&mut self) -> (usize, usize) {
        let a = self.rng.gen_range(0..self.hosts.len());
        let mut b = self.rng.gen_range(0..self.hosts.len() - 1);
        if b >= a {
            b += 1;
        }
        (a, b)
    }

    fn id(&mut self, host: usize) -> u16 {
        let h = &mut self.hosts[host];
        h.next_id = h.next_id.wrapping_add(1);
        h.next_id
    }

    fn payload(&mut self, lo: usize, hi: usize) -> Vec<u8> {
        let n = self.rng.gen_range(lo..=hi);
        let mut p = vec![0u8; n];
        self.rng.fill(p.as_mut_slice());
        p
    }

    fn tcp(&mut self, from: usize, to: usize, sport: u16, dport: u16, flags: u16) -> PacketBuilder {
        let id = self.id(from);
        let (f, t) = (&self.hosts[from], &self.hosts[to]);
        PacketBuilder::tcp(f.mac, t.mac, f.ip, t.ip, sport, dport, flags)
            .ttl(f.ttl)
            .window(f.window)
            .identification(id)
    }

    /// One full TCP conversation: handshake, a few request/response rounds,
    /// orderly close.
    fn tcp_flow(&mut self, budget: usize) -> Vec<ParsedPacket> {
        let (c, s) = self.pair();
        let sport = self.rng.gen_range(49152..=65535);
        let dport = *SERVER_PORTS.choose(&mut self.rng).unwrap();
        let c_isn: u32 = self.rng.gen();
        let s_isn: u32 = self.rng.gen();
        let rounds = self.rng.gen_range(1..=4usize);

        let mut out = Vec::new();
        let c_mss = self.hosts[c].mss;
        let s_mss = self.hosts[s].mss;
        out.push(self.tcp(c, s, sport, dport, tcp_flags::SYN).seq(c_isn).mss(c_mss).build());
        out.push(
            self.tcp(s, c, dport, sport, tcp_flags::SYN | tcp_flags::ACK)
                .seq(s_isn)
                .ack_num(c_isn.wrapping_add(1))
                .mss(s_mss)
                .build(),
        );
        let mut c_seq = c_isn.wrapping_add(1);
        let mut s_seq = s_isn.wrapping_add(1);
        out.push(self.tcp(c, s, sport, dport, tcp_flags::ACK).seq(c_seq).ack_num(s_seq).build());

        for _ in 0..rounds {
            let req = self.payload(16, 256);
            let req_len = req.len() as u32;
            out.push(
                self.tcp(c, s, sport, dport, tcp_flags::PSH | tcp_flags::ACK)
                    .seq(c_seq)
                    .ack_num(s_seq)
                    .payload(req)
                    .build(),
            );
            c_seq = c_seq.wrapping_add(req_len);
            let resp = self.payload(32, 900);
            let resp_len = resp.len() as u32;
            out.push(
                self.tcp(s, c, dport, sport, tcp_flags::PSH | tcp_flags::ACK)
                    .seq(s_seq)
                    .ack_num(c_seq)
                    .payload(resp)
                    .build(),
            );
            s_seq = s_seq.wrapping_add(resp_len);
            out.push(self.tcp(c, s, sport, dport, tcp_flags::ACK).seq(c_seq).ack_num(s_seq).build());
        }

        out.push(
            self.tcp(c, s, sport, dport, tcp_flags::FIN | tcp_flags::ACK)
                .seq(c_seq)
                .ack_num(s_seq)
                .build(),
        );
        out.push(
            self.tcp(s, c, dport, sport, tcp_flags::FIN | tcp_flags::ACK)
                .seq(s_seq)
                .ack_num(c_seq.wrapping_add(1))
                .build(),
        );
        out.push(
            self.tcp(c, s, sport, dport, tcp_flags::ACK)
                .seq(c_seq.wrapping_add(1))
                .ack_num(s_seq.wrapping_add(1))
                .build(),
        );
        out.truncate(budget);
        out
    }

    fn udp_flow(&mut self, budget: usize) -> Vec<ParsedPacket> {
        let (c, s) = self.pair();
        let sport = self.rng.gen_range(49152..=65535);
        let query = self.payload(20, 64);
        let response = self.payload(40, 300);
        let id_q = self.id(c);
        let id_r = self.id(s);
        let (ch, sh) = (&self.hosts[c], &self.hosts[s]);
        let mut out = vec![
            PacketBuilder::udp(ch.mac, sh.mac, ch.ip, sh.ip, sport, 53)
                .ttl(ch.ttl)
                .identification(id_q)
                .payload(query)
                .build(),
            PacketBuilder::udp(sh.mac, ch.mac, sh.ip, ch.ip, 53, sport)
                .ttl(sh.ttl)
                .identification(id_r)
                .payload(response)
                .build(),
        ];
        out.truncate(budget);
        out
    }

    fn icmp_flow(&mut self, budget: usize) -> Vec<ParsedPacket> {
        let (a, b) = self.pair();
        let body = self.payload(32, 56);
        let mut out = Vec::new();
        for (from, to, icmp_type) in [(a, b, 8u8), (b, a, 0u8)] {
            let id = self.id(from);
            let (f, t) = (&self.hosts[from], &self.hosts[to]);
            out.push(
                PacketBuilder::icmp(f.mac, t.mac, f.ip, t.ip, icmp_type, 0)
                    .ttl(f.ttl)
                    .identification(id)
                    .payload(body.clone())
                    .build(),
            );
        }
        out.truncate(budget);
        out
    }
}

/// Generates exactly `profile.packets` packets spanning `profile.duration`
/// seconds. Packets arrive flow by flow with jittered spacing.
pub fn synthesize(profile: &BackgroundProfile) -> Vec<ParsedPacket> {
    let mut world = World::new(profile);
    let mut packets: Vec<ParsedPacket> = Vec::with_capacity(profile.packets);
    while packets.len() < profile.packets {
        let budget = profile.packets - packets.len();
        let flow = match world.rng.gen_range(0..10) {
            0..=6 => world.tcp_flow(budget),
            7..=8 => world.udp_flow(budget),
            _ => world.icmp_flow(budget),
        };
        packets.extend(flow);
    }

    // jittered but strictly ordered timestamps across the span
    let n = packets.len();
    let span_micros = (profile.duration * 1e6) as u64;
    for (i, pkt) in packets.iter_mut().enumerate() {
        let base = if n > 1 {
            span_micros as u128 * i as u128 / (n as u128 - 1)
        } else {
            0
        } as u64;
        let slot = span_micros / n.max(1) as u64;
        let jitter = if slot > 1 && i > 0 && i + 1 < n {
            world.rng.gen_range(0..slot / 2)
        } else {
            0
        };
        pkt.ts = Timestamp(profile.start.0 + base.saturating_sub(jitter));
    }
    packets.sort_by_key(|p| p.ts);
    packets
}

/// Synthesizes and writes a capture in one step.
pub fn write_background(path: &Path, profile: &BackgroundProfile) -> Result<()> {
    let mut writer = PcapWriter::create(path, &CaptureMeta::default())?;
    for pkt in synthesize(profile) {
        writer.write_record(&pkt.to_record())?;
    }
    writer.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcap::{parse_frame, serialize_packet};

    #[test]
    fn synthesis_is_deterministic_and_sized() {
        let profile = BackgroundProfile {
            packets: 500,
            ..Default::default()
        };
        let a = synthesize(&profile);
        let b = synthesize(&profile);
        assert_eq!(a.len(), 500);
        assert_eq!(a, b);
        let mut last = Timestamp(0);
        for p in &a {
            assert!(p.ts >= last);
            last = p.ts;
        }
        assert_eq!(a.first().unwrap().ts, profile.start);
    }

    #[test]
    fn different_seeds_differ() {
        let a = synthesize(&BackgroundProfile { packets: 100, ..Default::default() });
        let b = synthesize(&BackgroundProfile { packets: 100, seed: 1, ..Default::default() });
        assert_ne!(a, b);
    }

    #[test]
    fn synthesized_packets_round_trip() {
        let pkts = synthesize(&BackgroundProfile { packets: 300, ..Default::default() });
        for pkt in &pkts {
            let bytes = serialize_packet(pkt, true);
            let parsed = parse_frame(&bytes).unwrap();
            assert_eq!(serialize_packet(&parsed, false), bytes);
        }
    }

    #[test]
    fn conversations_open_server_ports() {
        let pkts = synthesize(&BackgroundProfile { packets: 400, ..Default::default() });
        let syn_acks = pkts
            .iter()
            .filter_map(|p| p.tcp())
            .filter(|t| t.is_syn_ack())
            .count();
        assert!(syn_acks > 0);
    }
}
