//! Ethernet II / IPv4 / TCP / UDP / ICMP codec.
//!
//! Parsing keeps every byte it saw: raw option bytes, the raw
//! offset/reserved/flags word, Ethernet padding after the IP datagram. An
//! unmodified packet re-serializes to exactly the input bytes. Generated
//! packets serialize with lengths and checksums recomputed.

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::pcap::checksum::{internet_checksum, transport_checksum};
use crate::pcap::format::{MagicVariant, PacketRecord};
use crate::pcap::{PcapError, Result};
use crate::time::Timestamp;

pub const ETHERTYPE_IPV4: u16 = 0x0800;
pub const PROTO_ICMP: u8 = 1;
pub const PROTO_TCP: u8 = 6;
pub const PROTO_UDP: u8 = 17;

/// TCP flag bits as laid out in the low nine bits of the
/// offset/reserved/flags word.
pub mod tcp_flags {
    pub const FIN: u16 = 0x001;
    pub const SYN: u16 = 0x002;
    pub const RST: u16 = 0x004;
    pub const PSH: u16 = 0x008;
    pub const ACK: u16 = 0x010;
    pub const URG: u16 = 0x020;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MacAddr(pub [u8; 6]);

impl MacAddr {
    pub const ZERO: MacAddr = MacAddr([0; 6]);

    /// True when the locally administered bit is set.
    pub fn is_locally_administered(&self) -> bool {
        self.0[0] & 0x02 != 0
    }
}

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            b[0], b[1], b[2], b[3], b[4], b[5]
        )
    }
}

impl FromStr for MacAddr {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 6 {
            return Err(format!("expected six colon-separated octets, got {s:?}"));
        }
        let mut b = [0u8; 6];
        for (i, p) in parts.iter().enumerate() {
            b[i] = u8::from_str_radix(p, 16).map_err(|_| format!("bad MAC octet {p:?}"))?;
        }
        Ok(MacAddr(b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EthernetHeader {
    pub dst: MacAddr,
    pub src: MacAddr,
    pub ethertype: u16,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ipv4Header {
    pub tos: u8,
    /// Declared datagram length; on truncated captures this can exceed the
    /// bytes actually present.
    pub total_len: u16,
    pub identification: u16,
    /// Raw flags/fragment-offset word.
    pub flags_frag: u16,
    pub ttl: u8,
    pub protocol: u8,
    pub checksum: u16,
    pub src: Ipv4Addr,
    pub dst: Ipv4Addr,
    /// Raw option bytes; length is a multiple of four.
    pub options: Vec<u8>,
}

impl Ipv4Header {
    pub fn header_len(&self) -> usize {
        20 + self.options.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TcpHeader {
    pub src_port: u16,
    pub dst_port: u16,
    pub seq: u32,
    pub ack: u32,
    /// Raw data-offset / reserved / flags word.
    pub offset_flags: u16,
    pub window: u16,
    pub checksum: u16,
    pub urgent: u16,
    /// Raw option bytes.
    pub options: Vec<u8>,
}

impl TcpHeader {
    pub fn header_len(&self) -> usize {
        20 + self.options.len()
    }

    pub fn flags(&self) -> u16 {
        self.offset_flags & 0x01FF
    }

    pub fn has(&self, flag: u16) -> bool {
        self.flags() & flag != 0
    }

    pub fn is_syn_only(&self) -> bool {
        self.has(tcp_flags::SYN) && !self.has(tcp_flags::ACK)
    }

    pub fn is_syn_ack(&self) -> bool {
        self.has(tcp_flags::SYN) && self.has(tcp_flags::ACK)
    }

    /// MSS from a kind-2 option, if present and well formed.
    pub fn mss(&self) -> Option<u16> {
        let mut opts = &self.options[..];
        while let [kind, rest @ ..] = opts {
            match kind {
                0 => return None,          // end of options
                1 => opts = rest,          // NOP
                2 => {
                    if let [4, hi, lo, ..] = rest {
                        return Some(u16::from_be_bytes([*hi, *lo]));
                    }
                    return None;
                }
                _ => {
                    let [len, ..] = rest else { return None };
                    let skip = (*len as usize).max(2) - 2;
                    if rest.len() < 1 + skip {
                        return None;
                    }
                    opts = &rest[1 + skip..];
                }
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UdpHeader {
    pub src_port: u16,
    pub dst_port: u16,
    /// Declared UDP length (header plus payload).
    pub length: u16,
    pub checksum: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IcmpHeader {
    pub icmp_type: u8,
    pub code: u8,
    pub checksum: u16,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transport {
    Tcp(TcpHeader),
    Udp(UdpHeader),
    Icmp(IcmpHeader),
    /// Non-TCP/UDP/ICMP protocol, non-IPv4 frame, or a header too mangled to
    /// decode; the payload holds everything after the deepest parsed header.
    Opaque,
}

impl Transport {
    pub fn tcp(&self) -> Option<&TcpHeader> {
        match self {
            Transport::Tcp(t) => Some(t),
            _ => None,
        }
    }

    pub fn udp(&self) -> Option<&UdpHeader> {
        match self {
            Transport::Udp(u) => Some(u),
            _ => None,
        }
    }
}

/// A decoded frame plus its capture timestamp.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedPacket {
    pub ts: Timestamp,
    /// Original wire length from the record header.
    pub orig_len: u32,
    /// True when the capture holds fewer bytes than were on the wire.
    pub truncated: bool,
    pub eth: EthernetHeader,
    pub ipv4: Option<Ipv4Header>,
    pub transport: Transport,
    /// Bytes after the deepest parsed header.
    pub payload: Vec<u8>,
    /// Ethernet padding past the end of the IP datagram.
    pub trailer: Vec<u8>,
}

impl ParsedPacket {
    pub fn tcp(&self) -> Option<&TcpHeader> {
        self.transport.tcp()
    }

    pub fn udp(&self) -> Option<&UdpHeader> {
        self.transport.udp()
    }

    /// Serializes and wraps into a capture record at this packet's
    /// timestamp, recomputing lengths and checksums.
    pub fn to_record(&self) -> PacketRecord {
        PacketRecord::full(self.ts, serialize_packet(self, true))
    }

    /// Checks the TCP checksum against a fresh computation. `None` when the
    /// packet is not TCP or the capture is truncated (the covered bytes are
    /// not all present).
    pub fn verify_tcp_checksum(&self) -> Option<bool> {
        let (ip, tcp) = match (&self.ipv4, &self.transport) {
            (Some(ip), Transport::Tcp(tcp)) => (ip, tcp),
            _ => return None,
        };
        if self.truncated {
            return None;
        }
        let mut segment = Vec::with_capacity(tcp.header_len() + self.payload.len());
        encode_tcp(&mut segment, tcp, 0);
        segment.extend_from_slice(&self.payload);
        let want = transport_checksum(ip.src, ip.dst, ip.protocol, &segment);
        Some(want == tcp.checksum)
    }
}

/// Decodes one capture record.
pub fn parse_packet(rec: &PacketRecord, magic: MagicVariant) -> Result<ParsedPacket> {
    let frame = parse_frame(&rec.data)?;
    Ok(ParsedPacket {
        ts: rec.timestamp(magic),
        orig_len: rec.orig_len,
        truncated: (rec.data.len() as u32) < rec.orig_len,
        ..frame
    })
}

/// Decodes a raw Ethernet frame. Timestamp and length fields are zeroed;
/// [`parse_packet`] fills them from the record header.
pub fn parse_frame(data: &[u8]) -> Result<ParsedPacket> {
    if data.len() < 14 {
        return Err(PcapError::TruncatedHeader {
            layer: "ethernet",
            len: data.len(),
        });
    }
    let eth = EthernetHeader {
        dst: MacAddr(data[0..6].try_into().unwrap()),
        src: MacAddr(data[6..12].try_into().unwrap()),
        ethertype: u16::from_be_bytes([data[12], data[13]]),
    };
    let rest = &data[14..];

    let mut pkt = ParsedPacket {
        ts: Timestamp(0),
        orig_len: data.len() as u32,
        truncated: false,
        eth,
        ipv4: None,
        transport: Transport::Opaque,
        payload: Vec::new(),
        trailer: Vec::new(),
    };

    if eth.ethertype != ETHERTYPE_IPV4 {
        pkt.payload = rest.to_vec();
        return Ok(pkt);
    }
    if rest.len() < 20 {
        return Err(PcapError::TruncatedHeader {
            layer: "ipv4",
            len: rest.len(),
        });
    }
    let version = rest[0] >> 4;
    if version != 4 {
        // ethertype said IPv4 but the header disagrees; keep it opaque
        pkt.payload = rest.to_vec();
        return Ok(pkt);
    }
    let ihl = (rest[0] & 0x0F) as usize * 4;
    if ihl < 20 {
        return Err(PcapError::FieldOverflow(format!(
            "ipv4 header length {ihl} below minimum"
        )));
    }
    if rest.len() < ihl {
        return Err(PcapError::TruncatedHeader {
            layer: "ipv4 options",
            len: rest.len(),
        });
    }
    let total_len = u16::from_be_bytes([rest[2], rest[3]]) as usize;
    if total_len < ihl {
        return Err(PcapError::FieldOverflow(format!(
            "ipv4 total length {total_len} smaller than header {ihl}"
        )));
    }
    let ip = Ipv4Header {
        tos: rest[1],
        total_len: total_len as u16,
        identification: u16::from_be_bytes([rest[4], rest[5]]),
        flags_frag: u16::from_be_bytes([rest[6], rest[7]]),
        ttl: rest[8],
        protocol: rest[9],
        checksum: u16::from_be_bytes([rest[10], rest[11]]),
        src: Ipv4Addr::new(rest[12], rest[13], rest[14], rest[15]),
        dst: Ipv4Addr::new(rest[16], rest[17], rest[18], rest[19]),
        options: rest[20..ihl].to_vec(),
    };

    // Datagram body is bounded by the declared total length; anything the
    // frame carries past it is Ethernet padding.
    let body_end = total_len.min(rest.len());
    let body = &rest[ihl..body_end];
    pkt.trailer = rest[body_end..].to_vec();
    let protocol = ip.protocol;
    pkt.ipv4 = Some(ip);

    match protocol {
        PROTO_TCP if body.len() >= 20 => {
            let offset = (body[12] >> 4) as usize * 4;
            if offset < 20 || body.len() < offset {
                pkt.payload = body.to_vec();
                return Ok(pkt);
            }
            let tcp = TcpHeader {
                src_port: u16::from_be_bytes([body[0], body[1]]),
                dst_port: u16::from_be_bytes([body[2], body[3]]),
                seq: u32::from_be_bytes([body[4], body[5], body[6], body[7]]),
                ack: u32::from_be_bytes([body[8], body[9], body[10], body[11]]),
                offset_flags: u16::from_be_bytes([body[12], body[13]]),
                window: u16::from_be_bytes([body[14], body[15]]),
                checksum: u16::from_be_bytes([body[16], body[17]]),
                urgent: u16::from_be_bytes([body[18], body[19]]),
                options: body[20..offset].to_vec(),
            };
            pkt.payload = body[offset..].to_vec();
            pkt.transport = Transport::Tcp(tcp);
        }
        PROTO_UDP if body.len() >= 8 => {
            let udp = UdpHeader {
                src_port: u16::from_be_bytes([body[0], body[1]]),
                dst_port: u16::from_be_bytes([body[2], body[3]]),
                length: u16::from_be_bytes([body[4], body[5]]),
                checksum: u16::from_be_bytes([body[6], body[7]]),
            };
            pkt.payload = body[8..].to_vec();
            pkt.transport = Transport::Udp(udp);
        }
        PROTO_ICMP if body.len() >= 4 => {
            let icmp = IcmpHeader {
                icmp_type: body[0],
                code: body[1],
                checksum: u16::from_be_bytes([body[2], body[3]]),
            };
            pkt.payload = body[4..].to_vec();
            pkt.transport = Transport::Icmp(icmp);
        }
        _ => {
            pkt.payload = body.to_vec();
        }
    }
    Ok(pkt)
}

fn encode_tcp(out: &mut Vec<u8>, tcp: &TcpHeader, checksum: u16) {
    out.extend_from_slice(&tcp.src_port.to_be_bytes());
    out.extend_from_slice(&tcp.dst_port.to_be_bytes());
    out.extend_from_slice(&tcp.seq.to_be_bytes());
    out.extend_from_slice(&tcp.ack.to_be_bytes());
    out.extend_from_slice(&tcp.offset_flags.to_be_bytes());
    out.extend_from_slice(&tcp.window.to_be_bytes());
    out.extend_from_slice(&checksum.to_be_bytes());
    out.extend_from_slice(&tcp.urgent.to_be_bytes());
    out.extend_from_slice(&tcp.options);
}

/// Encodes a packet back to frame bytes.
///
/// With `recompute` false every stored field is written verbatim, so an
/// unmodified parse reproduces its input exactly. With `recompute` true the
/// length fields, the data offset and all checksums are derived fresh, which
/// is what generated and rewritten packets need.
pub fn serialize_packet(pkt: &ParsedPacket, recompute: bool) -> Vec<u8> {
    let mut out = Vec::with_capacity(
        14 + pkt
            .ipv4
            .as_ref()
            .map_or(pkt.payload.len(), |ip| ip.header_len() + 40 + pkt.payload.len())
            + pkt.trailer.len(),
    );
    out.extend_from_slice(&pkt.eth.dst.0);
    out.extend_from_slice(&pkt.eth.src.0);
    out.extend_from_slice(&pkt.eth.ethertype.to_be_bytes());

    let Some(ip) = &pkt.ipv4 else {
        out.extend_from_slice(&pkt.payload);
        out.extend_from_slice(&pkt.trailer);
        return out;
    };

    // transport segment first so the IP total length can be derived
    let mut segment = Vec::new();
    match &pkt.transport {
        Transport::Tcp(tcp) => {
            let offset_flags = if recompute {
                let offset = (5 + tcp.options.len() / 4) as u16;
                (offset << 12) | (tcp.offset_flags & 0x0FFF)
            } else {
                tcp.offset_flags
            };
            let patched = TcpHeader {
                offset_flags,
                ..tcp.clone()
            };
            let checksum = if recompute {
                let mut tmp = Vec::with_capacity(patched.header_len() + pkt.payload.len());
                encode_tcp(&mut tmp, &patched, 0);
                tmp.extend_from_slice(&pkt.payload);
                transport_checksum(ip.src, ip.dst, PROTO_TCP, &tmp)
            } else {
                tcp.checksum
            };
            encode_tcp(&mut segment, &patched, checksum);
            segment.extend_from_slice(&pkt.payload);
        }
        Transport::Udp(udp) => {
            let length = if recompute {
                (8 + pkt.payload.len()) as u16
            } else {
                udp.length
            };
            segment.extend_from_slice(&udp.src_port.to_be_bytes());
            segment.extend_from_slice(&udp.dst_port.to_be_bytes());
            segment.extend_from_slice(&length.to_be_bytes());
            segment.extend_from_slice(&[0, 0]);
            segment.extend_from_slice(&pkt.payload);
            let checksum = if recompute {
                // zero means "no checksum" on the wire, so an all-zero sum
                // is transmitted as its complement
                match transport_checksum(ip.src, ip.dst, PROTO_UDP, &segment) {
                    0 => 0xFFFF,
                    c => c,
                }
            } else {
                udp.checksum
            };
            segment[6..8].copy_from_slice(&checksum.to_be_bytes());
        }
        Transport::Icmp(icmp) => {
            segment.push(icmp.icmp_type);
            segment.push(icmp.code);
            segment.extend_from_slice(&[0, 0]);
            segment.extend_from_slice(&pkt.payload);
            let checksum = if recompute {
                internet_checksum(&segment)
            } else {
                icmp.checksum
            };
            segment[2..4].copy_from_slice(&checksum.to_be_bytes());
        }
        Transport::Opaque => {
            segment.extend_from_slice(&pkt.payload);
        }
    }

    let total_len = if recompute {
        (ip.header_len() + segment.len()) as u16
    } else {
        ip.total_len
    };
    let ihl = (5 + ip.options.len() / 4) as u8;
    let mut header = Vec::with_capacity(ip.header_len());
    header.push(0x40 | ihl);
    header.push(ip.tos);
    header.extend_from_slice(&total_len.to_be_bytes());
    header.extend_from_slice(&ip.identification.to_be_bytes());
    header.extend_from_slice(&ip.flags_frag.to_be_bytes());
    header.push(ip.ttl);
    header.push(ip.protocol);
    header.extend_from_slice(&[0, 0]);
    header.extend_from_slice(&ip.src.octets());
    header.extend_from_slice(&ip.dst.octets());
    header.extend_from_slice(&ip.options);
    let ip_ck = if recompute {
        internet_checksum(&header)
    } else {
        ip.checksum
    };
    header[10..12].copy_from_slice(&ip_ck.to_be_bytes());

    out.extend_from_slice(&header);
    out.extend_from_slice(&segment);
    out.extend_from_slice(&pkt.trailer);
    out
}

/// Fluent constructor for generated packets.
///
/// Frames shorter than the 60-byte Ethernet minimum are padded with a zero
/// trailer, matching what real captures contain.
pub struct PacketBuilder {
    pkt: ParsedPacket,
}

impl PacketBuilder {
    fn base(
        src_mac: MacAddr,
        dst_mac: MacAddr,
        src_ip: Ipv4Addr,
        dst_ip: Ipv4Addr,
        protocol: u8,
        transport: Transport,
    ) -> Self {
        PacketBuilder {
            pkt: ParsedPacket {
                ts: Timestamp(0),
                orig_len: 0,
                truncated: false,
                eth: EthernetHeader {
                    dst: dst_mac,
                    src: src_mac,
                    ethertype: ETHERTYPE_IPV4,
                },
                ipv4: Some(Ipv4Header {
                    tos: 0,
                    total_len: 0,
                    identification: 0,
                    flags_frag: 0x4000, // don't fragment
                    ttl: 64,
                    protocol,
                    checksum: 0,
                    src: src_ip,
                    dst: dst_ip,
                    options: Vec::new(),
                }),
                transport,
                payload: Vec::new(),
                trailer: Vec::new(),
            },
        }
    }

    pub fn tcp(
        src_mac: MacAddr,
        dst_mac: MacAddr,
        src_ip: Ipv4Addr,
        dst_ip: Ipv4Addr,
        src_port: u16,
        dst_port: u16,
        flags: u16,
    ) -> Self {
        let tcp = TcpHeader {
            src_port,
            dst_port,
            seq: 0,
            ack: 0,
            offset_flags: (5 << 12) | (flags & 0x01FF),
            window: 8192,
            checksum: 0,
            urgent: 0,
            options: Vec::new(),
        };
        Self::base(src_mac, dst_mac, src_ip, dst_ip, PROTO_TCP, Transport::Tcp(tcp))
    }

    pub fn udp(
        src_mac: MacAddr,
        dst_mac: MacAddr,
        src_ip: Ipv4Addr,
        dst_ip: Ipv4Addr,
        src_port: u16,
        dst_port: u16,
    ) -> Self {
        let udp = UdpHeader {
            src_port,
            dst_port,
            length: 0,
            checksum: 0,
        };
        Self::base(src_mac, dst_mac, src_ip, dst_ip, PROTO_UDP, Transport::Udp(udp))
    }

    pub fn icmp(
        src_mac: MacAddr,
        dst_mac: MacAddr,
        src_ip: Ipv4Addr,
        dst_ip: Ipv4Addr,
        icmp_type: u8,
        code: u8,
    ) -> Self {
        let icmp = IcmpHeader {
            icmp_type,
            code,
            checksum: 0,
        };
        Self::base(src_mac, dst_mac, src_ip, dst_ip, PROTO_ICMP, Transport::Icmp(icmp))
    }

    pub fn ts(mut self, ts: Timestamp) -> Self {
        self.pkt.ts = ts;
        self
    }

    pub fn ttl(mut self, ttl: u8) -> Self {
        self.pkt.ipv4.as_mut().unwrap().ttl = ttl;
        self
    }

    pub fn tos(mut self, tos: u8) -> Self {
        self.pkt.ipv4.as_mut().unwrap().tos = tos;
        self
    }

    pub fn identification(mut self, id: u16) -> Self {
        self.pkt.ipv4.as_mut().unwrap().identification = id;
        self
    }

    fn tcp_mut(&mut self) -> &mut TcpHeader {
        match &mut self.pkt.transport {
            Transport::Tcp(t) => t,
            _ => panic!("not a TCP builder"),
        }
    }

    pub fn seq(mut self, seq: u32) -> Self {
        self.tcp_mut().seq = seq;
        self
    }

    pub fn ack_num(mut self, ack: u32) -> Self {
        self.tcp_mut().ack = ack;
        self
    }

    pub fn window(mut self, window: u16) -> Self {
        self.tcp_mut().window = window;
        self
    }

    /// Appends a kind-2 MSS option.
    pub fn mss(mut self, mss: u16) -> Self {
        let tcp = self.tcp_mut();
        tcp.options.extend_from_slice(&[2, 4]);
        tcp.options.extend_from_slice(&mss.to_be_bytes());
        self
    }

    pub fn payload(mut self, payload: Vec<u8>) -> Self {
        self.pkt.payload = payload;
        self
    }

    pub fn build(mut self) -> ParsedPacket {
        let seg_len = match &self.pkt.transport {
            Transport::Tcp(t) => t.header_len(),
            Transport::Udp(_) => 8,
            Transport::Icmp(_) => 4,
            Transport::Opaque => 0,
        } + self.pkt.payload.len();
        let frame_len = 14 + self.pkt.ipv4.as_ref().map_or(0, |ip| ip.header_len()) + seg_len;
        if frame_len < 60 {
            self.pkt.trailer = vec![0; 60 - frame_len];
        }
        // serialize once and parse back so every derived field (lengths,
        // data offset, checksums) matches the wire form exactly
        let bytes = serialize_packet(&self.pkt, true);
        let mut pkt = parse_frame(&bytes).expect("built frame is parseable");
        pkt.ts = self.pkt.ts;
        pkt
    }
}
