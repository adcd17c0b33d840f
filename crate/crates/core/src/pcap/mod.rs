//! Classic PCAP container I/O and packet header codecs.

pub mod checksum;
pub mod format;
pub mod packet;

pub use format::{
    read_pcap, write_pcap, CaptureMeta, MagicVariant, PacketRecord, PcapReader, PcapWriter,
};
pub use packet::{
    parse_frame, parse_packet, serialize_packet, EthernetHeader, Ipv4Header, MacAddr,
    PacketBuilder, ParsedPacket, TcpHeader, Transport, UdpHeader,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PcapError {
    #[error("bad magic number {0:#010x}, not a classic pcap file")]
    BadMagic(u32),
    #[error("truncated record: {0}")]
    TruncatedRecord(String),
    #[error("unsupported link type {0}, only Ethernet (1) is handled")]
    UnsupportedLinkType(u32),
    #[error("frame too short for {layer} header: {len} bytes")]
    TruncatedHeader { layer: &'static str, len: usize },
    #[error("field overflow: {0}")]
    FieldOverflow(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PcapError>;
