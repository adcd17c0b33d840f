//! RFC 1071 internet checksum.
//!
//! Data is summed as 16-bit big-endian words in ones' complement; an odd
//! trailing byte is padded with zero on the right. The checksum is the
//! complement of the folded sum, so verifying a header that already carries
//! its checksum yields zero.

use std::net::Ipv4Addr;

/// Ones' complement sum of `data` as 16-bit words, not yet folded.
fn sum_words(data: &[u8]) -> u32 {
    let mut sum = 0u32;
    let mut chunks = data.chunks_exact(2);
    for w in &mut chunks {
        sum += u32::from(u16::from_be_bytes([w[0], w[1]]));
    }
    if let [last] = chunks.remainder() {
        sum += u32::from(*last) << 8;
    }
    sum
}

fn fold(mut sum: u32) -> u16 {
    while sum >> 16 != 0 {
        sum = (sum & 0xFFFF) + (sum >> 16);
    }
    sum as u16
}

/// Checksum of a byte sequence. The empty sequence yields `0xFFFF`.
pub fn internet_checksum(data: &[u8]) -> u16 {
    !fold(sum_words(data))
}

/// TCP/UDP checksum over the IPv4 pseudo header plus the transport segment.
///
/// `segment` is the transport header and payload with its checksum field
/// zeroed. The pseudo header carries the addresses, the protocol number and
/// the segment length.
pub fn transport_checksum(src: Ipv4Addr, dst: Ipv4Addr, protocol: u8, segment: &[u8]) -> u16 {
    let mut pseudo = [0u8; 12];
    pseudo[..4].copy_from_slice(&src.octets());
    pseudo[4..8].copy_from_slice(&dst.octets());
    pseudo[9] = protocol;
    pseudo[10..12].copy_from_slice(&(segment.len() as u16).to_be_bytes());
    !fold(sum_words(&pseudo) + sum_words(segment))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rfc_worked_example() {
        let data = [0x00, 0x01, 0xF2, 0x03, 0xF4, 0xF5, 0xF6, 0xF7];
        assert_eq!(internet_checksum(&data), 0x220D);
    }

    #[test]
    fn empty_input() {
        assert_eq!(internet_checksum(&[]), 0xFFFF);
    }

    #[test]
    fn odd_length_pads_low_byte() {
        // 0x0100 padded from a single 0x01 byte
        assert_eq!(internet_checksum(&[0x01]), !0x0100);
    }

    #[test]
    fn header_with_embedded_checksum_sums_to_zero() {
        let mut header = vec![0x45, 0x00, 0x00, 0x28, 0x1c, 0x46, 0x40, 0x00, 0x40, 0x06];
        header.extend_from_slice(&[0x00, 0x00]); // checksum slot
        header.extend_from_slice(&[10, 0, 0, 1, 10, 0, 0, 2]);
        let ck = internet_checksum(&header);
        header[10..12].copy_from_slice(&ck.to_be_bytes());
        assert_eq!(fold(sum_words(&header)), 0xFFFF);
    }
}
