//! Classic PCAP container: 24-byte global header followed by length-prefixed
//! records. Both endiannesses and both timestamp resolutions are read;
//! output is always canonical microsecond little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::pcap::{PcapError, Result};
use crate::time::Timestamp;

/// Microsecond magic, as written by libpcap.
pub const MAGIC_MICROS: u32 = 0xa1b2_c3d4;
/// Nanosecond magic.
pub const MAGIC_NANOS: u32 = 0xa1b2_3c4d;

const GLOBAL_HEADER_LEN: usize = 24;
const RECORD_HEADER_LEN: usize = 16;
/// Ethernet, the only link layer in scope.
pub const LINKTYPE_ETHERNET: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MagicVariant {
    MicrosecondLe,
    MicrosecondBe,
    NanosecondLe,
    NanosecondBe,
}

impl MagicVariant {
    pub fn is_nanosecond(&self) -> bool {
        matches!(self, MagicVariant::NanosecondLe | MagicVariant::NanosecondBe)
    }

    pub fn is_big_endian(&self) -> bool {
        matches!(self, MagicVariant::MicrosecondBe | MagicVariant::NanosecondBe)
    }

    fn from_bytes(b: [u8; 4]) -> Result<Self> {
        match b {
            [0xd4, 0xc3, 0xb2, 0xa1] => Ok(MagicVariant::MicrosecondLe),
            [0xa1, 0xb2, 0xc3, 0xd4] => Ok(MagicVariant::MicrosecondBe),
            [0x4d, 0x3c, 0xb2, 0xa1] => Ok(MagicVariant::NanosecondLe),
            [0xa1, 0xb2, 0x3c, 0x4d] => Ok(MagicVariant::NanosecondBe),
            _ => Err(PcapError::BadMagic(u32::from_le_bytes(b))),
        }
    }
}

/// Parsed global header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaptureMeta {
    pub magic: MagicVariant,
    pub version_major: u16,
    pub version_minor: u16,
    pub snaplen: u32,
    pub link_type: u32,
}

impl CaptureMeta {
    /// Meta for generated captures: microsecond little-endian Ethernet.
    pub fn canonical(snaplen: u32) -> Self {
        CaptureMeta {
            magic: MagicVariant::MicrosecondLe,
            version_major: 2,
            version_minor: 4,
            snaplen,
            link_type: LINKTYPE_ETHERNET,
        }
    }
}

impl Default for CaptureMeta {
    fn default() -> Self {
        CaptureMeta::canonical(65535)
    }
}

/// One captured frame with its record header fields.
///
/// `ts_frac` is in the unit of the file it came from (micro or nanoseconds);
/// `data.len()` is the captured length, `orig_len` the original wire length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketRecord {
    pub ts_secs: u32,
    pub ts_frac: u32,
    pub orig_len: u32,
    pub data: Vec<u8>,
}

impl PacketRecord {
    /// New record at microsecond resolution with captured == original length.
    pub fn full(ts: Timestamp, data: Vec<u8>) -> Self {
        PacketRecord {
            ts_secs: ts.secs(),
            ts_frac: ts.subsec_micros(),
            orig_len: data.len() as u32,
            data,
        }
    }

    /// Capture timestamp, truncating nanosecond fractions toward zero.
    pub fn timestamp(&self, magic: MagicVariant) -> Timestamp {
        let micros = if magic.is_nanosecond() {
            self.ts_frac / 1000
        } else {
            self.ts_frac
        };
        Timestamp::from_secs_micros(self.ts_secs, micros)
    }
}

/// Streaming reader; memory use is bounded by the largest single record.
pub struct PcapReader<R: Read> {
    inner: R,
    meta: CaptureMeta,
}

impl PcapReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self> {
        PcapReader::new(BufReader::new(File::open(path)?))
    }
}

impl<R: Read> PcapReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut hdr = [0u8; GLOBAL_HEADER_LEN];
        inner.read_exact(&mut hdr).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                PcapError::TruncatedRecord("global header shorter than 24 bytes".into())
            } else {
                PcapError::Io(e)
            }
        })?;
        let magic = MagicVariant::from_bytes([hdr[0], hdr[1], hdr[2], hdr[3]])?;
        let u16_at = |i: usize| {
            let b = [hdr[i], hdr[i + 1]];
            if magic.is_big_endian() {
                u16::from_be_bytes(b)
            } else {
                u16::from_le_bytes(b)
            }
        };
        let u32_at = |i: usize| {
            let b = [hdr[i], hdr[i + 1], hdr[i + 2], hdr[i + 3]];
            if magic.is_big_endian() {
                u32::from_be_bytes(b)
            } else {
                u32::from_le_bytes(b)
            }
        };
        let meta = CaptureMeta {
            magic,
            version_major: u16_at(4),
            version_minor: u16_at(6),
            snaplen: u32_at(16),
            link_type: u32_at(20),
        };
        if meta.link_type != LINKTYPE_ETHERNET {
            return Err(PcapError::UnsupportedLinkType(meta.link_type));
        }
        Ok(PcapReader { inner, meta })
    }

    pub fn meta(&self) -> CaptureMeta {
        self.meta
    }

    fn read_record(&mut self) -> Result<Option<PacketRecord>> {
        let mut hdr = [0u8; RECORD_HEADER_LEN];
        let mut filled = 0;
        while filled < RECORD_HEADER_LEN {
            match self.inner.read(&mut hdr[filled..])? {
                0 => {
                    if filled == 0 {
                        return Ok(None); // clean end of file
                    }
                    return Err(PcapError::TruncatedRecord(format!(
                        "record header cut off after {filled} bytes"
                    )));
                }
                n => filled += n,
            }
        }
        let field = |i: usize| {
            let b = [hdr[i], hdr[i + 1], hdr[i + 2], hdr[i + 3]];
            if self.meta.magic.is_big_endian() {
                u32::from_be_bytes(b)
            } else {
                u32::from_le_bytes(b)
            }
        };
        let (ts_secs, ts_frac, incl_len, orig_len) = (field(0), field(4), field(8), field(12));
        // Cap the initial allocation so a corrupt length cannot balloon
        // memory; read_to_end stops at EOF and the count check catches it.
        let mut data = Vec::with_capacity(incl_len.min(1 << 20) as usize);
        let got = (&mut self.inner)
            .take(incl_len as u64)
            .read_to_end(&mut data)?;
        if got != incl_len as usize {
            return Err(PcapError::TruncatedRecord(format!(
                "record body declared {incl_len} bytes, file had {got}"
            )));
        }
        Ok(Some(PacketRecord {
            ts_secs,
            ts_frac,
            orig_len,
            data,
        }))
    }
}

impl<R: Read> Iterator for PcapReader<R> {
    type Item = Result<PacketRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        self.read_record().transpose()
    }
}

/// Writer producing canonical microsecond little-endian output.
///
/// Nanosecond input records are converted by truncating the fractional part
/// toward zero; all other record bytes pass through unchanged.
pub struct PcapWriter<W: Write> {
    inner: W,
    input_magic: MagicVariant,
}

impl PcapWriter<BufWriter<File>> {
    pub fn create(path: &Path, meta: &CaptureMeta) -> Result<Self> {
        PcapWriter::new(BufWriter::new(File::create(path)?), meta)
    }
}

impl<W: Write> PcapWriter<W> {
    pub fn new(mut inner: W, meta: &CaptureMeta) -> Result<Self> {
        let mut hdr = [0u8; GLOBAL_HEADER_LEN];
        hdr[..4].copy_from_slice(&MAGIC_MICROS.to_le_bytes());
        hdr[4..6].copy_from_slice(&2u16.to_le_bytes());
        hdr[6..8].copy_from_slice(&4u16.to_le_bytes());
        // thiszone and sigfigs stay zero
        hdr[16..20].copy_from_slice(&meta.snaplen.to_le_bytes());
        hdr[20..24].copy_from_slice(&LINKTYPE_ETHERNET.to_le_bytes());
        inner.write_all(&hdr)?;
        Ok(PcapWriter {
            inner,
            input_magic: meta.magic,
        })
    }

    pub fn write_record(&mut self, rec: &PacketRecord) -> Result<()> {
        let frac = if self.input_magic.is_nanosecond() {
            rec.ts_frac / 1000
        } else {
            rec.ts_frac
        };
        let mut hdr = [0u8; RECORD_HEADER_LEN];
        hdr[..4].copy_from_slice(&rec.ts_secs.to_le_bytes());
        hdr[4..8].copy_from_slice(&frac.to_le_bytes());
        hdr[8..12].copy_from_slice(&(rec.data.len() as u32).to_le_bytes());
        hdr[12..16].copy_from_slice(&rec.orig_len.to_le_bytes());
        self.inner.write_all(&hdr)?;
        self.inner.write_all(&rec.data)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Reads a whole file into memory. Convenience for small captures; large
/// files should iterate a [`PcapReader`] instead.
pub fn read_pcap(path: &Path) -> Result<(CaptureMeta, Vec<PacketRecord>)> {
    let mut reader = PcapReader::open(path)?;
    let meta = reader.meta();
    let mut records = Vec::new();
    for rec in &mut reader {
        records.push(rec?);
    }
    Ok((meta, records))
}

pub fn write_pcap<'a>(
    path: &Path,
    meta: &CaptureMeta,
    records: impl IntoIterator<Item = &'a PacketRecord>,
) -> Result<()> {
    let mut w = PcapWriter::create(path, meta)?;
    for rec in records {
        w.write_record(rec)?;
    }
    w.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn global_header(magic: [u8; 4], be: bool) -> Vec<u8> {
        let mut h = Vec::new();
        h.extend_from_slice(&magic);
        let push16 = |h: &mut Vec<u8>, v: u16| {
            h.extend_from_slice(&if be { v.to_be_bytes() } else { v.to_le_bytes() })
        };
        let push32 = |h: &mut Vec<u8>, v: u32| {
            h.extend_from_slice(&if be { v.to_be_bytes() } else { v.to_le_bytes() })
        };
        push16(&mut h, 2);
        push16(&mut h, 4);
        push32(&mut h, 0);
        push32(&mut h, 0);
        push32(&mut h, 65535);
        push32(&mut h, 1);
        h
    }

    fn zero_len_record(be: bool) -> Vec<u8> {
        let mut r = Vec::new();
        for v in [7u32, 13u32, 0u32, 0u32] {
            r.extend_from_slice(&if be { v.to_be_bytes() } else { v.to_le_bytes() });
        }
        r
    }

    #[test]
    fn microsecond_le_file() {
        let mut f = global_header([0xd4, 0xc3, 0xb2, 0xa1], false);
        f.extend(zero_len_record(false));
        let mut r = PcapReader::new(&f[..]).unwrap();
        assert_eq!(r.meta().magic, MagicVariant::MicrosecondLe);
        assert_eq!(r.meta().link_type, 1);
        assert_eq!(r.meta().snaplen, 65535);
        let rec = r.next().unwrap().unwrap();
        assert_eq!((rec.ts_secs, rec.ts_frac), (7, 13));
        assert!(r.next().is_none());
    }

    #[test]
    fn microsecond_be_file_same_content() {
        let mut f = global_header([0xa1, 0xb2, 0xc3, 0xd4], true);
        f.extend(zero_len_record(true));
        let mut r = PcapReader::new(&f[..]).unwrap();
        assert_eq!(r.meta().magic, MagicVariant::MicrosecondBe);
        assert_eq!(r.meta().snaplen, 65535);
        let rec = r.next().unwrap().unwrap();
        assert_eq!((rec.ts_secs, rec.ts_frac), (7, 13));
    }

    #[test]
    fn nanosecond_magics() {
        let f = global_header([0x4d, 0x3c, 0xb2, 0xa1], false);
        assert_eq!(
            PcapReader::new(&f[..]).unwrap().meta().magic,
            MagicVariant::NanosecondLe
        );
        let f = global_header([0xa1, 0xb2, 0x3c, 0x4d], true);
        assert_eq!(
            PcapReader::new(&f[..]).unwrap().meta().magic,
            MagicVariant::NanosecondBe
        );
    }

    #[test]
    fn bad_magic_rejected() {
        let f = global_header([0x00, 0x11, 0x22, 0x33], false);
        match PcapReader::new(&f[..]).err() {
            Some(PcapError::BadMagic(_)) => {}
            other => panic!("expected BadMagic, got {other:?}"),
        }
    }

    #[test]
    fn non_ethernet_rejected() {
        let mut f = global_header([0xd4, 0xc3, 0xb2, 0xa1], false);
        f[20..24].copy_from_slice(&101u32.to_le_bytes()); // raw IP
        match PcapReader::new(&f[..]).err() {
            Some(PcapError::UnsupportedLinkType(101)) => {}
            other => panic!("expected UnsupportedLinkType, got {other:?}"),
        }
    }

    #[test]
    fn truncated_body_reported() {
        let mut f = global_header([0xd4, 0xc3, 0xb2, 0xa1], false);
        for v in [0u32, 0, 10, 10] {
            f.extend_from_slice(&v.to_le_bytes());
        }
        f.extend_from_slice(&[1, 2, 3]); // 3 of the declared 10 bytes
        let mut r = PcapReader::new(&f[..]).unwrap();
        match r.next() {
            Some(Err(PcapError::TruncatedRecord(_))) => {}
            other => panic!("expected TruncatedRecord, got {other:?}"),
        }
    }

    #[test]
    fn truncated_record_header_reported() {
        let mut f = global_header([0xd4, 0xc3, 0xb2, 0xa1], false);
        f.extend_from_slice(&[0u8; 7]);
        let mut r = PcapReader::new(&f[..]).unwrap();
        assert!(matches!(r.next(), Some(Err(PcapError::TruncatedRecord(_)))));
    }

    #[test]
    fn nanosecond_frac_truncates_on_write() {
        let meta = CaptureMeta {
            magic: MagicVariant::NanosecondLe,
            ..CaptureMeta::default()
        };
        let rec = PacketRecord {
            ts_secs: 1,
            ts_frac: 1_999_999, // 1999.999 µs
            orig_len: 0,
            data: vec![],
        };
        let mut out = Vec::new();
        let mut w = PcapWriter::new(&mut out, &meta).unwrap();
        w.write_record(&rec).unwrap();
        let frac = u32::from_le_bytes([out[28], out[29], out[30], out[31]]);
        assert_eq!(frac, 1999);
    }

    #[test]
    fn write_then_read_round_trips_records() {
        let meta = CaptureMeta::default();
        let recs = vec![
            PacketRecord::full(Timestamp::from_secs_micros(10, 500), vec![0xAB; 60]),
            PacketRecord::full(Timestamp::from_secs_micros(11, 999_999), vec![0x01, 0x02]),
        ];
        let mut buf = Vec::new();
        {
            let mut w = PcapWriter::new(&mut buf, &meta).unwrap();
            for r in &recs {
                w.write_record(r).unwrap();
            }
        }
        let got: Vec<_> = PcapReader::new(&buf[..])
            .unwrap()
            .map(|r| r.unwrap())
            .collect();
        assert_eq!(got, recs);
    }
}
