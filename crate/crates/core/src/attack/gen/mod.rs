//! The attack generators.
//!
//! Each submodule implements one traffic shape: a `schema()` describing its
//! parameters and a `generate()` producing the labeled packet sequence. All
//! randomness flows from the attack seed through salted ChaCha streams, so
//! the same parameters always produce the same bytes.

pub mod botnet;
pub mod ftp_winaxe;
pub mod memcrashed;
pub mod portscan;
pub mod smb;
pub mod syn_flood;
pub mod template_exploit;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha224};

use crate::attack::sample::{draw, draw_or};
use crate::attack::{AttackParams, GeneratedAttack};
use crate::pcap::ParsedPacket;
use crate::stats::{Field, StatsDb};

/// Independent deterministic stream per generator facet: different salts
/// never share state, so adding draws to one facet cannot shift another.
pub(crate) fn rng_for(seed: u64, salt: &str) -> ChaCha8Rng {
    let mut hasher = Sha224::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(salt.as_bytes());
    let d = hasher.finalize();
    ChaCha8Rng::seed_from_u64(u64::from_le_bytes(d[..8].try_into().unwrap()))
}

/// Ephemeral source port from the dynamic range.
pub(crate) fn dynamic_port<R: Rng>(rng: &mut R) -> u16 {
    rng.gen_range(49152..=65535)
}

/// Service reply latency, 0.2 to 2 milliseconds.
pub(crate) fn reply_latency<R: Rng>(rng: &mut R) -> u64 {
    rng.gen_range(200..=2000)
}

/// Header field values one sending host keeps for a whole attack.
#[derive(Debug, Clone, Copy)]
pub(crate) struct HostProfile {
    pub ttl: u8,
    pub window: u16,
    /// None when the background never carried an MSS option.
    pub mss: Option<u16>,
}

impl HostProfile {
    /// Drawn from the capture-wide distributions; conventional defaults fill
    /// fields the background never populated.
    pub fn from_global<R: Rng>(db: &StatsDb, rng: &mut R) -> Self {
        HostProfile {
            ttl: draw_or(db.distribution(Field::Ttl), rng, 64) as u8,
            window: draw_or(db.distribution(Field::WindowSize), rng, 8192) as u16,
            mss: draw(db.distribution(Field::Mss), rng).map(|m| m as u16),
        }
    }

    /// Drawn from one host's own sending behavior where observed, falling
    /// back to the capture-wide tables.
    pub fn from_host<R: Rng>(db: &StatsDb, ip: std::net::Ipv4Addr, rng: &mut R) -> Self {
        let global = Self::from_global(db, rng);
        let Some(h) = db.host(ip) else { return global };
        HostProfile {
            ttl: draw(&h.ttl_sent, rng).map_or(global.ttl, |v| v as u8),
            window: draw(&h.window_sent, rng).map_or(global.window, |v| v as u16),
            mss: draw(&h.mss_sent, rng).map(|m| m as u16).or(global.mss),
        }
    }
}

/// Orders packets by timestamp (stable, so sequences laid out in causal
/// order keep it on ties) and wraps them with the label metadata.
pub(crate) fn assemble(params: &AttackParams, mut packets: Vec<ParsedPacket>) -> GeneratedAttack {
    packets.sort_by_key(|p| p.ts);
    GeneratedAttack {
        name: params.attack_name.clone(),
        packets,
        params_digest: params.digest(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn salted_streams_are_independent() {
        let mut a = rng_for(1, "x");
        let mut b = rng_for(1, "y");
        let mut a2 = rng_for(1, "x");
        assert_ne!(a.gen::<u64>(), b.gen::<u64>());
        assert_eq!(rng_for(1, "x").gen::<u64>(), a2.gen::<u64>());
    }

    #[test]
    fn dynamic_ports_stay_in_range() {
        let mut rng = rng_for(2, "ports");
        for _ in 0..1000 {
            let p = dynamic_port(&mut rng);
            assert!(p >= 49152);
        }
    }
}
