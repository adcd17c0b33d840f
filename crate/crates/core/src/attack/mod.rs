//! Attack generation: parameter schemas with background-derived defaults,
//! complementary-rate timestamp planning, field resampling, template
//! rewriting, and the generator registry.

pub mod gen;
pub mod plan;
pub mod sample;
pub mod schema;
pub mod template;

pub use plan::{complementary_rate_plan, complementary_rates, TimestampPlan};
pub use sample::{draw, draw_or, sample_field};
pub use schema::{
    validate_and_default, DefaultSource, ParamSchema, ParamSpec, ParamType, ParamValue,
    StatsDefault, VictimKind,
};
pub use template::{load_template, rewrite_template, TemplatePcap};

use std::collections::BTreeMap;
use std::net::Ipv4Addr;

use sha2::{Digest, Sha224};
use thiserror::Error;

use crate::pcap::{MacAddr, ParsedPacket, PcapError};
use crate::stats::{StatsDb, StatsError};
use crate::time::Timestamp;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("unknown attack {0:?}")]
    UnknownAttack(String),
    #[error("unknown parameter {0:?}")]
    UnknownParameter(String),
    #[error("invalid value for {key}: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("background capture has no hosts to derive defaults from")]
    EmptyBackground,
    #[error("victim {0} was never seen answering on a TCP port; pass port=<n>")]
    NoOpenPorts(Ipv4Addr),
    #[error("payload of {got} bytes exceeds the single-packet limit of {max}")]
    PayloadTooLarge { got: usize, max: usize },
    #[error("template involves {0} hosts, need exactly two")]
    AmbiguousTemplate(usize),
    #[error("template contains no TCP SYN to identify the initiating side")]
    NoTcp,
    #[error("timestamp plan has {plan} entries for {template} template packets")]
    LengthMismatch { plan: usize, template: usize },
    #[error("background distribution for {0} is empty, nothing to sample")]
    EmptyDistribution(&'static str),
    #[error("schedule line {line}: {msg}")]
    CsvParse { line: u64, msg: String },
    #[error("bot {0:?} has no address binding")]
    UnboundBot(String),
    #[error("need {needed} distinct background hosts, capture has {available}")]
    InsufficientHosts { needed: usize, available: usize },
    #[error(transparent)]
    Pcap(#[from] PcapError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Fully resolved parameters for one attack instance. Field defaults come
/// from the background statistics; see [`schema::validate_and_default`].
#[derive(Debug, Clone, PartialEq)]
pub struct AttackParams {
    pub attack_name: String,
    pub seed: u64,
    pub attacker_ip: Option<Ipv4Addr>,
    pub victim_ips: Vec<Ipv4Addr>,
    pub attacker_mac: Option<MacAddr>,
    pub victim_mac: Option<MacAddr>,
    pub start_time: Timestamp,
    /// Baseline injection rate in packets per second.
    pub intensity: f64,
    /// Attack-specific parameters, keyed by schema name.
    pub extra: BTreeMap<String, ParamValue>,
}

impl AttackParams {
    pub fn attacker(&self) -> Ipv4Addr {
        self.attacker_ip.expect("schema provides attacker_ip")
    }

    pub fn victim(&self) -> Ipv4Addr {
        self.victim_ips[0]
    }

    pub fn attacker_mac(&self) -> MacAddr {
        self.attacker_mac.expect("schema provides attacker_mac")
    }

    pub fn victim_mac(&self) -> MacAddr {
        self.victim_mac.expect("schema provides victim_mac")
    }

    pub fn int(&self, key: &str) -> u64 {
        match self.extra.get(key) {
            Some(ParamValue::Int(v)) => *v,
            other => panic!("parameter {key} missing or not an int: {other:?}"),
        }
    }

    pub fn float(&self, key: &str) -> f64 {
        match self.extra.get(key) {
            Some(ParamValue::Float(v)) => *v,
            other => panic!("parameter {key} missing or not a float: {other:?}"),
        }
    }

    pub fn boolean(&self, key: &str) -> bool {
        match self.extra.get(key) {
            Some(ParamValue::Bool(v)) => *v,
            other => panic!("parameter {key} missing or not a bool: {other:?}"),
        }
    }

    pub fn str(&self, key: &str) -> &str {
        match self.extra.get(key) {
            Some(ParamValue::Str(v)) => v,
            other => panic!("parameter {key} missing or not a string: {other:?}"),
        }
    }

    pub fn ports(&self, key: &str) -> &[u16] {
        match self.extra.get(key) {
            Some(ParamValue::Ports(v)) => v,
            other => panic!("parameter {key} missing or not a port list: {other:?}"),
        }
    }

    pub fn ips(&self, key: &str) -> &[Ipv4Addr] {
        match self.extra.get(key) {
            Some(ParamValue::IpList(v)) => v,
            other => panic!("parameter {key} missing or not an ip list: {other:?}"),
        }
    }

    pub fn path(&self, key: &str) -> &std::path::Path {
        match self.extra.get(key) {
            Some(ParamValue::Path(v)) => v,
            other => panic!("parameter {key} missing or not a path: {other:?}"),
        }
    }

    /// Canonical `key=value` listing of every resolved parameter; the same
    /// content feeds the digest and the run manifest.
    pub fn canonical_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("attack={}", self.attack_name),
            format!("seed={}", self.seed),
            format!("start_time={:.6}", self.start_time.as_secs_f64()),
            format!("intensity={}", self.intensity),
        ];
        if let Some(ip) = self.attacker_ip {
            lines.push(format!("attacker_ip={ip}"));
        }
        if !self.victim_ips.is_empty() {
            let v: Vec<String> = self.victim_ips.iter().map(|i| i.to_string()).collect();
            lines.push(format!("victim_ips={}", v.join(",")));
        }
        if let Some(mac) = self.attacker_mac {
            lines.push(format!("attacker_mac={mac}"));
        }
        if let Some(mac) = self.victim_mac {
            lines.push(format!("victim_mac={mac}"));
        }
        for (k, v) in &self.extra {
            lines.push(format!("{k}={v}"));
        }
        lines
    }

    /// SHA-224 over the canonical parameter listing, hex encoded. Written
    /// into labels so a dataset records exactly what produced each attack.
    pub fn digest(&self) -> String {
        let mut hasher = Sha224::new();
        for line in self.canonical_lines() {
            hasher.update(line.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }
}

/// A generated attack: its packets in non-decreasing timestamp order plus
/// everything the label sidecar needs.
#[derive(Debug, Clone)]
pub struct GeneratedAttack {
    pub name: String,
    pub packets: Vec<ParsedPacket>,
    pub params_digest: String,
}

impl GeneratedAttack {
    pub fn start(&self) -> Option<Timestamp> {
        self.packets.first().map(|p| p.ts)
    }

    pub fn end(&self) -> Option<Timestamp> {
        self.packets.last().map(|p| p.ts)
    }
}

/// Locally administered unicast MAC derived deterministically from a seed
/// and salt; used when the background never revealed a host's MAC.
pub fn derived_mac(seed: u64, salt: &[u8]) -> MacAddr {
    let mut hasher = Sha224::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(salt);
    let d = hasher.finalize();
    MacAddr([0x02, d[0], d[1], d[2], d[3], d[4]])
}

/// MAC for a host: as observed in the background when available, otherwise
/// derived from the seed and the address.
pub fn mac_for_host(db: &StatsDb, ip: Ipv4Addr, seed: u64) -> MacAddr {
    db.host(ip)
        .and_then(|h| h.mac)
        .unwrap_or_else(|| derived_mac(seed, &ip.octets()))
}

type GenerateFn = fn(&AttackParams, &StatsDb) -> Result<GeneratedAttack, AttackError>;

pub struct AttackDescriptor {
    pub name: &'static str,
    pub summary: &'static str,
    pub schema: fn() -> ParamSchema,
    pub generate: GenerateFn,
}

/// All registered attacks, sorted by name.
pub fn registry() -> &'static [AttackDescriptor] {
    use gen::*;
    static REGISTRY: &[AttackDescriptor] = &[
        AttackDescriptor {
            name: "eternalblue",
            summary: "SMB remote-execution exchange replayed from a user template",
            schema: template::recipe_schema,
            generate: template_exploit::generate,
        },
        AttackDescriptor {
            name: "ftp_winaxe",
            summary: "malicious FTP server overflows a connecting client",
            schema: ftp_winaxe::schema,
            generate: ftp_winaxe::generate,
        },
        AttackDescriptor {
            name: "joomla_privesc",
            summary: "web account-creation exploit replayed from a user template",
            schema: template::recipe_schema,
            generate: template_exploit::generate,
        },
        AttackDescriptor {
            name: "memcrashed",
            summary: "spoofed memcached stats floods toward amplification servers",
            schema: memcrashed::schema,
            generate: memcrashed::generate,
        },
        AttackDescriptor {
            name: "ms17_scan",
            summary: "SMB vulnerability probe replayed from a user template",
            schema: template::recipe_schema,
            generate: template_exploit::generate,
        },
        AttackDescriptor {
            name: "p2p_botnet",
            summary: "peer-to-peer bot chatter following a CSV schedule",
            schema: botnet::schema,
            generate: botnet::generate,
        },
        AttackDescriptor {
            name: "portscan",
            summary: "TCP SYN scan over the most common service ports",
            schema: portscan::schema,
            generate: portscan::generate,
        },
        AttackDescriptor {
            name: "sality",
            summary: "botnet recruitment traffic replayed from a user template",
            schema: template::recipe_schema,
            generate: template_exploit::generate,
        },
        AttackDescriptor {
            name: "smb_scan",
            summary: "SMB negotiate sweep revealing hosts with port 445 open",
            schema: smb::scan_schema,
            generate: smb::generate_scan,
        },
        AttackDescriptor {
            name: "smbloris",
            summary: "NBT length-field resource exhaustion against an SMB server",
            schema: smb::loris_schema,
            generate: smb::generate_loris,
        },
        AttackDescriptor {
            name: "sql_injection",
            summary: "web SQL-injection exchange replayed from a user template",
            schema: template::recipe_schema,
            generate: template_exploit::generate,
        },
        AttackDescriptor {
            name: "syn_flood",
            summary: "high-rate TCP SYN flood with randomized source ports",
            schema: syn_flood::schema,
            generate: syn_flood::generate,
        },
        AttackDescriptor {
            name: "template_exploit",
            summary: "generic two-host template replay with endpoint rewriting",
            schema: template::recipe_schema,
            generate: template_exploit::generate,
        },
    ];
    REGISTRY
}

pub fn find_attack(name: &str) -> Result<&'static AttackDescriptor, AttackError> {
    registry()
        .iter()
        .find(|d| d.name == name)
        .ok_or_else(|| AttackError::UnknownAttack(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_sorted_and_unique() {
        let names: Vec<&str> = registry().iter().map(|d| d.name).collect();
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(names, sorted);
    }

    #[test]
    fn derived_macs_are_local_and_stable() {
        let a = derived_mac(7, b"x");
        let b = derived_mac(7, b"x");
        let c = derived_mac(8, b"x");
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.is_locally_administered());
        assert_eq!(a.0[0] & 0x01, 0); // unicast
    }

    #[test]
    fn digest_is_order_insensitive_for_equal_params() {
        let p = AttackParams {
            attack_name: "portscan".into(),
            seed: 3,
            attacker_ip: Some("10.0.0.9".parse().unwrap()),
            victim_ips: vec!["10.0.0.5".parse().unwrap()],
            attacker_mac: Some(derived_mac(3, b"a")),
            victim_mac: Some(derived_mac(3, b"v")),
            start_time: Timestamp::from_secs_micros(50, 0),
            intensity: 1000.0,
            extra: BTreeMap::new(),
        };
        assert_eq!(p.digest(), p.clone().digest());
        assert_eq!(p.digest().len(), 56); // SHA-224 hex
    }
}
