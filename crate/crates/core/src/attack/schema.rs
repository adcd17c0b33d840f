//! Parameter declaration and resolution.
//!
//! Every attack declares its parameters as a [`ParamSchema`]; user-supplied
//! `key=value` strings are validated against it and missing entries are
//! filled from constants or from the background statistics. Defaults are
//! written in the same syntax users type, so one parser covers both.

use std::collections::BTreeMap;
use std::fmt;
use std::net::Ipv4Addr;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attack::{derived_mac, mac_for_host, AttackError, AttackParams};
use crate::pcap::MacAddr;
use crate::stats::StatsDb;
use crate::tables;
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Int(u64),
    Float(f64),
    Bool(bool),
    Str(String),
    Ip(Ipv4Addr),
    IpList(Vec<Ipv4Addr>),
    Mac(MacAddr),
    Ports(Vec<u16>),
    Path(PathBuf),
    Time(Timestamp),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Bool(v) => write!(f, "{v}"),
            ParamValue::Str(v) => write!(f, "{v}"),
            ParamValue::Ip(v) => write!(f, "{v}"),
            ParamValue::IpList(v) => {
                let s: Vec<String> = v.iter().map(|i| i.to_string()).collect();
                write!(f, "{}", s.join(","))
            }
            ParamValue::Mac(v) => write!(f, "{v}"),
            ParamValue::Ports(v) => {
                let s: Vec<String> = v.iter().map(|p| p.to_string()).collect();
                write!(f, "{}", s.join(","))
            }
            ParamValue::Path(v) => write!(f, "{}", v.display()),
            ParamValue::Time(v) => write!(f, "{:.6}", v.as_secs_f64()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamType {
    Int,
    Float,
    Bool,
    Str,
    Ip,
    IpList,
    Mac,
    /// Comma-separated ports; `a-b` spans are expanded.
    Ports,
    Path,
    /// Absolute time as epoch seconds.
    Time,
}

impl ParamType {
    pub fn name(&self) -> &'static str {
        match self {
            ParamType::Int => "int",
            ParamType::Float => "float",
            ParamType::Bool => "bool",
            ParamType::Str => "string",
            ParamType::Ip => "ipv4",
            ParamType::IpList => "ipv4 list",
            ParamType::Mac => "mac",
            ParamType::Ports => "ports",
            ParamType::Path => "path",
            ParamType::Time => "epoch seconds",
        }
    }

    pub fn parse(&self, raw: &str) -> Result<ParamValue, String> {
        let raw = raw.trim();
        match self {
            ParamType::Int => raw
                .parse()
                .map(ParamValue::Int)
                .map_err(|_| format!("{raw:?} is not a non-negative integer")),
            ParamType::Float => {
                let v: f64 = raw.parse().map_err(|_| format!("{raw:?} is not a number"))?;
                if !v.is_finite() {
                    return Err(format!("{raw:?} is not finite"));
                }
                Ok(ParamValue::Float(v))
            }
            ParamType::Bool => match raw {
                "true" | "1" | "yes" => Ok(ParamValue::Bool(true)),
                "false" | "0" | "no" => Ok(ParamValue::Bool(false)),
                _ => Err(format!("{raw:?} is not a boolean")),
            },
            ParamType::Str => Ok(ParamValue::Str(raw.to_string())),
            ParamType::Ip => raw
                .parse()
                .map(ParamValue::Ip)
                .map_err(|_| format!("{raw:?} is not an IPv4 address")),
            ParamType::IpList => {
                if raw.is_empty() {
                    return Ok(ParamValue::IpList(Vec::new()));
                }
                let mut out = Vec::new();
                for part in raw.split(',') {
                    out.push(
                        part.trim()
                            .parse()
                            .map_err(|_| format!("{:?} is not an IPv4 address", part.trim()))?,
                    );
                }
                Ok(ParamValue::IpList(out))
            }
            ParamType::Mac => raw.parse().map(ParamValue::Mac),
            ParamType::Ports => {
                let mut out = Vec::new();
                for part in raw.split(',') {
                    let part = part.trim();
                    if let Some((a, b)) = part.split_once('-') {
                        let a: u16 = a.trim().parse().map_err(|_| format!("bad port in {part:?}"))?;
                        let b: u16 = b.trim().parse().map_err(|_| format!("bad port in {part:?}"))?;
                        if a > b {
                            return Err(format!("descending span {part:?}"));
                        }
                        out.extend(a..=b);
                    } else {
                        out.push(part.parse().map_err(|_| format!("bad port {part:?}"))?);
                    }
                }
                if out.is_empty() {
                    return Err("empty port list".into());
                }
                Ok(ParamValue::Ports(out))
            }
            ParamType::Path => Ok(ParamValue::Path(PathBuf::from(raw))),
            ParamType::Time => {
                let v: f64 = raw
                    .parse()
                    .map_err(|_| format!("{raw:?} is not epoch seconds"))?;
                if !v.is_finite() || v < 0.0 {
                    return Err(format!("{raw:?} is not a valid time"));
                }
                Ok(ParamValue::Time(Timestamp::from_secs_f64(v)))
            }
        }
    }
}

/// Values the background statistics can supply as a default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatsDefault {
    /// Uniformly random host for the attack seed.
    RandomHost,
    /// Host with the most sent-plus-received packets.
    MostActiveHost,
    /// Every host in the capture.
    AllHosts,
    /// Up to `n` random hosts, excluding the already-resolved victim.
    RandomServers(usize),
    /// The victim's most frequently answering TCP port.
    MostUsedOpenPort,
    /// The `n` most common ports from the bundled frequency table.
    TopPorts(usize),
    /// Capture start plus half the capture duration.
    MidCapture,
    /// Observed MAC of the resolved attacker, derived if never seen.
    AttackerMac,
    /// Observed MAC of the first resolved victim, derived if never seen.
    VictimMac,
    /// MAC derived from the seed alone (no address to tie it to).
    SeedMac,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DefaultSource {
    /// The user must supply the value.
    Required,
    /// Fixed fallback, written in user syntax.
    Constant(&'static str),
    /// Derived from the background statistics.
    Stats(StatsDefault),
}

impl DefaultSource {
    /// Label used by attack listings.
    pub fn kind(&self) -> &'static str {
        match self {
            DefaultSource::Required => "user-required",
            DefaultSource::Constant(_) => "constant",
            DefaultSource::Stats(_) => "stats-derived",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParamSpec {
    pub key: &'static str,
    pub ty: ParamType,
    pub default: DefaultSource,
    pub help: &'static str,
}

#[derive(Debug, Clone)]
pub struct ParamSchema {
    pub params: Vec<ParamSpec>,
}

/// Which victim parameter an attack's schema carries.
pub enum VictimKind {
    /// `victim_ip`, defaulting to the most active host.
    Single,
    /// `victim_ips`, defaulting to every background host.
    Many,
    None,
}

impl ParamSchema {
    /// Schema skeleton shared by all attacks: roles, MACs, start time and
    /// intensity, followed by attack-specific parameters.
    pub fn common(
        with_attacker: bool,
        victims: VictimKind,
        default_intensity: &'static str,
    ) -> Self {
        let mut params = Vec::new();
        if with_attacker {
            params.push(ParamSpec {
                key: "attacker_ip",
                ty: ParamType::Ip,
                default: DefaultSource::Stats(StatsDefault::RandomHost),
                help: "address the attack originates from",
            });
        }
        match victims {
            VictimKind::Single => params.push(ParamSpec {
                key: "victim_ip",
                ty: ParamType::Ip,
                default: DefaultSource::Stats(StatsDefault::MostActiveHost),
                help: "address the attack targets",
            }),
            VictimKind::Many => params.push(ParamSpec {
                key: "victim_ips",
                ty: ParamType::IpList,
                default: DefaultSource::Stats(StatsDefault::AllHosts),
                help: "addresses the attack targets",
            }),
            VictimKind::None => {}
        }
        if with_attacker {
            params.push(ParamSpec {
                key: "attacker_mac",
                ty: ParamType::Mac,
                default: DefaultSource::Stats(StatsDefault::AttackerMac),
                help: "source MAC for attacker frames",
            });
        }
        if !matches!(victims, VictimKind::None) {
            params.push(ParamSpec {
                key: "victim_mac",
                ty: ParamType::Mac,
                default: DefaultSource::Stats(StatsDefault::VictimMac),
                help: "MAC of the victim",
            });
        }
        params.push(ParamSpec {
            key: "start_time",
            ty: ParamType::Time,
            default: DefaultSource::Stats(StatsDefault::MidCapture),
            help: "injection start, epoch seconds within the capture",
        });
        params.push(ParamSpec {
            key: "intensity",
            ty: ParamType::Float,
            default: DefaultSource::Constant(default_intensity),
            help: "baseline injection rate, packets per second",
        });
        ParamSchema { params }
    }

    pub fn with(mut self, spec: ParamSpec) -> Self {
        self.params.push(spec);
        self
    }

    fn find(&self, key: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|s| s.key == key)
    }
}

fn resolve_stats_default(
    what: StatsDefault,
    db: &StatsDb,
    seed: u64,
    resolved: &BTreeMap<String, ParamValue>,
    attack_name: &str,
) -> Result<ParamValue, AttackError> {
    match what {
        StatsDefault::RandomHost => db
            .random_host(seed)
            .map(ParamValue::Ip)
            .ok_or(AttackError::EmptyBackground),
        StatsDefault::MostActiveHost => db
            .most_active_host()
            .map(ParamValue::Ip)
            .ok_or(AttackError::EmptyBackground),
        StatsDefault::AllHosts => {
            if db.hosts.is_empty() {
                return Err(AttackError::EmptyBackground);
            }
            Ok(ParamValue::IpList(db.hosts.keys().copied().collect()))
        }
        StatsDefault::RandomServers(n) => {
            let victim = match resolved.get("victim_ip") {
                Some(ParamValue::Ip(ip)) => Some(*ip),
                _ => None,
            };
            let candidates: Vec<Ipv4Addr> = db
                .hosts
                .keys()
                .copied()
                .filter(|ip| Some(*ip) != victim)
                .collect();
            if candidates.is_empty() {
                return Err(AttackError::EmptyBackground);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5e77);
            let mut picked = Vec::new();
            let mut pool = candidates;
            while picked.len() < n && !pool.is_empty() {
                let i = rng.gen_range(0..pool.len());
                picked.push(pool.swap_remove(i));
            }
            Ok(ParamValue::IpList(picked))
        }
        StatsDefault::MostUsedOpenPort => {
            let victim = match resolved.get("victim_ip") {
                Some(ParamValue::Ip(ip)) => *ip,
                _ => return Err(AttackError::EmptyBackground),
            };
            let host = db.host(victim).ok_or(AttackError::NoOpenPorts(victim))?;
            // most frequently used among the ports seen answering; fall back
            // to the smallest open port when frequency data is thin
            let open = &host.ports_open;
            if open.is_empty() {
                return Err(AttackError::NoOpenPorts(victim));
            }
            let dst = db.distribution(crate::stats::Field::DstPort);
            let best = open
                .iter()
                .map(|&p| (dst.get(p as u64), std::cmp::Reverse(p)))
                .max()
                .map(|(_, std::cmp::Reverse(p))| p)
                .unwrap();
            Ok(ParamValue::Int(best as u64))
        }
        StatsDefault::TopPorts(n) => Ok(ParamValue::Ports(tables::top_ports(n))),
        StatsDefault::MidCapture => {
            let f = &db.file;
            Ok(ParamValue::Time(Timestamp(
                f.capture_start.0 + f.capture_end.saturating_sub(f.capture_start) / 2,
            )))
        }
        StatsDefault::AttackerMac => {
            let ip = match resolved.get("attacker_ip") {
                Some(ParamValue::Ip(ip)) => *ip,
                _ => return Err(AttackError::EmptyBackground),
            };
            Ok(ParamValue::Mac(mac_for_host(db, ip, seed)))
        }
        StatsDefault::VictimMac => {
            let ip = match (resolved.get("victim_ip"), resolved.get("victim_ips")) {
                (Some(ParamValue::Ip(ip)), _) => *ip,
                (_, Some(ParamValue::IpList(list))) if !list.is_empty() => list[0],
                _ => return Err(AttackError::EmptyBackground),
            };
            Ok(ParamValue::Mac(mac_for_host(db, ip, seed)))
        }
        StatsDefault::SeedMac => Ok(ParamValue::Mac(derived_mac(
            seed,
            attack_name.as_bytes(),
        ))),
    }
}

/// Validates user `key=value` pairs against a schema, fills defaults from
/// the background, and cross-checks the result.
pub fn validate_and_default(
    attack_name: &str,
    schema: &ParamSchema,
    user: &BTreeMap<String, String>,
    db: &StatsDb,
    seed: u64,
) -> Result<AttackParams, AttackError> {
    // accept dotted spellings like victim.ip on the command line
    let user: BTreeMap<String, String> = user
        .iter()
        .map(|(k, v)| (k.replace('.', "_"), v.clone()))
        .collect();
    for key in user.keys() {
        if schema.find(key).is_none() {
            return Err(AttackError::UnknownParameter(key.clone()));
        }
    }

    let mut resolved: BTreeMap<String, ParamValue> = BTreeMap::new();
    for spec in &schema.params {
        let value = if let Some(raw) = user.get(spec.key) {
            spec.ty.parse(raw).map_err(|reason| AttackError::InvalidValue {
                key: spec.key.to_string(),
                reason,
            })?
        } else {
            match &spec.default {
                DefaultSource::Required => {
                    return Err(AttackError::InvalidValue {
                        key: spec.key.to_string(),
                        reason: "required, no default".into(),
                    })
                }
                DefaultSource::Constant(raw) => spec
                    .ty
                    .parse(raw)
                    .expect("schema constants parse"),
                DefaultSource::Stats(what) => {
                    resolve_stats_default(*what, db, seed, &resolved, attack_name)?
                }
            }
        };
        resolved.insert(spec.key.to_string(), value);
    }

    let take_ip = |map: &mut BTreeMap<String, ParamValue>, key: &str| match map.remove(key) {
        Some(ParamValue::Ip(ip)) => Some(ip),
        _ => None,
    };
    let mut map = resolved;
    let attacker_ip = take_ip(&mut map, "attacker_ip");
    let victim_ips = match (map.remove("victim_ip"), map.remove("victim_ips")) {
        (Some(ParamValue::Ip(ip)), _) => vec![ip],
        (_, Some(ParamValue::IpList(list))) => {
            if list.is_empty() {
                return Err(AttackError::InvalidValue {
                    key: "victim_ips".into(),
                    reason: "at least one victim required".into(),
                });
            }
            list
        }
        _ => Vec::new(),
    };
    let attacker_mac = match map.remove("attacker_mac") {
        Some(ParamValue::Mac(m)) => Some(m),
        _ => None,
    };
    let victim_mac = match map.remove("victim_mac") {
        Some(ParamValue::Mac(m)) => Some(m),
        _ => None,
    };
    let start_time = match map.remove("start_time") {
        Some(ParamValue::Time(t)) => t,
        _ => unreachable!("start_time always in schema"),
    };
    let intensity = match map.remove("intensity") {
        Some(ParamValue::Float(v)) => v,
        _ => unreachable!("intensity always in schema"),
    };

    if intensity <= 0.0 {
        return Err(AttackError::InvalidValue {
            key: "intensity".into(),
            reason: "must be positive".into(),
        });
    }
    if db.file.packet_count > 0 {
        let (lo, hi) = (db.file.capture_start, db.file.capture_end);
        if start_time < lo || start_time > hi {
            return Err(AttackError::InvalidValue {
                key: "start_time".into(),
                reason: format!(
                    "{:.6} outside the capture span [{:.6}, {:.6}]",
                    start_time.as_secs_f64(),
                    lo.as_secs_f64(),
                    hi.as_secs_f64()
                ),
            });
        }
    }

    Ok(AttackParams {
        attack_name: attack_name.to_string(),
        seed,
        attacker_ip,
        victim_ips,
        attacker_mac,
        victim_mac,
        start_time,
        intensity,
        extra: map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn port_spans_expand() {
        let v = ParamType::Ports.parse("22,80,8000-8002").unwrap();
        assert_eq!(v, ParamValue::Ports(vec![22, 80, 8000, 8001, 8002]));
        assert!(ParamType::Ports.parse("90-80").is_err());
        assert!(ParamType::Ports.parse("x").is_err());
    }

    #[test]
    fn ip_parse_rejects_garbage() {
        assert!(ParamType::Ip.parse("999.1.1.1").is_err());
        assert!(ParamType::Ip.parse("10.0.0.1").is_ok());
    }

    #[test]
    fn bool_forms() {
        assert_eq!(ParamType::Bool.parse("yes").unwrap(), ParamValue::Bool(true));
        assert_eq!(ParamType::Bool.parse("0").unwrap(), ParamValue::Bool(false));
        assert!(ParamType::Bool.parse("maybe").is_err());
    }

    #[test]
    fn default_kinds_label() {
        assert_eq!(DefaultSource::Required.kind(), "user-required");
        assert_eq!(DefaultSource::Constant("1").kind(), "constant");
        assert_eq!(
            DefaultSource::Stats(StatsDefault::RandomHost).kind(),
            "stats-derived"
        );
    }
}
