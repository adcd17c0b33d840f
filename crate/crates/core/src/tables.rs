//! Bundled data tables: TCP service frequencies and the port-name
//! assignment snapshot. Both parse lazily from CSV compiled into the
//! binary.

use std::collections::BTreeMap;
use std::sync::OnceLock;

static FREQUENCIES: OnceLock<Vec<(u16, u64)>> = OnceLock::new();
static ASSIGNMENTS: OnceLock<BTreeMap<u16, &'static str>> = OnceLock::new();

fn frequencies() -> &'static [(u16, u64)] {
    FREQUENCIES.get_or_init(|| {
        let raw = include_str!("../data/port_frequencies.csv");
        raw.lines()
            .skip(1)
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let (p, f) = l.split_once(',').expect("bundled csv well formed");
                (
                    p.trim().parse().expect("bundled port"),
                    f.trim().parse().expect("bundled frequency"),
                )
            })
            .collect()
    })
}

/// The `n` most common TCP service ports from the bundled frequency table,
/// ordered by descending frequency with ties broken by ascending port.
pub fn top_ports(n: usize) -> Vec<u16> {
    let mut all: Vec<(u16, u64)> = frequencies().to_vec();
    all.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    all.into_iter().take(n).map(|(p, _)| p).collect()
}

/// Number of entries in the bundled frequency table.
pub fn frequency_table_len() -> usize {
    frequencies().len()
}

fn assignments() -> &'static BTreeMap<u16, &'static str> {
    ASSIGNMENTS.get_or_init(|| {
        let raw = include_str!("../data/iana_ports.csv");
        raw.lines()
            .skip(1)
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let (p, name) = l.split_once(',').expect("bundled csv well formed");
                (p.trim().parse().expect("bundled port"), name.trim())
            })
            .collect()
    })
}

/// Service name for a port in the bundled assignment snapshot. The snapshot
/// is advisory and deliberately not exhaustive.
pub fn service_name(port: u16) -> Option<&'static str> {
    assignments().get(&port).copied()
}

pub fn is_assigned(port: u16) -> bool {
    assignments().contains_key(&port)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_is_big_enough_for_default_scans() {
        assert!(frequency_table_len() >= 1000);
    }

    #[test]
    fn top_ports_count_and_distinctness() {
        let ports = top_ports(1000);
        assert_eq!(ports.len(), 1000);
        let set: std::collections::BTreeSet<u16> = ports.iter().copied().collect();
        assert_eq!(set.len(), 1000);
    }

    #[test]
    fn common_services_lead() {
        let top = top_ports(25);
        for p in [80u16, 443, 22, 445] {
            assert!(top.contains(&p), "expected {p} in the top 25");
        }
    }

    #[test]
    fn ties_resolve_to_ascending_port() {
        let all = top_ports(frequency_table_len());
        let freqs: BTreeMap<u16, u64> = frequencies().iter().copied().collect();
        for pair in all.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let (fa, fb) = (freqs[&a], freqs[&b]);
            assert!(fa > fb || (fa == fb && a < b), "order broken at {a},{b}");
        }
    }

    #[test]
    fn assignment_lookup() {
        assert_eq!(service_name(80), Some("http"));
        assert_eq!(service_name(11211), Some("memcache"));
        assert!(service_name(1117).is_none());
        assert!(is_assigned(22));
    }
}
