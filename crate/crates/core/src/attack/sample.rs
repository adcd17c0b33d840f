//! Resampling header fields from background distributions.
//!
//! Generated packets draw TTL, window size and MSS values i.i.d. from the
//! background's observed frequency tables, so the injected traffic only
//! ever uses values the capture itself contains.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attack::AttackError;
use crate::stats::{Field, FieldDistribution, StatsDb};

/// One draw from a frequency table, proportional to the observed counts.
pub fn draw<R: Rng>(dist: &FieldDistribution, rng: &mut R) -> Option<u64> {
    let total = dist.total();
    if total == 0 {
        return None;
    }
    // cumulative counts in ascending value order keep the draw stable
    let mut cumulative = Vec::with_capacity(dist.distinct());
    let mut acc = 0u64;
    for (value, count) in dist.iter() {
        acc += count;
        cumulative.push((acc, value));
    }
    let pick = rng.gen_range(0..total);
    let idx = cumulative.partition_point(|(acc, _)| *acc <= pick);
    Some(cumulative[idx].1)
}

/// Draws a value from the table, or keeps `fallback` when the background
/// never populated it.
pub fn draw_or<R: Rng>(dist: &FieldDistribution, rng: &mut R, fallback: u64) -> u64 {
    draw(dist, rng).unwrap_or(fallback)
}

/// `n` i.i.d. draws from a background field's distribution.
pub fn sample_field(
    db: &StatsDb,
    field: Field,
    seed: u64,
    n: usize,
) -> Result<Vec<u64>, AttackError> {
    let dist = db.distribution(field);
    if dist.total() == 0 {
        return Err(AttackError::EmptyDistribution(field.name()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| draw(dist, &mut rng).unwrap()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn dist(pairs: &[(u64, u64)]) -> FieldDistribution {
        let mut d = FieldDistribution::default();
        for &(v, c) in pairs {
            for _ in 0..c {
                d.add(v);
            }
        }
        d
    }

    #[test]
    fn draws_stay_inside_the_support() {
        let d = dist(&[(64, 5), (128, 3), (255, 2)]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let v = draw(&d, &mut rng).unwrap();
            assert!(d.get(v) > 0, "drew {v} outside the table");
        }
    }

    #[test]
    fn draw_frequencies_track_counts() {
        let d = dist(&[(10, 9), (20, 1)]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut seen: BTreeMap<u64, u64> = BTreeMap::new();
        let n = 20_000;
        for _ in 0..n {
            *seen.entry(draw(&d, &mut rng).unwrap()).or_default() += 1;
        }
        // p = 0.9; four-sigma band on a binomial count
        let expect = 0.9 * n as f64;
        let sigma = (n as f64 * 0.9 * 0.1).sqrt();
        let got = seen[&10] as f64;
        assert!((got - expect).abs() < 4.0 * sigma, "got {got}, expect {expect}");
    }

    #[test]
    fn empty_table_yields_none_and_fallback() {
        let d = FieldDistribution::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(draw(&d, &mut rng), None);
        assert_eq!(draw_or(&d, &mut rng, 64), 64);
    }

    #[test]
    fn single_value_table_is_constant() {
        let d = dist(&[(1460, 4)]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            assert_eq!(draw(&d, &mut rng), Some(1460));
        }
    }
}
