mod common;

use prockit::geometry::TOLERANCE;
use prockit::reconstructibility::{
    count_tuples, exhaustive_check, rank_tuple, randomized_check, sample_tuple, ElevenTuple, Verdict,
};
use prockit::PointConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sq(config: &PointConfig, a: usize, b: usize) -> f64 {
    config.distance(a, b).powi(2)
}

/// `g` through the determinant: minus Cayley-Menger of the tuple's six
/// squared distances.
fn g_oracle(config: &PointConfig, t: [usize; 3], ps: [(usize, usize); 4]) -> f64 {
    -common::cayley_menger([
        sq(config, t[0], t[1]),
        sq(config, t[0], t[2]),
        sq(config, ps[0].0, ps[0].1),
        sq(config, ps[1].0, ps[1].1),
        sq(config, ps[2].0, ps[2].1),
        sq(config, ps[3].0, ps[3].1),
    ])
}

fn lattice() -> PointConfig {
    let rows: Vec<[f64; 2]> = (0..4).flat_map(|x| (0..3).map(move |y| [x as f64, y as f64])).take(11).collect();
    PointConfig::from_rows(&rows).unwrap()
}

fn witness_vanishes(config: &PointConfig, w: &ElevenTuple) -> bool {
    let r = w.roles;
    let g = g_oracle(config, [r[0], r[1], r[2]], [(r[3], r[4]), (r[5], r[6]), (r[7], r[8]), (r[9], r[10])]);
    g.abs() <= 1e-7 * config.diameter().powi(6)
}

#[test]
fn enumeration_matches_counts() {
    for n in [11, 12] {
        let mut seen = 0u128;
        common::for_each_tuple(n, |_, _| seen += 1);
        assert_eq!(seen, count_tuples(n).unwrap(), "n = {n}");
    }
}

#[test]
fn enumeration_order_is_rank_order() {
    let mut expected = 0u128;
    common::for_each_tuple(11, |t, ps| {
        let tuple = ElevenTuple {
            roles: [t[0], t[1], t[2], ps[0].0, ps[0].1, ps[1].0, ps[1].1, ps[2].0, ps[2].1, ps[3].0, ps[3].1],
        };
        assert_eq!(rank_tuple(&tuple, 11), expected);
        expected += 1;
    });
}

#[test]
fn generic_config_is_reconstructible() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let config = common::random_config(&mut rng, 11, 2);
    assert_eq!(exhaustive_check(&config).unwrap(), Verdict::Reconstructible);
}

#[test]
fn planted_zero_is_found() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let config = common::planted_zero_config(&mut rng);
    match exhaustive_check(&config).unwrap() {
        Verdict::NotReconstructible { witness, .. } => assert!(witness_vanishes(&config, &witness)),
        Verdict::Reconstructible => panic!("planted tuple missed"),
    }
}

#[test]
fn lattice_zero_rate_matches_enumeration() {
    let config = lattice();
    let mut zeros = 0usize;
    let mut total = 0usize;
    let limit = TOLERANCE * config.diameter().powi(6);
    common::for_each_tuple(11, |t, ps| {
        total += 1;
        if g_oracle(&config, t, ps).abs() <= limit {
            zeros += 1;
        }
    });
    assert_eq!(total, 415_800);
    // Independent count with exact integer arithmetic.
    assert_eq!(zeros, 12_983);
    let p = zeros as f64 / total as f64;

    let mut hits = 0;
    let mut sampled_zeros = 0;
    for seed in 0..100 {
        let report = randomized_check(&config, 1000, seed).unwrap();
        sampled_zeros += report.zeros;
        if let Verdict::NotReconstructible { witness, .. } = &report.verdict {
            assert!(witness_vanishes(&config, witness));
            hits += 1;
        }
    }
    let expected_rate = 1.0 - (1.0 - p).powi(1000);
    assert!(hits as f64 >= (expected_rate * 100.0).floor(), "{hits} detections, expected rate {expected_rate}");
    let samples = 100_000.0;
    let sigma = (p * (1.0 - p) / samples).sqrt();
    let rate = sampled_zeros as f64 / samples;
    assert!((rate - p).abs() <= 5.0 * sigma, "zero rate {rate} vs {p}");
}

#[test]
fn randomized_is_one_sided() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let generic = common::random_config(&mut rng, 11, 2);
    assert!(exhaustive_check(&generic).unwrap().is_reconstructible());
    for seed in 0..100 {
        assert!(randomized_check(&generic, 1000, seed).unwrap().verdict.is_reconstructible());
    }
    let planted = common::planted_zero_config(&mut rng);
    assert!(!exhaustive_check(&planted).unwrap().is_reconstructible());
    for seed in 0..100 {
        if let Verdict::NotReconstructible { witness, .. } = randomized_check(&planted, 1000, seed).unwrap().verdict {
            assert!(witness_vanishes(&planted, &witness));
        }
    }
}

#[test]
fn randomized_is_deterministic_in_seed() {
    let config = lattice();
    assert_eq!(randomized_check(&config, 5000, 9).unwrap(), randomized_check(&config, 5000, 9).unwrap());
}

#[test]
fn sampling_is_uniform() {
    let n = 11;
    let total = count_tuples(n).unwrap();
    let buckets = 1000u128;
    let draws = 1_000_000usize;
    let mut counts = vec![0u64; buckets as usize];
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let mut scratch = Vec::new();
    for _ in 0..draws {
        let t = sample_tuple(&mut rng, n, &mut scratch);
        counts[(rank_tuple(&t, n) % buckets) as usize] += 1;
    }
    let mut chi2 = 0.0;
    for (b, &c) in counts.iter().enumerate() {
        let members = total / buckets + u128::from((b as u128) < total % buckets);
        let p = members as f64 / total as f64;
        let mean = p * draws as f64;
        let sd = (mean * (1.0 - p)).sqrt();
        assert!((c as f64 - mean).abs() <= 5.0 * sd, "bucket {b}: {c} vs {mean}");
        chi2 += (c as f64 - mean).powi(2) / mean;
    }
    // 999 degrees of freedom: mean 999, sd about 45.
    assert!(chi2 < 999.0 + 5.0 * 44.7, "chi-square {chi2}");
}
