mod common;

use aeronet::connectivity::{estimate_integrated, EstimatorConfig, PointwiseMeasure};
use aeronet::geometry::{grid_partition, GeoPoint};
use aeronet::network::{build_networks, EdgeDirection, NetworkConfig};
use aeronet::trajectory::{Fix, TemporalContext, TrajectoryCorpus, TrajectorySegment};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

const T0: i64 = 1_300_000_000;

/// Backward segments arriving inside a 4×3 grid, drifting west with noise.
fn corpus(n: usize, seed: u64) -> TrajectoryCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let segs: Vec<TrajectorySegment> = (0..n)
        .map(|k| {
            let sample = T0 + (k as i64 % 5) * 86_400 * 40;
            let mut p = [rng.random_range(0.1..3.9), rng.random_range(40.1..42.9)];
            let mut fixes = vec![];
            for j in 0..12 {
                fixes.push(Fix {
                    time: sample - j * 3600,
                    point: GeoPoint::with_alt(p[0], p[1], 100.0).unwrap(),
                    cov: vec![],
                });
                p = [p[0] - rng.random_range(0.0..0.5), p[1] + rng.random_range(-0.2..0.2)];
            }
            fixes.reverse();
            TrajectorySegment::new(format!("t{k:04}"), sample, None, fixes, Arc::from(Vec::<String>::new())).unwrap()
        })
        .collect();
    TrajectoryCorpus::new(segs, Arc::from(Vec::<String>::new())).unwrap()
}

fn grid() -> aeronet::geometry::Partition {
    grid_partition(-3.0, 40.0, 4.0, 43.0, 100.0, None).unwrap()
}

#[test]
fn weights_do_not_depend_on_segment_order() {
    let c = corpus(400, 1);
    let p = grid();
    for measure in [PointwiseMeasure::Contact, PointwiseMeasure::Duration, PointwiseMeasure::Length] {
        let cfg = NetworkConfig { measure, context: TemporalContext::Yearly, ..Default::default() };
        let a = build_networks(&c, &p, &cfg).unwrap();
        let mut shuffled = c.clone();
        shuffled.segments.shuffle(&mut ChaCha8Rng::seed_from_u64(9));
        let b = build_networks(&shuffled, &p, &cfg).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn half_split_average_matches_full_estimate() {
    let c = corpus(600, 2);
    let p = grid();
    let cfg = EstimatorConfig::default();
    let regions = p.regions();
    // receptor of each segment, then alternate segments into two halves
    // within each receptor so both halves have equal counts
    let receptor_of = |s: &TrajectorySegment| p.locate_all(&s.origin)[0];
    for (bi, b) in regions.iter().enumerate() {
        let mine: Vec<&TrajectorySegment> = c.segments.iter().filter(|s| receptor_of(s) == bi).collect();
        if mine.len() < 2 {
            continue;
        }
        let even = mine.len() / 2 * 2;
        let pick = |parity: usize| -> TrajectoryCorpus {
            let segs = mine[..even].iter().enumerate().filter(|(k, _)| k % 2 == parity).map(|(_, s)| (*s).clone()).collect();
            TrajectoryCorpus::new(segs, c.covariate_names.clone()).unwrap()
        };
        let (h0, h1) = (pick(0), pick(1));
        let full = TrajectoryCorpus::new(mine[..even].iter().map(|s| (*s).clone()).collect(), c.covariate_names.clone()).unwrap();
        for (ai, a) in regions.iter().enumerate() {
            if ai == bi {
                continue;
            }
            for m in [PointwiseMeasure::Contact, PointwiseMeasure::Duration] {
                let f = estimate_integrated(&full, b, a, &m, &cfg).unwrap();
                let x = estimate_integrated(&h0, b, a, &m, &cfg).unwrap();
                let y = estimate_integrated(&h1, b, a, &m, &cfg).unwrap();
                assert!(((x + y) / 2.0 - f).abs() <= 1e-12 * f.abs().max(1.0), "{b:?} {a:?}: {x} {y} {f}");
            }
        }
    }
}

#[test]
fn sampling_is_transpose_of_transport() {
    let c = corpus(200, 3);
    let p = grid();
    let t = build_networks(&c, &p, &NetworkConfig::default()).unwrap();
    let s = build_networks(&c, &p, &NetworkConfig { direction: EdgeDirection::Sampling, ..Default::default() }).unwrap();
    let (wt, ws) = (&t.windows[0], &s.windows[0]);
    for i in 0..wt.len() {
        for j in 0..wt.len() {
            assert_eq!(wt.get(i, j), ws.get(j, i));
        }
    }
    // westward drift backward in time: sources lie west of receptors, so
    // transport edges never point west
    let lon = |k: usize| p.regions()[k].centroid().lon;
    assert!(wt.positive_edges().count() > 0);
    assert!(wt.positive_edges().all(|(i, j, _)| lon(j) >= lon(i) - 1e-9));
}
