mod support;

use gravview_core::metrics::{
    fit_similarity, jitter, pa_mpjpe, rte, segmented_world_mpjpe, umeyama_align, AlignMode, Similarity,
};
use gravview_core::{Rotation, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{brute_force_residual, per_segment_world_mpjpe, random_cloud, random_rotation};

#[test]
fn umeyama_residual_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..10 {
        let p = random_cloud(&mut rng, 24);
        let r0 = random_rotation(&mut rng);
        let q: Vec<Vec3> = p
            .iter()
            .map(|x| r0 * *x * 1.3 + Vec3::new(0.5, -1.0, 2.0) + Vec3::new(rng.random(), rng.random(), rng.random()) * 0.2)
            .collect();
        for with_scale in [true, false] {
            let fit = umeyama_align(&p, &q, with_scale).unwrap();
            let oracle = brute_force_residual(&p, &q, with_scale, &mut rng);
            assert!((fit.residual(&p, &q) - oracle).abs() < 1e-6, "case {case}");
        }
    }
}

#[test]
fn pa_mpjpe_ignores_similarity_transforms() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let gt: Vec<Vec<Vec3>> = (0..5).map(|_| random_cloud(&mut rng, 24)).collect();
    let pred: Vec<Vec<Vec3>> = gt.iter().map(|f| f.iter().map(|x| *x + Vec3::new(rng.random(), 0.0, 0.0) * 0.05).collect()).collect();
    let base = pa_mpjpe(&pred, &gt).unwrap();
    for _ in 0..10 {
        let s = Similarity { rotation: random_rotation(&mut rng), translation: Vec3::new(3.0, -1.0, 0.2), scale: rng.random_range(0.5..2.0) };
        let moved: Vec<Vec<Vec3>> = pred.iter().map(|f| f.iter().map(|x| s.apply(*x)).collect()).collect();
        assert!((pa_mpjpe(&moved, &gt).unwrap() - base).abs() < 1e-9);
    }
}

#[test]
fn segmented_metrics_match_per_segment_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let n = 230;
    let gt: Vec<Vec<Vec3>> = (0..n)
        .map(|t| {
            let c = Vec3::new(0.02 * t as f64, 0.0, (0.03 * t as f64).sin());
            (0..24).map(|j| c + Vec3::new((j as f64).sin(), 0.05 * j as f64, (1.7 * j as f64).cos()) * 0.3).collect()
        })
        .collect();
    // One degree of yaw drift per frame about the root.
    let pred: Vec<Vec<Vec3>> = gt
        .iter()
        .enumerate()
        .map(|(t, f)| {
            let r = Rotation::about_y((t as f64).to_radians());
            f.iter().map(|x| r * *x + Vec3::new(0.0, 0.0, rng.random::<f64>() * 1e-3)).collect()
        })
        .collect();
    let wa = segmented_world_mpjpe(&pred, &gt, 100, AlignMode::Whole).unwrap();
    let w = segmented_world_mpjpe(&pred, &gt, 100, AlignMode::FirstTwo).unwrap();
    assert!(wa > 0.0 && wa < w);

    let (oracle_wa, oracle_w) = per_segment_world_mpjpe(&pred, &gt, 100, &mut rng);
    assert!((wa - oracle_wa).abs() < 1e-6, "{wa} vs {oracle_wa}");
    assert!((w - oracle_w).abs() < 1e-6, "{w} vs {oracle_w}");
}

#[test]
fn rte_of_offset_matches_residual_oracle() {
    let gt: Vec<Vec3> = (0..=100).map(|i| Vec3::new(0.1 * i as f64, 0.0, 0.0)).collect();
    // Offset on alternating sides cannot be absorbed by any rigid fit.
    let pred: Vec<Vec3> = gt.iter().enumerate().map(|(i, p)| *p + Vec3::new(0.0, 0.0, if i % 2 == 0 { 0.05 } else { -0.05 })).collect();
    let fit = fit_similarity(&pred, &gt, false);
    let oracle = pred.iter().zip(&gt).map(|(a, b)| (fit.apply(*a) - *b).norm()).sum::<f64>() / gt.len() as f64 / 10.0 * 100.0;
    let got = rte(&pred, &gt).unwrap();
    assert!((got - oracle).abs() < 1e-9);
    assert!(got > 0.0 && got <= 0.5 + 1e-9);

    let doubled: Vec<Vec3> = gt.iter().map(|p| *p * 2.0).collect();
    assert!(rte(&doubled, &gt).unwrap() > 0.0);
}

#[test]
fn jitter_of_constant_acceleration_is_exactly_zero() {
    let seq: Vec<Vec<Vec3>> = (0..50)
        .map(|t| {
            let t = t as f64;
            vec![Vec3::new(0.25 * t * t, -0.5 * t * t + 2.0 * t, 0.125 * t * t + 1.0)]
        })
        .collect();
    assert_eq!(jitter(&seq, 30.0).unwrap(), 0.0);
}
