//! Clustering properties on requirement-shaped data.

use beamsel_core::clustering::{kmeans_fit, representative_for, ClusterModel, FeatureNormalizer, Features, KMeansConfig};
use beamsel_core::optimizer::{optimize_matrix, OptimizerConfig};
use beamsel_core::{ArrayGeometry, BeamRequirement, PatternEngine};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_requirements(n: usize, seed: u64) -> Vec<Features> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            [
                rng.gen_range(0.45..1.5),
                rng.gen_range(0.45..1.5),
                rng.gen_range(-30.0..-20.0),
                rng.gen_range(-30.0..-20.0),
                rng.gen_range(50.0..70.0),
                rng.gen_range(-8.7..8.7),
                rng.gen_range(-8.7..8.7),
            ]
        })
        .collect()
}

fn config(k: usize) -> KMeansConfig {
    KMeansConfig { k, seed: 11, ..KMeansConfig::default() }
}

#[test]
fn requirement_at_a_centroid_is_assigned_to_it() {
    let pts = random_requirements(400, 1);
    let (model, _) = kmeans_fit(&pts, &config(8)).unwrap();
    for i in 0..model.k {
        assert_eq!(model.assign(&model.centroid_requirement(i)), i);
    }
}

#[test]
fn labels_match_assign() {
    let pts = random_requirements(300, 2);
    let (model, fit) = kmeans_fit(&pts, &config(6)).unwrap();
    for (p, &l) in pts.iter().zip(&fit.labels) {
        assert_eq!(model.assign(&BeamRequirement::from_features(p)), l);
    }
}

#[test]
fn assignment_ignores_positive_rescaling_of_the_raw_features() {
    let pts = random_requirements(300, 3);
    let scale: Features = [3.0, 0.2, 7.5, 1e-3, 42.0, 0.5, 9.0];
    let scaled: Vec<Features> = pts.iter().map(|p| core::array::from_fn(|d| p[d] * scale[d])).collect();
    let (a, fa) = kmeans_fit(&pts, &config(5)).unwrap();
    let (b, fb) = kmeans_fit(&scaled, &config(5)).unwrap();
    assert_eq!(fa.labels, fb.labels);
    let probes = random_requirements(100, 4);
    for p in &probes {
        let q: Features = core::array::from_fn(|d| p[d] * scale[d]);
        assert_eq!(a.assign(&BeamRequirement::from_features(p)), b.assign(&BeamRequirement::from_features(&q)));
    }
}

#[test]
fn equidistant_point_goes_to_the_lower_index() {
    let mut centroids = vec![[0.0; 7]; 6];
    for (i, c) in centroids.iter_mut().enumerate() {
        c[0] = 10.0 * (i + 1) as f64;
    }
    centroids[2] = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    centroids[5] = [-1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let normalizer = FeatureNormalizer { means: [0.0; 7], std_devs: [1.0; 7], degenerate: [false; 7] };
    let model = ClusterModel { k: 6, centroids, normalizer, inertia: 0.0 };
    let midpoint = BeamRequirement::from_features(&[0.0; 7]);
    assert_eq!(model.assign(&midpoint), 2);
}

#[test]
fn inertia_never_increases_on_a_full_sized_dataset() {
    let pts = random_requirements(5000, 5);
    let (_, fit) = kmeans_fit(&pts, &config(20)).unwrap();
    assert!(fit.inertia_history.len() >= 2);
    for w in fit.inertia_history.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn single_requirement_representative_is_the_oracle_result() {
    let req = BeamRequirement {
        bw_az_deg: 1.0,
        bw_el_deg: 0.8,
        sll_az_db: -24.0,
        sll_el_db: -22.0,
        eirp_dbw: 60.0,
        point_el_deg: 2.0,
        point_az_deg: -3.0,
    };
    let (model, _) = kmeans_fit(&[req.to_features()], &KMeansConfig { k: 1, ..KMeansConfig::default() }).unwrap();
    let back = model.centroid_requirement(0);
    for (a, b) in back.to_features().iter().zip(req.to_features()) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
    let engine = PatternEngine::new(ArrayGeometry::default());
    let cfg = OptimizerConfig { budget: 60, ..OptimizerConfig::default() };
    let rep = representative_for(&engine, &model, 0, &cfg).unwrap();
    let direct = optimize_matrix(&engine, &back, &cfg).unwrap();
    assert_eq!(rep, direct);
}
