use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use floorloc::mcl::{low_variance_resample, motion_update, weight_update_log, OdometryDelta};
use floorloc::sensormodels::{BeamModel, PreparedDetections};
use floorloc::simulate::{default_world_spec, twin_room_world_spec};
use floorloc::worldmap::{compute_distance_field, VisibilityIndex, DEFAULT_ANGULAR_RESOLUTION};
use floorloc::Pose2D;
use floorloc_bench::Scene;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn updates(c: &mut Criterion) {
    let scene = Scene::new(default_world_spec(1), Pose2D::new(4.0, 3.5, 0.3), 10_000);
    let endpoints = scene.scan.strided_endpoints(10);
    let beam = BeamModel::new(6.0);
    c.bench_function("beam_update_10k", |b| {
        b.iter_batched_ref(
            || scene.particles.clone(),
            |set| weight_update_log(set, |p| beam.mean_log_likelihood(&endpoints, p, &scene.field)),
            BatchSize::LargeInput,
        )
    });
    c.bench_function("semantic_update_10k", |b| {
        b.iter_batched_ref(
            || scene.particles.clone(),
            |set| {
                let prepared = PreparedDetections::new(&scene.detections, &scene.index, 0.5);
                weight_update_log(set, |p| prepared.log_likelihood(p, &scene.index))
            },
            BatchSize::LargeInput,
        )
    });
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let delta = OdometryDelta { timestamp: 0.0, dx: 0.012, dy: 0.0, dtheta: 0.002 };
    c.bench_function("motion_update_10k", |b| {
        b.iter_batched_ref(
            || scene.particles.clone(),
            |set| motion_update(set, &delta, [0.15; 3], 0.01, &mut rng),
            BatchSize::LargeInput,
        )
    });
    c.bench_function("resample_10k", |b| b.iter(|| low_variance_resample(&scene.particles, &mut rng)));
    c.bench_function("distance_field_default_world", |b| {
        b.iter(|| compute_distance_field(scene.world.grid(), 15.0).unwrap())
    });
}

fn index_build(c: &mut Criterion) {
    let scene = Scene::new(twin_room_world_spec("plant"), Pose2D::new(4.0, 3.0, 0.0), 100);
    let mut group = c.benchmark_group("visibility_index");
    group.sample_size(10);
    group.bench_function("twin_rooms", |b| {
        b.iter(|| VisibilityIndex::build(scene.world.grid(), scene.world.map(), DEFAULT_ANGULAR_RESOLUTION).unwrap())
    });
    group.finish();
}

criterion_group!(benches, updates, index_build);
criterion_main!(benches);
