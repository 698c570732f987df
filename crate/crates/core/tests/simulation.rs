use floorloc::eval::{evaluate, render_frame, replay_into, ConvergenceCriteria, RunConfig, WorldAssets};
use floorloc::mcl::{Filter, Mode, Particle, ParticleSet};
use floorloc::sensormodels::bearing_set_distance;
use floorloc::simulate::{
    dead_reckon, default_cameras, simulate_detections, simulate_run, twin_room_tour, twin_room_world_spec, Frame,
    ObjectSpec, RoomSpec, SensorNoiseSpec, SensorRig, SimWorld, WorldSpec,
};
use floorloc::worldmap::{VisibilityIndex, DEFAULT_ANGULAR_RESOLUTION, DEFAULT_CLASS_VOCABULARY};
use floorloc::{Pose2D, Rect};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

fn twin() -> SimWorld {
    SimWorld::new(twin_room_world_spec("plant")).unwrap()
}

#[test]
fn noiseless_detections_match_the_class_index() {
    let world = twin();
    let index = VisibilityIndex::build(world.grid(), world.map(), DEFAULT_ANGULAR_RESOLUTION).unwrap();
    let cams = default_cameras();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (x0, y0, x1, y1) = world.grid().bounds();
    let mut checked = 0;
    while checked < 300 {
        let pose = Pose2D::new(
            rng.random_range(x0..x1),
            rng.random_range(y0..y1),
            rng.random_range(-3.0..3.0),
        );
        if !world.grid().is_free_at(pose.position()) {
            continue;
        }
        let cell = index.cell_of(pose.position()).unwrap();
        let raw = simulate_detections(&world, &pose, &cams, &SensorNoiseSpec::noiseless(), &Frame::default(), &mut rng);
        for r in raw {
            let d = r.resolve(&cams).unwrap();
            let k = index.class_index(&d.class_label).unwrap();
            let bearing = d.bearing.rotated(pose.theta);
            let dist = bearing_set_distance(&index.bearings_at_cell(cell, k), bearing);
            // Pixel quantization of the box center only.
            assert!(dist < 1e-3, "{} at {pose:?}: d = {dist}", d.class_label);
            checked += 1;
        }
    }
}


#[test]
fn miss_rate_is_binomial() {
    let spec = WorldSpec {
        width: 6.0,
        height: 6.0,
        resolution: 0.05,
        wall_thickness: 0.1,
        rooms: vec![RoomSpec { name: "r".into(), category: "kitchen".into(), rect: Rect::from_bounds(0.5, 0.5, 5.5, 5.5) }],
        doors: vec![],
        objects: vec![ObjectSpec::new("sink", Rect::new(4.5, 3.0, 0.4, 0.4))],
        class_vocabulary: DEFAULT_CLASS_VOCABULARY.iter().map(|s| s.to_string()).collect(),
        dynamic_classes: vec!["person".into()],
    };
    let world = SimWorld::new(spec).unwrap();
    let noise = SensorNoiseSpec { miss_probability: 0.1, ..SensorNoiseSpec::noiseless() };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 4000;
    let pose = Pose2D::new(2.0, 3.0, 0.0);
    let seen = (0..n)
        .filter(|_| !simulate_detections(&world, &pose, &default_cameras(), &noise, &Frame::default(), &mut rng).is_empty())
        .count();
    // sd of the miss count is sqrt(n p (1-p)) = 19.
    let misses = (n - seen) as f64;
    assert!((misses - 400.0).abs() < 4.0 * 19.0, "{misses}");
}

#[test]
fn dead_reckoning_drift_grows_with_distance() {
    let world = twin();
    let rig = SensorRig::default();
    let noise = SensorNoiseSpec::default();
    let tour = twin_room_tour();
    let (mut early, mut late) = (0.0, 0.0);
    for seed in 0..12 {
        let log = simulate_run(&world, &tour, &noise, &rig, &[], seed).unwrap();
        let truth = log.ground_truth();
        let dr = dead_reckon(&log);
        let err = |k: usize| {
            let (t, p) = dr[k];
            let g = truth.interpolate(t).unwrap();
            (p.x - g.x).hypot(p.y - g.y)
        };
        early += err(dr.len() / 10);
        late += err(dr.len() - 1);
    }
    assert!(late > 2.0 * early, "early {early}, late {late}");
}

#[test]
fn known_start_tracks_the_twin_tour() {
    let mut config = RunConfig::default();
    config.world = twin_room_world_spec("plant");
    config.trajectory = twin_room_tour();
    config.filter = config.filter.with_mode(Mode::Smcl).with_particles(2000);
    let assets = WorldAssets::build(&config, None).unwrap();
    let log = simulate_run(&assets.world, &config.trajectory, &config.noise, &config.rig, &[], 5).unwrap();
    let truth = log.ground_truth();
    let start = truth.samples()[0].pose;
    let set = ParticleSet {
        particles: vec![Particle { pose: start, weight: 1.0 / 2000.0 }; 2000],
    };
    let mut filter = Filter::with_particles(config.filter.clone(), assets.maps(), set, 5).unwrap();
    let estimates = replay_into(&mut filter, &log, |_, _| {}).unwrap();
    let result = evaluate(&estimates, &truth, &ConvergenceCriteria::default()).unwrap();
    assert!(result.success, "{result:?}");
    assert!(result.convergence_time.unwrap() < 1.0, "{result:?}");
    assert!(result.ate_translation.unwrap() < 0.25, "{result:?}");
}

#[test]
fn rendered_frame_hash_is_frozen() {
    let world = twin();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let set = ParticleSet {
        particles: (0..200)
            .map(|_| Particle {
                pose: Pose2D::new(rng.random_range(3.0..7.0), rng.random_range(1.0..5.0), 0.0),
                weight: 1.0 / 200.0,
            })
            .collect(),
    };
    let img = render_frame(world.grid(), world.map(), &set, Some(&Pose2D::new(5.0, 3.0, 0.0)), Some(&Pose2D::new(5.2, 3.1, 0.0)));
    let hash = hex::encode(Sha256::digest(img.as_raw()));
    assert_eq!((img.width(), img.height()), (world.grid().width() as u32, world.grid().height() as u32));
    assert_eq!(hash, "ce2833a1015be339591d5cb4976c09673762a0fde6083e1ed098c51050e6b80b");
}
