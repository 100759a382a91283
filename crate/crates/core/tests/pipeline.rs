use ventral::contrast::accumulate_image;
use ventral::events::{
    batch_stream, parse_event_file, parse_ground_truth_csv, write_event_file, write_ground_truth_csv, Event,
    EventBatch, EventFormat, Polarity, SensorGeometry,
};
use ventral::geometry::{continuous_divergence, divergence_from_velocity};
use ventral::simulator::{generate_landing_events, SimConfig};
use ventral::solver::{estimate_stream_divergence, maximise_contrast_bnb, SolverParams};

fn landing(nu: f64, duration: f64, seed: u64) -> SimConfig {
    let mut cfg = SimConfig::new(SensorGeometry::new(160, 90).unwrap(), 1.0, nu, duration);
    cfg.n_points = 600;
    cfg.seed = seed;
    cfg
}

fn rel_err(estimate: f64, truth: f64) -> f64 {
    (estimate - truth).abs() / truth.abs()
}

#[test]
fn same_scene_point_collapses_to_one_bin() {
    // Trajectory of a point at centered (10.3, 5.3) at t=0 under normalized
    // velocity -0.4: p(t) = p0 / (1 - 0.4 t). Warping to tau=0.5 sends every
    // sample to p0 / 0.8 = (12.875, 6.625), i.e. pixel (44, 38) on 64x64.
    let g = SensorGeometry::new(64, 64).unwrap();
    let (cx, cy) = g.center();
    let at = |t: f64| {
        let s = 1.0 / (1.0 - 0.4 * t);
        Event::new(cx + 10.3 * s, cy + 5.3 * s, t, Polarity::Positive)
    };
    let batch = EventBatch::new(vec![at(0.1), at(0.3)], 0.5, g).unwrap();
    let image = accumulate_image(&batch, -0.4).unwrap();
    assert_eq!(image.get(44, 38), 2.0);
    assert_eq!(image.in_image_events(), 2);
}

#[test]
fn single_batch_velocity_recovered() {
    // Batch [0, 0.5) of a descent with nu=-0.4 from unit depth; truth at
    // the batch end is -0.4 / (1 - 0.2) = -0.5.
    let cfg = landing(-0.4, 0.5, 3);
    let (stream, _) = generate_landing_events(&cfg).unwrap();
    let batches = batch_stream(&stream, 0.5).unwrap();
    let batch = batches.iter().find(|b| b.window_start() == 0.0).unwrap();
    let params = SolverParams::default();
    let sol = maximise_contrast_bnb(batch, &params).unwrap();
    let d = divergence_from_velocity(sol.nu, 0.5).unwrap();
    let truth = continuous_divergence(-0.4, 1.0, 0.5).unwrap();
    assert!((truth + 0.5).abs() < 1e-12);
    assert!(rel_err(d, truth) <= 0.05, "{d} vs {truth}");
}

#[test]
fn stream_tracks_continuous_divergence() {
    let params = SolverParams::default();
    for (nu, duration) in [(-0.1, 5.0), (-0.3, 1.5), (-0.5, 1.0)] {
        for seed in 0..2 {
            let cfg = landing(nu, duration, seed);
            let (stream, _) = generate_landing_events(&cfg).unwrap();
            let batches = batch_stream(&stream, params.tau).unwrap();
            let estimates = estimate_stream_divergence(&batches, &params);
            assert!(!estimates.is_empty());
            let mut previous = 0.0;
            for est in &estimates {
                let sample = est.outcome.as_ref().unwrap();
                let truth = continuous_divergence(nu, 1.0, sample.t).unwrap();
                assert!(truth < previous, "truth grows in magnitude during descent");
                previous = truth;
                assert!(
                    rel_err(sample.divergence, truth) <= 0.05,
                    "nu={nu} seed={seed} t={}: {} vs {truth}",
                    sample.t,
                    sample.divergence
                );
            }
        }
    }
}

#[test]
fn simulated_files_round_trip() {
    let cfg = landing(-0.3, 1.0, 9);
    let (stream, truth) = generate_landing_events(&cfg).unwrap();

    let bin = parse_event_file(&write_event_file(&stream, EventFormat::Bin), EventFormat::Bin).unwrap();
    let csv = parse_event_file(&write_event_file(&stream, EventFormat::Csv), EventFormat::Csv).unwrap();
    for parsed in [&bin, &csv] {
        assert_eq!(parsed.len(), stream.len());
        assert_eq!(parsed.geometry(), stream.geometry());
        for (a, b) in parsed.events().iter().zip(stream.events()) {
            // timestamps are stored at microsecond resolution
            assert!((a.t - b.t).abs() <= 0.5e-6 + 1e-12);
            assert!((a.x - b.x).abs() < 1e-4 && (a.y - b.y).abs() < 1e-4);
            assert_eq!(a.polarity, b.polarity);
        }
    }

    let gt = parse_ground_truth_csv(&write_ground_truth_csv(&truth.samples)).unwrap();
    assert_eq!(gt, truth.samples);
}
