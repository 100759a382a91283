//! Synthetic ventral-landing event streams with analytic ground truth.
//!
//! A pinhole camera with focal length `f` descends at constant speed `nu`
//! toward a fronto-parallel plane at initial depth `z0`. A scene point
//! `(X, Y)` on the plane projects, in FOE-centered pixels, to
//! `p(t) = f (X, Y) / (z0 + nu t)`, so its image radius grows as
//! `r(t) = r0 z0 / (z0 + nu t)`. Each point fires an event every time its
//! radius has grown by `event_spacing_px` since its last event, at the exact
//! time obtained by inverting `r(t)`. Points stop firing once they leave the
//! sensor. Gaussian jitter and uniform clutter are optional.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::events::{Event, EventStream, Polarity, SensorGeometry};
use crate::geometry::{continuous_divergence, CenteredFrame, Point};

pub const GROUND_TRUTH_RATE_HZ: f64 = 33.0;

const CLUTTER_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Depth of the surface at `t = 0`.
    pub z0: f64,
    /// Vertical velocity (depth units per second, `<= 0` for descent).
    pub nu: f64,
    /// Focal length in pixels.
    pub focal_length: f64,
    pub geometry: SensorGeometry,
    /// Length of the simulated run in seconds.
    pub duration: f64,
    pub n_points: usize,
    pub event_spacing_px: f64,
    /// Standard deviation of Gaussian pixel jitter added to every trajectory event.
    pub noise_px: f64,
    /// Clutter events added, as a fraction of the trajectory event count.
    pub noise_event_fraction: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(geometry: SensorGeometry, z0: f64, nu: f64, duration: f64) -> Self {
        Self {
            z0,
            nu,
            focal_length: geometry.width().max(geometry.height()) as f64,
            geometry,
            duration,
            n_points: 200,
            event_spacing_px: 1.0,
            noise_px: 0.0,
            noise_event_fraction: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.z0 > 0.0) || !self.z0.is_finite() {
            return fail(format!("z0 must be positive, got {}", self.z0));
        }
        if !(self.nu <= 0.0) || !self.nu.is_finite() {
            return fail(format!("nu must be <= 0 for a descent, got {}", self.nu));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return fail(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.z0 + self.nu * self.duration > 0.0) {
            return fail(format!(
                "surface reached before the end of the run: z0 + nu*duration = {}",
                self.z0 + self.nu * self.duration
            ));
        }
        if !(self.focal_length > 0.0) {
            return fail(format!("focal length must be positive, got {}", self.focal_length));
        }
        if self.n_points == 0 {
            return fail("n_points must be at least 1".into());
        }
        if !(self.event_spacing_px > 0.0) {
            return fail(format!("event spacing must be positive, got {}", self.event_spacing_px));
        }
        if !(self.noise_px >= 0.0) {
            return fail(format!("noise_px must be non-negative, got {}", self.noise_px));
        }
        if !(self.noise_event_fraction >= 0.0) {
            return fail(format!(
                "noise event fraction must be non-negative, got {}",
                self.noise_event_fraction
            ));
        }
        Ok(())
    }

    /// Normalized velocity of a batch starting at `t0`, i.e. `nu` after
    /// rescaling the depth at `t0` to one.
    pub fn normalized_velocity(&self, t0: f64) -> Result<f64> {
        let depth = self.z0 + self.nu * t0;
        if !(depth > 0.0) {
            return Err(Error::Domain(format!("depth {depth} <= 0 at t = {t0}")));
        }
        Ok(self.nu / depth)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub samples: Vec<(f64, f64)>,
}

pub fn ground_truth_divergence(config: &SimConfig, t: f64) -> Result<f64> {
    continuous_divergence(config.nu, config.z0, t)
}

/// Scene point on the surface plane.
#[derive(Debug, Clone, Copy)]
struct ScenePoint {
    x: f64,
    y: f64,
}

impl ScenePoint {
    fn project(&self, config: &SimConfig, t: f64) -> Point {
        let depth = config.z0 + config.nu * t;
        Point::new(config.focal_length * self.x / depth, config.focal_length * self.y / depth)
    }
}

fn trajectory_events(config: &SimConfig, point: ScenePoint, index: u64) -> Vec<Event> {
    let frame = CenteredFrame::new(config.geometry);
    let r0 = point.project(config, 0.0).norm();
    if config.nu == 0.0 || r0 == 0.0 {
        return Vec::new();
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index);
    let jitter = (config.noise_px > 0.0).then(|| Normal::new(0.0, config.noise_px).unwrap());

    let mut events = Vec::new();
    for k in 1u64.. {
        let r_k = r0 + k as f64 * config.event_spacing_px;
        // r0 z0 / (z0 + nu t) = r_k
        let t = config.z0 / config.nu * (r0 / r_k - 1.0);
        if t > config.duration {
            break;
        }
        let pos = frame.to_pixel(point.project(config, t));
        if !config.geometry.contains(pos.x, pos.y) {
            break;
        }
        let polarity = if rng.random_bool(0.5) {
            Polarity::Positive
        } else {
            Polarity::Negative
        };
        let (mut x, mut y) = (pos.x, pos.y);
        if let Some(n) = &jitter {
            x += n.sample(&mut rng);
            y += n.sample(&mut rng);
            if !config.geometry.contains(x, y) {
                continue;
            }
        }
        events.push(Event::new(x, y, t, polarity));
    }
    events
}

/// Generates a landing event stream and its ground-truth divergence sampled
/// at 33 Hz.
pub fn generate_landing_events(config: &SimConfig) -> Result<(EventStream, GroundTruth)> {
    config.validate()?;
    let g = config.geometry;
    let (w, h) = (g.width() as f64, g.height() as f64);
    let frame = CenteredFrame::new(g);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let points: Vec<ScenePoint> = (0..config.n_points)
        .map(|_| {
            let c = frame.to_centered(rng.random_range(0.0..w), rng.random_range(0.0..h));
            // invert the projection at depth z0
            ScenePoint {
                x: c.x * config.z0 / config.focal_length,
                y: c.y * config.z0 / config.focal_length,
            }
        })
        .collect();

    let per_point: Vec<Vec<Event>> = points
        .par_iter()
        .enumerate()
        .map(|(i, &p)| trajectory_events(config, p, i as u64 + 1))
        .collect();
    let mut events: Vec<Event> = per_point.into_iter().flatten().collect();

    let n_clutter = (config.noise_event_fraction * events.len() as f64).round() as usize;
    if n_clutter > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(CLUTTER_STREAM);
        for _ in 0..n_clutter {
            let polarity = if rng.random_bool(0.5) {
                Polarity::Positive
            } else {
                Polarity::Negative
            };
            events.push(Event::new(
                rng.random_range(0.0..w),
                rng.random_range(0.0..h),
                rng.random_range(0.0..=config.duration),
                polarity,
            ));
        }
    }

    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    let stream = EventStream::new(events, g)?;

    let n_samples = (config.duration * GROUND_TRUTH_RATE_HZ + 1e-9).floor() as usize + 1;
    let samples = (0..n_samples)
        .map(|k| {
            let t = k as f64 / GROUND_TRUTH_RATE_HZ;
            Ok((t, ground_truth_divergence(config, t)?))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok((stream, GroundTruth { samples }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::batch_stream;
    use crate::geometry::radial_warp;

    fn geom() -> SensorGeometry {
        SensorGeometry::new(64, 64).unwrap()
    }

    #[test]
    fn static_scene_is_silent() {
        let cfg = SimConfig { n_points: 50, ..SimConfig::new(geom(), 1.0, 0.0, 2.0) };
        let (s, gt) = generate_landing_events(&cfg).unwrap();
        assert!(s.is_empty());
        assert!(gt.samples.iter().all(|&(_, d)| d == 0.0));

        let cfg = SimConfig { noise_event_fraction: 0.5, ..cfg };
        assert!(generate_landing_events(&cfg).unwrap().0.is_empty());
    }

    #[test]
    fn first_event_time_closed_form() {
        // point at centered (10, 0), z0 = 1, nu = -0.5: r = 11 when
        // 1/(1 - 0.5 t) = 1.1, i.e. t = 2 (1 - 1/1.1)
        let cfg = SimConfig::new(geom(), 1.0, -0.5, 1.0);
        let p = ScenePoint { x: 10.0 / cfg.focal_length, y: 0.0 };
        let events = trajectory_events(&cfg, p, 1);
        let expected = (1.0 / 0.5) * (1.0 - 1.0 / 1.1);
        assert!((events[0].t - expected).abs() < 1e-12);
        assert!((expected - 0.181_818).abs() < 1e-6);
        assert!((events[0].x - 43.0).abs() < 1e-9 && (events[0].y - 32.0).abs() < 1e-12);
        assert!((events[1].x - 44.0).abs() < 1e-9);
    }

    #[test]
    fn cheirality_and_sign_checked() {
        assert!(matches!(
            generate_landing_events(&SimConfig::new(geom(), 1.0, -0.5, 2.0)),
            Err(Error::Config(_))
        ));
        assert!(generate_landing_events(&SimConfig::new(geom(), 1.0, 0.1, 2.0)).is_err());
        let cfg = SimConfig { n_points: 0, ..SimConfig::new(geom(), 1.0, -0.1, 1.0) };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn ground_truth_values() {
        let cfg = SimConfig::new(geom(), 1.0, -0.2, 1.0);
        assert_eq!(ground_truth_divergence(&cfg, 0.0).unwrap(), -0.2);
        let cfg2 = SimConfig::new(geom(), 2.0, -0.2, 6.0);
        assert!((ground_truth_divergence(&cfg2, 5.0).unwrap() + 0.2).abs() < 1e-15);
        assert!(ground_truth_divergence(&cfg, 5.0).is_err());
        let (_, gt) = generate_landing_events(&SimConfig { n_points: 3, ..cfg }).unwrap();
        assert_eq!(gt.samples.len(), 34);
        for &(t, d) in &gt.samples {
            assert_eq!(d, -0.2 / (1.0 - 0.2 * t));
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = SimConfig {
            noise_px: 0.4,
            noise_event_fraction: 0.1,
            seed: 17,
            ..SimConfig::new(geom(), 2.0, -0.5, 2.0)
        };
        let a = generate_landing_events(&cfg).unwrap();
        let b = generate_landing_events(&cfg).unwrap();
        assert_eq!(a, b);
        let c = generate_landing_events(&SimConfig { seed: 18, ..cfg }).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn clutter_fraction_respected() {
        let base = SimConfig { seed: 3, ..SimConfig::new(geom(), 2.0, -0.5, 2.0) };
        let clean = generate_landing_events(&base).unwrap().0.len();
        let noisy = generate_landing_events(&SimConfig { noise_event_fraction: 0.1, ..base })
            .unwrap()
            .0
            .len();
        assert_eq!(noisy - clean, (0.1 * clean as f64).round() as usize);
    }

    #[test]
    fn trajectory_events_collapse_under_true_warp() {
        let cfg = SimConfig { n_points: 1, seed: 5, ..SimConfig::new(geom(), 2.0, -0.6, 2.0) };
        for seed in 0..20u64 {
            let cfg = SimConfig { seed, ..cfg };
            let (stream, _) = generate_landing_events(&cfg).unwrap();
            let frame = CenteredFrame::new(cfg.geometry);
            for batch in batch_stream(&stream, 0.5).unwrap() {
                let nu_b = cfg.normalized_velocity(batch.window_start()).unwrap();
                let warped: Vec<Point> = batch
                    .events()
                    .iter()
                    .map(|e| radial_warp(frame.to_centered(e.x, e.y), e.t, nu_b, 0.5).unwrap())
                    .collect();
                if let Some(first) = warped.first() {
                    for p in &warped {
                        assert!((*p - *first).norm() <= cfg.noise_px + 1.0);
                        assert!((*p - *first).norm() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn event_rate_grows_during_descent() {
        let cfg = SimConfig { n_points: 300, seed: 2, ..SimConfig::new(geom(), 3.0, -0.5, 3.0) };
        let (stream, _) = generate_landing_events(&cfg).unwrap();
        let counts: Vec<usize> = batch_stream(&stream, 0.5).unwrap().iter().map(|b| b.len()).collect();
        assert_eq!(counts.len(), 6);
        // points leave the frame as the scene expands, so compare the early
        // batches where few have exited
        assert!(counts[1] >= counts[0], "{counts:?}");
    }
}
