//! Motion-compensated event images, their contrast, and an upper bound on
//! contrast over an interval of velocities.
//!
//! For a candidate velocity `nu`, every event is warped to the batch end and
//! binned to pixel `(floor(x'), floor(y'))`; events warped off the sensor are
//! dropped. The contrast is the variance of the resulting count image over
//! all `M` pixels.
//!
//! Over an interval `[nu_l, nu_r]` each event's warps sweep the segment
//! between its warps at the two endpoints, so counting every pixel that
//! segment touches bounds the count image pixelwise from above. Counting only
//! the events whose whole segment stays on the sensor bounds the image mean
//! from below. Together they give
//! `c_bar = sum(H_bar^2) / M - mu_lower^2 >= C(nu)` for every `nu` in the
//! interval, with equality for a singleton interval.

mod raster;

pub use raster::{for_each_segment_pixel, rasterize_segment};

use rayon::prelude::*;

use crate::error::Result;
use crate::events::{EventBatch, SensorGeometry};
use crate::geometry::{warp_scale, CenteredFrame, Point, VelocityInterval};

/// Batches at least this large are accumulated with per-chunk private
/// images merged afterwards.
const PARALLEL_MIN_EVENTS: usize = 4096;
const PARALLEL_CHUNK: usize = 2048;

/// Dense per-pixel counts, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelGrid {
    geometry: SensorGeometry,
    counts: Vec<f64>,
}

impl PixelGrid {
    pub fn zeros(geometry: SensorGeometry) -> Self {
        Self {
            geometry,
            counts: vec![0.0; geometry.pixel_count()],
        }
    }

    pub fn from_counts(geometry: SensorGeometry, counts: Vec<f64>) -> Option<Self> {
        (counts.len() == geometry.pixel_count()).then_some(Self { geometry, counts })
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.counts[self.index(x, y)]
    }

    #[inline]
    fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.geometry.width() as usize + x as usize
    }

    #[inline]
    fn increment(&mut self, x: u32, y: u32) {
        let idx = self.index(x, y);
        self.counts[idx] += 1.0;
    }

    fn merge(mut self, other: &PixelGrid) -> Self {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self
    }

    pub fn sum(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.counts.iter().map(|c| c * c).sum()
    }

    pub fn max(&self) -> f64 {
        self.counts.iter().copied().fold(0.0, f64::max)
    }

    /// Plain-text PGM (P2) with `maxval` equal to the largest count.
    pub fn to_pgm(&self) -> String {
        use std::fmt::Write as _;
        let w = self.geometry.width() as usize;
        let maxval = (self.max().round() as u64).max(1);
        let mut out = format!("P2\n{} {}\n{}\n", w, self.geometry.height(), maxval);
        for row in self.counts.chunks(w) {
            let line: Vec<String> = row.iter().map(|c| (c.round() as u64).to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }
}

/// Motion-compensated event image `H(u; nu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventImage {
    grid: PixelGrid,
    in_image_events: usize,
}

impl EventImage {
    /// Wraps a count grid; the number of in-image events is taken as the
    /// grid sum.
    pub fn from_grid(grid: PixelGrid) -> Self {
        let in_image_events = grid.sum().round() as usize;
        Self {
            grid,
            in_image_events,
        }
    }

    pub fn grid(&self) -> &PixelGrid {
        &self.grid
    }

    pub fn counts(&self) -> &[f64] {
        self.grid.counts()
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.grid.get(x, y)
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.grid.geometry()
    }

    pub fn in_image_events(&self) -> usize {
        self.in_image_events
    }

    /// Mean pixel value `mu = in_image_events / M`.
    pub fn mean(&self) -> f64 {
        self.in_image_events as f64 / self.geometry().pixel_count() as f64
    }

    /// Variance of the pixel values, `(1/M) sum (H - mu)^2`.
    pub fn contrast(&self) -> f64 {
        let m = self.geometry().pixel_count() as f64;
        let mu = self.mean();
        self.counts().iter().map(|h| (h - mu) * (h - mu)).sum::<f64>() / m
    }

    /// The same quantity in expanded form, `(1/M) sum H^2 - mu^2`.
    pub fn contrast_expanded(&self) -> f64 {
        let m = self.geometry().pixel_count() as f64;
        let mu = self.mean();
        self.grid.sum_of_squares() / m - mu * mu
    }

    pub fn to_pgm(&self) -> String {
        self.grid.to_pgm()
    }
}

/// Upper-bound image `H_bar(u; V)` together with the number of events whose
/// endpoint segment lies entirely on the sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperBoundImage {
    grid: PixelGrid,
    inside_segments: usize,
}

impl UpperBoundImage {
    pub fn grid(&self) -> &PixelGrid {
        &self.grid
    }

    pub fn counts(&self) -> &[f64] {
        self.grid.counts()
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.grid.get(x, y)
    }

    pub fn inside_segments(&self) -> usize {
        self.inside_segments
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastBound {
    /// Sum of squared upper-bound pixel counts.
    pub s_bar: f64,
    /// Lower bound on the image mean over the interval.
    pub mu_lower: f64,
    /// `s_bar / M - mu_lower^2`.
    pub c_bar: f64,
}

impl ContrastBound {
    pub fn from_image(image: &UpperBoundImage) -> Self {
        let m = image.grid.geometry().pixel_count() as f64;
        let s_bar = image.grid.sum_of_squares();
        let mu_lower = image.inside_segments as f64 / m;
        Self {
            s_bar,
            mu_lower,
            c_bar: s_bar / m - mu_lower * mu_lower,
        }
    }
}

/// Runs `per_event` over all events into one grid, privatizing grids per
/// chunk on large batches. Returns the grid and the summed per-event tallies.
fn reduce_events<E, F>(events: &[E], geometry: SensorGeometry, per_event: F) -> (PixelGrid, usize)
where
    E: Sync,
    F: Fn(&E, &mut PixelGrid) -> usize + Sync,
{
    let run = |chunk: &[E]| {
        let mut grid = PixelGrid::zeros(geometry);
        let tally = chunk.iter().map(|e| per_event(e, &mut grid)).sum::<usize>();
        (grid, tally)
    };
    if events.len() < PARALLEL_MIN_EVENTS {
        return run(events);
    }
    // counts are integer-valued, so merge order cannot change the result
    events
        .par_chunks(PARALLEL_CHUNK)
        .map(run)
        .reduce_with(|(a, na), (b, nb)| (a.merge(&b), na + nb))
        .unwrap_or_else(|| (PixelGrid::zeros(geometry), 0))
}

/// Event coordinates relative to the focus of expansion, with their
/// normalized timestamps. Reused across the many image evaluations a solve
/// performs on one batch.
#[derive(Debug, Clone)]
pub struct CenteredBatch {
    points: Vec<(Point, f64)>,
    tau: f64,
    geometry: SensorGeometry,
    frame: CenteredFrame,
}

impl CenteredBatch {
    pub fn new(batch: &EventBatch) -> Self {
        let frame = CenteredFrame::new(batch.geometry());
        let points = batch
            .events()
            .iter()
            .map(|e| (frame.to_centered(e.x, e.y), e.t))
            .collect();
        Self {
            points,
            tau: batch.tau(),
            geometry: batch.geometry(),
            frame,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    /// Pixel-frame position of event `(p, t)` warped with velocity `nu`.
    /// The caller has validated `1 + nu * tau > 0`.
    #[inline]
    fn warp_unchecked(&self, p: Point, t: f64, nu: f64) -> Point {
        let s = (1.0 + nu * t) / (1.0 + nu * self.tau);
        self.frame.to_pixel(p.scale(s))
    }

    pub fn accumulate(&self, nu: f64) -> Result<EventImage> {
        warp_scale(0.0, nu, self.tau)?;
        let geometry = self.geometry;
        let (grid, in_image_events) = reduce_events(&self.points, geometry, |&(p, t), grid| {
            let q = self.warp_unchecked(p, t, nu);
            if geometry.contains(q.x, q.y) {
                grid.increment(q.x as u32, q.y as u32);
                1
            } else {
                0
            }
        });
        Ok(EventImage {
            grid,
            in_image_events,
        })
    }

    pub fn contrast(&self, nu: f64) -> Result<f64> {
        Ok(self.accumulate(nu)?.contrast())
    }

    pub fn upper_bound_image(&self, interval: VelocityInterval) -> Result<UpperBoundImage> {
        let (nu_l, nu_r) = (interval.lo(), interval.hi());
        warp_scale(0.0, nu_l, self.tau)?;
        warp_scale(0.0, nu_r, self.tau)?;
        let geometry = self.geometry;
        let (grid, inside_segments) = reduce_events(&self.points, geometry, |&(p, t), grid| {
            let a = self.warp_unchecked(p, t, nu_l);
            let b = self.warp_unchecked(p, t, nu_r);
            for_each_segment_pixel(a, b, geometry, |i, j| grid.increment(i, j));
            // the half-open sensor rectangle is convex, so both endpoints
            // inside means every intermediate warp bins to a valid pixel
            usize::from(geometry.contains(a.x, a.y) && geometry.contains(b.x, b.y))
        });
        Ok(UpperBoundImage {
            grid,
            inside_segments,
        })
    }

    pub fn bound(&self, interval: VelocityInterval) -> Result<ContrastBound> {
        Ok(ContrastBound::from_image(&self.upper_bound_image(interval)?))
    }
}

/// Motion-compensated image of `batch` under velocity `nu`.
pub fn accumulate_image(batch: &EventBatch, nu: f64) -> Result<EventImage> {
    CenteredBatch::new(batch).accumulate(nu)
}

/// Contrast (pixel variance) of an event image.
pub fn image_contrast(image: &EventImage) -> f64 {
    image.contrast()
}

pub fn upper_bound_image(batch: &EventBatch, interval: VelocityInterval) -> Result<UpperBoundImage> {
    CenteredBatch::new(batch).upper_bound_image(interval)
}

pub fn bound_terms(batch: &EventBatch, interval: VelocityInterval) -> Result<ContrastBound> {
    CenteredBatch::new(batch).bound(interval)
}
