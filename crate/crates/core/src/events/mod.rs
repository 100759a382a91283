//! Event streams: domain types, on-disk formats, preprocessing and batching.

mod format;
mod preprocess;

pub use format::{
    parse_event_file, parse_ground_truth_csv, write_event_file, write_ground_truth_csv, EventFormat,
};
pub use preprocess::{remove_hot_pixels, rescale_events, subsample_events, DEFAULT_HOT_PIXEL_K};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn from_sign(p: i64) -> Option<Self> {
        match p {
            1 => Some(Polarity::Positive),
            -1 => Some(Polarity::Negative),
            _ => None,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Polarity::Positive => 1,
            Polarity::Negative => -1,
        }
    }
}

/// One asynchronous sensor sample. Coordinates are in pixels (real-valued so
/// that rescaled streams keep sub-pixel positions), time is in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub polarity: Polarity,
}

impl Event {
    pub fn new(x: f64, y: f64, t: f64, polarity: Polarity) -> Self {
        Self { x, y, t, polarity }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SensorGeometry {
    width: u32,
    height: u32,
}

impl SensorGeometry {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "sensor geometry must be at least 1x1, got {width}x{height}"
            )));
        }
        Ok(Self { width, height })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Number of pixels `M`.
    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// True when `(x, y)` falls inside `[0, width) x [0, height)`.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64
    }

    /// Image center, the focus of expansion under pure ventral motion.
    pub fn center(&self) -> (f64, f64) {
        (self.width as f64 / 2.0, self.height as f64 / 2.0)
    }
}

/// A time-ordered event sequence bound to a sensor geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    events: Vec<Event>,
    geometry: SensorGeometry,
}

impl EventStream {
    /// Validates and builds a stream. Events are stably sorted by time if
    /// they are not already ordered.
    pub fn new(mut events: Vec<Event>, geometry: SensorGeometry) -> Result<Self> {
        for (i, e) in events.iter().enumerate() {
            check_event(e, &geometry).map_err(|msg| Error::Validation(format!("event {i}: {msg}")))?;
        }
        if !events.windows(2).all(|w| w[0].t <= w[1].t) {
            events.sort_by(|a, b| a.t.total_cmp(&b.t));
        }
        Ok(Self { events, geometry })
    }

    pub fn empty(geometry: SensorGeometry) -> Self {
        Self {
            events: Vec::new(),
            geometry,
        }
    }

    /// Builds a stream from events already known to be sorted and in bounds.
    pub(crate) fn from_parts_unchecked(events: Vec<Event>, geometry: SensorGeometry) -> Self {
        debug_assert!(events.windows(2).all(|w| w[0].t <= w[1].t));
        Self { events, geometry }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }
}

fn check_event(e: &Event, geometry: &SensorGeometry) -> std::result::Result<(), String> {
    if !e.x.is_finite() || !e.y.is_finite() {
        return Err(format!("non-finite coordinates ({}, {})", e.x, e.y));
    }
    if !(e.t >= 0.0) || !e.t.is_finite() {
        return Err(format!("invalid timestamp {}", e.t));
    }
    if !geometry.contains(e.x, e.y) {
        return Err(format!(
            "coordinates ({}, {}) outside {}x{} sensor",
            e.x, e.y, geometry.width, geometry.height
        ));
    }
    Ok(())
}

/// A finite window of events with timestamps normalized to `[0, tau]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventBatch {
    events: Vec<Event>,
    tau: f64,
    geometry: SensorGeometry,
    window_start: f64,
}

impl EventBatch {
    /// Builds a batch from events whose timestamps are already relative to
    /// the window start.
    pub fn new(events: Vec<Event>, tau: f64, geometry: SensorGeometry) -> Result<Self> {
        Self::with_window_start(events, tau, geometry, 0.0)
    }

    pub fn with_window_start(
        events: Vec<Event>,
        tau: f64,
        geometry: SensorGeometry,
        window_start: f64,
    ) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
        }
        for (i, e) in events.iter().enumerate() {
            check_event(e, &geometry).map_err(|msg| Error::Validation(format!("event {i}: {msg}")))?;
            if e.t > tau {
                return Err(Error::Validation(format!(
                    "event {i}: normalized time {} exceeds tau {tau}",
                    e.t
                )));
            }
        }
        Ok(Self {
            events,
            tau,
            geometry,
            window_start,
        })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    /// Absolute time at which this batch's window opens.
    pub fn window_start(&self) -> f64 {
        self.window_start
    }

    /// Absolute time at which this batch's window closes.
    pub fn window_end(&self) -> f64 {
        self.window_start + self.tau
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Splits a stream into consecutive windows `[k*tau, (k+1)*tau)` anchored at
/// absolute time zero, covering the stream's time span. Windows without
/// events are kept as empty batches.
pub fn batch_stream(stream: &EventStream, tau: f64) -> Result<Vec<EventBatch>> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    let events = stream.events();
    let (Some(first), Some(last)) = (events.first(), events.last()) else {
        return Ok(Vec::new());
    };
    let first_window = (first.t / tau).floor() as u64;
    let last_window = (last.t / tau).floor() as u64;

    let mut buckets: Vec<Vec<Event>> = vec![Vec::new(); (last_window - first_window + 1) as usize];
    for e in events {
        let k = ((e.t / tau).floor() as u64).clamp(first_window, last_window);
        let start = k as f64 * tau;
        let t_rel = (e.t - start).clamp(0.0, tau);
        buckets[(k - first_window) as usize].push(Event { t: t_rel, ..*e });
    }

    Ok(buckets
        .into_iter()
        .enumerate()
        .map(|(i, events)| EventBatch {
            events,
            tau,
            geometry: stream.geometry(),
            window_start: (first_window + i as u64) as f64 * tau,
        })
        .collect())
}
