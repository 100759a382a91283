use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EventStream, SensorGeometry};
use crate::error::{Error, Result};

pub const DEFAULT_HOT_PIXEL_K: f64 = 10.0;

fn pixel_of(x: f64, y: f64) -> (u32, u32) {
    (x.floor() as u32, y.floor() as u32)
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Drops every event of pixels whose event count exceeds
/// `median + k * MAD` over the nonzero per-pixel counts.
///
/// The MAD is floored at one count: with integer counts a zero MAD would
/// otherwise flag any pixel a single event above the median.
pub fn remove_hot_pixels(stream: &EventStream, k: f64) -> Result<EventStream> {
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!("hot-pixel k must be positive, got {k}")));
    }
    if stream.is_empty() {
        return Ok(stream.clone());
    }

    let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
    for e in stream.events() {
        *counts.entry(pixel_of(e.x, e.y)).or_default() += 1;
    }

    let mut values: Vec<f64> = counts.values().map(|&c| c as f64).collect();
    values.sort_by(f64::total_cmp);
    let med = median(&values);
    let mut deviations: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    deviations.sort_by(f64::total_cmp);
    let mad = median(&deviations).max(1.0);
    let threshold = med + k * mad;

    let kept = stream
        .events()
        .iter()
        .filter(|e| counts[&pixel_of(e.x, e.y)] as f64 <= threshold)
        .copied()
        .collect();
    Ok(EventStream::from_parts_unchecked(kept, stream.geometry()))
}

/// Scales event coordinates onto a new sensor resolution.
pub fn rescale_events(stream: &EventStream, target: SensorGeometry) -> EventStream {
    let source = stream.geometry();
    if source == target {
        return stream.clone();
    }
    let sx = target.width() as f64 / source.width() as f64;
    let sy = target.height() as f64 / source.height() as f64;
    let (tw, th) = (target.width() as f64, target.height() as f64);

    let events = stream
        .events()
        .iter()
        .map(|e| {
            let mut out = *e;
            out.x = clamp_below(e.x * sx, tw);
            out.y = clamp_below(e.y * sy, th);
            out
        })
        .collect();
    EventStream::from_parts_unchecked(events, target)
}

fn clamp_below(v: f64, limit: f64) -> f64 {
    if v >= limit {
        limit.next_down()
    } else {
        v.max(0.0)
    }
}

/// Keeps each event independently with probability `keep_fraction`.
/// Deterministic for a given seed.
pub fn subsample_events(stream: &EventStream, keep_fraction: f64, seed: u64) -> Result<EventStream> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "keep fraction must lie in (0, 1], got {keep_fraction}"
        )));
    }
    if keep_fraction == 1.0 {
        return Ok(stream.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let events = stream
        .events()
        .iter()
        .filter(|_| rng.random_bool(keep_fraction))
        .copied()
        .collect();
    Ok(EventStream::from_parts_unchecked(events, stream.geometry()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{Event, Polarity};
    use proptest::prelude::*;

    fn stream_from_counts(counts: &[((u32, u32), usize)], geometry: SensorGeometry) -> EventStream {
        let mut events = Vec::new();
        let mut t = 0.0;
        // interleave pixels so ordering is observable
        let max = counts.iter().map(|c| c.1).max().unwrap_or(0);
        for round in 0..max {
            for &((px, py), n) in counts {
                if round < n {
                    events.push(Event::new(px as f64 + 0.5, py as f64 + 0.5, t, Polarity::Positive));
                    t += 1e-4;
                }
            }
        }
        EventStream::new(events, geometry).unwrap()
    }

    #[test]
    fn uniform_counts_unchanged() {
        let g = SensorGeometry::new(8, 8).unwrap();
        let counts: Vec<_> = (0..16).map(|i| ((i % 8, i / 8), 3)).collect();
        let s = stream_from_counts(&counts, g);
        assert_eq!(remove_hot_pixels(&s, 10.0).unwrap(), s);
    }

    #[test]
    fn single_hot_pixel_removed() {
        // Counts: 10 pixels with 1 event, 9 with 2 and one with 1000.
        // Sorted nonzero counts [1 x10, 2 x9, 1000]: middle pair (1, 2), median 1.5.
        // Deviations: 0.5 x19, 998.5 -> MAD 0.5, floored to 1.
        // Threshold 1.5 + 5 * 1 = 6.5: only the 1000-count pixel exceeds it.
        let g = SensorGeometry::new(16, 16).unwrap();
        let mut counts: Vec<_> = (0..10).map(|i| ((i, 0), 1)).collect();
        counts.extend((0..9).map(|i| ((i, 1), 2)));
        counts.push(((5, 5), 1000));
        let s = stream_from_counts(&counts, g);
        let out = remove_hot_pixels(&s, 5.0).unwrap();
        assert_eq!(out.len(), 10 + 18);
        assert!(out.events().iter().all(|e| pixel_of(e.x, e.y) != (5, 5)));
        assert!(out.events().windows(2).all(|w| w[0].t <= w[1].t));
    }

    #[test]
    fn empty_stream_passthrough() {
        let g = SensorGeometry::new(8, 8).unwrap();
        assert!(remove_hot_pixels(&EventStream::empty(g), 10.0).unwrap().is_empty());
    }

    #[test]
    fn rescale_examples() {
        let g = SensorGeometry::new(1280, 760).unwrap();
        let target = SensorGeometry::new(160, 90).unwrap();
        let s = EventStream::new(
            vec![
                Event::new(640.0, 380.0, 0.0, Polarity::Positive),
                Event::new(1279.999, 0.0, 0.1, Polarity::Positive),
            ],
            g,
        )
        .unwrap();
        let out = rescale_events(&s, target);
        assert_eq!(out.geometry(), target);
        assert_eq!(out.events()[0].x, 80.0);
        assert!((out.events()[0].y - 45.0).abs() < 1e-12);
        let x = out.events()[1].x;
        assert!((x - 159.999_875).abs() < 1e-9 && x < 160.0);
        assert_eq!(out.events()[1].t, 0.1);

        assert_eq!(rescale_events(&s, g), s);
    }

    #[test]
    fn rescale_clamps_rounding_overflow() {
        assert!(clamp_below(160.0, 160.0) < 160.0);
        assert_eq!(clamp_below(-0.0, 160.0), 0.0);
    }

    #[test]
    fn subsample_full_fraction_is_identity() {
        let g = SensorGeometry::new(4, 4).unwrap();
        let s = stream_from_counts(&[((1, 1), 50)], g);
        assert_eq!(subsample_events(&s, 1.0, 3).unwrap(), s);
        assert!(subsample_events(&s, 0.0, 3).is_err());
        assert!(subsample_events(&s, 1.5, 3).is_err());
    }

    #[test]
    fn subsample_quarter_binomial_window() {
        // Binomial(100000, 0.25): mean 25000, sd ~136.9; +-1000 is > 7 sd.
        let g = SensorGeometry::new(4, 4).unwrap();
        let events: Vec<_> = (0..100_000)
            .map(|i| Event::new(1.0, 1.0, i as f64 * 1e-5, Polarity::Positive))
            .collect();
        let s = EventStream::new(events, g).unwrap();
        let out = subsample_events(&s, 0.25, 42).unwrap();
        assert!((24_000..=26_000).contains(&out.len()), "{}", out.len());
        assert_eq!(out, subsample_events(&s, 0.25, 42).unwrap());
    }

    proptest! {
        #[test]
        fn hot_pixel_removal_idempotent(
            bulk in proptest::collection::vec(1usize..=3, 5..40),
            hot in proptest::collection::vec(100usize..300, 0..3),
        ) {
            let g = SensorGeometry::new(64, 64).unwrap();
            let mut counts: Vec<_> = bulk.iter().enumerate()
                .map(|(i, &n)| (((i % 64) as u32, 0), n)).collect();
            counts.extend(hot.iter().enumerate().map(|(i, &n)| ((i as u32, 10), n)));
            let s = stream_from_counts(&counts, g);
            let once = remove_hot_pixels(&s, DEFAULT_HOT_PIXEL_K).unwrap();
            prop_assert_eq!(once.len(), bulk.iter().sum::<usize>());
            let twice = remove_hot_pixels(&once, DEFAULT_HOT_PIXEL_K).unwrap();
            prop_assert_eq!(twice, once);
        }

        #[test]
        fn subsample_deterministic_and_ordered(seed in any::<u64>(), frac in 0.01f64..1.0) {
            let g = SensorGeometry::new(4, 4).unwrap();
            let s = stream_from_counts(&[((0, 0), 200), ((3, 3), 200)], g);
            let a = subsample_events(&s, frac, seed).unwrap();
            let b = subsample_events(&s, frac, seed).unwrap();
            prop_assert!(a.events().windows(2).all(|w| w[0].t <= w[1].t));
            prop_assert_eq!(a, b);
        }
    }
}
