//! Supercover rasterization of a segment onto the pixel grid.
//!
//! Pixel `(i, j)` is the closed square `[i, i+1] x [j, j+1]`. A pixel is
//! reported when the closed segment touches its square, so a segment running
//! exactly along a pixel edge or through a corner reports every square it
//! touches. Only pixels inside the sensor are visited.

use crate::events::SensorGeometry;
use crate::geometry::Point;

/// Calls `visit(i, j)` once for every in-image pixel whose closed square
/// intersects the closed segment `p0 -> p1`. Pixels are visited column by
/// column, bottom row first within a column.
pub fn for_each_segment_pixel(
    p0: Point,
    p1: Point,
    geometry: SensorGeometry,
    mut visit: impl FnMut(u32, u32),
) {
    let (w, h) = (geometry.width() as f64, geometry.height() as f64);
    let (a, b) = if p0.x <= p1.x { (p0, p1) } else { (p1, p0) };
    let (seg_ylo, seg_yhi) = if a.y <= b.y { (a.y, b.y) } else { (b.y, a.y) };
    if b.x < 0.0 || a.x > w || seg_yhi < 0.0 || seg_ylo > h {
        return;
    }

    let col_lo = (a.x.ceil() - 1.0).max(0.0) as u32;
    let col_hi = b.x.floor().min(w - 1.0) as u32;
    let dx = b.x - a.x;
    let slope = if dx > 0.0 { (b.y - a.y) / dx } else { 0.0 };
    let y_at = |x: f64| -> f64 {
        if x <= a.x {
            a.y
        } else if x >= b.x {
            b.y
        } else {
            a.y + (x - a.x) * slope
        }
    };

    for i in col_lo..=col_hi {
        let (ylo, yhi) = if dx > 0.0 {
            let xl = (i as f64).max(a.x);
            let xr = (i as f64 + 1.0).min(b.x);
            let (ya, yb) = (y_at(xl), y_at(xr));
            let (lo, hi) = if ya <= yb { (ya, yb) } else { (yb, ya) };
            (lo.max(seg_ylo), hi.min(seg_yhi))
        } else {
            (seg_ylo, seg_yhi)
        };
        if yhi < 0.0 || ylo > h {
            continue;
        }
        let row_lo = (ylo.ceil() - 1.0).max(0.0) as u32;
        let row_hi = yhi.floor().min(h - 1.0) as u32;
        for j in row_lo..=row_hi {
            visit(i, j);
        }
    }
}

/// Pixels whose closed squares intersect the closed segment `p0 -> p1`,
/// clipped to the image.
pub fn rasterize_segment(p0: Point, p1: Point, geometry: SensorGeometry) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for_each_segment_pixel(p0, p1, geometry, |i, j| out.push((i, j)));
    out
}
