//! Divergence from optic-flow fields and error reports against ground truth.

use log::warn;

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Ground-truth magnitudes below this are skipped when computing percent errors.
pub const MIN_GROUND_TRUTH_MAGNITUDE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowVector {
    /// Position relative to the focus of expansion, in pixels.
    pub position: Point,
    /// Flow in pixels per second.
    pub velocity: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub vectors: Vec<FlowVector>,
    pub foe: Point,
    /// Time span over which the flow is integrated, seconds.
    pub tau: f64,
}

/// Mean relative radial expansion of a flow field over `tau`:
///
/// `D = 1/(P tau) * sum_k [1 - |FOE + p_k + tau v_k| / |FOE + p_k|]`.
///
/// Vectors with `|FOE + p_k| = 0` are left out of both the sum and `P`.
pub fn of_to_divergence(field: &FlowField) -> Result<f64> {
    if !(field.tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {}", field.tau)));
    }
    let mut sum = 0.0;
    let mut used = 0usize;
    for v in &field.vectors {
        let base = field.foe + v.position;
        let radius = base.norm();
        if radius == 0.0 {
            warn!("skipping flow vector at zero radius ({:?})", v.position);
            continue;
        }
        let moved = base + v.velocity.scale(field.tau);
        sum += 1.0 - moved.norm() / radius;
        used += 1;
    }
    if used == 0 {
        return Err(Error::InvalidArgument("flow field has no usable vectors".into()));
    }
    Ok(sum / (used as f64 * field.tau))
}

/// Reads a flow field CSV: a `# foe=<fx>,<fy> tau=<t>` header then
/// `px,py,vx,vy` rows.
pub fn parse_flow_field_csv(text: &str) -> Result<FlowField> {
    let parse_err = |line: usize, message: String| Error::Parse { line, message };
    let mut foe = None;
    let mut tau = None;
    let mut vectors = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            for token in comment.split_whitespace() {
                if let Some(v) = token.strip_prefix("foe=") {
                    let (fx, fy) = v
                        .split_once(',')
                        .ok_or_else(|| parse_err(line_no, format!("bad foe `{v}`")))?;
                    let fx = fx.parse().map_err(|_| parse_err(line_no, format!("bad foe `{v}`")))?;
                    let fy = fy.parse().map_err(|_| parse_err(line_no, format!("bad foe `{v}`")))?;
                    foe = Some(Point::new(fx, fy));
                } else if let Some(v) = token.strip_prefix("tau=") {
                    tau = Some(v.parse().map_err(|_| parse_err(line_no, format!("bad tau `{v}`")))?);
                }
            }
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(line_no, format!("bad flow row `{line}`")))?;
        if fields.len() != 4 {
            return Err(parse_err(line_no, format!("expected `px,py,vx,vy`, got `{line}`")));
        }
        vectors.push(FlowVector {
            position: Point::new(fields[0], fields[1]),
            velocity: Point::new(fields[2], fields[3]),
        });
    }

    match (foe, tau) {
        (Some(foe), Some(tau)) => Ok(FlowField { vectors, foe, tau }),
        _ => Err(parse_err(0, "missing `# foe=<fx>,<fy> tau=<t>` header".into())),
    }
}

/// One estimate to score: time, divergence and, when known, solve time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub t: f64,
    pub divergence: f64,
    pub runtime_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    /// `(t, percent error)` for every scored estimate.
    pub per_batch_errors: Vec<(f64, f64)>,
    pub mean_abs_error_pct: f64,
    /// Mean solve time over estimates that carry one.
    pub mean_runtime_s: Option<f64>,
    /// Estimates skipped because their closest ground truth was ~0.
    pub excluded: usize,
}

fn closest(sorted: &[(f64, f64)], t: f64) -> &(f64, f64) {
    let idx = sorted.partition_point(|&(ts, _)| ts < t);
    match (idx.checked_sub(1).map(|i| &sorted[i]), sorted.get(idx)) {
        (Some(before), Some(after)) => {
            if t - before.0 <= after.0 - t {
                before
            } else {
                after
            }
        }
        (Some(only), None) | (None, Some(only)) => only,
        (None, None) => unreachable!("ground truth checked non-empty"),
    }
}

/// Percent error of each estimate against the closest-in-time ground truth.
pub fn divergence_error(estimates: &[Estimate], ground_truth: &[(f64, f64)]) -> Result<EvaluationReport> {
    if estimates.is_empty() || ground_truth.is_empty() {
        return Err(Error::InvalidArgument(
            "estimates and ground truth must both be non-empty".into(),
        ));
    }
    let mut gt = ground_truth.to_vec();
    gt.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut per_batch_errors = Vec::with_capacity(estimates.len());
    let mut excluded = 0;
    for e in estimates {
        let &(t_gt, d_gt) = closest(&gt, e.t);
        if d_gt.abs() < MIN_GROUND_TRUTH_MAGNITUDE {
            warn!("ground truth at t = {t_gt} is ~0; estimate at t = {} not scored", e.t);
            excluded += 1;
            continue;
        }
        per_batch_errors.push((e.t, 100.0 * (e.divergence - d_gt).abs() / d_gt.abs()));
    }
    if per_batch_errors.is_empty() {
        return Err(Error::InvalidArgument(
            "no estimate has a non-zero ground truth to compare against".into(),
        ));
    }

    let mean_abs_error_pct =
        per_batch_errors.iter().map(|&(_, e)| e).sum::<f64>() / per_batch_errors.len() as f64;
    let runtimes: Vec<f64> = estimates.iter().filter_map(|e| e.runtime_s).collect();
    let mean_runtime_s =
        (!runtimes.is_empty()).then(|| runtimes.iter().sum::<f64>() / runtimes.len() as f64);

    Ok(EvaluationReport {
        per_batch_errors,
        mean_abs_error_pct,
        mean_runtime_s,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn field(vectors: Vec<(f64, f64, f64, f64)>, foe: (f64, f64), tau: f64) -> FlowField {
        FlowField {
            vectors: vectors
                .into_iter()
                .map(|(px, py, vx, vy)| FlowVector {
                    position: Point::new(px, py),
                    velocity: Point::new(vx, vy),
                })
                .collect(),
            foe: Point::new(foe.0, foe.1),
            tau,
        }
    }

    fn est(t: f64, d: f64) -> Estimate {
        Estimate { t, divergence: d, runtime_s: None }
    }

    #[test]
    fn zero_flow_zero_divergence() {
        let f = field(vec![(1.0, 2.0, 0.0, 0.0), (-3.0, 4.0, 0.0, 0.0)], (0.0, 0.0), 0.5);
        assert_eq!(of_to_divergence(&f).unwrap(), 0.0);
    }

    #[test]
    fn single_vector_substitution() {
        let f = field(vec![(1.0, 0.0, 0.5, 0.0)], (0.0, 0.0), 1.0);
        assert_eq!(of_to_divergence(&f).unwrap(), -0.5);
    }

    #[test]
    fn zero_radius_vector_skipped() {
        let f = field(vec![(0.0, 0.0, 3.0, 0.0), (1.0, 0.0, 0.5, 0.0)], (0.0, 0.0), 1.0);
        assert_eq!(of_to_divergence(&f).unwrap(), -0.5);
        let only = field(vec![(0.0, 0.0, 3.0, 0.0)], (0.0, 0.0), 1.0);
        assert!(of_to_divergence(&only).is_err());
    }

    #[test]
    fn flow_csv() {
        let f = parse_flow_field_csv("# foe=1.5,-2 tau=0.5\n1,0,0.5,0\n\n2,2,0,0\n").unwrap();
        assert_eq!(f.foe, Point::new(1.5, -2.0));
        assert_eq!(f.tau, 0.5);
        assert_eq!(f.vectors.len(), 2);
        assert!(parse_flow_field_csv("1,0,0.5,0\n").is_err());
        assert!(parse_flow_field_csv("# foe=0,0 tau=1\n1,0,0.5\n").is_err());
    }

    #[test]
    fn error_examples() {
        let gt = vec![(0.5, -1.0), (1.0, -1.2)];
        let same: Vec<_> = gt.iter().map(|&(t, d)| est(t, d)).collect();
        let r = divergence_error(&same, &gt).unwrap();
        assert_eq!(r.mean_abs_error_pct, 0.0);
        assert_eq!(r.mean_runtime_s, None);

        let r = divergence_error(&[est(0.5, -0.9)], &[(0.5, -1.0)]).unwrap();
        assert!((r.mean_abs_error_pct - 10.0).abs() < 1e-12);

        assert!(divergence_error(&[], &gt).is_err());
        assert!(divergence_error(&same, &[]).is_err());
    }

    #[test]
    fn closest_in_time_and_exclusion() {
        let gt = vec![(0.0, 0.0), (0.4, -1.0), (1.0, -2.0)];
        let estimates = vec![
            Estimate { t: 0.1, divergence: -5.0, runtime_s: Some(0.2) },
            Estimate { t: 0.6, divergence: -1.1, runtime_s: Some(0.4) },
            Estimate { t: 0.9, divergence: -2.0, runtime_s: None },
        ];
        let r = divergence_error(&estimates, &gt).unwrap();
        assert_eq!(r.excluded, 1);
        assert_eq!(r.per_batch_errors.len(), 2);
        assert!((r.per_batch_errors[0].1 - 10.0).abs() < 1e-9);
        assert_eq!(r.per_batch_errors[1].1, 0.0);
        assert!((r.mean_runtime_s.unwrap() - 0.3).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn radial_field_identity(
            c in -1.5f64..1.5,
            pts in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..50),
            foe in (-50.0f64..50.0, -50.0f64..50.0),
            tau in 0.1f64..1.0,
        ) {
            prop_assume!(1.0 + tau * c > 0.0);
            let vectors: Vec<_> = pts.iter().map(|&(px, py)| {
                let base = (foe.0 + px, foe.1 + py);
                (px, py, c * base.0, c * base.1)
            }).filter(|v| (foe.0 + v.0).hypot(foe.1 + v.1) > 1e-6).collect();
            prop_assume!(!vectors.is_empty());
            let d = of_to_divergence(&field(vectors, foe, tau)).unwrap();
            prop_assert!((d + c).abs() <= 1e-9 * c.abs().max(1e-3));
        }

        #[test]
        fn rotation_invariance(
            angle in 0.0f64..std::f64::consts::TAU,
            vs in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0, -5.0f64..5.0, -5.0f64..5.0), 1..20),
            foe in (-20.0f64..20.0, -20.0f64..20.0),
        ) {
            let (s, co) = angle.sin_cos();
            let rot = |x: f64, y: f64| (co * x - s * y, s * x + co * y);
            let rotated: Vec<_> = vs.iter().map(|&(px, py, vx, vy)| {
                // rotate the FOE-offset position and the flow vector
                let (bx, by) = rot(foe.0 + px, foe.1 + py);
                let (rvx, rvy) = rot(vx, vy);
                (bx - foe.0, by - foe.1, rvx, rvy)
            }).collect();
            prop_assume!(vs.iter().all(|v| (foe.0 + v.0).hypot(foe.1 + v.1) > 1e-3));
            let a = of_to_divergence(&field(vs.clone(), foe, 0.5)).unwrap();
            let b = of_to_divergence(&field(rotated, foe, 0.5)).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }
}
