//! Best-first branch and bound over the velocity interval.
//!
//! Intervals are kept in a max-priority queue keyed by their contrast upper
//! bound. Each iteration pops the most promising interval, stops if its bound
//! is within `gamma` of the incumbent's contrast, otherwise evaluates the
//! interval center, bisects, and re-queues the halves whose bound still
//! reaches the incumbent. On return the incumbent is within `gamma` of the
//! global maximum of the contrast.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use rayon::prelude::*;

use crate::contrast::CenteredBatch;
use crate::error::{Error, Result};
use crate::events::EventBatch;
use crate::geometry::{divergence_from_velocity, velocity_domain, VelocityInterval, DEFAULT_EPSILON};

/// Intervals narrower than this are not split further.
pub const MIN_INTERVAL_WIDTH: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    /// Convergence threshold on `bound - incumbent`, in contrast units.
    pub gamma: f64,
    /// Batch duration in seconds.
    pub tau: f64,
    /// Guard keeping the domain away from the singular `1 + nu tau = 0`.
    pub epsilon: f64,
    pub max_iterations: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            gamma: 0.025,
            tau: 0.5,
            epsilon: DEFAULT_EPSILON,
            max_iterations: 1_000_000,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {}", self.tau)));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must lie in [0, 1), got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Result of one branch-and-bound solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solution {
    /// Incumbent normalized velocity.
    pub nu: f64,
    /// Contrast at `nu`.
    pub contrast: f64,
    /// Divergence at the batch end implied by `nu`.
    pub divergence: f64,
    /// Bound of the best interval still open at termination minus `contrast`
    /// (zero when the queue emptied).
    pub bound_gap: f64,
    pub iterations: usize,
    /// False when the loop stopped on the interval-width floor before the
    /// gap fell below `gamma`.
    pub certified: bool,
}

/// Bookkeeping recorded during a solve, for inspecting the search.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    /// Incumbent contrast after each iteration, starting with the root center.
    pub incumbent_history: Vec<f64>,
    /// Intervals discarded on insertion, with their bound and the incumbent
    /// contrast they were compared against.
    pub pruned: Vec<(VelocityInterval, f64, f64)>,
    /// Number of bound evaluations performed.
    pub bound_evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct QueueEntry {
    interval: VelocityInterval,
    priority: f64,
    seq: u64,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for QueueEntry {}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueEntry {
    // max-heap on priority; among equal priorities the earlier insertion wins
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Maximises contrast over the admissible velocities of `batch`.
/// The batch's own duration defines the domain.
pub fn maximise_contrast_bnb(batch: &EventBatch, params: &SolverParams) -> Result<Solution> {
    solve(batch, params, None)
}

/// As [`maximise_contrast_bnb`], also returning the search trace.
pub fn maximise_contrast_traced(batch: &EventBatch, params: &SolverParams) -> Result<(Solution, SolveTrace)> {
    let mut trace = SolveTrace::default();
    let solution = solve(batch, params, Some(&mut trace))?;
    Ok((solution, trace))
}

fn solve(batch: &EventBatch, params: &SolverParams, mut trace: Option<&mut SolveTrace>) -> Result<Solution> {
    params.validate()?;
    if batch.is_empty() {
        return Err(Error::NoEvents);
    }
    let tau = batch.tau();
    let root = velocity_domain(tau, params.epsilon)?;
    let centered = CenteredBatch::new(batch);

    let mut nu_hat = root.center();
    let mut c_hat = centered.contrast(nu_hat)?;
    if let Some(tr) = trace.as_deref_mut() {
        tr.incumbent_history.push(c_hat);
        tr.bound_evaluations += 1;
    }

    let mut queue = BinaryHeap::new();
    let mut seq = 0u64;
    queue.push(QueueEntry {
        interval: root,
        priority: centered.bound(root)?.c_bar,
        seq,
    });

    let mut iterations = 0usize;
    let mut bound_gap = 0.0;
    let mut certified = true;

    while let Some(entry) = queue.pop() {
        let gap = entry.priority - c_hat;
        if gap <= params.gamma {
            bound_gap = gap;
            break;
        }
        if entry.interval.width() < MIN_INTERVAL_WIDTH {
            bound_gap = gap;
            certified = false;
            break;
        }
        iterations += 1;
        if iterations > params.max_iterations {
            return Err(Error::IterationLimit {
                nu: nu_hat,
                contrast: c_hat,
                iterations: params.max_iterations,
            });
        }

        let nu_c = entry.interval.center();
        let c = centered.contrast(nu_c)?;
        if c >= c_hat {
            nu_hat = nu_c;
            c_hat = c;
        }

        let (left, right) = entry.interval.split();
        let (bl, br) = rayon::join(|| centered.bound(left), || centered.bound(right));
        for (child, bound) in [(left, bl?), (right, br?)] {
            if bound.c_bar >= c_hat {
                seq += 1;
                queue.push(QueueEntry {
                    interval: child,
                    priority: bound.c_bar,
                    seq,
                });
            } else if let Some(tr) = trace.as_deref_mut() {
                tr.pruned.push((child, bound.c_bar, c_hat));
            }
        }
        if let Some(tr) = trace.as_deref_mut() {
            tr.incumbent_history.push(c_hat);
            tr.bound_evaluations += 2;
        }
    }

    Ok(Solution {
        nu: nu_hat,
        contrast: c_hat,
        divergence: divergence_from_velocity(nu_hat, tau)?,
        bound_gap,
        iterations,
        certified,
    })
}

/// Contrast sampled at `n_points` uniformly spaced velocities spanning the
/// domain, endpoints included.
pub fn contrast_curve(batch: &EventBatch, params: &SolverParams, n_points: usize) -> Result<Vec<(f64, f64)>> {
    if n_points < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 grid points, got {n_points}")));
    }
    let domain = velocity_domain(batch.tau(), params.epsilon)?;
    let centered = CenteredBatch::new(batch);
    let step = domain.width() / (n_points - 1) as f64;
    (0..n_points)
        .into_par_iter()
        .map(|k| {
            let nu = if k == n_points - 1 {
                domain.hi()
            } else {
                domain.lo() + k as f64 * step
            };
            Ok((nu, centered.contrast(nu)?))
        })
        .collect()
}

/// Brute-force maximiser over a uniform grid, with no pruning. Returns the
/// first grid velocity attaining the largest sampled contrast.
pub fn grid_search_oracle(batch: &EventBatch, params: &SolverParams, n_points: usize) -> Result<(f64, f64)> {
    let curve = contrast_curve(batch, params, n_points)?;
    let mut best = curve[0];
    for &(nu, c) in &curve[1..] {
        if c > best.1 {
            best = (nu, c);
        }
    }
    Ok(best)
}

/// One divergence estimate per solved batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceSample {
    /// Absolute time of the batch end.
    pub t: f64,
    pub divergence: f64,
    pub nu: f64,
    pub contrast: f64,
    pub bound_gap: f64,
    pub iterations: usize,
    pub runtime_s: f64,
    pub certified: bool,
}

#[derive(Debug)]
pub struct BatchEstimate {
    /// Absolute time of the batch end.
    pub t: f64,
    pub outcome: Result<DivergenceSample>,
}

/// Solves every non-empty batch independently. Empty batches produce no
/// entry; failures are reported per batch.
pub fn estimate_stream_divergence(batches: &[EventBatch], params: &SolverParams) -> Vec<BatchEstimate> {
    let mut out: Vec<BatchEstimate> = batches
        .par_iter()
        .filter(|b| !b.is_empty())
        .map(|batch| {
            let t = batch.window_end();
            let start = Instant::now();
            let outcome = maximise_contrast_bnb(batch, params).map(|s| DivergenceSample {
                t,
                divergence: s.divergence,
                nu: s.nu,
                contrast: s.contrast,
                bound_gap: s.bound_gap,
                iterations: s.iterations,
                runtime_s: start.elapsed().as_secs_f64(),
                certified: s.certified,
            });
            BatchEstimate { t, outcome }
        })
        .collect();
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    out
}
