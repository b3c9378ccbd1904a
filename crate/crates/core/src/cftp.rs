//! Dominated coupling from the past.
//!
//! The lower process `L` starts empty and the upper process `U` starts as
//! `D_{-n}`. At a birth of `x` with mark `m` in `D`:
//!
//! * `U` accepts `x` iff `m ≤ c(L, x) / H`,
//! * `L` accepts `x` iff `m ≤ c(U, x) / H`,
//!
//! and a death in `D` removes the point from both. Repulsion gives
//! `c(L, x) ≥ c(U, x)` whenever `L ⊆ U`, so the sandwich `L ⊆ U ⊆ D` is
//! preserved. The depth is doubled until `L₀ = U₀`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dominating::{AliveSet, Event, EventKind, EventStream, InitialDepth, PointId, StreamError};
use crate::kernel::{KernelSummary, Point, SpectralKernel};
use crate::papangelou::{Configuration, DeletionStrategy, IntensityEval, PapangelouError};

/// Depth cap, as a multiple of the initial depth.
pub const DEFAULT_MAX_DEPTH_FACTOR: f64 = 16384.0;

/// Slack allowed on `c(U, x) ≤ c(L, x)` before it is reported as a bug.
const REPULSION_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CftpError {
    #[error("no coalescence by depth {max_depth} (seed {seed}); |U₀ \\ L₀| = {gap}")]
    NonCoalescence { seed: u64, max_depth: f64, gap: usize },
    #[error("sandwich violated at time {time}: {detail}")]
    Sandwich { time: f64, detail: String },
    #[error("coalesced processes separated again at time {time}")]
    Persistence { time: f64 },
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Papangelou(#[from] PapangelouError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CftpOptions {
    pub initial_depth: InitialDepth,
    /// Largest depth tried; defaults to `2¹⁴ · n₀`.
    pub max_depth: Option<f64>,
    pub deletion: DeletionStrategy,
}

impl Default for CftpOptions {
    fn default() -> Self {
        Self {
            initial_depth: InitialDepth::Half,
            max_depth: None,
            deletion: DeletionStrategy::Refactor,
        }
    }
}

impl CftpOptions {
    pub fn resolved_max_depth(&self, kernel: &SpectralKernel) -> f64 {
        self.max_depth
            .unwrap_or_else(|| DEFAULT_MAX_DEPTH_FACTOR * self.initial_depth.resolve(kernel))
    }
}

/// One side of the sandwich: a factorized configuration plus the ids of its
/// points, in the same order.
#[derive(Debug, Clone)]
pub struct SandwichSide {
    pub config: Configuration,
    pub ids: Vec<PointId>,
    members: AliveSet,
}

impl SandwichSide {
    fn new(capacity: usize) -> Self {
        Self {
            config: Configuration::empty(),
            ids: Vec::new(),
            members: AliveSet::new(capacity),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: PointId) -> bool {
        self.members.contains(id)
    }

    fn push(&mut self, kernel: &SpectralKernel, id: PointId, x: Point, v: &[f64], eval: IntensityEval) {
        let config = std::mem::take(&mut self.config);
        self.config = config.push_evaluated_or_singular(kernel, x, v, eval);
        self.ids.push(id);
        self.members.insert(id);
    }

    fn remove(
        &mut self,
        kernel: &SpectralKernel,
        id: PointId,
        strategy: DeletionStrategy,
    ) -> Result<bool, PapangelouError> {
        if !self.members.remove(id) {
            return Ok(false);
        }
        let index = self.ids.iter().position(|&i| i == id).expect("member id is listed");
        self.ids.remove(index);
        let config = std::mem::take(&mut self.config);
        self.config = config.without_point_using(kernel, index, strategy)?;
        Ok(true)
    }
}

/// The `(L, U)` pair after replaying a stream.
#[derive(Debug, Clone)]
pub struct CouplingState {
    pub lower: SandwichSide,
    pub upper: SandwichSide,
    pub coalesced: bool,
}

/// What happened at one birth of the dominating process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirthDecision {
    pub time: f64,
    pub id: PointId,
    pub mark: f64,
    /// `c(L, x)` before the birth.
    pub lower_intensity: f64,
    /// `c(U, x)` before the birth.
    pub upper_intensity: f64,
    pub into_upper: bool,
    pub into_lower: bool,
}

#[derive(Debug, Clone)]
pub struct CouplingOutcome {
    pub state: CouplingState,
    pub coalescence_time: Option<f64>,
    pub events_processed: usize,
    pub clamp_count: usize,
}

/// Replays `stream` from `L = ∅, U = D_{-n}` to time zero.
pub fn couple(
    kernel: &SpectralKernel,
    stream: &EventStream,
    deletion: DeletionStrategy,
) -> Result<CouplingOutcome, CftpError> {
    couple_observed(kernel, stream, deletion, |_| {})
}

/// [`couple`] with a callback receiving every birth decision.
pub fn couple_observed<F>(
    kernel: &SpectralKernel,
    stream: &EventStream,
    deletion: DeletionStrategy,
    mut observe: F,
) -> Result<CouplingOutcome, CftpError>
where
    F: FnMut(&BirthDecision),
{
    let capacity = stream.particles().len();
    let h = kernel.h();
    let mut lower = SandwichSide::new(capacity);
    let mut upper = SandwichSide::new(capacity);
    let mut dominating = AliveSet::new(capacity);
    let mut clamp_count = 0usize;
    // J(p, x) for the points p of U at the current birth, indexed by id.
    let mut cross = vec![0.0f64; capacity];

    for &id in stream.initial_state() {
        dominating.insert(id);
        let x = stream.particle(id).position;
        let v: Vec<f64> = upper.ids.iter().map(|&q| kernel.j_eval(&stream.particle(q).position, &x)).collect();
        let eval = upper.config.evaluate_with(kernel, &x, &v);
        clamp_count += eval.clamped as usize;
        upper.push(kernel, id, x, &v, eval);
    }

    let start = -stream.depth();
    let mut coalescence_time = upper.is_empty().then_some(start);
    let mut events_processed = 0usize;

    for event in stream.events() {
        events_processed += 1;
        match event.kind {
            EventKind::Birth => {
                dominating.insert(event.id);
                let particle = *stream.particle(event.id);
                let x = particle.position;
                for &q in &upper.ids {
                    cross[q as usize] = kernel.j_eval(&stream.particle(q).position, &x);
                }
                let v_upper: Vec<f64> = upper.ids.iter().map(|&q| cross[q as usize]).collect();
                let v_lower: Vec<f64> = lower.ids.iter().map(|&q| cross[q as usize]).collect();
                let eval_upper = upper.config.evaluate_with(kernel, &x, &v_upper);
                let eval_lower = lower.config.evaluate_with(kernel, &x, &v_lower);
                clamp_count += eval_upper.clamped as usize + eval_lower.clamped as usize;
                let (c_lower, c_upper) = (eval_lower.value, eval_upper.value);

                let coalesced = coalescence_time.is_some();
                let (into_upper, into_lower) = if coalesced {
                    // Same point set: one decision for both keeps them identical.
                    let accept = particle.mark * h <= c_upper;
                    (accept, accept)
                } else {
                    if c_upper > c_lower + REPULSION_SLACK * h {
                        return Err(CftpError::Sandwich {
                            time: event.time,
                            detail: format!("c(U, x) = {c_upper} exceeds c(L, x) = {c_lower}"),
                        });
                    }
                    let into_upper = particle.mark * h <= c_lower;
                    (into_upper, into_upper && particle.mark * h <= c_upper)
                };
                observe(&BirthDecision {
                    time: event.time,
                    id: event.id,
                    mark: particle.mark,
                    lower_intensity: c_lower,
                    upper_intensity: c_upper,
                    into_upper,
                    into_lower,
                });
                if into_upper {
                    upper.push(kernel, event.id, x, &v_upper, eval_upper);
                }
                if into_lower {
                    lower.push(kernel, event.id, x, &v_lower, eval_lower);
                }
            }
            EventKind::Death => {
                if !dominating.remove(event.id) {
                    return Err(StreamError::DeadPoint {
                        time: event.time,
                        id: event.id,
                    }
                    .into());
                }
                upper.remove(kernel, event.id, deletion)?;
                lower.remove(kernel, event.id, deletion)?;
            }
        }
        check_sandwich(&event, &lower, &upper, &dominating)?;
        let equal = lower.len() == upper.len();
        match (coalescence_time, equal) {
            (None, true) => coalescence_time = Some(event.time),
            (Some(_), false) => return Err(CftpError::Persistence { time: event.time }),
            _ => {}
        }
    }

    Ok(CouplingOutcome {
        state: CouplingState {
            coalesced: coalescence_time.is_some(),
            lower,
            upper,
        },
        coalescence_time,
        events_processed,
        clamp_count,
    })
}

fn check_sandwich(
    event: &Event,
    lower: &SandwichSide,
    upper: &SandwichSide,
    dominating: &AliveSet,
) -> Result<(), CftpError> {
    if let Some(&id) = lower.ids.iter().find(|&&id| !upper.contains(id)) {
        return Err(CftpError::Sandwich {
            time: event.time,
            detail: format!("point {id} is in L but not in U"),
        });
    }
    if let Some(&id) = upper.ids.iter().find(|&&id| !dominating.contains(id)) {
        return Err(CftpError::Sandwich {
            time: event.time,
            detail: format!("point {id} is in U but not in D"),
        });
    }
    Ok(())
}

/// Outcome of one perfect-sampling run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub kernel: KernelSummary,
    pub seed: u64,
    pub points: Vec<Point>,
    pub stopping_depth: f64,
    pub coalescence_time: f64,
    /// Events replayed over all coupling passes.
    pub events_processed: usize,
    pub clamp_count: usize,
    /// `|D_{-N}|`, the size of the initial upper process in the final pass.
    pub initial_count: usize,
    pub passes: usize,
}

impl SampleReport {
    pub fn count(&self) -> usize {
        self.points.len()
    }
}

/// Draws one exact sample, doubling the depth until coalescence.
pub fn sample(kernel: &SpectralKernel, seed: u64, options: &CftpOptions) -> Result<SampleReport, CftpError> {
    let n0 = options.initial_depth.resolve(kernel);
    let max_depth = options.resolved_max_depth(kernel);
    let mut stream = EventStream::new(kernel, seed, n0);
    let mut events_processed = 0usize;
    let mut clamp_count = 0usize;
    let mut passes = 0usize;
    loop {
        let outcome = couple(kernel, &stream, options.deletion)?;
        passes += 1;
        events_processed += outcome.events_processed;
        clamp_count += outcome.clamp_count;
        if let Some(coalescence_time) = outcome.coalescence_time {
            return Ok(SampleReport {
                kernel: kernel.summary(),
                seed,
                points: outcome.state.lower.config.points().to_vec(),
                stopping_depth: stream.depth(),
                coalescence_time,
                events_processed,
                clamp_count,
                initial_count: stream.initial_state().len(),
                passes,
            });
        }
        let next = 2.0 * stream.depth();
        if next > max_depth {
            return Err(CftpError::NonCoalescence {
                seed,
                max_depth,
                gap: outcome.state.upper.len() - outcome.state.lower.len(),
            });
        }
        stream.backward_extend(next)?;
    }
}

/// Independent replications, one per seed, in input order.
pub fn batch(
    kernel: &SpectralKernel,
    seeds: &[u64],
    options: &CftpOptions,
) -> Vec<Result<SampleReport, CftpError>> {
    batch_with_sink(kernel, seeds, options, |_, _| {})
}

/// Like [`batch`], calling `sink(index, result)` as each replication
/// finishes (in completion order).
#[cfg(feature = "parallel")]
pub fn batch_with_sink<S>(
    kernel: &SpectralKernel,
    seeds: &[u64],
    options: &CftpOptions,
    sink: S,
) -> Vec<Result<SampleReport, CftpError>>
where
    S: Fn(usize, &Result<SampleReport, CftpError>) + Sync,
{
    use rayon::prelude::*;
    seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| {
            let result = sample(kernel, seed, options);
            sink(i, &result);
            result
        })
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn batch_with_sink<S>(
    kernel: &SpectralKernel,
    seeds: &[u64],
    options: &CftpOptions,
    sink: S,
) -> Vec<Result<SampleReport, CftpError>>
where
    S: Fn(usize, &Result<SampleReport, CftpError>) + Sync,
{
    batch_sequential_with_sink(kernel, seeds, options, sink)
}

/// Single-threaded [`batch`], available regardless of features.
pub fn batch_sequential(
    kernel: &SpectralKernel,
    seeds: &[u64],
    options: &CftpOptions,
) -> Vec<Result<SampleReport, CftpError>> {
    batch_sequential_with_sink(kernel, seeds, options, |_, _| {})
}

fn batch_sequential_with_sink<S>(
    kernel: &SpectralKernel,
    seeds: &[u64],
    options: &CftpOptions,
    sink: S,
) -> Vec<Result<SampleReport, CftpError>>
where
    S: Fn(usize, &Result<SampleReport, CftpError>),
{
    seeds
        .iter()
        .enumerate()
        .map(|(i, &seed)| {
            let result = sample(kernel, seed, options);
            sink(i, &result);
            result
        })
        .collect()
}
