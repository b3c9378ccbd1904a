//! The dominating spatial birth–death process.
//!
//! `D` is an M/M/∞ queue on the window: points arrive at total rate
//! `H · area` at uniform locations and each point dies at rate one. Its
//! stationary law is a Poisson process of intensity `H`, and it is
//! time-reversible, so the path on `(-n, 0]` is generated by running the
//! queue forward in pseudo-time `τ = -t` from the state at time zero.
//!
//! # Randomness
//!
//! Everything is derived from one root seed through ChaCha8 sub-streams:
//!
//! | stream | use |
//! |--------|-----|
//! | 0 | state at time zero (count and locations) |
//! | 1 | queue dynamics: waiting times, birth/death choice, locations, victims |
//! | 2 | uniform marks, one per point in creation order |
//!
//! The dynamics stream is consumed continuously across extensions and the
//! next jump time is carried over, so extending `n → 2n → 4n` produces
//! exactly the same path as extending `n → 4n`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{Point, SpectralKernel, Window};

const INITIAL_STREAM: u64 = 0;
const DYNAMICS_STREAM: u64 = 1;
const MARK_STREAM: u64 = 2;

/// Stable identity of a point of the dominating process.
pub type PointId = u32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StreamError {
    #[error("new depth {new} does not exceed current depth {current}")]
    Depth { current: f64, new: f64 },
    #[error("event at time {time} removes point {id}, which is not alive")]
    DeadPoint { time: f64, id: PointId },
    #[error("event at time {time} adds point {id}, which is already alive")]
    AlivePoint { time: f64, id: PointId },
}

/// Starting depth of the doubling schedule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialDepth {
    /// `n₀ = 1/2`.
    #[default]
    Half,
    /// `n₀ = max(1/2, log(H · area))`.
    Log,
}

impl InitialDepth {
    pub fn resolve(&self, kernel: &SpectralKernel) -> f64 {
        match self {
            InitialDepth::Half => 0.5,
            InitialDepth::Log => kernel.total_birth_rate().ln().max(0.5),
        }
    }
}

impl std::str::FromStr for InitialDepth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "half" => Ok(InitialDepth::Half),
            "log" => Ok(InitialDepth::Log),
            other => Err(format!("initial depth must be 'half' or 'log', got '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Birth,
    Death,
}

impl EventKind {
    fn reversed(self) -> Self {
        match self {
            EventKind::Birth => EventKind::Death,
            EventKind::Death => EventKind::Birth,
        }
    }
}

/// A point of the dominating process with its persisted mark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub id: PointId,
    pub position: Point,
    pub mark: f64,
}

/// A jump of `D` in real time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub id: PointId,
}

// Jump in pseudo-time, as generated.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PseudoEvent {
    tau: f64,
    kind: EventKind,
    id: PointId,
}

/// Samples the stationary state: `Poisson(H · area)` uniform points.
pub fn sample_stationary_state<R: Rng + ?Sized>(
    kernel: &SpectralKernel,
    window: &Window,
    rng: &mut R,
) -> Vec<Point> {
    let mean = kernel.h() * window.area();
    if !(mean > 0.0) {
        return Vec::new();
    }
    let count = Poisson::new(mean).expect("finite positive mean").sample(rng) as usize;
    (0..count).map(|_| window.sample_uniform(rng)).collect()
}

/// Time-ordered path of the dominating process on `(-depth, 0]`.
#[derive(Debug, Clone)]
pub struct EventStream {
    seed: u64,
    window: Window,
    birth_rate: f64,
    depth: f64,
    particles: Vec<Particle>,
    // Generated order = decreasing real time.
    pseudo_events: Vec<PseudoEvent>,
    // Pseudo-time state at τ = depth, i.e. D at real time -depth.
    frontier: Vec<PointId>,
    terminal: Vec<PointId>,
    dynamics: ChaCha8Rng,
    marks: ChaCha8Rng,
    // Next pseudo jump time, already drawn from the dynamics stream.
    pending_jump: f64,
}

fn sub_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl EventStream {
    /// Stationary state at time zero, extended back to `initial_depth`.
    pub fn new(kernel: &SpectralKernel, seed: u64, initial_depth: f64) -> Self {
        let window = *kernel.window();
        let mut init_rng = sub_stream(seed, INITIAL_STREAM);
        let mut stream = Self {
            seed,
            window,
            birth_rate: kernel.total_birth_rate(),
            depth: 0.0,
            particles: Vec::new(),
            pseudo_events: Vec::new(),
            frontier: Vec::new(),
            terminal: Vec::new(),
            dynamics: sub_stream(seed, DYNAMICS_STREAM),
            marks: sub_stream(seed, MARK_STREAM),
            pending_jump: f64::NAN,
        };
        for p in sample_stationary_state(kernel, &window, &mut init_rng) {
            let id = stream.create_particle(p);
            stream.frontier.push(id);
        }
        stream.terminal = stream.frontier.clone();
        stream.pending_jump = stream.draw_wait(0.0);
        stream.advance(initial_depth);
        stream
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    /// Birth rate over the whole window, `H · area`.
    pub fn birth_rate(&self) -> f64 {
        self.birth_rate
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn particle(&self, id: PointId) -> &Particle {
        &self.particles[id as usize]
    }

    /// Ids alive at time `-depth`.
    pub fn initial_state(&self) -> &[PointId] {
        &self.frontier
    }

    /// Ids alive at time zero.
    pub fn terminal_state(&self) -> &[PointId] {
        &self.terminal
    }

    pub fn len(&self) -> usize {
        self.pseudo_events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pseudo_events.is_empty()
    }

    /// Events in increasing real time.
    pub fn events(&self) -> impl DoubleEndedIterator<Item = Event> + ExactSizeIterator + '_ {
        self.pseudo_events.iter().rev().map(|e| Event {
            time: -e.tau,
            kind: e.kind.reversed(),
            id: e.id,
        })
    }

    /// Extends the path back to `new_depth`, leaving every existing event,
    /// mark and the terminal state untouched.
    pub fn backward_extend(&mut self, new_depth: f64) -> Result<(), StreamError> {
        if !(new_depth > self.depth) {
            return Err(StreamError::Depth {
                current: self.depth,
                new: new_depth,
            });
        }
        self.advance(new_depth);
        Ok(())
    }

    fn create_particle(&mut self, position: Point) -> PointId {
        let id = self.particles.len() as PointId;
        let mark = self.marks.random::<f64>();
        self.particles.push(Particle { id, position, mark });
        id
    }

    fn draw_wait(&mut self, tau: f64) -> f64 {
        let rate = self.birth_rate + self.frontier.len() as f64;
        if rate > 0.0 {
            let e: f64 = Exp1.sample(&mut self.dynamics);
            tau + e / rate
        } else {
            f64::INFINITY
        }
    }

    // Runs the queue forward in pseudo-time up to `new_depth`.
    fn advance(&mut self, new_depth: f64) {
        while self.pending_jump <= new_depth {
            let tau = self.pending_jump;
            let total = self.birth_rate + self.frontier.len() as f64;
            let u: f64 = self.dynamics.random();
            if u * total < self.birth_rate {
                let p = self.window.sample_uniform(&mut self.dynamics);
                let id = self.create_particle(p);
                self.frontier.push(id);
                self.pseudo_events.push(PseudoEvent {
                    tau,
                    kind: EventKind::Birth,
                    id,
                });
            } else {
                let idx = self.dynamics.random_range(0..self.frontier.len());
                let id = self.frontier.swap_remove(idx);
                self.pseudo_events.push(PseudoEvent {
                    tau,
                    kind: EventKind::Death,
                    id,
                });
            }
            self.pending_jump = self.draw_wait(tau);
        }
        self.depth = new_depth;
    }

    /// Replays the events forward from the initial state, calling `visit`
    /// with each event and the alive set just after it. Returns the state at
    /// time zero, or the first inconsistency found.
    pub fn replay<F>(&self, mut visit: F) -> Result<Vec<PointId>, StreamError>
    where
        F: FnMut(&Event, &AliveSet),
    {
        let mut alive = AliveSet::new(self.particles.len());
        for &id in &self.frontier {
            alive.insert(id);
        }
        for ev in self.events() {
            match ev.kind {
                EventKind::Birth => {
                    if !alive.insert(ev.id) {
                        return Err(StreamError::AlivePoint { time: ev.time, id: ev.id });
                    }
                }
                EventKind::Death => {
                    if !alive.remove(ev.id) {
                        return Err(StreamError::DeadPoint { time: ev.time, id: ev.id });
                    }
                }
            }
            visit(&ev, &alive);
        }
        Ok(alive.members().to_vec())
    }

    /// Serializable form of the path.
    pub fn trace(&self) -> StreamTrace {
        let record = |id: PointId| {
            let p = self.particle(id);
            TraceParticle {
                id,
                x: p.position.x,
                y: p.position.y,
                mark: p.mark,
            }
        };
        StreamTrace {
            seed: self.seed,
            depth: self.depth,
            initial: self.frontier.iter().map(|&id| record(id)).collect(),
            events: self
                .events()
                .map(|e| {
                    let p = self.particle(e.id);
                    TraceEvent {
                        time: e.time,
                        kind: e.kind,
                        id: e.id,
                        x: p.position.x,
                        y: p.position.y,
                        mark: (e.kind == EventKind::Birth).then_some(p.mark),
                    }
                })
                .collect(),
        }
    }
}

/// Membership set over dense point ids with O(1) insert, remove and lookup.
#[derive(Debug, Clone)]
pub struct AliveSet {
    slot: Vec<u32>,
    members: Vec<PointId>,
}

const ABSENT: u32 = u32::MAX;

impl AliveSet {
    pub fn new(capacity: usize) -> Self {
        Self {
            slot: vec![ABSENT; capacity],
            members: Vec::new(),
        }
    }

    pub fn contains(&self, id: PointId) -> bool {
        self.slot.get(id as usize).is_some_and(|&s| s != ABSENT)
    }

    pub fn insert(&mut self, id: PointId) -> bool {
        let i = id as usize;
        if i >= self.slot.len() {
            self.slot.resize(i + 1, ABSENT);
        }
        if self.slot[i] != ABSENT {
            return false;
        }
        self.slot[i] = self.members.len() as u32;
        self.members.push(id);
        true
    }

    pub fn remove(&mut self, id: PointId) -> bool {
        let i = id as usize;
        let Some(&s) = self.slot.get(i) else {
            return false;
        };
        if s == ABSENT {
            return false;
        }
        self.members.swap_remove(s as usize);
        if let Some(&moved) = self.members.get(s as usize) {
            self.slot[moved as usize] = s;
        }
        self.slot[i] = ABSENT;
        true
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[PointId] {
        &self.members
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceParticle {
    pub id: PointId,
    pub x: f64,
    pub y: f64,
    pub mark: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time: f64,
    pub kind: EventKind,
    pub id: PointId,
    pub x: f64,
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mark: Option<f64>,
}

/// Debug/replay dump of an [`EventStream`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamTrace {
    pub seed: u64,
    pub depth: f64,
    pub initial: Vec<TraceParticle>,
    pub events: Vec<TraceEvent>,
}

/// Stream at the configured initial depth.
pub fn init_stream(kernel: &SpectralKernel, seed: u64, initial_depth: InitialDepth) -> EventStream {
    EventStream::new(kernel, seed, initial_depth.resolve(kernel))
}
