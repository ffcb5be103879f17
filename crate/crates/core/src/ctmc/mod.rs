//! Exact continuous-time simulation of the n-buffer system.
//!
//! Tasks arrive at every buffer at rate `lambda`; a single server with rate
//! `n` samples `d` buffers uniformly with replacement and serves the longest
//! one. If every sampled buffer is empty the service opportunity is wasted.
//!
//! The system is driven by one clock of rate `(1 + lambda) n`. Each tick is
//! an arrival with probability `lambda / (1 + lambda)` and a service
//! opportunity otherwise, which has the same law as independent arrival and
//! service clocks.

mod path;
mod state;

pub use path::{scaled_view, scaled_view_at, TailFractionPath};
pub use state::{initial_state, mean_queue_length, CountState};

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::seed::{rng_from_seed, SimRng};

/// Full parameterization of one simulated system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    /// Number of buffers.
    pub n: usize,
    /// Buffers sampled (with replacement) per service opportunity.
    pub d: usize,
    /// Per-buffer arrival rate.
    pub lambda: f64,
    /// Simulated time, unscaled clock.
    pub horizon: f64,
    pub seed: u64,
}

impl SystemConfig {
    pub fn new(n: usize, d: usize, lambda: f64, horizon: f64, seed: u64) -> Result<Self> {
        let cfg = Self { n, d, lambda, horizon, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.d == 0 {
            return Err(Error::Config("d must be at least 1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::Config(format!(
                "lambda must lie in (0, 1), got {}",
                self.lambda
            )));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!(
                "horizon must be finite and nonnegative, got {}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// Rate of the aggregate event clock, `(1 + lambda) n`.
    pub fn event_rate(&self) -> f64 {
        (1.0 + self.lambda) * self.n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Arrival,
    Service,
    Wasted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub kind: EventKind,
    pub time: f64,
    /// Length of the buffer acted on, before the event. `None` for wasted
    /// service.
    pub affected_length: Option<usize>,
}

/// How the longest of the `d` sampled queue lengths is drawn.
///
/// Both variants give the count process exactly the same law.
/// `TailInversion` costs one uniform and a scan over queue lengths.
/// `PerSample` keeps an explicit queue length per buffer and reads `d`
/// randomly chosen buffers, as a real scheduler does, so its cost per
/// service opportunity is proportional to `d`. Use it when measuring
/// scheduling cost against `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ServiceSampling {
    #[default]
    TailInversion,
    PerSample,
}

/// Longest queue among `d` buffers drawn uniformly with replacement.
///
/// Inverts `P(M <= l) = (1 - F_{l+1})^d` with a single uniform: `M` is the
/// smallest `l` with `F_{l+1} < 1 - u^{1/d}`.
pub fn sample_max_length<R: Rng + ?Sized>(state: &CountState, d: usize, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    max_length_from_uniform(state, d, u)
}

pub(crate) fn max_length_from_uniform(state: &CountState, d: usize, u: f64) -> usize {
    let counts = state.counts();
    let top = counts.len() - 1;
    if top == 0 {
        return 0;
    }
    // 1 - u^{1/d}, scaled to buffer counts.
    let threshold = -(u.ln() / d as f64).exp_m1() * state.n() as f64;
    let mut tail = state.n();
    for (l, &c) in counts.iter().enumerate().take(top) {
        tail -= c;
        if (tail as f64) < threshold {
            return l;
        }
    }
    top
}

/// Queue length of every buffer, kept alongside the counts in per-sample
/// mode. Buffers are exchangeable, so initial lengths are laid out by rank.
fn labelled_buffers(state: &CountState) -> Vec<u32> {
    state
        .counts()
        .iter()
        .enumerate()
        .flat_map(|(l, &c)| std::iter::repeat_n(l as u32, c))
        .collect()
}

/// Index of a longest buffer among `d` drawn with replacement.
fn longest_sampled<R: Rng + ?Sized>(buffers: &[u32], d: usize, rng: &mut R) -> usize {
    let mut best = rng.random_range(0..buffers.len());
    for _ in 1..d {
        let i = rng.random_range(0..buffers.len());
        if buffers[i] > buffers[best] {
            best = i;
        }
    }
    best
}

/// Applies one tick of the aggregate clock and reports what happened. The
/// tick's time is supplied by the caller. With `buffers` present, arrivals
/// and samples address individual buffers; otherwise they work on ranks.
fn apply_tick<R: Rng + ?Sized>(
    state: &mut CountState,
    buffers: Option<&mut [u32]>,
    config: &SystemConfig,
    time: f64,
    rng: &mut R,
) -> EventRecord {
    let p_arrival = config.lambda / (1.0 + config.lambda);
    let arrival = rng.random::<f64>() < p_arrival;
    let (kind, level) = match (buffers, arrival) {
        (None, true) => {
            let level = state.length_at_rank(rng.random_range(0..state.n()));
            state.arrive_at(level);
            (EventKind::Arrival, level)
        }
        (None, false) => {
            let m = sample_max_length(state, config.d, rng);
            if m > 0 {
                state.serve_at(m);
            }
            (EventKind::Service, m)
        }
        (Some(buffers), true) => {
            let i = rng.random_range(0..buffers.len());
            let level = buffers[i] as usize;
            buffers[i] += 1;
            state.arrive_at(level);
            (EventKind::Arrival, level)
        }
        (Some(buffers), false) => {
            let j = longest_sampled(buffers, config.d, rng);
            let m = buffers[j] as usize;
            if m > 0 {
                buffers[j] -= 1;
                state.serve_at(m);
            }
            (EventKind::Service, m)
        }
    };
    match (kind, level) {
        (EventKind::Service, 0) => EventRecord { kind: EventKind::Wasted, time, affected_length: None },
        _ => EventRecord { kind, time, affected_length: Some(level) },
    }
}

fn draw_holding_time<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> f64 {
    let e: f64 = rng.sample(Exp1);
    e / config.event_rate()
}

/// Advances `state` by one event starting from time `now`.
///
/// Returns the event (stamped `now + dt`) and the holding time `dt`.
pub fn step<R: Rng + ?Sized>(
    state: &mut CountState,
    config: &SystemConfig,
    now: f64,
    rng: &mut R,
) -> (EventRecord, f64) {
    let dt = draw_holding_time(config, rng);
    let ev = apply_tick(state, None, config, now + dt, rng);
    (ev, dt)
}

/// A single trajectory, advanced on demand.
///
/// The time of the next event is drawn once and kept, so the trajectory does
/// not depend on how often it is observed.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: SystemConfig,
    sampling: ServiceSampling,
    state: CountState,
    /// Per-buffer queue lengths, present in per-sample mode.
    buffers: Option<Vec<u32>>,
    now: f64,
    next_event: f64,
    rng: SimRng,
}

impl Simulation {
    pub fn new(config: SystemConfig, initial: CountState) -> Result<Self> {
        config.validate()?;
        if initial.n() != config.n {
            return Err(Error::Config(format!(
                "initial state has n = {}, config has n = {}",
                initial.n(),
                config.n
            )));
        }
        let mut rng = rng_from_seed(config.seed);
        let next_event = draw_holding_time(&config, &mut rng);
        Ok(Self {
            config,
            sampling: ServiceSampling::default(),
            buffers: None,
            state: initial,
            now: 0.0,
            next_event,
            rng,
        })
    }

    pub fn with_sampling(mut self, sampling: ServiceSampling) -> Self {
        self.sampling = sampling;
        self.buffers = match sampling {
            ServiceSampling::TailInversion => None,
            ServiceSampling::PerSample => Some(labelled_buffers(&self.state)),
        };
        self
    }

    pub fn state(&self) -> &CountState {
        &self.state
    }

    pub fn sampling(&self) -> ServiceSampling {
        self.sampling
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    /// Time of the last event applied (0 before any event).
    pub fn now(&self) -> f64 {
        self.now
    }

    /// Applies the next event unconditionally.
    pub fn next_event(&mut self) -> EventRecord {
        self.now = self.next_event;
        let ev = apply_tick(
            &mut self.state,
            self.buffers.as_deref_mut(),
            &self.config,
            self.now,
            &mut self.rng,
        );
        self.next_event = self.now + draw_holding_time(&self.config, &mut self.rng);
        ev
    }

    /// Applies every event at or before `t`; returns how many were applied.
    pub fn advance_to(&mut self, t: f64) -> u64 {
        let mut events = 0;
        while self.next_event <= t {
            self.next_event();
            events += 1;
        }
        events
    }
}

/// Runs one trajectory, recording `F_{n,0..=k_max}` at each record time.
///
/// A row holds the state left by the last event at or before its record
/// time. Output is a pure function of the inputs and `config.seed`.
pub fn simulate(
    config: &SystemConfig,
    record_times: &[f64],
    k_max: usize,
    initial: CountState,
) -> Result<TailFractionPath> {
    simulate_with(config, record_times, k_max, initial, ServiceSampling::default())
}

pub fn simulate_with(
    config: &SystemConfig,
    record_times: &[f64],
    k_max: usize,
    initial: CountState,
    sampling: ServiceSampling,
) -> Result<TailFractionPath> {
    if k_max < 1 {
        return Err(Error::Config("k_max must be at least 1".into()));
    }
    if record_times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Config("record times must be ascending".into()));
    }
    if let (Some(&first), Some(&last)) = (record_times.first(), record_times.last()) {
        if first < 0.0 || last > config.horizon {
            return Err(Error::Config(format!(
                "record times must lie in [0, {}]",
                config.horizon
            )));
        }
    }
    let mut sim = Simulation::new(*config, initial)?.with_sampling(sampling);
    let mut path = TailFractionPath::with_capacity(config.n, k_max, record_times.len());
    let mut row = vec![0.0; k_max + 1];
    for &t in record_times {
        sim.advance_to(t);
        sim.state.fill_tail_fractions(&mut row);
        path.push(t, &row);
    }
    Ok(path)
}
