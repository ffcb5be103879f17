//! Exact transient distribution of small systems by uniformization.
//!
//! From count state `c` the chain moves
//! - one buffer of length `l` to `l + 1` at rate `lambda c[l]`,
//! - one buffer of length `m >= 1` to `m - 1` at rate
//!   `n [(1 - F_{m+1})^d - (1 - F_m)^d]`,
//!
//! and wastes service at rate `n (1 - F_1)^d`. Every row sums to
//! `(1 + lambda) n`, the uniformization rate, so wasted service is exactly
//! the self-loop of the uniformized jump chain.

use std::collections::HashMap;

use crate::csv::fmt_f64;
use crate::ctmc::{CountState, SystemConfig};
use crate::error::{Error, Result};

pub const MAX_STATES: usize = 1_000_000;
/// Enough for `n <= 3`, `t <= 5` to keep the truncation bound below 1e-10.
pub const DEFAULT_MAX_TOTAL_TASKS: usize = 40;
pub const DEFAULT_POISSON_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// States with more tasks than this are cut off; probability flowing
    /// into them is counted as error.
    pub max_total_tasks: usize,
    /// Poisson tail mass left out of the uniformization sum.
    pub poisson_tolerance: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            max_total_tasks: DEFAULT_MAX_TOTAL_TASKS,
            poisson_tolerance: DEFAULT_POISSON_TOLERANCE,
        }
    }
}

/// One outgoing transition of a count state.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub target: CountState,
    pub rate: f64,
}

/// Transitions out of `state` plus the wasted-service (self-loop) rate.
pub fn transitions(state: &CountState, d: usize, lambda: f64) -> (Vec<Transition>, f64) {
    let n = state.n();
    let nf = n as f64;
    let counts = state.counts();
    let mut out = Vec::new();
    for (l, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let mut next = counts.to_vec();
        next[l] -= 1;
        if l + 1 == next.len() {
            next.push(0);
        }
        next[l + 1] += 1;
        out.push(Transition {
            target: CountState::from_counts(n, &next).expect("arrival preserves n"),
            rate: lambda * c as f64,
        });
    }
    let pmf = state.max_length_pmf(d);
    for (m, &p) in pmf.iter().enumerate().skip(1) {
        if counts[m] == 0 || p <= 0.0 {
            continue;
        }
        let mut next = counts.to_vec();
        next[m] -= 1;
        next[m - 1] += 1;
        out.push(Transition {
            target: CountState::from_counts(n, &next).expect("service preserves n"),
            rate: nf * p,
        });
    }
    (out, nf * pmf[0])
}

/// Canonical text form of a count state, e.g. `1;2` for `[1, 2]`.
pub fn encode_state(state: &CountState) -> String {
    state.counts().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";")
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub states: Vec<CountState>,
    pub probabilities: Vec<f64>,
    /// Upper bound on the missing mass `1 - sum(probabilities)`; each
    /// reported probability is below the true one by at most this much.
    pub truncation_error_bound: f64,
    pub t: f64,
}

impl OracleResult {
    pub fn probability_of(&self, state: &CountState) -> f64 {
        self.states
            .iter()
            .position(|s| s == state)
            .map_or(0.0, |i| self.probabilities[i])
    }

    /// `E[F_k(t)]` over the retained states.
    pub fn expected_tail_fraction(&self, k: usize) -> f64 {
        self.states
            .iter()
            .zip(&self.probabilities)
            .map(|(s, p)| p * s.tail_fraction(k))
            .sum()
    }

    /// CSV with header `state,probability`, states in discovery order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state,probability\n");
        for (s, p) in self.states.iter().zip(&self.probabilities) {
            out.push_str(&encode_state(s));
            out.push(',');
            out.push_str(&fmt_f64(*p));
            out.push('\n');
        }
        out
    }
}

/// Sparse uniformized jump chain over the truncated state space.
struct JumpChain {
    states: Vec<CountState>,
    /// Per state: (target index, probability); includes the self-loop.
    rows: Vec<Vec<(usize, f64)>>,
    /// Per state: probability of jumping past the truncation.
    lost: Vec<f64>,
}

fn build_chain(initial: &CountState, d: usize, lambda: f64, max_total: usize) -> Result<JumpChain> {
    let uniform_rate = (1.0 + lambda) * initial.n() as f64;
    let mut index: HashMap<CountState, usize> = HashMap::new();
    let mut states = vec![initial.clone()];
    index.insert(initial.clone(), 0);
    let mut rows = Vec::new();
    let mut lost = Vec::new();
    let mut next = 0;
    while next < states.len() {
        let (out, wasted) = transitions(&states[next], d, lambda);
        let mut row = Vec::with_capacity(out.len() + 1);
        let mut cut = 0.0;
        if wasted > 0.0 {
            row.push((next, wasted / uniform_rate));
        }
        for tr in out {
            if tr.target.total_tasks() > max_total {
                cut += tr.rate / uniform_rate;
                continue;
            }
            let j = match index.get(&tr.target) {
                Some(&j) => j,
                None => {
                    if states.len() >= MAX_STATES {
                        return Err(Error::StateSpaceTooLarge { limit: MAX_STATES });
                    }
                    let j = states.len();
                    index.insert(tr.target.clone(), j);
                    states.push(tr.target);
                    j
                }
            };
            row.push((j, tr.rate / uniform_rate));
        }
        rows.push(row);
        lost.push(cut);
        next += 1;
    }
    Ok(JumpChain { states, rows, lost })
}

/// Transient law at time `t` of the system in `config` started from
/// `initial` (the horizon and seed of `config` are ignored).
pub fn uniformization_oracle(
    config: &SystemConfig,
    initial: &CountState,
    t: f64,
    options: OracleOptions,
) -> Result<OracleResult> {
    SystemConfig { horizon: 0.0, ..*config }.validate()?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be finite and nonnegative, got {t}")));
    }
    if initial.n() != config.n {
        return Err(Error::Config("initial state and config disagree on n".into()));
    }
    if initial.total_tasks() > options.max_total_tasks {
        return Err(Error::Config(format!(
            "initial state already holds more than {} tasks",
            options.max_total_tasks
        )));
    }
    if options.poisson_tolerance.is_nan() || options.poisson_tolerance <= 0.0 {
        return Err(Error::Config("poisson tolerance must be positive".into()));
    }
    let chain = build_chain(initial, config.d, config.lambda, options.max_total_tasks)?;
    let m = chain.states.len();
    let rate_t = config.event_rate() * t;

    let mut dist = vec![0.0; m];
    dist[0] = 1.0;
    let mut acc = vec![0.0; m];
    let mut scratch = vec![0.0; m];
    let ln_rate = rate_t.ln();
    let log_weight = |k: usize| -rate_t + k as f64 * ln_rate - libm::lgamma(k as f64 + 1.0);
    let mut weight_sum = 0.0;
    let mut lost_so_far = 0.0;
    let mut lost_weighted = 0.0;
    let mut k = 0usize;
    let poisson_tail = loop {
        let w = if rate_t == 0.0 { 1.0 } else { log_weight(k).exp() };
        weight_sum += w;
        lost_weighted += w * lost_so_far;
        if w > 0.0 {
            for (a, &p) in acc.iter_mut().zip(&dist) {
                *a += w * p;
            }
        }
        if rate_t == 0.0 {
            break 0.0;
        }
        // Past the mode the weights fall geometrically with ratio
        // rate_t / (j + 1), which bounds the rest of the series.
        if k as f64 + 2.0 > rate_t {
            let next = log_weight(k + 1).exp();
            let tail = next / (1.0 - rate_t / (k as f64 + 2.0));
            if tail < options.poisson_tolerance {
                break tail;
            }
        }
        scratch.iter_mut().for_each(|x| *x = 0.0);
        for (i, row) in chain.rows.iter().enumerate() {
            let p = dist[i];
            if p == 0.0 {
                continue;
            }
            lost_so_far += p * chain.lost[i];
            for &(j, q) in row {
                scratch[j] += p * q;
            }
        }
        std::mem::swap(&mut dist, &mut scratch);
        k += 1;
    };
    // Also covers rounding in the computed weights.
    let poisson_tail = poisson_tail.max(1.0 - weight_sum);
    Ok(OracleResult {
        states: chain.states,
        probabilities: acc,
        // Rounding in the sums is a few ulps per term; keep it inside the bound.
        truncation_error_bound: poisson_tail + lost_weighted + 1e-14,
        t,
    })
}
