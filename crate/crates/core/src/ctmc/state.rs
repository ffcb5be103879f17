use crate::error::{Error, Result};

/// Occupancy counts: `counts[l]` buffers currently hold exactly `l` tasks.
///
/// Buffers are exchangeable under randomized longest-queue-first, so this
/// is a sufficient statistic for the whole system. The vector never ends in
/// a zero entry (except the all-empty state `[n]`, whose only entry is `n`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CountState {
    counts: Vec<usize>,
    n: usize,
}

impl CountState {
    /// All `n` buffers empty.
    pub fn empty(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        Ok(Self { counts: vec![n], n })
    }

    pub fn from_counts(n: usize, counts: &[usize]) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        let total: usize = counts.iter().sum();
        if total != n {
            return Err(Error::Config(format!(
                "initial counts sum to {total}, expected n = {n}"
            )));
        }
        let mut counts = counts.to_vec();
        while counts.len() > 1 && counts.last() == Some(&0) {
            counts.pop();
        }
        Ok(Self { counts, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Longest queue currently present.
    pub fn max_length(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn total_tasks(&self) -> usize {
        self.counts.iter().enumerate().map(|(l, &c)| l * c).sum()
    }

    /// Number of buffers holding at least `k` tasks.
    pub fn tail_count(&self, k: usize) -> usize {
        self.counts.iter().skip(k).sum()
    }

    /// `F_k`: fraction of buffers holding at least `k` tasks.
    pub fn tail_fraction(&self, k: usize) -> f64 {
        self.tail_count(k) as f64 / self.n as f64
    }

    /// `[F_0, F_1, ..., F_{k_max}]`.
    pub fn tail_fractions(&self, k_max: usize) -> Vec<f64> {
        let mut out = vec![0.0; k_max + 1];
        self.fill_tail_fractions(&mut out);
        out
    }

    pub(crate) fn fill_tail_fractions(&self, out: &mut [f64]) {
        let n = self.n as f64;
        let mut tail = 0usize;
        let top = self.counts.len().max(out.len());
        for l in (0..top).rev() {
            tail += self.counts.get(l).copied().unwrap_or(0);
            if let Some(slot) = out.get_mut(l) {
                *slot = tail as f64 / n;
            }
        }
    }

    /// Average queue length per buffer, `sum_{k>=1} F_k`.
    pub fn mean_queue_length(&self) -> f64 {
        self.total_tasks() as f64 / self.n as f64
    }

    /// Queue length of the buffer at position `rank` when buffers are sorted
    /// by length; a uniform `rank` in `0..n` picks a uniform buffer.
    pub fn length_at_rank(&self, rank: usize) -> usize {
        debug_assert!(rank < self.n);
        let mut cum = 0;
        for (l, &c) in self.counts.iter().enumerate() {
            cum += c;
            if rank < cum {
                return l;
            }
        }
        self.max_length()
    }

    /// Exact law of the longest of `d` buffers drawn with replacement:
    /// `P(M = l) = (1 - F_{l+1})^d - (1 - F_l)^d`, for `l = 0..=max_length`.
    pub fn max_length_pmf(&self, d: usize) -> Vec<f64> {
        let d = d as i32;
        let n = self.n as f64;
        let mut below = 0usize;
        let mut prev_cdf = 0.0;
        let mut pmf = Vec::with_capacity(self.counts.len());
        for &c in &self.counts {
            below += c;
            let cdf = (below as f64 / n).powi(d);
            pmf.push(cdf - prev_cdf);
            prev_cdf = cdf;
        }
        pmf
    }

    /// One buffer of length `level` receives a task.
    pub(crate) fn arrive_at(&mut self, level: usize) {
        debug_assert!(self.counts[level] > 0);
        self.counts[level] -= 1;
        if level + 1 == self.counts.len() {
            self.counts.push(0);
        }
        self.counts[level + 1] += 1;
    }

    /// One buffer of length `level >= 1` completes a task.
    pub(crate) fn serve_at(&mut self, level: usize) {
        debug_assert!(level >= 1 && self.counts[level] > 0);
        self.counts[level] -= 1;
        self.counts[level - 1] += 1;
        while self.counts.len() > 1 && self.counts.last() == Some(&0) {
            self.counts.pop();
        }
    }
}

/// Builds the starting state; all-empty unless `initial_counts` is given.
pub fn initial_state(n: usize, initial_counts: Option<&[usize]>) -> Result<CountState> {
    match initial_counts {
        None => CountState::empty(n),
        Some(c) => CountState::from_counts(n, c),
    }
}

/// Average queue length of `state`.
pub fn mean_queue_length(state: &CountState) -> f64 {
    state.mean_queue_length()
}
