use crate::csv::fmt_f64;
use crate::error::{Error, Result};

/// Tail fractions `F_{n,0..=k_max}` sampled at a list of record times.
#[derive(Debug, Clone, PartialEq)]
pub struct TailFractionPath {
    n: usize,
    k_max: usize,
    record_times: Vec<f64>,
    /// Row-major, `k_max + 1` columns per record time.
    fractions: Vec<f64>,
}

impl TailFractionPath {
    pub(crate) fn with_capacity(n: usize, k_max: usize, rows: usize) -> Self {
        Self {
            n,
            k_max,
            record_times: Vec::with_capacity(rows),
            fractions: Vec::with_capacity(rows * (k_max + 1)),
        }
    }

    /// Builds a path from explicit rows, checking that each row is a valid
    /// tail (starts at 1, nonincreasing, inside [0, 1]).
    pub fn from_rows(n: usize, record_times: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if record_times.len() != rows.len() || rows.is_empty() {
            return Err(Error::Config("need one nonempty row per record time".into()));
        }
        let k_max = rows[0].len().checked_sub(1).ok_or_else(|| {
            Error::Config("rows must contain at least F_0".into())
        })?;
        if record_times.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config("record times must be ascending".into()));
        }
        let mut path = Self::with_capacity(n, k_max, rows.len());
        for (t, row) in record_times.into_iter().zip(rows) {
            let valid = row.len() == k_max + 1
                && row[0] == 1.0
                && row.windows(2).all(|w| w[0] >= w[1])
                && row.iter().all(|&f| (0.0..=1.0).contains(&f));
            if !valid {
                return Err(Error::Config(format!("invalid tail-fraction row at t = {t}")));
            }
            path.push(t, &row);
        }
        Ok(path)
    }

    pub(crate) fn push(&mut self, t: f64, row: &[f64]) {
        debug_assert_eq!(row.len(), self.k_max + 1);
        self.record_times.push(t);
        self.fractions.extend_from_slice(row);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn record_times(&self) -> &[f64] {
        &self.record_times
    }

    pub fn len(&self) -> usize {
        self.record_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.record_times.is_empty()
    }

    /// `[F_0, ..., F_{k_max}]` at record index `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.k_max + 1;
        &self.fractions[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.fractions.chunks_exact(self.k_max + 1)
    }

    /// `F_k` at every record time.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows().map(|r| r[k]).collect()
    }

    /// CSV with header `t,F0,...,Fk`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for k in 0..=self.k_max {
            out.push_str(&format!(",F{k}"));
        }
        out.push('\n');
        for (t, row) in self.record_times.iter().zip(self.rows()) {
            out.push_str(&fmt_f64(*t));
            for &f in row {
                out.push(',');
                out.push_str(&fmt_f64(f));
            }
            out.push('\n');
        }
        out
    }
}

fn check_level(path: &TailFractionPath, k: usize) -> Result<()> {
    if k > path.k_max {
        return Err(Error::Config(format!(
            "level {k} not recorded (k_max = {})",
            path.k_max
        )));
    }
    Ok(())
}

/// `U_{n,k}(t) = d^k F_{n,k}(t/d)` at every recorded time, as
/// `(scaled time, value)` pairs.
pub fn scaled_view(path: &TailFractionPath, d: usize, k: usize) -> Result<Vec<(f64, f64)>> {
    check_level(path, k)?;
    let df = d as f64;
    let scale = df.powi(k as i32);
    Ok(path
        .record_times
        .iter()
        .zip(path.rows())
        .map(|(&t, row)| (t * df, scale * row[k]))
        .collect())
}

/// `U_{n,k}` at the requested scaled times. Each `s` must have been
/// recorded at unscaled time `s / d`; nothing is interpolated.
pub fn scaled_view_at(
    path: &TailFractionPath,
    d: usize,
    k: usize,
    scaled_times: &[f64],
) -> Result<Vec<(f64, f64)>> {
    check_level(path, k)?;
    let df = d as f64;
    let scale = df.powi(k as i32);
    scaled_times
        .iter()
        .map(|&s| {
            let t = s / df;
            let tol = 1e-12 * t.abs().max(1.0);
            let i = path.record_times.partition_point(|&r| r < t - tol);
            match path.record_times.get(i) {
                Some(&r) if (r - t).abs() <= tol => Ok((s, scale * path.row(i)[k])),
                _ => Err(Error::MissingRecordTime { time: t, scaled_time: s }),
            }
        })
        .collect()
}
