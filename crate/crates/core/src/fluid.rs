//! Fluid limit of the scaled tail fractions `U_k(t) = d^k F_k(t/d)`:
//!
//! ```text
//! u_1' = exp(-u_1) - 1 + lambda
//! u_k' = lambda u_{k-1} - u_k,   k >= 2
//! ```
//!
//! with unique stable equilibrium `u_k* = lambda^{k-1} ln(1/(1-lambda))`.

use crate::csv::fmt_f64;
use crate::error::{Error, Result};
use crate::ode::{interpolate, rk4, uniform_grid};

pub const DEFAULT_DT: f64 = 1e-3;

/// `ln(1/(1-lambda))`, the equilibrium of the first level.
pub fn first_level_equilibrium(lambda: f64) -> f64 {
    -(-lambda).ln_1p()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluidConfig {
    pub lambda: f64,
    /// Initial condition `(v_1, ..., v_K)`; its length is the number of levels.
    pub initial: Vec<f64>,
    pub horizon: f64,
    pub dt: f64,
}

impl FluidConfig {
    /// `levels` levels starting from zero (an empty system).
    pub fn empty_start(lambda: f64, levels: usize, horizon: f64) -> Self {
        Self { lambda, initial: vec![0.0; levels], horizon, dt: DEFAULT_DT }
    }

    pub fn levels(&self) -> usize {
        self.initial.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::Config(format!("lambda must lie in (0, 1), got {}", self.lambda)));
        }
        if self.initial.is_empty() {
            return Err(Error::Config("need at least one level".into()));
        }
        if self.initial.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::Config("initial values must be finite and nonnegative".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be nonnegative, got {}", self.horizon)));
        }
        Ok(())
    }
}

/// Right-hand side of the fluid system.
pub fn fluid_rhs(u: &[f64], lambda: f64) -> Vec<f64> {
    let mut du = vec![0.0; u.len()];
    fluid_rhs_into(u, lambda, &mut du);
    du
}

fn fluid_rhs_into(u: &[f64], lambda: f64, du: &mut [f64]) {
    if u.is_empty() {
        return;
    }
    du[0] = (-u[0]).exp() - 1.0 + lambda;
    for k in 1..u.len() {
        du[k] = lambda * u[k - 1] - u[k];
    }
}

/// `(lambda^{k-1} ln(1/(1-lambda)))_{k=1..=levels}`.
pub fn fixed_point(lambda: f64, levels: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(levels);
    let mut v = first_level_equilibrium(lambda);
    for _ in 0..levels {
        out.push(v);
        v *= lambda;
    }
    out
}

/// Explicit first-level solution, valid for `v1 < ln(1/(1-lambda))`.
///
/// With `a = 1 - lambda` and `C = 1 / (1 - a e^{v1})`,
/// `u_1(t) = ln((C e^{at} - 1) / (C a e^{at}))`, evaluated here as
/// `ln((1 - e^{-at}/C) / a)` so large `t` does not overflow.
pub fn u1_closed_form(v1: f64, lambda: f64, t: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Config(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    if t < 0.0 {
        return Err(Error::Domain(format!("t must be nonnegative, got {t}")));
    }
    let limit = first_level_equilibrium(lambda);
    if v1.is_nan() || v1 >= limit {
        return Err(Error::BranchUnsupported { v1, limit });
    }
    let a = 1.0 - lambda;
    let inv_c = 1.0 - a * v1.exp();
    Ok(((1.0 - inv_c * (-a * t).exp()) / a).ln())
}

/// Dense-output solution of the fluid system on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidSolution {
    grid: Vec<f64>,
    values: Vec<f64>,
    levels: usize,
    lambda: f64,
}

/// RK4 on the grid `0, dt, ..., horizon`.
pub fn solve_fluid(config: &FluidConfig) -> Result<FluidSolution> {
    config.validate()?;
    let lambda = config.lambda;
    let grid = uniform_grid(config.horizon, config.dt);
    let values = rk4(|_, u, du| fluid_rhs_into(u, lambda, du), &config.initial, &grid);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(min >= -1e-12, "fluid solution went negative ({min})");
    Ok(FluidSolution { grid, values, levels: config.levels(), lambda })
}

impl FluidSolution {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn horizon(&self) -> f64 {
        *self.grid.last().expect("grid is never empty")
    }

    /// `[u_1, ..., u_K]` at grid index `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.levels..(i + 1) * self.levels]
    }

    /// `u_level(t)` by linear interpolation; `level` is 1-based.
    pub fn value(&self, level: usize, t: f64) -> f64 {
        assert!((1..=self.levels).contains(&level), "level {level} out of range");
        interpolate(&self.grid, &self.values, self.levels, level - 1, t)
    }

    /// Like [`value`](Self::value) but refuses times outside `[0, horizon]`.
    pub fn try_value(&self, level: usize, t: f64) -> Result<f64> {
        if level == 0 || level > self.levels {
            return Err(Error::Domain(format!(
                "level {level} not solved (have 1..={})",
                self.levels
            )));
        }
        if !(t >= 0.0 && t <= self.horizon() * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!(
                "t = {t} outside the solved range [0, {}]",
                self.horizon()
            )));
        }
        Ok(self.value(level, t))
    }

    /// CSV with header `t,u1,...,uK`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for k in 1..=self.levels {
            out.push_str(&format!(",u{k}"));
        }
        out.push('\n');
        for (i, &t) in self.grid.iter().enumerate() {
            out.push_str(&fmt_f64(t));
            for &v in self.row(i) {
                out.push(',');
                out.push_str(&fmt_f64(v));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sup_error_vs_closed_form(lambda: f64, v1: f64, t_end: f64, dt: f64) -> f64 {
        let sol = solve_fluid(&FluidConfig { lambda, initial: vec![v1], horizon: t_end, dt }).unwrap();
        sol.grid()
            .iter()
            .enumerate()
            .map(|(i, &t)| (sol.row(i)[0] - u1_closed_form(v1, lambda, t).unwrap()).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn rhs_examples() {
        assert_eq!(fluid_rhs(&[0.0], 0.7), vec![0.7]);
        let fp = first_level_equilibrium(0.7);
        assert!(fluid_rhs(&[fp], 0.7)[0].abs() < 1e-15);
        let du = fluid_rhs(&[1.0, 0.5], 0.7);
        assert!((du[0] - ((-1.0f64).exp() - 0.3)).abs() < 1e-15);
        assert!((du[0] - 0.067_879_441_171_442_3).abs() < 1e-12);
        assert!((du[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_values() {
        let fp = fixed_point(0.7, 3);
        assert!((fp[0] - 1.203_972_804_325_936).abs() < 1e-12);
        assert!((fp[1] - 0.842_780_963_028_155).abs() < 1e-12);
        assert!((fp[2] - 0.589_946_674_119_709).abs() < 1e-12);
        assert_eq!(fixed_point(0.7, 1).len(), 1);
    }

    #[test]
    fn fixed_point_is_critical() {
        for lambda in [0.1, 0.5, 0.7, 0.9, 0.99] {
            let r = fluid_rhs(&fixed_point(lambda, 6), lambda);
            assert!(r.iter().all(|x| x.abs() < 1e-14), "lambda {lambda}: {r:?}");
        }
    }

    #[test]
    fn equilibrium_start_stays_put() {
        let fp = fixed_point(0.7, 3);
        let sol = solve_fluid(&FluidConfig { lambda: 0.7, initial: fp.clone(), horizon: 20.0, dt: 1e-3 }).unwrap();
        for i in 0..sol.grid().len() {
            for (a, b) in sol.row(i).iter().zip(&fp) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_identities() {
        assert_eq!(u1_closed_form(0.0, 0.7, 0.0).unwrap(), 0.0);
        assert!((u1_closed_form(0.4, 0.7, 0.0).unwrap() - 0.4).abs() < 1e-15);
        let far = u1_closed_form(0.0, 0.7, 500.0).unwrap();
        assert!((far - 1.203_972_804_325_936).abs() < 1e-12);
        assert!(matches!(
            u1_closed_form(1.3, 0.7, 1.0),
            Err(Error::BranchUnsupported { .. })
        ));
        assert!(u1_closed_form(first_level_equilibrium(0.7), 0.7, 1.0).is_err());
    }

    #[test]
    fn rk4_matches_closed_form() {
        assert!(sup_error_vs_closed_form(0.7, 0.0, 5.0, 1e-3) < 1e-8);
        for (lambda, v1) in [(0.7, 0.0), (0.5, 0.3), (0.9, 1.0), (0.2, 0.0)] {
            let e = sup_error_vs_closed_form(lambda, v1, 10.0, 1e-3);
            assert!(e < 1e-8, "lambda {lambda} v1 {v1}: {e}");
        }
        let sol = solve_fluid(&FluidConfig { lambda: 0.7, initial: vec![0.5], horizon: 1.0, dt: 1e-4 }).unwrap();
        let exact = u1_closed_form(0.5, 0.7, 1.0).unwrap();
        assert!((sol.value(1, 1.0) - exact).abs() < 1e-8);
    }

    #[test]
    fn step_halving_shows_fourth_order() {
        let reference = solve_fluid(&FluidConfig { lambda: 0.7, initial: vec![0.0, 0.0], horizon: 4.0, dt: 1e-5 }).unwrap();
        let err = |dt: f64| {
            let s = solve_fluid(&FluidConfig { lambda: 0.7, initial: vec![0.0, 0.0], horizon: 4.0, dt }).unwrap();
            (1..=2)
                .map(|k| (s.value(k, 4.0) - reference.value(k, 4.0)).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(0.2) / err(0.1);
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn converges_to_fixed_point_monotonically() {
        let fp = fixed_point(0.7, 3);
        let mut last = f64::INFINITY;
        for t in [5.0, 10.0, 20.0, 40.0] {
            let s = solve_fluid(&FluidConfig::empty_start(0.7, 3, t)).unwrap();
            let dist = (1..=3).map(|k| (s.value(k, t) - fp[k - 1]).abs()).fold(0.0, f64::max);
            assert!(dist < last);
            last = dist;
        }
        let s = solve_fluid(&FluidConfig::empty_start(0.7, 2, 80.0)).unwrap();
        assert!((s.value(2, 80.0) - 0.842_780_963_028_155).abs() < 1e-9);
    }

    #[test]
    fn nonnegative_from_empty_start() {
        let s = solve_fluid(&FluidConfig::empty_start(0.95, 5, 30.0)).unwrap();
        assert_eq!(s.row(0), &[0.0; 5]);
        for i in 0..s.grid().len() {
            assert!(s.row(i).iter().all(|&v| v >= -1e-12));
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let base = FluidConfig::empty_start(0.7, 2, 1.0);
        assert!(solve_fluid(&FluidConfig { lambda: 1.0, ..base.clone() }).is_err());
        assert!(solve_fluid(&FluidConfig { dt: 0.0, ..base.clone() }).is_err());
        assert!(solve_fluid(&FluidConfig { initial: vec![], ..base.clone() }).is_err());
        assert!(solve_fluid(&FluidConfig { initial: vec![-1.0], ..base }).is_err());
    }

    #[test]
    fn csv_shape() {
        let s = solve_fluid(&FluidConfig { lambda: 0.7, initial: vec![0.0, 0.0], horizon: 0.002, dt: 1e-3 }).unwrap();
        let csv = s.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,u1,u2");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "0,0,0");
        assert!(s.try_value(1, 1.0).is_err());
        assert!(s.try_value(3, 0.0).is_err());
    }
}
