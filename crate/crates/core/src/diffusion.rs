//! Second-order (diffusion) approximations of the fraction of nonempty
//! buffers.
//!
//! On the fluid time scale the fluctuation process `Z` solves the linear SDE
//!
//! ```text
//! dZ = -exp(-u_1) Z dt + sqrt(lambda) dB1 - sqrt(1 - exp(-u_1)) dB2,  Z(0) = 0
//! ```
//!
//! whose variance obeys `s' = -2 exp(-u_1) s + lambda + 1 - exp(-u_1)`,
//! `s(0) = 0`. For `n` buffers sampling `d` at a time,
//!
//! ```text
//! diffusion: F_1(t) ~ N(u_1(dt)/d,               s(dt)/(nd))
//! modified:  F_1(t) ~ N(u_1(dt)/d - u_2(dt)/d^2, s(dt)/(nd))
//! ```

use rand::Rng;
use rand_distr::StandardNormal;

use crate::csv;
use crate::error::{Error, Result};
use crate::fluid::{first_level_equilibrium, solve_fluid, FluidConfig, FluidSolution, DEFAULT_DT};
use crate::ode::{interpolate, rk4, uniform_grid};
use crate::seed::{replicate, rng_from_seed};
use crate::stats::normal_cdf;

fn check_coverage(u: &FluidSolution, horizon: f64) -> Result<()> {
    if horizon.is_nan() || horizon < 0.0 {
        return Err(Error::Domain(format!("horizon must be nonnegative, got {horizon}")));
    }
    if u.horizon() < horizon * (1.0 - 1e-12) {
        return Err(Error::Domain(format!(
            "fluid solution covers [0, {}], need [0, {horizon}]",
            u.horizon()
        )));
    }
    Ok(())
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    Ok(())
}

/// `sigma^2(t) = var Z(t)` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceSolution {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl VarianceSolution {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn horizon(&self) -> f64 {
        *self.grid.last().expect("grid is never empty")
    }

    pub fn value(&self, t: f64) -> f64 {
        interpolate(&self.grid, &self.values, 1, 0, t)
    }

    /// CSV with header `t,value`.
    pub fn to_csv(&self) -> String {
        let pts: Vec<(f64, f64)> = self.grid.iter().copied().zip(self.values.iter().copied()).collect();
        csv::series("value", &pts)
    }
}

/// RK4 solution of the variance ODE driven by level 1 of `u`.
pub fn solve_variance_ode(u: &FluidSolution, lambda: f64, horizon: f64, dt: f64) -> Result<VarianceSolution> {
    check_coverage(u, horizon)?;
    check_dt(dt)?;
    let grid = uniform_grid(horizon, dt);
    let values = rk4(
        |t, s, ds| {
            let a = (-u.value(1, t)).exp();
            ds[0] = -2.0 * a * s[0] + lambda + (1.0 - a);
        },
        &[0.0],
        &grid,
    );
    debug_assert!(values.iter().all(|&v| v >= 0.0));
    Ok(VarianceSolution { grid, values })
}

/// One sampled path of `Z` (level 1) or `Z_k` (level `k >= 2`).
#[derive(Debug, Clone, PartialEq)]
pub struct SdePath {
    pub grid: Vec<f64>,
    pub z: Vec<f64>,
    pub level: usize,
    /// Set for `Z_k`, `k >= 2`, whose limit law is conjectured rather than
    /// proven.
    pub conjectural: bool,
}

impl SdePath {
    /// CSV with header `t,value`.
    pub fn to_csv(&self) -> String {
        let pts: Vec<(f64, f64)> = self.grid.iter().copied().zip(self.z.iter().copied()).collect();
        csv::series("value", &pts)
    }
}

/// Euler-Maruyama for `dZ = -a(t) Z dt + b1(t) dB1 - b2(t) dB2`, with the
/// coefficients frozen on the grid.
#[derive(Debug, Clone)]
pub struct EulerMaruyama {
    grid: Vec<f64>,
    /// Per step: (a, b1, b2) at the left end point.
    coeffs: Vec<(f64, f64, f64)>,
    start: f64,
    level: usize,
}

impl EulerMaruyama {
    /// Sampler for `Z` from level 1 of `u`, started at 0.
    pub fn for_z(u: &FluidSolution, lambda: f64, horizon: f64, dt: f64) -> Result<Self> {
        check_coverage(u, horizon)?;
        check_dt(dt)?;
        let grid = uniform_grid(horizon, dt);
        let sqrt_lambda = lambda.sqrt();
        let coeffs = grid[..grid.len() - 1]
            .iter()
            .map(|&t| {
                let a = (-u.value(1, t)).exp();
                (a, sqrt_lambda, (1.0 - a).max(0.0).sqrt())
            })
            .collect();
        Ok(Self { grid, coeffs, start: 0.0, level: 1 })
    }

    /// Sampler for `Z_k`, `k >= 2`, from levels `k-1` and `k` of `u`,
    /// started at `start` (`v_k*`).
    pub fn for_zk(u: &FluidSolution, k: usize, start: f64, horizon: f64, dt: f64) -> Result<Self> {
        if k < 2 || k > u.levels() {
            return Err(Error::Domain(format!(
                "level k = {k} needs 2 <= k <= {} solved levels",
                u.levels()
            )));
        }
        check_coverage(u, horizon)?;
        check_dt(dt)?;
        let lambda = u.lambda();
        let grid = uniform_grid(horizon, dt);
        let mut coeffs = Vec::with_capacity(grid.len());
        for &t in &grid[..grid.len() - 1] {
            let (prev, cur) = (u.value(k - 1, t), u.value(k, t));
            if prev < -1e-12 || cur < -1e-12 {
                return Err(Error::Domain(format!("negative fluid value at t = {t}")));
            }
            coeffs.push((1.0, (lambda * prev.max(0.0)).sqrt(), cur.max(0.0).sqrt()));
        }
        Ok(Self { grid, coeffs, start, level: k })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    fn run<R: Rng + ?Sized>(&self, rng: &mut R, mut visit: impl FnMut(f64)) -> f64 {
        let mut z = self.start;
        visit(z);
        for (w, &(a, b1, b2)) in self.grid.windows(2).zip(&self.coeffs) {
            let h = w[1] - w[0];
            let sh = h.sqrt();
            let xi1: f64 = rng.sample(StandardNormal);
            let xi2: f64 = rng.sample(StandardNormal);
            z += -a * z * h + b1 * sh * xi1 - b2 * sh * xi2;
            visit(z);
        }
        z
    }

    pub fn sample_path(&self, seed: u64) -> SdePath {
        let mut rng = rng_from_seed(seed);
        let mut z = Vec::with_capacity(self.grid.len());
        self.run(&mut rng, |v| z.push(v));
        SdePath { grid: self.grid.clone(), z, level: self.level, conjectural: self.level >= 2 }
    }

    /// Value at the end of the grid only.
    pub fn sample_terminal(&self, seed: u64) -> f64 {
        let mut rng = rng_from_seed(seed);
        self.run(&mut rng, |_| {})
    }

    /// `count` independent terminal values, seeded from `master` with the
    /// same derivation as simulator replications.
    pub fn sample_terminals(&self, master: u64, count: usize, workers: usize) -> Vec<f64> {
        replicate(master, count, workers, |_, seed| self.sample_terminal(seed))
    }
}

/// One Euler-Maruyama path of `Z` with `Z(0) = 0`.
pub fn sample_z_path(u: &FluidSolution, lambda: f64, horizon: f64, dt: f64, seed: u64) -> Result<SdePath> {
    Ok(EulerMaruyama::for_z(u, lambda, horizon, dt)?.sample_path(seed))
}

/// One Euler-Maruyama path of the conjectured level-`k` limit
/// `dZ_k = -Z_k dt + sqrt(lambda u_{k-1}) dB1 - sqrt(u_k) dB2`, `Z_k(0) = vk_star`.
pub fn sample_zk_path(
    k: usize,
    u: &FluidSolution,
    vk_star: f64,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<SdePath> {
    Ok(EulerMaruyama::for_zk(u, k, vk_star, horizon, dt)?.sample_path(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ApproxKind {
    Diffusion,
    Modified,
}

/// Normal approximation to the law of `F_{n,1}(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxDistribution {
    pub mean: f64,
    pub variance: f64,
    pub kind: ApproxKind,
    pub n: usize,
    pub d: usize,
    pub lambda: f64,
    pub t: f64,
}

impl ApproxDistribution {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// Normal cdf; a point mass at the mean when the variance is zero.
    pub fn cdf(&self, x: f64) -> f64 {
        if self.variance > 0.0 {
            normal_cdf(x, self.mean, self.std_dev()).expect("positive sigma")
        } else if x >= self.mean {
            1.0
        } else {
            0.0
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let s = self.std_dev();
        if s == 0.0 {
            return 0.0;
        }
        let z = (x - self.mean) / s;
        (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
    }
}

/// Fluid levels 1-2 and the variance ODE for one `(lambda, d)`, from an
/// empty start, covering unscaled times `[0, t_max]`.
#[derive(Debug, Clone)]
pub struct DiffusionModel {
    lambda: f64,
    d: usize,
    fluid: FluidSolution,
    variance: VarianceSolution,
}

impl DiffusionModel {
    pub fn new(lambda: f64, d: usize, t_max: f64) -> Result<Self> {
        Self::with_dt(lambda, d, t_max, DEFAULT_DT)
    }

    pub fn with_dt(lambda: f64, d: usize, t_max: f64, dt: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::Config("d must be at least 1".into()));
        }
        if !(t_max >= 0.0 && t_max.is_finite()) {
            return Err(Error::Domain(format!("t must be nonnegative, got {t_max}")));
        }
        let horizon = d as f64 * t_max;
        let fluid = solve_fluid(&FluidConfig { lambda, initial: vec![0.0, 0.0], horizon, dt })?;
        let variance = solve_variance_ode(&fluid, lambda, horizon, dt)?;
        Ok(Self { lambda, d, fluid, variance })
    }

    pub fn fluid(&self) -> &FluidSolution {
        &self.fluid
    }

    pub fn variance(&self) -> &VarianceSolution {
        &self.variance
    }

    /// Approximate law of `F_{n,1}(t)`, `t` on the unscaled clock.
    pub fn distribution(&self, n: usize, t: f64, kind: ApproxKind) -> Result<ApproxDistribution> {
        if n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        let d = self.d as f64;
        let s = d * t;
        if !(s >= 0.0 && s <= self.fluid.horizon() * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!(
                "t = {t} outside the solved range [0, {}]",
                self.fluid.horizon() / d
            )));
        }
        let mut mean = self.fluid.value(1, s) / d;
        if kind == ApproxKind::Modified {
            mean -= self.fluid.value(2, s) / (d * d);
        }
        let variance = self.variance.value(s).max(0.0) / (n as f64 * d);
        Ok(ApproxDistribution { mean, variance, kind, n, d: self.d, lambda: self.lambda, t })
    }
}

/// Diffusion or modified-diffusion normal approximation of `F_{n,1}(t)`
/// for an initially empty system.
pub fn approx_f1_distribution(n: usize, d: usize, lambda: f64, t: f64, kind: ApproxKind) -> Result<ApproxDistribution> {
    DiffusionModel::new(lambda, d, t)?.distribution(n, t, kind)
}

/// Long-run mean and standard deviation of `F_{n,1}`:
/// `mu = (1/d - lambda/d^2) ln(1/(1-lambda))` and
/// `sigma = lambda / ((1-lambda) sqrt(nd))`.
///
/// With `ode_consistent` the standard deviation is instead the square root
/// of the variance ODE's equilibrium, `sqrt(lambda/(1-lambda)) / sqrt(nd)`.
pub fn stationary_mu_sigma(n: usize, d: usize, lambda: f64, ode_consistent: bool) -> (f64, f64) {
    let (nf, df) = (n as f64, d as f64);
    let mu = (1.0 / df - lambda / (df * df)) * first_level_equilibrium(lambda);
    let ratio = lambda / (1.0 - lambda);
    let sigma = if ode_consistent { ratio.sqrt() } else { ratio } / (nf * df).sqrt();
    (mu, sigma)
}

/// Region of the `(mu, sigma)` plane where the modified approximation is
/// accurate: `sigma < mu/3` and `sigma > 2(mu - 1/4)/3`.
pub fn ks_region_accepts(mu: f64, sigma: f64) -> bool {
    sigma < mu / 3.0 && sigma > 2.0 * (mu - 0.25) / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid::fixed_point;

    fn fluid(lambda: f64, initial: Vec<f64>, horizon: f64, dt: f64) -> FluidSolution {
        solve_fluid(&FluidConfig { lambda, initial, horizon, dt }).unwrap()
    }

    fn mean_and_se_of_variance(xs: &[f64]) -> (f64, f64, f64) {
        let r = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / r;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / r;
        // SE of the sample variance: sqrt((m4 - var^2) / R).
        (mean, var, ((m4 - var * var) / r).sqrt())
    }

    #[test]
    fn variance_starts_at_zero() {
        let u = fluid(0.7, vec![0.0], 1.0, 1e-3);
        let v = solve_variance_ode(&u, 0.7, 1.0, 1e-3).unwrap();
        assert_eq!(v.value(0.0), 0.0);
        assert!(v.values().iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn variance_equilibrium_at_fixed_point() {
        let u = fluid(0.7, fixed_point(0.7, 1), 50.0, 1e-3);
        let v = solve_variance_ode(&u, 0.7, 50.0, 1e-3).unwrap();
        assert!((v.value(50.0) - 0.7 / 0.3).abs() < 1e-6);
    }

    #[test]
    fn variance_needs_coverage() {
        let u = fluid(0.7, vec![0.0], 1.0, 1e-3);
        assert!(matches!(solve_variance_ode(&u, 0.7, 2.0, 1e-3), Err(Error::Domain(_))));
    }

    #[test]
    fn z_paths_are_deterministic_and_start_at_zero() {
        let u = fluid(0.7, vec![0.0], 2.0, 1e-2);
        let a = sample_z_path(&u, 0.7, 2.0, 1e-2, 5).unwrap();
        let b = sample_z_path(&u, 0.7, 2.0, 1e-2, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.z[0], 0.0);
        assert_eq!(a.level, 1);
        assert!(!a.conjectural);
        assert_eq!(a.z.len(), a.grid.len());
        assert!(a.to_csv().starts_with("t,value\n0,0\n"));
    }

    #[test]
    fn z_mean_is_zero_and_variance_matches_ode() {
        let (lambda, horizon, dt) = (0.7, 2.0, 1e-3);
        let u = fluid(lambda, vec![0.0], horizon, dt);
        let em = EulerMaruyama::for_z(&u, lambda, horizon, dt).unwrap();
        let xs = em.sample_terminals(17, 100_000, 0);
        let (mean, var, se_var) = mean_and_se_of_variance(&xs);
        let se_mean = (var / xs.len() as f64).sqrt();
        assert!(mean.abs() < 3.0 * se_mean, "mean {mean}");
        let ode = solve_variance_ode(&u, lambda, horizon, dt).unwrap().value(horizon);
        assert!((var - ode).abs() < 3.0 * se_var, "var {var} vs {ode}");
    }

    #[test]
    fn zk_without_noise_decays_exponentially() {
        let u = fluid(0.7, vec![0.0, 0.0], 1.0, 1e-3);
        // Zero coefficients: build the level-2 sampler from an all-zero fluid
        // by hand.
        let em = EulerMaruyama {
            grid: uniform_grid(1.0, 1e-3),
            coeffs: vec![(1.0, 0.0, 0.0); 1000],
            start: 1.0,
            level: 2,
        };
        let p = em.sample_path(0);
        assert!((p.z.last().unwrap() - (-1.0f64).exp()).abs() < 1e-3);
        assert!(p.conjectural);
        // sanity on the public constructor
        assert!(sample_zk_path(2, &u, 0.0, 1.0, 1e-3, 1).unwrap().conjectural);
        assert!(sample_zk_path(3, &u, 0.0, 1.0, 1e-3, 1).is_err());
        assert!(sample_zk_path(1, &u, 0.0, 1.0, 1e-3, 1).is_err());
    }

    #[test]
    fn zk_variance_matches_moment_ode() {
        let (lambda, horizon, dt) = (0.7, 5.0, 1e-3);
        let u = fluid(lambda, vec![0.0, 0.0], horizon, dt);
        let em = EulerMaruyama::for_zk(&u, 2, 0.0, horizon, dt).unwrap();
        let xs = em.sample_terminals(23, 100_000, 0);
        let (mean, var, se_var) = mean_and_se_of_variance(&xs);
        assert!(mean.abs() < 3.0 * (var / xs.len() as f64).sqrt());
        // s' = -2 s + lambda u_1 + u_2, s(0) = 0
        let grid = uniform_grid(horizon, dt);
        let s = rk4(
            |t, s, ds| ds[0] = -2.0 * s[0] + lambda * u.value(1, t) + u.value(2, t),
            &[0.0],
            &grid,
        );
        let oracle = *s.last().unwrap();
        assert!((var - oracle).abs() < 3.0 * se_var, "var {var} vs {oracle}");
    }

    #[test]
    fn approximation_at_time_zero_is_degenerate() {
        for kind in [ApproxKind::Diffusion, ApproxKind::Modified] {
            let a = approx_f1_distribution(100, 5, 0.7, 0.0, kind).unwrap();
            assert_eq!(a.mean, 0.0);
            assert_eq!(a.variance, 0.0);
            assert_eq!(a.cdf(0.0), 1.0);
            assert_eq!(a.cdf(-1e-9), 0.0);
        }
    }

    #[test]
    fn modified_mean_tends_to_stationary_mu() {
        let a = approx_f1_distribution(1000, 10, 0.7, 20.0, ApproxKind::Modified).unwrap();
        assert!((a.mean - 0.111_969_470_802_312).abs() < 1e-8, "{}", a.mean);
    }

    #[test]
    fn kinds_share_variance_and_order_means() {
        let m = DiffusionModel::new(0.7, 5, 10.0).unwrap();
        for t in [0.1, 1.0, 10.0] {
            let d = m.distribution(1000, t, ApproxKind::Diffusion).unwrap();
            let md = m.distribution(1000, t, ApproxKind::Modified).unwrap();
            assert_eq!(d.variance, md.variance);
            assert!(md.mean < d.mean);
        }
        assert!(m.distribution(1000, 11.0, ApproxKind::Diffusion).is_err());
    }

    #[test]
    fn variance_scales_as_one_over_nd() {
        let m = DiffusionModel::new(0.7, 5, 10.0).unwrap();
        let a = m.distribution(100, 10.0, ApproxKind::Diffusion).unwrap();
        let b = m.distribution(800, 10.0, ApproxKind::Diffusion).unwrap();
        assert!((a.variance / b.variance - 8.0).abs() < 1e-12);
        let s = m.variance().value(50.0);
        assert!((a.variance - s / 500.0).abs() < 1e-15);
    }

    #[test]
    fn stationary_formulas() {
        let (mu, _) = stationary_mu_sigma(1, 10, 0.7, false);
        assert!((mu - 0.111_969_470_802_312).abs() < 1e-12);
        let (_, sigma) = stationary_mu_sigma(1000, 5, 0.7, false);
        assert!((sigma - 0.032_998_316_455_372).abs() < 1e-12);
        let (_, sigma_ode) = stationary_mu_sigma(1000, 5, 0.7, true);
        assert!((sigma_ode - (0.7f64 / 0.3).sqrt() / 5000f64.sqrt()).abs() < 1e-15);
        let (mu0, s0) = stationary_mu_sigma(1000, 5, 1e-12, false);
        assert!(mu0 < 1e-12 && s0 < 1e-12);
    }

    #[test]
    fn region_predicate() {
        assert!(ks_region_accepts(0.2, 0.05));
        assert!(!ks_region_accepts(0.2, 0.1));
        assert!(!ks_region_accepts(0.0, 0.0));
        // lower boundary bites for large mu
        assert!(ks_region_accepts(0.4, 0.12));
        assert!(!ks_region_accepts(0.4, 0.09));
        assert!(!ks_region_accepts(0.7, 0.2));
    }
}
