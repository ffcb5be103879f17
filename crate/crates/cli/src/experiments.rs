//! Runners for the four experiment kinds.
//!
//! Every runner derives one master seed per grid point from the spec's
//! `master_seed` and the point's parameters, then fans replications out on
//! a worker pool. Results are gathered in replication order, so output does
//! not depend on the number of workers.

use std::fmt::Write as _;
use std::path::Path;

use lqf_core::csv::fmt_f64;
use lqf_core::seed::{derive_seed, mix64, replicate, stream_seed};
use lqf_core::{
    histogram, ks_distance, ks_region_accepts, scaled_view_at, simulate, solve_fluid,
    stationary_mu_sigma, ApproxDistribution, ApproxKind, CountState, DiffusionModel,
    EmpiricalSample, FluidConfig, Histogram, SampleMeta, ServiceSampling, Simulation,
    SystemConfig,
};

use crate::cputime::thread_cpu_time;
use crate::error::{CliError, Result};
use crate::spec::{ExperimentKind, ExperimentSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Points in the overlay curves written next to each histogram.
const OVERLAY_POINTS: usize = 401;

/// One output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub file_name: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct Outcome<R> {
    pub report: R,
    pub artifacts: Vec<Artifact>,
}

/// First line of every CSV the runners emit.
pub fn header_line(spec: &ExperimentSpec) -> String {
    format!("# lqf {VERSION} spec={}\n", spec.to_json())
}

fn artifact(spec: &ExperimentSpec, file_name: String, body: String) -> Artifact {
    Artifact { file_name, contents: header_line(spec) + &body }
}

/// `d(n) = round(10 log10 n)`.
pub fn sample_paths_d(n: usize) -> lqf_core::Result<usize> {
    let d = (10.0 * (n as f64).log10()).round();
    if d < 1.0 {
        return Err(lqf_core::Error::Config(format!(
            "d = round(10 log10 {n}) = {d} is below 1"
        )));
    }
    Ok(d as usize)
}

/// Master seed of one grid point, a function of the parameters only.
pub fn point_seed(master: u64, n: usize, d: usize, lambda: f64, t: f64) -> u64 {
    let mut h = mix64(n as u64);
    h = mix64(h ^ d as u64);
    h = mix64(h ^ lambda.to_bits());
    h = mix64(h ^ t.to_bits());
    stream_seed(master, h)
}

fn tag(n: usize, d: usize, lambda: f64, t: f64) -> String {
    format!("n{n}_d{d}_lambda{}_t{}", fmt_f64(lambda), fmt_f64(t))
}

/// `F_{n,1}(t)` from `reps` independent empty-start runs.
pub fn sample_f1(
    n: usize,
    d: usize,
    lambda: f64,
    t: f64,
    reps: usize,
    seed: u64,
    workers: usize,
) -> Result<EmpiricalSample> {
    let values = replicate(seed, reps, workers, |_, s| {
        let config = SystemConfig::new(n, d, lambda, t, s)?;
        let path = simulate(&config, &[t], 1, CountState::empty(n)?)?;
        Ok::<_, lqf_core::Error>(path.row(0)[1])
    })
    .into_iter()
    .collect::<lqf_core::Result<Vec<f64>>>()?;
    Ok(EmpiricalSample::new(values, SampleMeta { n, d, lambda, t })?)
}

fn grid_points(spec: &ExperimentSpec) -> Vec<(usize, usize, f64, f64)> {
    let mut out = Vec::new();
    for &n in &spec.n {
        for &d in spec.d_grid() {
            for &lambda in &spec.lambda {
                for &t in &spec.t_record {
                    out.push((n, d, lambda, t));
                }
            }
        }
    }
    out
}

fn sort_by_params<T>(rows: &mut [T], key: impl Fn(&T) -> (usize, usize, f64, f64)) {
    rows.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        ka.0.cmp(&kb.0)
            .then(ka.1.cmp(&kb.1))
            .then(ka.2.total_cmp(&kb.2))
            .then(ka.3.total_cmp(&kb.3))
    });
}

// ---------------------------------------------------------------- paths

#[derive(Debug, Clone, PartialEq)]
pub struct PathSeries {
    pub n: usize,
    pub d: usize,
    pub replication: usize,
    /// `U_{n,1}` at each scaled time.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePathsReport {
    pub lambda: f64,
    /// Scaled (fluid) times.
    pub times: Vec<f64>,
    /// `u_1` from an empty start at `times`.
    pub fluid: Vec<f64>,
    pub series: Vec<PathSeries>,
}

/// Scaled sample paths `U_{n,1}` with `d = round(10 log10 n)` against the
/// fluid solution.
pub fn run_sample_paths(spec: &ExperimentSpec, workers: usize) -> Result<Outcome<Vec<SamplePathsReport>>> {
    expect_kind(spec, ExperimentKind::SamplePaths)?;
    let end = spec.t_record[0];
    let points = spec.record_points;
    let times: Vec<f64> = (0..points)
        .map(|i| end * i as f64 / (points - 1) as f64)
        .collect();
    let reps = spec.replications();
    let mut reports = Vec::new();
    let mut artifacts = Vec::new();
    for &lambda in &spec.lambda {
        let fluid_sol = solve_fluid(&FluidConfig::empty_start(lambda, 1, end))?;
        let fluid: Vec<f64> = times.iter().map(|&t| fluid_sol.value(1, t)).collect();
        let jobs: Vec<(usize, usize, usize)> = spec
            .n
            .iter()
            .map(|&n| sample_paths_d(n).map(|d| (n, d)))
            .collect::<lqf_core::Result<Vec<_>>>()?
            .into_iter()
            .flat_map(|(n, d)| (0..reps).map(move |r| (n, d, r)))
            .collect();
        let series = replicate(0, jobs.len(), workers, |i, _| {
            let (n, d, r) = jobs[i];
            let seed = derive_seed(point_seed(spec.master_seed, n, d, lambda, end), r as u64);
            let horizon = end / d as f64;
            let config = SystemConfig::new(n, d, lambda, horizon, seed)?;
            let record: Vec<f64> = times.iter().map(|&s| (s / d as f64).min(horizon)).collect();
            let path = simulate(&config, &record, 1, CountState::empty(n)?)?;
            let values = scaled_view_at(&path, d, 1, &times)?.into_iter().map(|(_, u)| u).collect();
            Ok::<_, lqf_core::Error>(PathSeries { n, d, replication: r, values })
        })
        .into_iter()
        .collect::<lqf_core::Result<Vec<_>>>()?;

        let mut body = String::from("t,fluid");
        for s in &series {
            let _ = write!(body, ",U_n{}_d{}_r{}", s.n, s.d, s.replication);
        }
        body.push('\n');
        for (i, &t) in times.iter().enumerate() {
            body.push_str(&fmt_f64(t));
            body.push(',');
            body.push_str(&fmt_f64(fluid[i]));
            for s in &series {
                body.push(',');
                body.push_str(&fmt_f64(s.values[i]));
            }
            body.push('\n');
        }
        artifacts.push(artifact(spec, format!("sample_paths_lambda{}.csv", fmt_f64(lambda)), body));
        reports.push(SamplePathsReport { lambda, times: times.clone(), fluid, series });
    }
    Ok(Outcome { report: reports, artifacts })
}

// ------------------------------------------------------------ histogram

#[derive(Debug, Clone)]
pub struct HistogramPoint {
    pub sample: EmpiricalSample,
    pub diffusion: ApproxDistribution,
    pub modified: ApproxDistribution,
    pub ks_diffusion: f64,
    pub ks_modified: f64,
    pub histogram: Histogram,
}

fn ks_against(sample: &EmpiricalSample, approx: &ApproxDistribution) -> f64 {
    ks_distance(sample, |x| approx.cdf(x))
}

/// Histograms of `F_{n,1}(t)` with both normal approximations overlaid.
pub fn run_histogram(spec: &ExperimentSpec, workers: usize) -> Result<Outcome<Vec<HistogramPoint>>> {
    expect_kind(spec, ExperimentKind::Histogram)?;
    let mut points = Vec::new();
    let mut artifacts = Vec::new();
    for (n, d, lambda, t) in grid_points(spec) {
        let seed = point_seed(spec.master_seed, n, d, lambda, t);
        let sample = sample_f1(n, d, lambda, t, spec.replications(), seed, workers)?;
        let model = DiffusionModel::new(lambda, d, t)?;
        let diffusion = model.distribution(n, t, ApproxKind::Diffusion)?;
        let modified = model.distribution(n, t, ApproxKind::Modified)?;
        let bin_width = spec.bin_width.unwrap_or(1.0 / n as f64);
        let hist = histogram(&sample, bin_width)?;
        let name = tag(n, d, lambda, t);
        artifacts.push(artifact(spec, format!("histogram_{name}.csv"), hist.to_csv()));
        artifacts.push(artifact(spec, format!("overlay_{name}.csv"), overlay_csv(&hist, &diffusion, &modified)));
        points.push(HistogramPoint {
            ks_diffusion: ks_against(&sample, &diffusion),
            ks_modified: ks_against(&sample, &modified),
            sample,
            diffusion,
            modified,
            histogram: hist,
        });
    }
    sort_by_params(&mut points, |p| (p.sample.meta.n, p.sample.meta.d, p.sample.meta.lambda, p.sample.meta.t));
    let header = [
        "n", "d", "lambda", "t", "replications", "empirical_mean", "empirical_variance",
        "diffusion_mean", "modified_mean", "approx_variance", "ks_diffusion", "ks_modified",
    ];
    let rows = points.iter().map(|p| {
        let m = p.sample.meta;
        [
            m.n as f64, m.d as f64, m.lambda, m.t, p.sample.replications() as f64,
            p.sample.mean(), p.sample.variance(), p.diffusion.mean, p.modified.mean,
            p.diffusion.variance, p.ks_diffusion, p.ks_modified,
        ]
    });
    artifacts.push(artifact(spec, "histogram_summary.csv".into(), lqf_core::csv::table(&header, rows)));
    Ok(Outcome { report: points, artifacts })
}

fn overlay_csv(hist: &Histogram, diffusion: &ApproxDistribution, modified: &ApproxDistribution) -> String {
    let spread = 5.0 * diffusion.std_dev();
    let lo = hist.bins.first().map_or(0.0, |b| b.left).min(modified.mean - spread);
    let hi = hist.bins.last().map_or(1.0, |b| b.right).max(diffusion.mean + spread);
    let rows = (0..OVERLAY_POINTS).map(|i| {
        let x = lo + (hi - lo) * i as f64 / (OVERLAY_POINTS - 1) as f64;
        [x, diffusion.pdf(x), modified.pdf(x)]
    });
    lqf_core::csv::table(&["x", "diffusion_pdf", "modified_pdf"], rows)
}

// ------------------------------------------------------------- ks sweep

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsRow {
    pub n: usize,
    pub d: usize,
    pub lambda: f64,
    pub mu: f64,
    pub sigma: f64,
    /// KS distance between the simulated `F_{n,1}(t)` and the modified
    /// diffusion normal.
    pub ks: f64,
    pub accepted: bool,
}

pub fn run_ks_sweep(spec: &ExperimentSpec, workers: usize) -> Result<Outcome<Vec<KsRow>>> {
    expect_kind(spec, ExperimentKind::KsSweep)?;
    let mut rows = Vec::new();
    for (n, d, lambda, t) in grid_points(spec) {
        let seed = point_seed(spec.master_seed, n, d, lambda, t);
        let sample = sample_f1(n, d, lambda, t, spec.replications(), seed, workers)?;
        let modified = DiffusionModel::new(lambda, d, t)?.distribution(n, t, ApproxKind::Modified)?;
        let (mu, sigma) = stationary_mu_sigma(n, d, lambda, false);
        rows.push(KsRow {
            n,
            d,
            lambda,
            mu,
            sigma,
            ks: ks_against(&sample, &modified),
            accepted: ks_region_accepts(mu, sigma),
        });
    }
    sort_by_params(&mut rows, |r| (r.n, r.d, r.lambda, 0.0));
    let mut body = String::from("n,d,lambda,mu,sigma,ks,accepted\n");
    for r in &rows {
        let _ = writeln!(
            body,
            "{},{},{},{},{},{},{}",
            r.n,
            r.d,
            fmt_f64(r.lambda),
            fmt_f64(r.mu),
            fmt_f64(r.sigma),
            fmt_f64(r.ks),
            r.accepted
        );
    }
    let artifacts = vec![artifact(spec, "ks_sweep.csv".into(), body)];
    Ok(Outcome { report: rows, artifacts })
}

// ------------------------------------------------------------- tradeoff

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffRow {
    pub n: usize,
    pub d: usize,
    pub lambda: f64,
    /// Average over replications of the mean queue length at `t`.
    pub mean_queue_length: f64,
    /// Median thread CPU seconds per replication, divided by `n`.
    pub cpu_time_per_buffer: f64,
}

/// Queue length against sample size, with the cost of drawing `d` buffers
/// per service opportunity measured as CPU time.
///
/// Replications are interleaved across grid points (replication 0 of every
/// point, then replication 1, ...) so that slow drift in machine speed is
/// spread evenly over the grid instead of landing on one point.
pub fn run_tradeoff(spec: &ExperimentSpec, workers: usize) -> Result<Outcome<Vec<TradeoffRow>>> {
    expect_kind(spec, ExperimentKind::Tradeoff)?;
    let points = grid_points(spec);
    let seeds: Vec<u64> = points
        .iter()
        .map(|&(n, d, lambda, t)| point_seed(spec.master_seed, n, d, lambda, t))
        .collect();
    let width = points.len();
    let reps = spec.replications();
    let results = replicate(0, reps * width, workers, |job, _| {
        let (r, p) = (job / width, job % width);
        let (n, d, lambda, t) = points[p];
        let config = SystemConfig::new(n, d, lambda, t, derive_seed(seeds[p], r as u64))?;
        let start = thread_cpu_time();
        let mut sim = Simulation::new(config, CountState::empty(n)?)?
            .with_sampling(ServiceSampling::PerSample);
        sim.advance_to(t);
        let cpu = (thread_cpu_time() - start).as_secs_f64();
        Ok::<_, lqf_core::Error>((sim.state().mean_queue_length(), cpu))
    })
    .into_iter()
    .collect::<lqf_core::Result<Vec<_>>>()?;

    let mut rows: Vec<TradeoffRow> = points
        .iter()
        .enumerate()
        .map(|(p, &(n, d, lambda, _))| {
            let own = || results.iter().skip(p).step_by(width);
            let mean_queue_length = own().map(|r| r.0).sum::<f64>() / reps as f64;
            let median = median(own().map(|r| r.1).collect());
            TradeoffRow { n, d, lambda, mean_queue_length, cpu_time_per_buffer: median / n as f64 }
        })
        .collect();
    sort_by_params(&mut rows, |r| (r.n, r.d, r.lambda, 0.0));
    let body = lqf_core::csv::table(
        &["n", "d", "lambda", "mean_queue_length", "cpu_time_per_buffer"],
        rows.iter().map(|r| [r.n as f64, r.d as f64, r.lambda, r.mean_queue_length, r.cpu_time_per_buffer]),
    );
    let artifacts = vec![artifact(spec, "tradeoff.csv".into(), body)];
    Ok(Outcome { report: rows, artifacts })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

// ------------------------------------------------------------- dispatch

fn expect_kind(spec: &ExperimentSpec, kind: ExperimentKind) -> Result<()> {
    if spec.kind != kind {
        return Err(CliError::Spec(format!("expected a {kind:?} spec, got {:?}", spec.kind)));
    }
    Ok(())
}

/// Runs whatever `spec` describes and returns its output files.
pub fn run(spec: &ExperimentSpec, workers: usize) -> Result<Vec<Artifact>> {
    Ok(match spec.kind {
        ExperimentKind::SamplePaths => run_sample_paths(spec, workers)?.artifacts,
        ExperimentKind::Histogram => run_histogram(spec, workers)?.artifacts,
        ExperimentKind::KsSweep => run_ks_sweep(spec, workers)?.artifacts,
        ExperimentKind::Tradeoff => run_tradeoff(spec, workers)?.artifacts,
    })
}

pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    for a in artifacts {
        let path = dir.join(&a.file_name);
        std::fs::write(&path, &a.contents).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    }
    Ok(())
}
