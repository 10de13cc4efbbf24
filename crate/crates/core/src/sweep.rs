//! Trial ensembles, parameter sweeps and the figure presets.
//!
//! Trials are processed in fixed chunks of `CHUNK_TRIALS` consecutive trial
//! indices. Chunks may run on any worker; their accumulators are merged in
//! chunk order, which makes every output independent of the worker count.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::decomposition::{DecompositionReport, ReportAccumulator, CHUNK_TRIALS};
use crate::error::{Error, Result};
use crate::model::{ScalarDistribution, UniverseConfig};
use crate::rng::RngSeed;
use crate::theorizing::{paired_trial, ModelConfig, PolicyRule, TheoryPolicy, TrialRecord};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_TRIALS: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 42;
pub const MIN_SWEEP_TRIALS: u64 = 10_000;

/// Worker-count knob. `workers == 0` uses every available core; the value
/// never changes results.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Execution {
    pub workers: usize,
}

impl Execution {
    pub fn sequential() -> Self {
        Self { workers: 1 }
    }

    pub fn with_workers(workers: usize) -> Self {
        Self { workers }
    }

    /// Maps `f` over `0..n_chunks`, returning results in index order.
    fn map_chunks<T, F>(&self, n_chunks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        {
            if self.workers != 1 {
                use rayon::prelude::*;
                let run = || (0..n_chunks).into_par_iter().map(&f).collect();
                return match rayon::ThreadPoolBuilder::new().num_threads(self.workers).build() {
                    Ok(pool) => pool.install(run),
                    Err(_) => run(),
                };
            }
        }
        (0..n_chunks).map(f).collect()
    }
}

/// Per-trial observer whose partial results merge in chunk order.
pub trait TrialSink: Default + Send {
    fn record(&mut self, a_priori: &TrialRecord, post_hoc: &TrialRecord);
    fn merge(&mut self, other: Self);
}

impl TrialSink for ReportAccumulator {
    #[inline]
    fn record(&mut self, a_priori: &TrialRecord, post_hoc: &TrialRecord) {
        self.push(a_priori);
        self.push(post_hoc);
    }

    fn merge(&mut self, other: Self) {
        ReportAccumulator::merge(self, &other);
    }
}

/// Runs paired trials `0..n_trials` of `config` on the stream tree rooted at
/// `seed`, feeding each into a sink.
pub fn run_trials<S: TrialSink>(
    config: &ModelConfig,
    n_trials: u64,
    seed: RngSeed,
    exec: Execution,
) -> Result<S> {
    config.validate()?;
    let chunk = CHUNK_TRIALS as u64;
    let n_chunks = n_trials.div_ceil(chunk) as usize;
    let parts = exec.map_chunks(n_chunks, |c| {
        let mut sink = S::default();
        let start = c as u64 * chunk;
        for t in start..(start + chunk).min(n_trials) {
            let (o, d) = paired_trial(config, t, seed);
            sink.record(&o, &d);
        }
        sink
    });
    Ok(parts.into_iter().fold(S::default(), |mut acc, s| {
        acc.merge(s);
        acc
    }))
}

/// Folds chunk accumulators in chunk order, exactly as
/// `ReportAccumulator::from_records` does for materialized batches.
pub fn simulate_accumulator(
    config: &ModelConfig,
    n_trials: u64,
    seed: RngSeed,
    exec: Execution,
) -> Result<ReportAccumulator> {
    run_trials(config, n_trials, seed, exec)
}

pub fn simulate_report(
    config: &ModelConfig,
    n_trials: u64,
    seed: RngSeed,
    exec: Execution,
) -> Result<DecompositionReport> {
    DecompositionReport::from_accumulator(&simulate_accumulator(config, n_trials, seed, exec)?)
}

/// Materializes every paired trial, in trial order.
pub fn collect_trials(
    config: &ModelConfig,
    n_trials: u64,
    seed: RngSeed,
    exec: Execution,
) -> Result<(Vec<TrialRecord>, Vec<TrialRecord>)> {
    #[derive(Default)]
    struct Records(Vec<TrialRecord>, Vec<TrialRecord>);
    impl TrialSink for Records {
        fn record(&mut self, o: &TrialRecord, d: &TrialRecord) {
            self.0.push(*o);
            self.1.push(*d);
        }
        fn merge(&mut self, other: Self) {
            self.0.extend(other.0);
            self.1.extend(other.1);
        }
    }
    let r: Records = run_trials(config, n_trials, seed, exec)?;
    Ok((r.0, r.1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Share of ideas the good type eliminates a priori.
    HeterogeneityQ,
    /// Standard deviation of true quality.
    MuSd,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base: ModelConfig,
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub n_trials: u64,
    pub master_seed: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.grid.is_empty() {
            return Err(Error::config("sweep.grid", "expected at least one grid value, got none"));
        }
        if let Some(w) = self.grid.windows(2).find(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
            return Err(Error::config(
                "sweep.grid",
                format!("expected strictly increasing values, got {} then {}", w[0], w[1]),
            ));
        }
        if self.n_trials < MIN_SWEEP_TRIALS {
            return Err(Error::config(
                "trials",
                format!("expected at least {MIN_SWEEP_TRIALS} trials per point, got {}", self.n_trials),
            ));
        }
        for &v in &self.grid {
            match self.axis {
                SweepAxis::HeterogeneityQ if !(0.0..1.0).contains(&v) => {
                    return Err(Error::config(
                        "sweep.grid",
                        format!("heterogeneity shares must lie in [0, 1), got {v}"),
                    ))
                }
                SweepAxis::MuSd if !(v > 0.0 && v.is_finite()) => {
                    return Err(Error::config(
                        "sweep.grid",
                        format!("sd(mu) values must be positive, got {v}"),
                    ))
                }
                SweepAxis::MuSd if self.base.universe.mu_dist.sd() == 0.0 => {
                    return Err(Error::config(
                        "mu_dist",
                        "an sd(mu) sweep needs a base law with positive spread",
                    ))
                }
                _ => {}
            }
        }
        for i in 0..self.grid.len() {
            self.point_config(i).validate()?;
        }
        Ok(())
    }

    /// Model at grid point `index`.
    pub fn point_config(&self, index: usize) -> ModelConfig {
        let v = self.grid[index];
        let mut cfg = self.base.clone();
        match self.axis {
            SweepAxis::HeterogeneityQ => {
                cfg.good_policy = TheoryPolicy::good(PolicyRule::EliminateWorst { q: v });
            }
            SweepAxis::MuSd => {
                cfg.universe.mu_dist = match &cfg.universe.mu_dist {
                    ScalarDistribution::Normal { mean, .. } => ScalarDistribution::normal(*mean, v),
                    d @ ScalarDistribution::Discrete { .. } => {
                        let m = d.mean();
                        let s = v / d.sd();
                        ScalarDistribution::Discrete {
                            points: match d {
                                ScalarDistribution::Discrete { points } => {
                                    points.iter().map(|&(x, p)| (m + s * (x - m), p)).collect()
                                }
                                _ => unreachable!(),
                            },
                        }
                    }
                };
            }
            SweepAxis::None => {}
        }
        cfg
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub grid_value: f64,
    pub sd_mu: f64,
    pub sd_mu_hat: f64,
    pub report: Option<DecompositionReport>,
    pub improvement: Option<f64>,
    pub se_improvement: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub config: SweepConfig,
    pub master_seed: u64,
    pub engine_version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
    pub metadata: SweepMetadata,
}

impl SweepResult {
    pub fn grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.grid_value).collect()
    }

    pub fn improvements(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.improvement).collect()
    }
}

fn sd_pair(universe: &UniverseConfig) -> (f64, f64) {
    (universe.mu_dist.sd(), universe.sd_mu_hat())
}

/// Grid point `i` uses the stream tree rooted at `(master_seed, i)`.
pub fn run_sweep(config: &SweepConfig, exec: Execution) -> Result<SweepResult> {
    config.validate()?;
    let mut points = Vec::with_capacity(config.grid.len());
    for (i, &grid_value) in config.grid.iter().enumerate() {
        let model = config.point_config(i);
        let (sd_mu, sd_mu_hat) = sd_pair(&model.universe);
        let seed = RngSeed::new(config.master_seed, i as u64);
        let point = match simulate_report(&model, config.n_trials, seed, exec) {
            Ok(report) => SweepPoint {
                grid_value,
                sd_mu,
                sd_mu_hat,
                improvement: report.improvement,
                se_improvement: report.standard_errors.improvement,
                report: Some(report),
                failure: None,
            },
            Err(e @ Error::EmptyCell { .. }) => SweepPoint {
                grid_value,
                sd_mu,
                sd_mu_hat,
                report: None,
                improvement: None,
                se_improvement: None,
                failure: Some(e.to_string()),
            },
            Err(e) => return Err(e),
        };
        points.push(point);
    }
    Ok(SweepResult {
        axis: config.axis,
        points,
        metadata: SweepMetadata {
            config: config.clone(),
            master_seed: config.master_seed,
            engine_version: ENGINE_VERSION.to_string(),
        },
    })
}

/// Linearly interpolated zero of `values` over `grid` at the first sign
/// change between adjacent defined entries.
pub fn find_crossing_in(grid: &[f64], values: &[Option<f64>]) -> Result<Option<f64>> {
    let defined: Vec<(f64, f64)> = grid
        .iter()
        .zip(values)
        .filter_map(|(&x, v)| v.map(|y| (x, y)))
        .collect();
    if defined.len() < 2 {
        return Err(Error::Precondition(format!(
            "crossing needs at least two defined improvements, got {}",
            defined.len()
        )));
    }
    if let Some(&(x, _)) = defined.iter().find(|(_, y)| *y == 0.0) {
        return Ok(Some(x));
    }
    Ok(defined.windows(2).find_map(|w| {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        (y0.signum() != y1.signum()).then(|| x0 + (x1 - x0) * (0.0 - y0) / (y1 - y0))
    }))
}

pub fn find_crossing(result: &SweepResult) -> Result<Option<f64>> {
    find_crossing_in(&result.grid(), &result.improvements())
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureName {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
}

impl FigureName {
    pub const ALL: [FigureName; 4] = [FigureName::Fig1, FigureName::Fig2, FigureName::Fig3, FigureName::Fig4];
}

impl fmt::Display for FigureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FigureName::Fig1 => "fig1",
            FigureName::Fig2 => "fig2",
            FigureName::Fig3 => "fig3",
            FigureName::Fig4 => "fig4",
        })
    }
}

impl FromStr for FigureName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(FigureName::Fig1),
            "fig2" => Ok(FigureName::Fig2),
            "fig3" => Ok(FigureName::Fig3),
            "fig4" => Ok(FigureName::Fig4),
            other => Err(Error::config(
                "figure",
                format!("expected one of fig1, fig2, fig3, fig4, got {other:?}"),
            )),
        }
    }
}

/// Paired trials whose selected ideas are plotted individually.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterJob {
    pub model: ModelConfig,
    pub n_trials: u64,
    pub master_seed: u64,
}

/// Paired trials summarized by a report and quality histograms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramJob {
    pub model: ModelConfig,
    pub n_trials: u64,
    pub master_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureJob {
    Scatter(ScatterJob),
    Histogram(HistogramJob),
    Sweep(SweepConfig),
}

impl FigureJob {
    pub fn model(&self) -> &ModelConfig {
        match self {
            FigureJob::Scatter(j) => &j.model,
            FigureJob::Histogram(j) => &j.model,
            FigureJob::Sweep(s) => &s.base,
        }
    }

    pub fn set_trials(&mut self, n: u64) {
        match self {
            FigureJob::Scatter(j) => j.n_trials = n,
            FigureJob::Histogram(j) => j.n_trials = n,
            FigureJob::Sweep(s) => s.n_trials = n,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            FigureJob::Scatter(j) => j.master_seed = seed,
            FigureJob::Histogram(j) => j.master_seed = seed,
            FigureJob::Sweep(s) => s.master_seed = seed,
        }
    }
}

/// One uniform theory type over 100 ideas, standard normal quality and noise.
pub fn fig1_model() -> ModelConfig {
    ModelConfig {
        universe: UniverseConfig::new(
            100,
            ScalarDistribution::standard_normal(),
            ScalarDistribution::standard_normal(),
        ),
        prob_good: 0.0,
        good_policy: TheoryPolicy::good(PolicyRule::UniformAll),
        bad_policy: TheoryPolicy::bad(PolicyRule::UniformAll),
        hurdle: f64::NEG_INFINITY,
    }
}

/// 100 ideas, sd(mu) = 0.5, standard normal noise, even odds of a good type
/// that weights the two best ideas, bad type uniform, hurdle 2.
pub fn fig2_model() -> ModelConfig {
    ModelConfig {
        universe: UniverseConfig::new(
            100,
            ScalarDistribution::normal(0.0, 0.5),
            ScalarDistribution::standard_normal(),
        ),
        prob_good: 0.5,
        good_policy: TheoryPolicy::good(PolicyRule::TopK { k: 2 }),
        bad_policy: TheoryPolicy::bad(PolicyRule::UniformAll),
        hurdle: 2.0,
    }
}

/// 0, 0.05, ..., 0.95 and 0.98 (the top-two model of `fig2_model`).
pub fn fig3_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
    g.push(0.98);
    g
}

/// sd(mu) from 0.5 to 3.0 in steps of 0.25.
pub fn fig4_grid() -> Vec<f64> {
    (2..=12).map(|i| i as f64 / 4.0).collect()
}

/// 100 paired trials, i.e. 200 selected ideas across both regimes.
pub const FIG1_TRIALS: u64 = 100;

pub fn figure_preset(name: FigureName) -> FigureJob {
    match name {
        FigureName::Fig1 => FigureJob::Scatter(ScatterJob {
            model: fig1_model(),
            n_trials: FIG1_TRIALS,
            master_seed: DEFAULT_SEED,
        }),
        FigureName::Fig2 => FigureJob::Histogram(HistogramJob {
            model: fig2_model(),
            n_trials: DEFAULT_TRIALS,
            master_seed: DEFAULT_SEED,
        }),
        FigureName::Fig3 => FigureJob::Sweep(SweepConfig {
            base: fig2_model(),
            axis: SweepAxis::HeterogeneityQ,
            grid: fig3_grid(),
            n_trials: DEFAULT_TRIALS,
            master_seed: DEFAULT_SEED,
        }),
        FigureName::Fig4 => FigureJob::Sweep(SweepConfig {
            base: fig2_model(),
            axis: SweepAxis::MuSd,
            grid: fig4_grid(),
            n_trials: DEFAULT_TRIALS,
            master_seed: DEFAULT_SEED,
        }),
    }
}
