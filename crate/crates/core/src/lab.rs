//! Coupled-run experiments: decoupling times, disagreement indices, and
//! empirical convergence rates.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{coupling_stats, simulate, AuditRecord, CouplingStats, ModelSpec};
use crate::error::{Result, SimError};
use crate::micro::{euler_maruyama, exact_gbm, AffineDynamics, AffineMode, MicroRequest};
use crate::noise::{generate_tape, stream_rng, TapeSpec};
use crate::path::HybridPath;
use crate::stats::{median, ols, quantile, LineFit};

const STREAM_BOOTSTRAP: u64 = 0x300;

/// Number of bootstrap resamples in the decoupling trend test.
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// `inf{t : J^a_t != J^b_t}` over the common horizon, `None` if the modes agree throughout.
pub fn decoupling_time(a: &HybridPath, b: &HybridPath) -> Option<f64> {
    if a.origin().mode != b.origin().mode {
        return Some(0.0);
    }
    let horizon = a.horizon().min(b.horizon());
    let mut times: Vec<f64> = a
        .events()
        .iter()
        .chain(b.events())
        .map(|e| e.time)
        .filter(|&t| t <= horizon)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times.into_iter().find(|&t| a.mode_at(t) != b.mode_at(t))
}

/// First 1-based atom index at which the mode increments chosen by two runs differ.
///
/// Both audits must come from the same tape: equal atom times and marks.
pub fn disagreement_index(a: &[AuditRecord], b: &[AuditRecord]) -> Result<Option<usize>> {
    if a.len() != b.len() {
        return Err(SimError::domain(format!(
            "audits cover {} and {} atoms; they do not share a tape",
            a.len(),
            b.len()
        )));
    }
    for (ra, rb) in a.iter().zip(b) {
        if ra.time != rb.time || ra.mark != rb.mark || ra.index != rb.index {
            return Err(SimError::domain(format!(
                "audits disagree on atom {} ({} vs {}); they do not share a tape",
                ra.index, ra.time, rb.time
            )));
        }
    }
    Ok(a
        .iter()
        .zip(b)
        .find(|(ra, rb)| ra.decision() != rb.decision())
        .map(|(ra, _)| ra.index))
}

/// Least-squares fit of `log2(error)` on `log2(level)`.
///
/// Non-positive errors are dropped with a warning; fewer than three remaining
/// points is an error.
pub fn fit_rate(levels: &[usize], errors: &[f64]) -> Result<LineFit> {
    if levels.len() != errors.len() {
        return Err(SimError::domain("levels and errors differ in length"));
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (&n, &e) in levels.iter().zip(errors) {
        if e > 0.0 && e.is_finite() {
            x.push((n as f64).log2());
            y.push(e.log2());
        } else {
            log::warn!("level {n}: error {e} excluded from the rate fit");
        }
    }
    if x.len() < 3 {
        return Err(SimError::domain(format!(
            "rate fit needs at least 3 levels with positive error, got {}",
            x.len()
        )));
    }
    ols(&x, &y)
}

/// Parameters of a coupled convergence study.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyConfig {
    pub horizon: f64,
    pub levels: Vec<usize>,
    pub n_fine: usize,
    pub paths: usize,
    pub seed: u64,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels.len() < 3 {
            return Err(SimError::config(format!(
                "a study needs at least 3 levels, got {}",
                self.levels.len()
            )));
        }
        if self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SimError::config("levels must be strictly increasing"));
        }
        if let Some(&n) = self.levels.iter().find(|&&n| n == 0 || self.n_fine % n != 0) {
            return Err(SimError::config(format!(
                "level {n} does not divide the reference level {}",
                self.n_fine
            )));
        }
        if self.paths == 0 {
            return Err(SimError::config("a study needs at least one path"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(SimError::config(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelSummary {
    pub level: usize,
    /// Median sup error over pairs that did not decouple.
    pub median_error: Option<f64>,
    pub p90_error: Option<f64>,
    pub decoupled: usize,
    pub decoupling_frequency: f64,
    /// Pairs violating `kappa = none => iota = none` or `T_kappa = iota`.
    pub coupling_violations: usize,
}

/// Bootstrap verdicts on how decoupling frequency moves with the level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrendTest {
    /// OLS slope of frequency on `log2(level)`.
    pub slope: f64,
    /// Upper 95% bootstrap quantile of the slope.
    pub slope_upper: f64,
    /// Frequency at the finest minus at the coarsest level.
    pub end_difference: f64,
    pub end_difference_upper: f64,
    pub resamples: usize,
}

impl TrendTest {
    /// No evidence of an increase: the upper slope quantile is at most zero.
    pub fn non_increasing(&self) -> bool {
        self.slope_upper <= 0.0
    }

    pub fn finest_not_above_coarsest(&self) -> bool {
        self.end_difference_upper <= 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub config: StudyConfig,
    pub levels: Vec<LevelSummary>,
    /// Fit of median conditional error; `None` when fewer than three levels qualify.
    pub fit: Option<LineFit>,
    pub trend: TrendTest,
}

impl ConvergenceReport {
    pub fn errors_strictly_decreasing(&self) -> bool {
        let m: Vec<Option<f64>> = self.levels.iter().map(|l| l.median_error).collect();
        m.windows(2).all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if b < a))
    }

    pub fn coupling_violations(&self) -> usize {
        self.levels.iter().map(|l| l.coupling_violations).sum()
    }
}

fn frequency_slope(x: &[f64], freq: &[f64]) -> f64 {
    ols(x, freq).map(|f| f.slope).unwrap_or(0.0)
}

fn trend_test(config: &StudyConfig, decoupled: &[Vec<bool>]) -> TrendTest {
    let paths = decoupled.len();
    let levels = config.levels.len();
    let x: Vec<f64> = config.levels.iter().map(|&n| (n as f64).log2()).collect();
    let freqs = |idx: &mut dyn Iterator<Item = usize>| -> Vec<f64> {
        let mut counts = vec![0usize; levels];
        for p in idx {
            for (c, &d) in counts.iter_mut().zip(&decoupled[p]) {
                *c += usize::from(d);
            }
        }
        counts.iter().map(|&c| c as f64 / paths as f64).collect()
    };
    let base = freqs(&mut (0..paths));
    let mut rng = stream_rng(config.seed, u64::MAX, STREAM_BOOTSTRAP);
    let mut slopes = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut diffs = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let idx: Vec<usize> = (0..paths).map(|_| rng.random_range(0..paths)).collect();
        let f = freqs(&mut idx.into_iter());
        slopes.push(frequency_slope(&x, &f));
        diffs.push(f[levels - 1] - f[0]);
    }
    TrendTest {
        slope: frequency_slope(&x, &base),
        slope_upper: quantile(&slopes, 0.95).unwrap_or(0.0),
        end_difference: base[levels - 1] - base[0],
        end_difference_upper: quantile(&diffs, 0.95).unwrap_or(0.0),
        resamples: BOOTSTRAP_RESAMPLES,
    }
}

fn study_path(model: &ModelSpec, config: &StudyConfig, path_index: u64) -> Result<Vec<CouplingStats>> {
    let tape = generate_tape(config.seed, path_index, &model.tape_spec(config.horizon, config.n_fine))?;
    let fine = simulate(model, config.horizon, config.n_fine, &tape)?;
    config
        .levels
        .iter()
        .map(|&n| {
            let coarse = simulate(model, config.horizon, n, &tape)?;
            coupling_stats(&fine, &coarse, config.horizon)
        })
        .collect()
}

/// Coupled runs of every level against `n_fine` over `paths` tapes.
///
/// Paths run in parallel on the current rayon pool; results are reduced in
/// path-index order, so the report does not depend on the thread count.
pub fn run_convergence_study(model: &ModelSpec, config: &StudyConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    model.validate()?;
    let per_path: Vec<Vec<CouplingStats>> = (0..config.paths as u64)
        .into_par_iter()
        .map(|p| study_path(model, config, p))
        .collect::<Result<_>>()?;

    let mut levels = Vec::with_capacity(config.levels.len());
    for (li, &n) in config.levels.iter().enumerate() {
        let stats: Vec<&CouplingStats> = per_path.iter().map(|s| &s[li]).collect();
        let errors: Vec<f64> = stats
            .iter()
            .filter(|s| s.iota.is_none())
            .map(|s| s.sup_error)
            .collect();
        let decoupled = stats.iter().filter(|s| s.iota.is_some()).count();
        levels.push(LevelSummary {
            level: n,
            median_error: median(&errors),
            p90_error: quantile(&errors, 0.9),
            decoupled,
            decoupling_frequency: decoupled as f64 / config.paths as f64,
            coupling_violations: stats.iter().filter(|s| !s.coupling_consistent()).count(),
        });
    }

    let medians: Vec<(usize, f64)> = levels
        .iter()
        .filter_map(|l| l.median_error.map(|m| (l.level, m)))
        .collect();
    let (ns, es): (Vec<usize>, Vec<f64>) = medians.into_iter().unzip();
    let fit = match fit_rate(&ns, &es) {
        Ok(f) => Some(f),
        Err(e) => {
            log::warn!("no convergence rate fitted: {e}");
            None
        }
    };
    let decoupled: Vec<Vec<bool>> = per_path
        .iter()
        .map(|s| s.iter().map(|c| c.iota.is_some()).collect())
        .collect();
    let trend = trend_test(config, &decoupled);
    Ok(ConvergenceReport {
        config: config.clone(),
        levels,
        fit,
        trend,
    })
}

/// Strong error of Euler-Maruyama against the exact GBM solution on shared tapes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MicroOrderReport {
    pub levels: Vec<usize>,
    /// Median over paths of the nodewise sup error, per level.
    pub median_errors: Vec<f64>,
    pub fit: LineFit,
}

/// Euler vs exact GBM `dX = mu X dt + sigma X dW` on `[0, horizon]`, one tape per path
/// at resolution `max(levels)`, sup error over the level-`n` grid nodes.
pub fn micro_order_study(
    mu: f64,
    sigma: f64,
    x0: f64,
    horizon: f64,
    levels: &[usize],
    paths: usize,
    seed: u64,
) -> Result<MicroOrderReport> {
    let n_ref = *levels
        .iter()
        .max()
        .ok_or_else(|| SimError::config("no levels given"))?;
    if levels.iter().any(|&n| n == 0 || n_ref % n != 0) {
        return Err(SimError::config("every level must divide the largest level"));
    }
    if paths == 0 {
        return Err(SimError::config("a study needs at least one path"));
    }
    let dynamics = AffineDynamics::uniform(1, 1, 0, AffineMode::gbm(mu, sigma))?;
    let spec = TapeSpec {
        horizon,
        n_ref,
        lambda: 1.0,
        brownian_dim: 1,
        compound_poisson: vec![],
    };
    let per_path: Vec<Vec<f64>> = (0..paths as u64)
        .into_par_iter()
        .map(|p| {
            let tape = generate_tape(seed, p, &spec)?;
            levels
                .iter()
                .map(|&n| {
                    let req = MicroRequest {
                        mode: 0,
                        x0: &[x0],
                        t_start: 0.0,
                        t_end: horizon,
                        level: n,
                    };
                    let em = euler_maruyama(&req, &dynamics, &tape)?.segment;
                    let ex = exact_gbm(&req, mu, sigma, &tape)?.segment;
                    Ok((0..em.len())
                        .map(|k| (em.value(k)[0] - ex.value(k)[0]).abs())
                        .fold(0.0, f64::max))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let median_errors: Vec<f64> = (0..levels.len())
        .map(|li| {
            let col: Vec<f64> = per_path.iter().map(|e| e[li]).collect();
            median(&col).unwrap_or(0.0)
        })
        .collect();
    let fit = fit_rate(levels, &median_errors)?;
    Ok(MicroOrderReport {
        levels: levels.to_vec(),
        median_errors,
        fit,
    })
}
