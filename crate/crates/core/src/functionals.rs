//! History functionals feeding the intensity specification.
//!
//! Every functional evaluated at `t` reads only the strict past `Y_{[0,t)}` and
//! left limits at `t`, so the resulting intensities are predictable.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::path::HybridPath;
use crate::Mode;

fn check_t(path: &HybridPath, t: f64) -> Result<()> {
    if !(t >= 0.0 && t <= path.horizon()) {
        return Err(SimError::domain(format!(
            "functional evaluated at t={t} outside the history [0, {}]",
            path.horizon()
        )));
    }
    Ok(())
}

fn check_component(path: &HybridPath, component: usize) -> Result<()> {
    if component >= path.dim() {
        return Err(SimError::domain(format!(
            "component {component} out of range for dimension {}",
            path.dim()
        )));
    }
    Ok(())
}

/// Time in `[t - window, t)` during which `X_{s-}[component] >= barrier`.
///
/// Before `t = 0` the window is truncated, unless `prehistory` is set, in which
/// case the path is taken to sit at its origin value for all negative times.
pub fn occupation_time(
    path: &HybridPath,
    t: f64,
    barrier: f64,
    window: f64,
    component: usize,
    prehistory: bool,
) -> Result<f64> {
    check_t(path, t)?;
    check_component(path, component)?;
    if !(window > 0.0) {
        return Err(SimError::domain(format!("window must be positive, got {window}")));
    }
    let mut lo = t - window;
    let mut total = 0.0;
    if lo < 0.0 {
        if prehistory && path.origin().position[component] >= barrier {
            total += -lo;
        }
        lo = 0.0;
    }
    let segs = path.segments();
    let first = segs.partition_point(|s| s.t_end() <= lo);
    for seg in &segs[first..] {
        if seg.t_start() >= t {
            break;
        }
        let times = seg.times();
        let k0 = times.partition_point(|&s| s <= lo).saturating_sub(1);
        for k in k0..times.len() - 1 {
            if times[k] >= t {
                break;
            }
            let a = times[k].max(lo);
            let e = times[k + 1].min(t);
            if e > a && seg.value(k)[component] >= barrier {
                total += e - a;
            }
        }
    }
    Ok(total)
}

/// Running maximum of `X[component]` over every recorded value with time `< t`,
/// together with `X_{t-}` itself.
fn running_max_left(path: &HybridPath, t: f64, component: usize) -> f64 {
    let mut m = path.origin().position[component].max(path.position_left_at(t)[component]);
    for seg in path.segments() {
        if seg.t_start() >= t {
            break;
        }
        if seg.t_end() <= t {
            m = m.max(seg.peak(component));
        } else {
            let k = seg.times().partition_point(|&s| s < t);
            for i in 0..k {
                m = m.max(seg.value(i)[component]);
            }
        }
    }
    for j in path.jumps() {
        if j.time >= t {
            break;
        }
        m = m.max(j.pre[component]);
    }
    m
}

/// `DD_t = M_t - X_t` with right-continuous `X_t` and `M_t` over `[0, t]`.
pub fn drawdown(path: &HybridPath, t: f64, component: usize) -> Result<f64> {
    check_t(path, t)?;
    check_component(path, component)?;
    let x = path.position_at(t)[component];
    let mut m = running_max_left(path, t, component).max(x);
    if let Some(j) = path.jump_at(t) {
        m = m.max(j.post[component]);
    }
    Ok(m - x)
}

/// `DD_{t-} = M_{t-} - X_{t-}`, the form consumed by intensities.
pub fn drawdown_left(path: &HybridPath, t: f64, component: usize) -> Result<f64> {
    check_t(path, t)?;
    check_component(path, component)?;
    let x = path.position_left_at(t)[component];
    Ok(running_max_left(path, t, component) - x)
}

/// Sojourn age `t - sup{s < t : J jumps at s}`, with `sup {} = 0`.
pub fn age(path: &HybridPath, t: f64) -> Result<f64> {
    check_t(path, t)?;
    let k = path.events().partition_point(|e| e.time < t);
    let last = if k == 0 { 0.0 } else { path.events()[k - 1].time };
    Ok(t - last)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpSign {
    Up,
    Down,
    Both,
}

/// Result of a thresholded jump count.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct JumpTally {
    pub count: usize,
    /// Relative-mode jumps skipped because their pre-jump value was zero.
    pub skipped_zero_base: usize,
}

/// Number of Euclidean jumps in `[t - window, t)` whose size exceeds `threshold`.
///
/// The size is `post - pre` of `component`, or `(post - pre) / pre` when
/// `relative`; `Up` counts sizes `> threshold`, `Down` sizes `< -threshold`.
/// `Both` compares the full increment norm (or `|relative size|`) against the threshold.
pub fn jump_count(
    path: &HybridPath,
    t: f64,
    threshold: f64,
    window: f64,
    sign: JumpSign,
    relative: bool,
    component: usize,
) -> Result<JumpTally> {
    check_t(path, t)?;
    check_component(path, component)?;
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(SimError::domain(format!(
            "jump threshold must be positive, got {threshold}"
        )));
    }
    if !(window > 0.0) {
        return Err(SimError::domain(format!("window must be positive, got {window}")));
    }
    let lo = (t - window).max(0.0);
    let jumps = path.jumps();
    let start = jumps.partition_point(|j| j.time < lo);
    let mut tally = JumpTally::default();
    for j in jumps[start..].iter().take_while(|j| j.time < t) {
        let pre = j.pre[component];
        let size = if relative {
            if pre == 0.0 {
                tally.skipped_zero_base += 1;
                log::warn!(
                    "relative jump at t={} skipped: pre-jump value is zero",
                    j.time
                );
                continue;
            }
            (j.post[component] - pre) / pre
        } else {
            j.post[component] - pre
        };
        let hit = match sign {
            JumpSign::Up => size > threshold,
            JumpSign::Down => size < -threshold,
            JumpSign::Both if relative => size.abs() > threshold,
            JumpSign::Both => {
                let norm = j
                    .pre
                    .iter()
                    .zip(&j.post)
                    .map(|(a, b)| (b - a) * (b - a))
                    .sum::<f64>()
                    .sqrt();
                norm > threshold
            }
        };
        if hit {
            tally.count += 1;
        }
    }
    Ok(tally)
}

/// `Loc_i(t)`: time spent in `mode` during `[0, t)`.
pub fn occupation_by_mode(path: &HybridPath, t: f64, mode: Mode) -> Result<f64> {
    check_t(path, t)?;
    let mut total = 0.0;
    let mut from = 0.0;
    let mut current = path.origin().mode;
    for e in path.events().iter().take_while(|e| e.time < t) {
        if current == mode {
            total += e.time - from;
        }
        from = e.time;
        current = e.post_mode;
    }
    if current == mode {
        total += t - from;
    }
    Ok(total)
}

/// `Cnt_ij(t)`: number of `i -> j` transitions in `(0, t)`.
pub fn transition_count(path: &HybridPath, t: f64, from: Mode, to: Mode) -> Result<usize> {
    check_t(path, t)?;
    if from == to {
        return Err(SimError::domain("transition count needs distinct modes"));
    }
    Ok(path
        .events()
        .iter()
        .take_while(|e| e.time < t)
        .filter(|e| e.pre_mode == from && e.post_mode == to)
        .count())
}

/// `H_t`: the left-limit mode followed by previously visited modes, newest first,
/// at most `k` entries.
pub fn recent_states(path: &HybridPath, t: f64, k: usize) -> Result<Vec<Mode>> {
    check_t(path, t)?;
    if k == 0 {
        return Err(SimError::domain("memory order must be at least 1"));
    }
    let n = path.events().partition_point(|e| e.time < t);
    let mut out = Vec::with_capacity(k);
    out.push(path.mode_left_at(t));
    out.extend(
        path.events()[..n]
            .iter()
            .rev()
            .take(k - 1)
            .map(|e| e.pre_mode),
    );
    Ok(out)
}

/// `q_j = lambda * exp(theta_j) / (1 + sum_k exp(theta_k))`.
///
/// Evaluated with a max-shift, the implicit `1` entering as the logit `0`. When the
/// stay term falls below the resolution of `lambda` the largest rate is stepped
/// down one ulp at a time until the row sum is strictly below `lambda`.
pub fn softmax_rates(theta: &[(Mode, f64)], lambda: f64) -> Result<Vec<(Mode, f64)>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(SimError::domain(format!("lambda must be positive, got {lambda}")));
    }
    if let Some((j, v)) = theta.iter().find(|(_, v)| !v.is_finite()) {
        return Err(SimError::domain(format!("non-finite logit {v} for target {j}")));
    }
    let shift = theta.iter().fold(0.0_f64, |m, &(_, v)| m.max(v));
    let weights: Vec<f64> = theta.iter().map(|&(_, v)| (v - shift).exp()).collect();
    let denom = (-shift).exp() + weights.iter().sum::<f64>();
    let mut rates: Vec<(Mode, f64)> = theta
        .iter()
        .zip(&weights)
        .map(|(&(j, _), w)| (j, lambda * w / denom))
        .collect();
    while !rates.is_empty() && rates.iter().map(|r| r.1).sum::<f64>() >= lambda {
        let top = rates
            .iter_mut()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty");
        top.1 = top.1.next_down();
    }
    Ok(rates)
}

/// A scalar history functional, as named in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionalTerm {
    /// The constant 1.
    Constant,
    Occupation {
        barrier: f64,
        window_time: f64,
        #[serde(default)]
        component: usize,
        #[serde(default)]
        prehistory: bool,
    },
    /// `DD_{t-}`.
    Drawdown {
        #[serde(default)]
        component: usize,
    },
    /// `1{DD_{t-} >= threshold}`.
    DrawdownIndicator {
        threshold: f64,
        #[serde(default)]
        component: usize,
    },
    Age,
    JumpCount {
        threshold: f64,
        window_time: f64,
        sign: JumpSign,
        #[serde(default)]
        relative: bool,
        #[serde(default)]
        component: usize,
    },
    Loc {
        mode: Mode,
    },
    Cnt {
        from: Mode,
        to: Mode,
    },
    /// `1{H_t[lag] == mode}`; lag 0 is the current mode.
    RecentState {
        lag: usize,
        mode: Mode,
    },
}

impl FunctionalTerm {
    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(SimError::config(format!("{name} must be finite, got {v}")))
            }
        };
        match self {
            FunctionalTerm::Occupation {
                barrier,
                window_time,
                ..
            } => {
                finite("barrier", *barrier)?;
                if !(*window_time > 0.0 && window_time.is_finite()) {
                    return Err(SimError::config(format!(
                        "occupation window must be positive, got {window_time}"
                    )));
                }
            }
            FunctionalTerm::DrawdownIndicator { threshold, .. } => finite("threshold", *threshold)?,
            FunctionalTerm::JumpCount {
                threshold,
                window_time,
                ..
            } => {
                if !(*threshold > 0.0 && threshold.is_finite()) {
                    return Err(SimError::config(format!(
                        "jump threshold must be positive, got {threshold}"
                    )));
                }
                if !(*window_time > 0.0 && window_time.is_finite()) {
                    return Err(SimError::config(format!(
                        "jump window must be positive, got {window_time}"
                    )));
                }
            }
            FunctionalTerm::Cnt { from, to } if from == to => {
                return Err(SimError::config("cnt term needs distinct modes"));
            }
            _ => {}
        }
        Ok(())
    }

    /// Largest Euclidean component index the term reads, if any.
    pub fn component(&self) -> Option<usize> {
        match self {
            FunctionalTerm::Occupation { component, .. }
            | FunctionalTerm::Drawdown { component }
            | FunctionalTerm::DrawdownIndicator { component, .. }
            | FunctionalTerm::JumpCount { component, .. } => Some(*component),
            _ => None,
        }
    }

    pub fn evaluate(&self, path: &HybridPath, t: f64) -> Result<f64> {
        Ok(match *self {
            FunctionalTerm::Constant => 1.0,
            FunctionalTerm::Occupation {
                barrier,
                window_time,
                component,
                prehistory,
            } => occupation_time(path, t, barrier, window_time, component, prehistory)?,
            FunctionalTerm::Drawdown { component } => drawdown_left(path, t, component)?,
            FunctionalTerm::DrawdownIndicator {
                threshold,
                component,
            } => {
                if drawdown_left(path, t, component)? >= threshold {
                    1.0
                } else {
                    0.0
                }
            }
            FunctionalTerm::Age => age(path, t)?,
            FunctionalTerm::JumpCount {
                threshold,
                window_time,
                sign,
                relative,
                component,
            } => jump_count(path, t, threshold, window_time, sign, relative, component)?.count as f64,
            FunctionalTerm::Loc { mode } => occupation_by_mode(path, t, mode)?,
            FunctionalTerm::Cnt { from, to } => transition_count(path, t, from, to)? as f64,
            FunctionalTerm::RecentState { lag, mode } => {
                let h = recent_states(path, t, lag + 1)?;
                if h.get(lag) == Some(&mode) {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }
}
