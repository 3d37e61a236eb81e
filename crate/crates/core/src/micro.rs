//! Mode-specific SDE segment solvers ("micro-algorithms").
//!
//! A solver at level `n` steps on the global grid `j / n`, plus the segment
//! endpoints, so a segment starting or ending off-grid gets a short first or
//! final step. Brownian increments are read from the tape, which pins the
//! Brownian path at every grid node of every level `n | n_ref` and at every
//! atom and jump time.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::noise::{NoiseTape, TapeNode};
use crate::path::{EuclidJump, Segment};
use crate::Mode;

/// Coefficients of `dX = b(J, X) dt + sigma(J, X) dW + g(J, X_-) dZ`.
pub trait ModeDynamics: Send + Sync {
    /// Euclidean dimension `p`.
    fn dim(&self) -> usize;

    /// Brownian dimension `d`.
    fn noise_dim(&self) -> usize;

    /// Number of compound Poisson streams `Z_k` the jump coefficient multiplies.
    fn jump_streams(&self) -> usize;

    /// Writes `b(mode, x)` into `out` (length `p`).
    fn drift(&self, mode: Mode, x: &[f64], out: &mut [f64]) -> Result<()>;

    /// Writes `sigma(mode, x)` into `out`, row-major `p x d`.
    fn diffusion(&self, mode: Mode, x: &[f64], out: &mut [f64]) -> Result<()>;

    /// Writes `g(mode, x_left)` into `out`, row-major `p x k`.
    /// Returns `false` when the mode has no jump term.
    fn jump_coefficient(&self, mode: Mode, x_left: &[f64], out: &mut [f64]) -> Result<bool>;

    /// `(mu, sigma)` when the mode is the scalar GBM `dX = mu X dt + sigma X dW`.
    fn gbm_params(&self, mode: Mode) -> Option<(f64, f64)> {
        let _ = mode;
        None
    }
}

/// Per-mode affine coefficients, each component depending on its own coordinate:
/// `b_i = drift_slope_i x_i + drift_offset_i`,
/// `sigma_ij = diffusion_slope_ij x_i + diffusion_offset_ij`,
/// `g_ik = jump_slope_ik x_i + jump_offset_ik`.
/// Matrices are row-major; missing entries default to zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineMode {
    #[serde(default)]
    pub drift_slope: Vec<f64>,
    #[serde(default)]
    pub drift_offset: Vec<f64>,
    #[serde(default)]
    pub diffusion_slope: Vec<f64>,
    #[serde(default)]
    pub diffusion_offset: Vec<f64>,
    #[serde(default)]
    pub jump_slope: Vec<f64>,
    #[serde(default)]
    pub jump_offset: Vec<f64>,
}

impl AffineMode {
    /// Scalar GBM `dX = mu X dt + sigma X dW`.
    pub fn gbm(mu: f64, sigma: f64) -> Self {
        Self {
            drift_slope: vec![mu],
            diffusion_slope: vec![sigma],
            ..Self::default()
        }
    }

    fn resized(&self, p: usize, d: usize, k: usize) -> Result<Self> {
        let fit = |v: &[f64], len: usize, name: &str| -> Result<Vec<f64>> {
            if v.len() > len {
                return Err(SimError::config(format!(
                    "{name} has {} entries, expected at most {len}",
                    v.len()
                )));
            }
            if let Some(bad) = v.iter().find(|c| !c.is_finite()) {
                return Err(SimError::config(format!("{name} has non-finite entry {bad}")));
            }
            let mut out = v.to_vec();
            out.resize(len, 0.0);
            Ok(out)
        };
        Ok(Self {
            drift_slope: fit(&self.drift_slope, p, "drift_slope")?,
            drift_offset: fit(&self.drift_offset, p, "drift_offset")?,
            diffusion_slope: fit(&self.diffusion_slope, p * d, "diffusion_slope")?,
            diffusion_offset: fit(&self.diffusion_offset, p * d, "diffusion_offset")?,
            jump_slope: fit(&self.jump_slope, p * k, "jump_slope")?,
            jump_offset: fit(&self.jump_offset, p * k, "jump_offset")?,
        })
    }

    fn has_jump_term(&self) -> bool {
        self.jump_slope.iter().chain(&self.jump_offset).any(|&c| c != 0.0)
    }
}

/// [`ModeDynamics`] built from [`AffineMode`] tables.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineDynamics {
    dim: usize,
    noise_dim: usize,
    jump_streams: usize,
    modes: BTreeMap<Mode, AffineMode>,
    fallback: Option<AffineMode>,
}

impl AffineDynamics {
    /// `fallback` covers every mode absent from `modes`.
    pub fn new(
        dim: usize,
        noise_dim: usize,
        jump_streams: usize,
        modes: BTreeMap<Mode, AffineMode>,
        fallback: Option<AffineMode>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(SimError::config("Euclidean dimension must be at least 1"));
        }
        let modes = modes
            .into_iter()
            .map(|(m, c)| Ok((m, c.resized(dim, noise_dim, jump_streams)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let fallback = fallback
            .map(|c| c.resized(dim, noise_dim, jump_streams))
            .transpose()?;
        Ok(Self {
            dim,
            noise_dim,
            jump_streams,
            modes,
            fallback,
        })
    }

    /// Same coefficients in every mode.
    pub fn uniform(dim: usize, noise_dim: usize, jump_streams: usize, coeffs: AffineMode) -> Result<Self> {
        Self::new(dim, noise_dim, jump_streams, BTreeMap::new(), Some(coeffs))
    }

    fn coeffs(&self, mode: Mode) -> Result<&AffineMode> {
        self.modes
            .get(&mode)
            .or(self.fallback.as_ref())
            .ok_or_else(|| SimError::domain(format!("no dynamics configured for mode {mode}")))
    }
}

impl ModeDynamics for AffineDynamics {
    fn dim(&self) -> usize {
        self.dim
    }

    fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    fn jump_streams(&self) -> usize {
        self.jump_streams
    }

    fn drift(&self, mode: Mode, x: &[f64], out: &mut [f64]) -> Result<()> {
        let c = self.coeffs(mode)?;
        for i in 0..self.dim {
            out[i] = c.drift_slope[i] * x[i] + c.drift_offset[i];
        }
        Ok(())
    }

    fn diffusion(&self, mode: Mode, x: &[f64], out: &mut [f64]) -> Result<()> {
        let c = self.coeffs(mode)?;
        let d = self.noise_dim;
        for i in 0..self.dim {
            for j in 0..d {
                out[i * d + j] = c.diffusion_slope[i * d + j] * x[i] + c.diffusion_offset[i * d + j];
            }
        }
        Ok(())
    }

    fn jump_coefficient(&self, mode: Mode, x_left: &[f64], out: &mut [f64]) -> Result<bool> {
        let c = self.coeffs(mode)?;
        if !c.has_jump_term() {
            return Ok(false);
        }
        let k = self.jump_streams;
        for i in 0..self.dim {
            for s in 0..k {
                out[i * k + s] = c.jump_slope[i * k + s] * x_left[i] + c.jump_offset[i * k + s];
            }
        }
        Ok(true)
    }

    fn gbm_params(&self, mode: Mode) -> Option<(f64, f64)> {
        let c = self.coeffs(mode).ok()?;
        let scalar = self.dim == 1 && self.noise_dim == 1;
        (scalar && c.drift_offset[0] == 0.0 && c.diffusion_offset[0] == 0.0 && !c.has_jump_term())
            .then(|| (c.drift_slope[0], c.diffusion_slope[0]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MicroKind {
    Euler,
    JumpEuler,
    ExactGbm,
}

impl MicroKind {
    pub fn name(self) -> &'static str {
        match self {
            MicroKind::Euler => "euler",
            MicroKind::JumpEuler => "jump_euler",
            MicroKind::ExactGbm => "exact_gbm",
        }
    }
}

/// One call of a micro-algorithm: evolve `x0` in the frozen `mode` over `[t_start, t_end]`.
#[derive(Clone, Copy, Debug)]
pub struct MicroRequest<'a> {
    pub mode: Mode,
    pub x0: &'a [f64],
    pub t_start: f64,
    pub t_end: f64,
    /// Grid resolution `n`: step `1 / n`.
    pub level: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MicroOutput {
    pub segment: Segment,
    pub jumps: Vec<EuclidJump>,
}

fn resolve(tape: &NoiseTape, t: f64) -> Result<TapeNode> {
    tape.locate(t).ok_or_else(|| {
        SimError::domain(format!(
            "time {t} is neither a grid node nor an anchored time of the noise tape"
        ))
    })
}

/// Nodes of the level-`n` grid inside `[t_start, t_end]`, endpoints included.
pub fn solver_grid(tape: &NoiseTape, t_start: f64, t_end: f64, level: usize) -> Result<Vec<(f64, TapeNode)>> {
    if !(t_end > t_start && t_start >= 0.0) {
        return Err(SimError::domain(format!(
            "invalid solver interval [{t_start}, {t_end}]"
        )));
    }
    if t_end > tape.horizon() {
        return Err(SimError::domain(format!(
            "solver interval ends at {t_end}, beyond the tape horizon {}",
            tape.horizon()
        )));
    }
    if level == 0 || tape.n_ref() % level != 0 {
        return Err(SimError::domain(format!(
            "level {level} does not divide the tape resolution {}",
            tape.n_ref()
        )));
    }
    let r = tape.n_ref() / level;
    let n = level as f64;
    let mut grid = vec![(t_start, resolve(tape, t_start)?)];
    let mut j = (t_start * n).floor() as usize;
    while (j as f64 / n) <= t_start {
        j += 1;
    }
    while j > 0 && ((j - 1) as f64 / n) > t_start {
        j -= 1;
    }
    loop {
        let fine = j * r;
        let t = tape.fine_time(fine);
        if t >= t_end {
            break;
        }
        grid.push((t, TapeNode::Fine(fine)));
        j += 1;
    }
    grid.push((t_end, resolve(tape, t_end)?));
    Ok(grid)
}

struct Workspace {
    drift: Vec<f64>,
    diffusion: Vec<f64>,
    jump: Vec<f64>,
    dw: Vec<f64>,
}

impl Workspace {
    fn new(dynamics: &dyn ModeDynamics) -> Self {
        let p = dynamics.dim();
        Self {
            drift: vec![0.0; p],
            diffusion: vec![0.0; p * dynamics.noise_dim()],
            jump: vec![0.0; p * dynamics.jump_streams()],
            dw: vec![0.0; dynamics.noise_dim()],
        }
    }
}

fn check_request(req: &MicroRequest, dynamics: &dyn ModeDynamics, tape: &NoiseTape) -> Result<()> {
    if req.x0.len() != dynamics.dim() {
        return Err(SimError::domain(format!(
            "initial state has dimension {}, dynamics expect {}",
            req.x0.len(),
            dynamics.dim()
        )));
    }
    if tape.brownian_dim() < dynamics.noise_dim() {
        return Err(SimError::domain(format!(
            "tape has {} Brownian dimensions, dynamics need {}",
            tape.brownian_dim(),
            dynamics.noise_dim()
        )));
    }
    if tape.compound().len() < dynamics.jump_streams() {
        return Err(SimError::domain(format!(
            "tape has {} compound Poisson streams, dynamics need {}",
            tape.compound().len(),
            dynamics.jump_streams()
        )));
    }
    Ok(())
}

fn euler_step(
    mode: Mode,
    x: &mut [f64],
    h: f64,
    a: TapeNode,
    b: TapeNode,
    dynamics: &dyn ModeDynamics,
    tape: &NoiseTape,
    ws: &mut Workspace,
) -> Result<()> {
    let d = dynamics.noise_dim();
    dynamics.drift(mode, x, &mut ws.drift)?;
    dynamics.diffusion(mode, x, &mut ws.diffusion)?;
    for (k, dw) in ws.dw.iter_mut().enumerate() {
        *dw = tape.increment(a, b, k);
    }
    for i in 0..x.len() {
        let mut dx = ws.drift[i] * h;
        for k in 0..d {
            dx += ws.diffusion[i * d + k] * ws.dw[k];
        }
        x[i] += dx;
    }
    Ok(())
}

fn blow_up_guard(mode: Mode, x: &[f64], last_finite: f64) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(SimError::BlowUp {
            mode,
            last_finite_time: last_finite,
        })
    }
}

/// Euler-Maruyama on the level-`n` grid. Compound Poisson events inside the
/// interval are an error when the mode has a jump term.
pub fn euler_maruyama(req: &MicroRequest, dynamics: &dyn ModeDynamics, tape: &NoiseTape) -> Result<MicroOutput> {
    check_request(req, dynamics, tape)?;
    if dynamics.jump_streams() > 0 {
        let mut g = vec![0.0; dynamics.dim() * dynamics.jump_streams()];
        let streams = &tape.compound()[..dynamics.jump_streams()];
        let has_events = streams
            .iter()
            .any(|evs| evs.iter().any(|e| e.time > req.t_start && e.time < req.t_end));
        if has_events && dynamics.jump_coefficient(req.mode, req.x0, &mut g)? {
            return Err(SimError::domain(format!(
                "mode {} has a jump term and the interval [{}, {}] contains jump events; use jump_euler",
                req.mode, req.t_start, req.t_end
            )));
        }
    }
    let grid = solver_grid(tape, req.t_start, req.t_end, req.level)?;
    let p = dynamics.dim();
    let mut ws = Workspace::new(dynamics);
    let mut x = req.x0.to_vec();
    let mut times = Vec::with_capacity(grid.len());
    let mut values = Vec::with_capacity(grid.len() * p);
    times.push(req.t_start);
    values.extend_from_slice(&x);
    for w in grid.windows(2) {
        let ((ta, a), (tb, b)) = (w[0], w[1]);
        euler_step(req.mode, &mut x, tb - ta, a, b, dynamics, tape, &mut ws)?;
        blow_up_guard(req.mode, &x, ta)?;
        times.push(tb);
        values.extend_from_slice(&x);
    }
    Ok(MicroOutput {
        segment: Segment::new(req.mode, p, times, values)?,
        jumps: Vec::new(),
    })
}

/// Euler-Maruyama on the level-`n` grid refined by the jump times; at a jump the
/// diffusion step into the node comes first, then `x <- x_- + g(x_-) z`.
pub fn jump_adapted_euler(req: &MicroRequest, dynamics: &dyn ModeDynamics, tape: &NoiseTape) -> Result<MicroOutput> {
    check_request(req, dynamics, tape)?;
    let k = dynamics.jump_streams();
    let events: Vec<(f64, usize, f64)> = tape
        .jumps_between(req.t_start, req.t_end)
        .into_iter()
        .filter(|e| e.1 < k)
        .collect();
    let mut grid = solver_grid(tape, req.t_start, req.t_end, req.level)?;
    for &(t, _, _) in &events {
        let pos = grid.partition_point(|g| g.0 < t);
        if grid[pos].0 != t {
            grid.insert(pos, (t, resolve(tape, t)?));
        }
    }
    let p = dynamics.dim();
    let mut ws = Workspace::new(dynamics);
    let mut x = req.x0.to_vec();
    let mut times = Vec::with_capacity(grid.len());
    let mut values = Vec::with_capacity(grid.len() * p);
    let mut jumps = Vec::new();
    let mut ev = events.iter().peekable();
    times.push(req.t_start);
    values.extend_from_slice(&x);
    for w in grid.windows(2) {
        let ((ta, a), (tb, b)) = (w[0], w[1]);
        euler_step(req.mode, &mut x, tb - ta, a, b, dynamics, tape, &mut ws)?;
        blow_up_guard(req.mode, &x, ta)?;
        if let Some(&&(_, stream, z)) = ev.peek().filter(|e| e.0 == tb) {
            ev.next();
            if dynamics.jump_coefficient(req.mode, &x, &mut ws.jump)? {
                let pre = x.clone();
                for i in 0..p {
                    x[i] += ws.jump[i * k + stream] * z;
                }
                blow_up_guard(req.mode, &x, ta)?;
                if x != pre {
                    jumps.push(EuclidJump {
                        time: tb,
                        pre,
                        post: x.clone(),
                    });
                }
            }
        }
        times.push(tb);
        values.extend_from_slice(&x);
    }
    Ok(MicroOutput {
        segment: Segment::new(req.mode, p, times, values)?,
        jumps,
    })
}

/// `x0 exp((mu - sigma^2/2)(t - t_start) + sigma (W_t - W_{t_start}))` on the level-`n` grid,
/// using Brownian dimension 0.
pub fn exact_gbm(req: &MicroRequest, mu: f64, sigma: f64, tape: &NoiseTape) -> Result<MicroOutput> {
    if req.x0.len() != 1 {
        return Err(SimError::domain("exact GBM needs a scalar state"));
    }
    if tape.brownian_dim() == 0 {
        return Err(SimError::domain("exact GBM needs a Brownian dimension on the tape"));
    }
    if !(mu.is_finite() && sigma.is_finite()) {
        return Err(SimError::config("GBM parameters must be finite"));
    }
    let grid = solver_grid(tape, req.t_start, req.t_end, req.level)?;
    let x0 = req.x0[0];
    let a = grid[0].1;
    let drift = mu - 0.5 * sigma * sigma;
    let mut values = Vec::with_capacity(grid.len());
    values.push(x0);
    let mut last = req.t_start;
    for &(t, b) in &grid[1..] {
        let x = x0 * (drift * (t - req.t_start) + sigma * tape.increment(a, b, 0)).exp();
        blow_up_guard(req.mode, &[x], last)?;
        values.push(x);
        last = t;
    }
    let times = grid.iter().map(|g| g.0).collect();
    Ok(MicroOutput {
        segment: Segment::new(req.mode, 1, times, values)?,
        jumps: Vec::new(),
    })
}

/// Dispatch to the solver named by `kind`.
pub fn run_micro(
    kind: MicroKind,
    req: &MicroRequest,
    dynamics: &dyn ModeDynamics,
    tape: &NoiseTape,
) -> Result<MicroOutput> {
    match kind {
        MicroKind::Euler => euler_maruyama(req, dynamics, tape),
        MicroKind::JumpEuler => jump_adapted_euler(req, dynamics, tape),
        MicroKind::ExactGbm => {
            let (mu, sigma) = dynamics.gbm_params(req.mode).ok_or_else(|| {
                SimError::config(format!(
                    "exact_gbm selected for mode {} whose dynamics are not a scalar GBM",
                    req.mode
                ))
            })?;
            exact_gbm(req, mu, sigma, tape)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{generate_tape, CompoundPoissonSpec, TapeSpec};

    fn tape(horizon: f64, n_ref: usize, cp: Vec<CompoundPoissonSpec>) -> NoiseTape {
        let spec = TapeSpec {
            horizon,
            n_ref,
            lambda: 1.0,
            brownian_dim: 1,
            compound_poisson: cp,
        };
        generate_tape(7, 0, &spec).unwrap()
    }

    fn req(x0: &[f64], t_start: f64, t_end: f64, level: usize) -> MicroRequest<'_> {
        MicroRequest {
            mode: 0,
            x0,
            t_start,
            t_end,
            level,
        }
    }

    #[test]
    fn zero_dynamics_give_constant_segment() {
        let dynm = AffineDynamics::uniform(1, 1, 0, AffineMode::default()).unwrap();
        let tp = tape(1.0, 16, vec![]);
        let out = euler_maruyama(&req(&[3.5], 0.0, 1.0, 8), &dynm, &tp).unwrap();
        assert_eq!(out.segment.len(), 9);
        assert!((0..9).all(|k| out.segment.value(k) == [3.5]));
    }

    #[test]
    fn deterministic_ode_example() {
        let coeffs = AffineMode {
            drift_offset: vec![1.0],
            ..AffineMode::default()
        };
        let dynm = AffineDynamics::uniform(1, 1, 0, coeffs).unwrap();
        let tp = tape(1.0, 16, vec![]);
        let out = euler_maruyama(&req(&[0.0], 0.0, 1.0, 4), &dynm, &tp).unwrap();
        assert_eq!(out.segment.times(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        let vals: Vec<f64> = (0..5).map(|k| out.segment.value(k)[0]).collect();
        assert_eq!(vals, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn off_grid_endpoints_get_short_steps() {
        let spec = TapeSpec {
            horizon: 1.0,
            n_ref: 16,
            lambda: 50.0,
            brownian_dim: 1,
            compound_poisson: vec![],
        };
        let tp = generate_tape(7, 0, &spec).unwrap();
        let t0 = tp.atoms()[3].time;
        let grid = solver_grid(&tp, 0.0, t0, 4).unwrap();
        assert_eq!(grid.first().unwrap().0, 0.0);
        assert_eq!(grid.last().unwrap().0, t0);
        for w in grid.windows(2) {
            assert!(w[1].0 > w[0].0 && w[1].0 - w[0].0 <= 0.25);
        }
        assert!(solver_grid(&tp, 0.0, 1.0, 3).is_err());
        assert!(solver_grid(&tp, 0.0, 0.3, 4).is_err());
    }

    #[test]
    fn exact_gbm_without_noise_is_exponential() {
        let tp = tape(1.0, 16, vec![]);
        let out = exact_gbm(&req(&[2.0], 0.0, 1.0, 4), 0.1, 0.0, &tp).unwrap();
        assert!((out.segment.end_value()[0] - 2.0 * 0.1f64.exp()).abs() < 1e-15);
        let out = exact_gbm(&req(&[2.0], 0.0, 1.0, 4), 0.0, 0.0, &tp).unwrap();
        assert_eq!(out.segment.end_value(), &[2.0]);
    }

    #[test]
    fn exact_gbm_reads_the_tape_brownian_path() {
        let tp = tape(1.0, 16, vec![]);
        let out = exact_gbm(&req(&[1.0], 0.0, 1.0, 16), 0.0, 1.0, &tp).unwrap();
        let w1: f64 = tp.brownian()[0].iter().sum();
        assert!((out.segment.end_value()[0] - (w1 - 0.5).exp()).abs() < 1e-12);
    }

    fn single_jump_tape() -> NoiseTape {
        let cp = CompoundPoissonSpec {
            rate_per_time: 3.0,
            p_up: 1.0,
            mean_up: 0.2,
            mean_down: 0.2,
        };
        (0..50)
            .map(|s| {
                let spec = TapeSpec {
                    horizon: 1.0,
                    n_ref: 16,
                    lambda: 1.0,
                    brownian_dim: 1,
                    compound_poisson: vec![cp],
                };
                generate_tape(s, 0, &spec).unwrap()
            })
            .find(|t| t.compound()[0].len() == 1)
            .expect("some seed yields exactly one jump")
    }

    #[test]
    fn multiplicative_jump() {
        let coeffs = AffineMode {
            jump_slope: vec![1.0],
            ..AffineMode::default()
        };
        let dynm = AffineDynamics::uniform(1, 1, 1, coeffs).unwrap();
        let tp = single_jump_tape();
        let ev = tp.compound()[0][0];
        let out = jump_adapted_euler(&req(&[1.0], 0.0, 1.0, 4), &dynm, &tp).unwrap();
        assert_eq!(out.jumps.len(), 1);
        assert_eq!(out.jumps[0].time, ev.time);
        assert_eq!(out.jumps[0].pre, vec![1.0]);
        assert_eq!(out.jumps[0].post, vec![1.0 + ev.value]);
        assert_eq!(out.segment.end_value(), &[1.0 + ev.value]);
        assert!(euler_maruyama(&req(&[1.0], 0.0, 1.0, 4), &dynm, &tp).is_err());
    }

    #[test]
    fn jump_euler_without_events_matches_euler() {
        let coeffs = AffineMode {
            drift_slope: vec![0.1],
            diffusion_slope: vec![0.3],
            jump_slope: vec![1.0],
            ..AffineMode::default()
        };
        let dynm = AffineDynamics::uniform(1, 1, 1, coeffs).unwrap();
        let tp = single_jump_tape();
        let ev = tp.compound()[0][0].time;
        let a = jump_adapted_euler(&req(&[1.0], 0.0, ev, 4), &dynm, &tp).unwrap();
        let b = euler_maruyama(&req(&[1.0], 0.0, ev, 4), &dynm, &tp).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn blow_up_reports_last_finite_time() {
        let coeffs = AffineMode {
            drift_slope: vec![1e300],
            ..AffineMode::default()
        };
        let dynm = AffineDynamics::uniform(1, 1, 0, coeffs).unwrap();
        let tp = tape(1.0, 16, vec![]);
        let err = euler_maruyama(&req(&[1e10], 0.0, 1.0, 4), &dynm, &tp).unwrap_err();
        assert!(matches!(err, SimError::BlowUp { mode: 0, last_finite_time } if last_finite_time == 0.0));
    }

    #[test]
    fn gbm_params_detection() {
        let dynm = AffineDynamics::uniform(1, 1, 0, AffineMode::gbm(0.05, 0.2)).unwrap();
        assert_eq!(dynm.gbm_params(3), Some((0.05, 0.2)));
        let coeffs = AffineMode {
            drift_offset: vec![0.02],
            ..AffineMode::gbm(0.08, 0.0)
        };
        let dynm = AffineDynamics::uniform(1, 1, 0, coeffs).unwrap();
        assert_eq!(dynm.gbm_params(0), None);
    }
}
