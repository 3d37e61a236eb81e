//! Pre-generated driving noise.
//!
//! A [`NoiseTape`] holds everything random a run consumes: the rate-`lambda`
//! master Poisson atoms `(T_m, U_m)`, Brownian increments on a fine grid of step
//! `1 / n_ref`, and the compound Poisson events of each jump stream. Every stream
//! comes from its own ChaCha8 stream keyed by `(seed, path_index)`, so changing
//! one stream (e.g. `lambda`) leaves the others untouched.
//!
//! Brownian values are also pinned at every atom and jump time by Brownian bridge
//! sampling inside the enclosing fine cell ("anchors"). Solvers at any level
//! `n | n_ref` therefore read increments of one and the same Brownian path.
//!
//! Increments and bridge offsets live on the lattice `2^-40 Z`. Sums of lattice
//! values below `2^12` in magnitude are exact in `f64`, so coarsening is exact and
//! independent of summation order.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Result, SimError};

const LATTICE_SCALE: f64 = (1u64 << 40) as f64;

/// Largest number of stored fine increments (all dimensions) per tape.
pub const MAX_TAPE_INCREMENTS: usize = 50_000_000;

const STREAM_ATOMS: u64 = 0x01;
const STREAM_BRIDGE: u64 = 0x02;
const STREAM_BROWNIAN: u64 = 0x100;
const STREAM_COMPOUND: u64 = 0x200;

const TAPE_MAGIC: &[u8; 8] = b"MPSTAPE\0";
const TAPE_VERSION: u32 = 1;

pub(crate) fn quantize(x: f64) -> f64 {
    (x * LATTICE_SCALE).round() / LATTICE_SCALE
}

/// Independent random stream `stream` for path `path_index` of run `seed`.
pub fn stream_rng(seed: u64, path_index: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&path_index.to_le_bytes());
    key[16..24].copy_from_slice(b"mpsimtap");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// Compound Poisson stream with asymmetric double-exponential jump sizes.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CompoundPoissonSpec {
    /// Jump intensity (events per unit time).
    pub rate_per_time: f64,
    /// Probability that a jump is upward.
    pub p_up: f64,
    /// Mean magnitude of upward jumps.
    pub mean_up: f64,
    /// Mean magnitude of downward jumps.
    pub mean_down: f64,
}

impl CompoundPoissonSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate_per_time >= 0.0 && self.rate_per_time.is_finite()) {
            return Err(SimError::config(format!(
                "compound Poisson rate must be finite and non-negative, got {}",
                self.rate_per_time
            )));
        }
        check_double_exponential(self.p_up, self.mean_up, self.mean_down)
    }
}

fn check_double_exponential(p_up: f64, eta_up: f64, eta_down: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p_up) {
        return Err(SimError::config(format!("p_up must lie in [0,1], got {p_up}")));
    }
    if !(eta_up > 0.0 && eta_up.is_finite() && eta_down > 0.0 && eta_down.is_finite()) {
        return Err(SimError::config(format!(
            "jump magnitude means must be positive, got up={eta_up} down={eta_down}"
        )));
    }
    Ok(())
}

/// `+Exp(mean eta_up)` with probability `p_up`, otherwise `-Exp(mean eta_down)`.
pub fn sample_double_exponential<R: Rng + ?Sized>(
    rng: &mut R,
    p_up: f64,
    eta_up: f64,
    eta_down: f64,
) -> Result<f64> {
    check_double_exponential(p_up, eta_up, eta_down)?;
    let up = rng.random::<f64>() < p_up;
    let e: f64 = rng.sample(Exp1);
    Ok(if up { eta_up * e } else { -eta_down * e })
}

/// Candidate transition time of the master Poisson process with its thinning mark.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub time: f64,
    /// Uniform on `[0, lambda)`.
    pub mark: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CpEvent {
    pub time: f64,
    pub value: f64,
}

/// Brownian value pinned at an off-grid time.
#[derive(Clone, Debug, PartialEq)]
pub struct Anchor {
    pub time: f64,
    /// Fine cell containing `time`: `cell / n_ref <= time < (cell + 1) / n_ref`.
    pub cell: usize,
    /// `W(time) - W(cell / n_ref)` per Brownian dimension.
    pub offsets: Vec<f64>,
}

/// Position on the tape's time axis at which Brownian values are known exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TapeNode {
    Fine(usize),
    Anchor(usize),
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TapeSpec {
    pub horizon: f64,
    pub n_ref: usize,
    pub lambda: f64,
    pub brownian_dim: usize,
    pub compound_poisson: Vec<CompoundPoissonSpec>,
}

impl TapeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(SimError::domain(format!(
                "tape horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.n_ref == 0 {
            return Err(SimError::domain("n_ref must be at least 1"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(SimError::domain(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        for cp in &self.compound_poisson {
            cp.validate()?;
        }
        Ok(())
    }

    fn cells(&self) -> usize {
        (self.horizon * self.n_ref as f64).ceil().max(1.0) as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseTape {
    seed: u64,
    path_index: u64,
    horizon: f64,
    n_ref: usize,
    lambda: f64,
    // per dimension, `cells` increments
    brownian: Vec<Vec<f64>>,
    // per dimension, `cells + 1` partial sums
    cumulative: Vec<Vec<f64>>,
    atoms: Vec<Atom>,
    compound: Vec<Vec<CpEvent>>,
    anchors: Vec<Anchor>,
}

/// Materialise the noise for path `path_index` of run `seed`.
pub fn generate_tape(seed: u64, path_index: u64, spec: &TapeSpec) -> Result<NoiseTape> {
    spec.validate()?;
    let cells = spec.cells();
    let total = cells.saturating_mul(spec.brownian_dim);
    if total > MAX_TAPE_INCREMENTS {
        return Err(SimError::Resource(format!(
            "tape needs {total} Brownian increments (horizon {} x n_ref {} x dim {}), limit is {MAX_TAPE_INCREMENTS}",
            spec.horizon, spec.n_ref, spec.brownian_dim
        )));
    }

    let sd = (1.0 / spec.n_ref as f64).sqrt();
    let brownian: Vec<Vec<f64>> = (0..spec.brownian_dim)
        .map(|d| {
            let mut rng = stream_rng(seed, path_index, STREAM_BROWNIAN + d as u64);
            (0..cells)
                .map(|_| quantize(sd * rng.sample::<f64, _>(StandardNormal)))
                .collect()
        })
        .collect();

    let mut rng = stream_rng(seed, path_index, STREAM_ATOMS);
    let mut atoms = Vec::new();
    let mut t = 0.0;
    loop {
        let gap: f64 = rng.sample::<f64, _>(Exp1) / spec.lambda;
        if !(gap > 0.0) {
            continue;
        }
        t += gap;
        if t > spec.horizon {
            break;
        }
        let mut mark = spec.lambda * rng.random::<f64>();
        if mark >= spec.lambda {
            mark = spec.lambda.next_down();
        }
        atoms.push(Atom { time: t, mark });
    }

    // Jump times never coincide with atoms, the horizon, or each other.
    let mut taken: Vec<f64> = atoms.iter().map(|a| a.time).collect();
    taken.push(spec.horizon);
    let mut compound = Vec::with_capacity(spec.compound_poisson.len());
    for (k, cp) in spec.compound_poisson.iter().enumerate() {
        let mut rng = stream_rng(seed, path_index, STREAM_COMPOUND + k as u64);
        let mut events = Vec::new();
        if cp.rate_per_time > 0.0 {
            let mut t = 0.0;
            loop {
                let gap: f64 = rng.sample::<f64, _>(Exp1) / cp.rate_per_time;
                let next = t + gap;
                if !(gap > 0.0) || (taken.contains(&next) && next < spec.horizon) {
                    continue;
                }
                t = next;
                if t >= spec.horizon {
                    break;
                }
                let value = sample_double_exponential(&mut rng, cp.p_up, cp.mean_up, cp.mean_down)?;
                events.push(CpEvent { time: t, value });
            }
        }
        taken.extend(events.iter().map(|e| e.time));
        compound.push(events);
    }

    let mut cumulative = Vec::with_capacity(spec.brownian_dim);
    for inc in &brownian {
        let mut c = Vec::with_capacity(cells + 1);
        let mut acc = 0.0;
        c.push(acc);
        for &dw in inc {
            acc += dw;
            c.push(acc);
        }
        cumulative.push(c);
    }

    let mut tape = NoiseTape {
        seed,
        path_index,
        horizon: spec.horizon,
        n_ref: spec.n_ref,
        lambda: spec.lambda,
        brownian,
        cumulative,
        atoms,
        compound,
        anchors: Vec::new(),
    };
    tape.anchors = tape.build_anchors(seed, path_index);
    Ok(tape)
}

impl NoiseTape {
    fn build_anchors(&self, seed: u64, path_index: u64) -> Vec<Anchor> {
        let mut times: Vec<f64> = self.atoms.iter().map(|a| a.time).collect();
        times.extend(self.compound.iter().flatten().map(|e| e.time));
        if self.fine_index_of(self.horizon).is_none() {
            times.push(self.horizon);
        }
        times.sort_by(f64::total_cmp);
        times.dedup();

        let dim = self.brownian_dim();
        let mut rng = stream_rng(seed, path_index, STREAM_BRIDGE);
        let mut anchors: Vec<Anchor> = Vec::with_capacity(times.len());
        // (cell, time, offsets) of the previous pinned point inside the current cell
        let mut prev: Option<(usize, f64, Vec<f64>)> = None;
        for s in times {
            let cell = self.cell_of(s);
            let left = self.fine_time(cell);
            if s == left {
                anchors.push(Anchor {
                    time: s,
                    cell,
                    offsets: vec![0.0; dim],
                });
                continue;
            }
            let (tp, op) = match &prev {
                Some((c, tp, op)) if *c == cell => (*tp, op.clone()),
                _ => (left, vec![0.0; dim]),
            };
            let tr = self.fine_time(cell + 1);
            let w = (s - tp) / (tr - tp);
            let sd = ((s - tp) * (tr - s) / (tr - tp)).max(0.0).sqrt();
            let offsets: Vec<f64> = (0..dim)
                .map(|d| {
                    let total = self.brownian[d][cell];
                    let z: f64 = rng.sample(StandardNormal);
                    quantize(op[d] + w * (total - op[d]) + sd * z)
                })
                .collect();
            prev = Some((cell, s, offsets.clone()));
            anchors.push(Anchor {
                time: s,
                cell,
                offsets,
            });
        }
        anchors
    }

    fn cell_of(&self, s: f64) -> usize {
        let n = self.n_ref as f64;
        let mut c = (s * n).floor().max(0.0) as usize;
        while c > 0 && c as f64 / n > s {
            c -= 1;
        }
        while ((c + 1) as f64 / n) <= s {
            c += 1;
        }
        c
    }

    fn fine_index_of(&self, t: f64) -> Option<usize> {
        let j = (t * self.n_ref as f64).round();
        if j < 0.0 {
            return None;
        }
        let j = j as usize;
        (j <= self.cells() && self.fine_time(j) == t).then_some(j)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_ref(&self) -> usize {
        self.n_ref
    }

    pub fn fine_step(&self) -> f64 {
        1.0 / self.n_ref as f64
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn brownian_dim(&self) -> usize {
        self.brownian.len()
    }

    /// Number of fine Brownian cells per dimension.
    pub fn cells(&self) -> usize {
        self.brownian.first().map_or_else(
            || (self.horizon * self.n_ref as f64).ceil().max(1.0) as usize,
            Vec::len,
        )
    }

    pub fn brownian(&self) -> &[Vec<f64>] {
        &self.brownian
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn compound(&self) -> &[Vec<CpEvent>] {
        &self.compound
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    /// Time of fine grid node `j`.
    pub fn fine_time(&self, j: usize) -> f64 {
        j as f64 / self.n_ref as f64
    }

    pub fn node_time(&self, node: TapeNode) -> f64 {
        match node {
            TapeNode::Fine(j) => self.fine_time(j),
            TapeNode::Anchor(k) => self.anchors[k].time,
        }
    }

    /// Resolve `t` to a node with a known Brownian value: an anchor or a fine grid node.
    pub fn locate(&self, t: f64) -> Option<TapeNode> {
        let k = self.anchors.partition_point(|a| a.time < t);
        if self.anchors.get(k).is_some_and(|a| a.time == t) {
            return Some(TapeNode::Anchor(k));
        }
        self.fine_index_of(t).map(TapeNode::Fine)
    }

    /// Brownian value `W_d` at `node`.
    pub fn brownian_at(&self, node: TapeNode, d: usize) -> f64 {
        match node {
            TapeNode::Fine(j) => self.cumulative[d][j],
            TapeNode::Anchor(k) => {
                let a = &self.anchors[k];
                self.cumulative[d][a.cell] + a.offsets[d]
            }
        }
    }

    /// `W_d(b) - W_d(a)`.
    pub fn increment(&self, a: TapeNode, b: TapeNode, d: usize) -> f64 {
        self.brownian_at(b, d) - self.brownian_at(a, d)
    }

    /// Jump events of all compound streams with times in the open interval `(t0, t1)`,
    /// as `(time, stream, value)` sorted by time.
    pub fn jumps_between(&self, t0: f64, t1: f64) -> Vec<(f64, usize, f64)> {
        let mut out: Vec<(f64, usize, f64)> = self
            .compound
            .iter()
            .enumerate()
            .flat_map(|(k, evs)| {
                let lo = evs.partition_point(|e| e.time <= t0);
                let hi = evs.partition_point(|e| e.time < t1);
                evs[lo..hi].iter().map(move |e| (e.time, k, e.value))
            })
            .collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    /// Brownian increments on the grid of step `factor / n_ref`.
    pub fn coarsen_brownian(&self, factor: usize) -> Result<Vec<Vec<f64>>> {
        if factor == 0 || self.n_ref % factor != 0 {
            return Err(SimError::domain(format!(
                "coarsening factor {factor} does not divide n_ref = {}",
                self.n_ref
            )));
        }
        self.brownian
            .iter()
            .map(|inc| coarsen(inc, factor))
            .collect()
    }

    /// Serialise to the little-endian binary layout documented in the README.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(TAPE_MAGIC)?;
        w.write_all(&TAPE_VERSION.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.path_index.to_le_bytes())?;
        w.write_all(&self.horizon.to_le_bytes())?;
        w.write_all(&(self.n_ref as u64).to_le_bytes())?;
        w.write_all(&self.lambda.to_le_bytes())?;
        w.write_all(&(self.brownian_dim() as u32).to_le_bytes())?;
        w.write_all(&(self.cells() as u64).to_le_bytes())?;
        for inc in &self.brownian {
            for v in inc {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.write_all(&(self.atoms.len() as u64).to_le_bytes())?;
        for a in &self.atoms {
            w.write_all(&a.time.to_le_bytes())?;
            w.write_all(&a.mark.to_le_bytes())?;
        }
        w.write_all(&(self.compound.len() as u32).to_le_bytes())?;
        for evs in &self.compound {
            w.write_all(&(evs.len() as u64).to_le_bytes())?;
            for e in evs {
                w.write_all(&e.time.to_le_bytes())?;
                w.write_all(&e.value.to_le_bytes())?;
            }
        }
        w.write_all(&(self.anchors.len() as u64).to_le_bytes())?;
        for a in &self.anchors {
            w.write_all(&a.time.to_le_bytes())?;
            w.write_all(&(a.cell as u64).to_le_bytes())?;
            for v in &a.offsets {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<NoiseTape> {
        let bad = |what: &str| SimError::domain(format!("malformed tape: {what}"));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("header"))?;
        if &magic != TAPE_MAGIC {
            return Err(bad("magic"));
        }
        let mut rd = LeReader(r);
        let version = rd.u32()?;
        if version != TAPE_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let seed = rd.u64()?;
        let path_index = rd.u64()?;
        let horizon = rd.f64()?;
        let n_ref = rd.u64()? as usize;
        let lambda = rd.f64()?;
        let dim = rd.u32()? as usize;
        let cells = rd.u64()? as usize;
        if cells.saturating_mul(dim) > MAX_TAPE_INCREMENTS {
            return Err(bad("too many increments"));
        }
        let mut brownian = Vec::with_capacity(dim);
        for _ in 0..dim {
            brownian.push((0..cells).map(|_| rd.f64()).collect::<Result<Vec<_>>>()?);
        }
        let n_atoms = rd.u64()? as usize;
        let mut atoms = Vec::new();
        for _ in 0..n_atoms {
            atoms.push(Atom {
                time: rd.f64()?,
                mark: rd.f64()?,
            });
        }
        let n_streams = rd.u32()? as usize;
        let mut compound = Vec::new();
        for _ in 0..n_streams {
            let n = rd.u64()? as usize;
            let mut evs = Vec::new();
            for _ in 0..n {
                evs.push(CpEvent {
                    time: rd.f64()?,
                    value: rd.f64()?,
                });
            }
            compound.push(evs);
        }
        let n_anchors = rd.u64()? as usize;
        let mut anchors = Vec::new();
        for _ in 0..n_anchors {
            let time = rd.f64()?;
            let cell = rd.u64()? as usize;
            let offsets = (0..dim).map(|_| rd.f64()).collect::<Result<Vec<_>>>()?;
            anchors.push(Anchor {
                time,
                cell,
                offsets,
            });
        }
        let cumulative = brownian
            .iter()
            .map(|inc| {
                std::iter::once(0.0)
                    .chain(inc.iter().scan(0.0, |acc, &dw| {
                        *acc += dw;
                        Some(*acc)
                    }))
                    .collect()
            })
            .collect();
        Ok(NoiseTape {
            seed,
            path_index,
            horizon,
            n_ref,
            lambda,
            brownian,
            cumulative,
            atoms,
            compound,
            anchors,
        })
    }
}

struct LeReader<R>(R);

impl<R: Read> LeReader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0
            .read_exact(&mut b)
            .map_err(|_| SimError::domain("malformed tape: truncated"))?;
        Ok(b)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
}

/// Sum consecutive groups of `factor` increments.
pub fn coarsen(increments: &[f64], factor: usize) -> Result<Vec<f64>> {
    if factor == 0 || increments.len() % factor != 0 {
        return Err(SimError::domain(format!(
            "coarsening factor {factor} does not divide {} increments",
            increments.len()
        )));
    }
    Ok(increments
        .chunks_exact(factor)
        .map(|c| c.iter().sum())
        .collect())
}
