//! Hybrid trajectories `Y = (J, X)` stored as an event log plus per-interval grids.
//!
//! Between grid nodes the Euclidean component is held constant from the left node
//! (left-constant hold); the grid resolution is the accuracy knob. Left limits
//! differ from the right-continuous value only at recorded events: the mode at a
//! discrete event, and the position at a Euclidean jump.

use crate::error::{Result, SimError};
use crate::Mode;

#[derive(Clone, Debug, PartialEq)]
pub struct HybridState {
    pub mode: Mode,
    pub position: Vec<f64>,
}

impl HybridState {
    pub fn new(mode: Mode, position: Vec<f64>) -> Self {
        Self { mode, position }
    }

    pub fn dim(&self) -> usize {
        self.position.len()
    }
}

/// Jump of the discrete component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscreteEvent {
    pub time: f64,
    pub pre_mode: Mode,
    pub post_mode: Mode,
}

/// Discontinuity of the Euclidean component caused by the jump part of the driver.
#[derive(Clone, Debug, PartialEq)]
pub struct EuclidJump {
    pub time: f64,
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
}

/// Discretised Euclidean evolution over one inter-event interval in a frozen mode.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    mode: Mode,
    dim: usize,
    times: Vec<f64>,
    // row-major, `times.len() * dim`
    values: Vec<f64>,
    // per-component maximum over the nodes
    peaks: Vec<f64>,
}

impl Segment {
    pub fn new(mode: Mode, dim: usize, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(SimError::domain("segment dimension must be at least 1"));
        }
        if times.len() < 2 {
            return Err(SimError::domain("segment needs at least two grid nodes"));
        }
        if values.len() != times.len() * dim {
            return Err(SimError::domain(format!(
                "segment has {} values for {} nodes of dimension {dim}",
                values.len(),
                times.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SimError::domain("segment grid times must be strictly increasing"));
        }
        let mut peaks = vec![f64::NEG_INFINITY; dim];
        for row in values.chunks_exact(dim) {
            for (m, &v) in peaks.iter_mut().zip(row) {
                *m = m.max(v);
            }
        }
        Ok(Self {
            mode,
            dim,
            times,
            values,
            peaks,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    /// Node values, row-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest node value of `component`.
    pub fn peak(&self, component: usize) -> f64 {
        self.peaks[component]
    }

    pub fn start_value(&self) -> &[f64] {
        self.value(0)
    }

    pub fn end_value(&self) -> &[f64] {
        self.value(self.times.len() - 1)
    }

    /// Index of the node holding the value at `t` (last node with time `<= t`).
    fn node_at(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t).saturating_sub(1)
    }
}

/// Which side of a time instant a table row describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Grid node without an event; left and right values coincide.
    Plain,
    /// Left limit at an event time.
    Pre,
    /// Value at an event time.
    Post,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            // plain rows carry the right-continuous value
            Side::Plain | Side::Post => "post",
            Side::Pre => "pre",
        }
    }
}

/// Flattened view of a path on its merged grid/event times, in time order.
#[derive(Clone, Debug, Default)]
pub struct PathTable {
    pub dim: usize,
    pub times: Vec<f64>,
    pub sides: Vec<Side>,
    pub modes: Vec<Mode>,
    values: Vec<f64>,
}

impl PathTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn push(&mut self, time: f64, side: Side, mode: Mode, x: &[f64]) {
        self.times.push(time);
        self.sides.push(side);
        self.modes.push(mode);
        self.values.extend_from_slice(x);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HybridPath {
    origin: HybridState,
    events: Vec<DiscreteEvent>,
    segments: Vec<Segment>,
    jumps: Vec<EuclidJump>,
    horizon: f64,
}

impl HybridPath {
    /// Empty path holding only the point initial condition at `t = 0`.
    pub fn new(origin: HybridState) -> Self {
        Self {
            origin,
            events: Vec::new(),
            segments: Vec::new(),
            jumps: Vec::new(),
            horizon: 0.0,
        }
    }

    /// Assemble a path from its parts, checking every structural invariant.
    pub fn from_parts(
        origin: HybridState,
        events: Vec<DiscreteEvent>,
        segments: Vec<Segment>,
        jumps: Vec<EuclidJump>,
    ) -> Result<Self> {
        let mut path = HybridPath::new(origin);
        let mut events = events.into_iter().peekable();
        let mut jumps = jumps.into_iter().peekable();
        for seg in segments {
            let (t0, t1) = (seg.t_start(), seg.t_end());
            while let Some(ev) = events.next_if(|e| e.time <= t0) {
                if ev.time < t0 || ev.pre_mode != path.current_mode() {
                    return Err(SimError::domain(format!(
                        "discrete event at t={} does not sit on a segment boundary consistent with the path",
                        ev.time
                    )));
                }
                path.push_event(ev.post_mode)?;
            }
            let mut inner = Vec::new();
            while let Some(j) = jumps.next_if(|j| j.time < t1) {
                inner.push(j);
            }
            path.push_segment(seg, inner)?;
        }
        if let Some(ev) = events.next() {
            if ev.time != path.horizon || ev.pre_mode != path.current_mode() {
                return Err(SimError::domain(format!(
                    "discrete event at t={} lies outside the path",
                    ev.time
                )));
            }
            path.push_event(ev.post_mode)?;
        }
        if events.next().is_some() {
            return Err(SimError::domain("more than one discrete event at the horizon"));
        }
        if let Some(j) = jumps.next() {
            return Err(SimError::domain(format!(
                "Euclidean jump at t={} is not interior to any segment",
                j.time
            )));
        }
        Ok(path)
    }

    pub fn origin(&self) -> &HybridState {
        &self.origin
    }

    pub fn dim(&self) -> usize {
        self.origin.position.len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn events(&self) -> &[DiscreteEvent] {
        &self.events
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn jumps(&self) -> &[EuclidJump] {
        &self.jumps
    }

    /// Mode at the horizon (after any event there).
    pub fn current_mode(&self) -> Mode {
        self.events.last().map_or(self.origin.mode, |e| e.post_mode)
    }

    /// Position at the horizon.
    pub fn end_position(&self) -> &[f64] {
        self.segments
            .last()
            .map_or(&self.origin.position[..], |s| s.end_value())
    }

    /// Append a segment starting at the current horizon, in the current mode.
    ///
    /// `jumps` are the Euclidean jumps strictly inside the segment; each must
    /// coincide with a grid node whose stored value is the post-jump value.
    pub fn push_segment(&mut self, seg: Segment, jumps: Vec<EuclidJump>) -> Result<()> {
        if seg.dim() != self.dim() {
            return Err(SimError::domain(format!(
                "segment dimension {} does not match path dimension {}",
                seg.dim(),
                self.dim()
            )));
        }
        if seg.t_start() != self.horizon {
            return Err(SimError::domain(format!(
                "segment starts at {} but the path ends at {}",
                seg.t_start(),
                self.horizon
            )));
        }
        if seg.mode() != self.current_mode() {
            return Err(SimError::domain(format!(
                "segment mode {} differs from current mode {}",
                seg.mode(),
                self.current_mode()
            )));
        }
        if seg.start_value() != self.end_position() {
            return Err(SimError::domain(format!(
                "segment at t={} does not continue the Euclidean path",
                seg.t_start()
            )));
        }
        let mut last = self.jumps.last().map_or(f64::NEG_INFINITY, |j| j.time);
        for j in &jumps {
            if !(j.time > seg.t_start() && j.time < seg.t_end() && j.time > last) {
                return Err(SimError::domain(format!(
                    "Euclidean jump at t={} is not strictly inside its segment or out of order",
                    j.time
                )));
            }
            if j.pre.len() != self.dim() || j.post.len() != self.dim() {
                return Err(SimError::domain("Euclidean jump has wrong dimension"));
            }
            let k = seg.node_at(j.time);
            if seg.times()[k] != j.time || seg.value(k) != &j.post[..] {
                return Err(SimError::domain(format!(
                    "Euclidean jump at t={} does not match a grid node",
                    j.time
                )));
            }
            last = j.time;
        }
        self.horizon = seg.t_end();
        self.segments.push(seg);
        self.jumps.extend(jumps);
        Ok(())
    }

    /// Record a discrete transition at the current horizon.
    pub fn push_event(&mut self, post_mode: Mode) -> Result<()> {
        let time = self.horizon;
        let pre_mode = self.current_mode();
        if !(time > 0.0) {
            return Err(SimError::domain("discrete events need a positive time"));
        }
        if self.events.last().is_some_and(|e| e.time >= time) {
            return Err(SimError::domain(format!(
                "discrete event at t={time} is not after the previous event"
            )));
        }
        if post_mode == pre_mode {
            return Err(SimError::domain("a discrete event must change the mode"));
        }
        self.events.push(DiscreteEvent {
            time,
            pre_mode,
            post_mode,
        });
        Ok(())
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t <= self.horizon) {
            return Err(SimError::domain(format!(
                "time {t} outside the path domain [0, {}]",
                self.horizon
            )));
        }
        Ok(())
    }

    /// Mode at `t` with the right-continuous convention (unchecked).
    pub(crate) fn mode_at(&self, t: f64) -> Mode {
        let k = self.events.partition_point(|e| e.time <= t);
        if k == 0 {
            self.origin.mode
        } else {
            self.events[k - 1].post_mode
        }
    }

    /// Left-limit mode `J_{t-}` (unchecked).
    pub(crate) fn mode_left_at(&self, t: f64) -> Mode {
        let k = self.events.partition_point(|e| e.time < t);
        if k == 0 {
            self.origin.mode
        } else {
            self.events[k - 1].post_mode
        }
    }

    /// Held position at `t` (unchecked, `t` within the path).
    pub(crate) fn position_at(&self, t: f64) -> &[f64] {
        if self.segments.is_empty() {
            return &self.origin.position;
        }
        let si = self
            .segments
            .partition_point(|s| s.t_start() <= t)
            .saturating_sub(1);
        let seg = &self.segments[si];
        seg.value(seg.node_at(t))
    }

    /// Left-limit position `X_{t-}` (unchecked).
    pub(crate) fn position_left_at(&self, t: f64) -> &[f64] {
        match self.jump_at(t) {
            Some(j) => &j.pre,
            None => self.position_at(t),
        }
    }

    pub(crate) fn jump_at(&self, t: f64) -> Option<&EuclidJump> {
        let k = self.jumps.partition_point(|j| j.time < t);
        self.jumps.get(k).filter(|j| j.time == t)
    }

    /// Right-continuous state `Y_t`.
    pub fn state_at(&self, t: f64) -> Result<HybridState> {
        self.check_time(t)?;
        Ok(HybridState::new(self.mode_at(t), self.position_at(t).to_vec()))
    }

    /// Left limit `Y_{t-}`. At `t = 0` this is the (constant) pre-history, i.e. the origin.
    pub fn state_left_at(&self, t: f64) -> Result<HybridState> {
        self.check_time(t)?;
        Ok(HybridState::new(
            self.mode_left_at(t),
            self.position_left_at(t).to_vec(),
        ))
    }

    /// The strict past `Y_{[0,t)}` with a closing node at `t` holding `X_{t-}`.
    ///
    /// Events at exactly `t` are dropped; the result has horizon `t`.
    pub fn truncated(&self, t: f64) -> Result<HybridPath> {
        self.check_time(t)?;
        let mut out = HybridPath::new(self.origin.clone());
        if t == 0.0 {
            return Ok(out);
        }
        let mut events = self.events.iter().filter(|e| e.time < t).peekable();
        for seg in &self.segments {
            if seg.t_start() >= t {
                break;
            }
            while let Some(ev) = events.next_if(|e| e.time <= seg.t_start()) {
                out.push_event(ev.post_mode)?;
            }
            let (seg, jumps) = if seg.t_end() <= t {
                let jumps = self
                    .jumps
                    .iter()
                    .filter(|j| j.time > seg.t_start() && j.time < seg.t_end())
                    .cloned()
                    .collect();
                (seg.clone(), jumps)
            } else {
                let keep = seg.times().partition_point(|&s| s < t);
                let mut times = seg.times()[..keep].to_vec();
                let mut values = seg.values[..keep * seg.dim()].to_vec();
                times.push(t);
                values.extend_from_slice(self.position_left_at(t));
                let jumps = self
                    .jumps
                    .iter()
                    .filter(|j| j.time > seg.t_start() && j.time < t)
                    .cloned()
                    .collect();
                (Segment::new(seg.mode(), seg.dim(), times, values)?, jumps)
            };
            out.push_segment(seg, jumps)?;
        }
        Ok(out)
    }

    /// All grid and event rows up to the horizon, in time order.
    ///
    /// Grid nodes shared by adjacent segments appear once; every event time
    /// contributes a `Pre` row (left limit) followed by a `Post` row.
    pub fn table(&self) -> PathTable {
        let dim = self.dim();
        let mut tbl = PathTable {
            dim,
            ..PathTable::default()
        };
        if self.segments.is_empty() {
            tbl.push(0.0, Side::Plain, self.origin.mode, &self.origin.position);
            return tbl;
        }
        let mut mode = self.origin.mode;
        let mut ev = self.events.iter().peekable();
        let mut jp = self.jumps.iter().peekable();
        for (si, seg) in self.segments.iter().enumerate() {
            let first = if si == 0 { 0 } else { 1 };
            for k in first..seg.len() {
                let t = seg.times()[k];
                let x = seg.value(k);
                if let Some(e) = ev.next_if(|e| e.time == t) {
                    tbl.push(t, Side::Pre, e.pre_mode, x);
                    tbl.push(t, Side::Post, e.post_mode, x);
                    mode = e.post_mode;
                } else if let Some(j) = jp.next_if(|j| j.time == t) {
                    tbl.push(t, Side::Pre, mode, &j.pre);
                    tbl.push(t, Side::Post, mode, x);
                } else {
                    tbl.push(t, Side::Plain, mode, x);
                }
            }
        }
        tbl
    }
}

impl HybridPath {
    /// Inverse of [`HybridPath::table`], up to segment boundaries that carry no event.
    pub fn from_table(tbl: &PathTable) -> Result<HybridPath> {
        if tbl.is_empty() {
            return Err(SimError::domain("path table has no rows"));
        }
        let dim = tbl.dim;
        let mut path = HybridPath::new(HybridState::new(tbl.modes[0], tbl.value(0).to_vec()));
        if tbl.len() == 1 {
            return Ok(path);
        }
        let mut times = vec![tbl.times[0]];
        let mut values = tbl.value(0).to_vec();
        let mut jumps = Vec::new();
        let mut k = 1;
        while k < tbl.len() {
            let t = tbl.times[k];
            match tbl.sides[k] {
                Side::Pre => {
                    let post = k + 1;
                    if post >= tbl.len() || tbl.times[post] != t || tbl.sides[post] != Side::Post {
                        return Err(SimError::domain(format!(
                            "row at t={t} has a left limit without a matching right value"
                        )));
                    }
                    if tbl.modes[post] != tbl.modes[k] {
                        times.push(t);
                        values.extend_from_slice(tbl.value(k));
                        let mode = path.current_mode();
                        let seg = Segment::new(mode, dim, std::mem::take(&mut times), std::mem::take(&mut values))?;
                        path.push_segment(seg, std::mem::take(&mut jumps))?;
                        path.push_event(tbl.modes[post])?;
                        times.push(t);
                        values.extend_from_slice(tbl.value(post));
                    } else {
                        jumps.push(EuclidJump {
                            time: t,
                            pre: tbl.value(k).to_vec(),
                            post: tbl.value(post).to_vec(),
                        });
                        times.push(t);
                        values.extend_from_slice(tbl.value(post));
                    }
                    k += 2;
                }
                Side::Plain | Side::Post => {
                    times.push(t);
                    values.extend_from_slice(tbl.value(k));
                    k += 1;
                }
            }
        }
        if times.len() >= 2 {
            let mode = path.current_mode();
            path.push_segment(Segment::new(mode, dim, times, values)?, jumps)?;
        }
        Ok(path)
    }
}

/// `|j_a - j_b| + ||x_a - x_b||_2`.
///
/// The vector part uses the Euclidean norm; any norm on R^p is admissible.
pub fn hybrid_norm(a: &HybridState, b: &HybridState) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(SimError::domain(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(norm_parts(a.mode, &a.position, b.mode, &b.position))
}

pub(crate) fn norm_parts(ma: Mode, xa: &[f64], mb: Mode, xb: &[f64]) -> f64 {
    let dj = (ma - mb).unsigned_abs() as f64;
    let dx = xa
        .iter()
        .zip(xb)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    dj + dx
}

/// Cursor over a [`PathTable`] yielding left and right states at requested times.
struct TableCursor<'a> {
    tbl: &'a PathTable,
    next: usize,
    // index of the row currently held (right value)
    held: usize,
}

impl<'a> TableCursor<'a> {
    fn new(tbl: &'a PathTable) -> Self {
        Self {
            tbl,
            next: 0,
            held: 0,
        }
    }

    /// Advance to `s`; returns (left row, right row) indices.
    fn advance(&mut self, s: f64) -> (usize, usize) {
        let mut pre = None;
        while self.next < self.tbl.len() && self.tbl.times[self.next] <= s {
            if self.tbl.times[self.next] == s && self.tbl.sides[self.next] == Side::Pre {
                pre = Some(self.next);
            }
            self.held = self.next;
            self.next += 1;
        }
        (pre.unwrap_or(self.held), self.held)
    }
}

/// Whether the supremum includes the right value at the end time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Closure {
    /// `sup_{s <= t}`
    Closed,
    /// `sup_{s < t}` together with the left limits at `t`.
    Open,
}

/// `sup_{s <= t_end} ||a_s - b_s||_E`, evaluated on the merged grid and event times.
///
/// Both paths are piecewise constant between merged times, so this is exact for
/// the held representation.
pub fn sup_distance(a: &HybridPath, b: &HybridPath, t_end: f64) -> Result<f64> {
    sup_distance_with(a, b, t_end, Closure::Closed)
}

pub fn sup_distance_with(
    a: &HybridPath,
    b: &HybridPath,
    t_end: f64,
    closure: Closure,
) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(SimError::domain("paths have different dimensions"));
    }
    if !(t_end >= 0.0) || t_end > a.horizon() || t_end > b.horizon() {
        return Err(SimError::domain(format!(
            "t_end={t_end} exceeds a path horizon ({}, {})",
            a.horizon(),
            b.horizon()
        )));
    }
    let (ta, tb) = (a.table(), b.table());
    let mut times: Vec<f64> = ta
        .times
        .iter()
        .chain(tb.times.iter())
        .copied()
        .filter(|&s| s <= t_end)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let (mut ca, mut cb) = (TableCursor::new(&ta), TableCursor::new(&tb));
    let mut sup = 0.0_f64;
    for s in times {
        let (la, ra) = ca.advance(s);
        let (lb, rb) = cb.advance(s);
        let left = norm_parts(ta.modes[la], ta.value(la), tb.modes[lb], tb.value(lb));
        sup = sup.max(left);
        if s < t_end || closure == Closure::Closed {
            let right = norm_parts(ta.modes[ra], ta.value(ra), tb.modes[rb], tb.value(rb));
            sup = sup.max(right);
        }
    }
    Ok(sup)
}
