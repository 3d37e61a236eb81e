#![allow(dead_code)]

use mpsim::path::{EuclidJump, HybridPath, HybridState, PathTable, Segment, Side};
use mpsim::Mode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Times are multiples of this so that evaluation points can hit nodes exactly.
pub const TICK: f64 = 1.0 / 256.0;

fn random_value(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(-1.0..2.0)
}

fn random_segment_tail(
    rng: &mut ChaCha8Rng,
    mode: Mode,
    start: &[f64],
    t0: f64,
    t1: u32,
    jump_prob: f64,
) -> (Segment, Vec<EuclidJump>) {
    let dim = start.len();
    let first = (t0 / TICK).floor() as u32 + 1;
    let mut times = vec![t0];
    times.extend((first..t1).filter(|_| rng.random_bool(0.3)).map(|k| k as f64 * TICK));
    times.push(t1 as f64 * TICK);
    let mut values = start.to_vec();
    let mut jumps = Vec::new();
    for (i, &s) in times.iter().enumerate().skip(1) {
        let x: Vec<f64> = (0..dim).map(|_| random_value(rng)).collect();
        if i + 1 < times.len() && rng.random_bool(jump_prob) {
            jumps.push(EuclidJump {
                time: s,
                pre: (0..dim).map(|_| random_value(rng)).collect(),
                post: x.clone(),
            });
        }
        values.extend_from_slice(&x);
    }
    (Segment::new(mode, dim, times, values).unwrap(), jumps)
}

/// Extend `path` with random segments and events up to tick `end`.
pub fn extend_randomly(rng: &mut ChaCha8Rng, path: &mut HybridPath, end: u32, modes: Mode) {
    let first = (path.horizon() / TICK).floor() as u32 + 1;
    assert!(end > first, "extension needs room");
    let n_events = rng.random_range(0..6);
    let mut cuts: Vec<u32> = (0..n_events)
        .filter_map(|_| (end > first + 1).then(|| rng.random_range(first..end)))
        .collect();
    cuts.sort_unstable();
    cuts.dedup();
    cuts.push(end);
    for (i, &c) in cuts.iter().enumerate() {
        if i > 0 {
            let next = (path.current_mode() + rng.random_range(1..modes)) % modes;
            path.push_event(next).unwrap();
        }
        let (seg, jumps) = random_segment_tail(rng, path.current_mode(), path.end_position(), path.horizon(), c, 0.2);
        path.push_segment(seg, jumps).unwrap();
    }
}

/// Random path on `[0, end * TICK]` with up to five mode changes among `modes` modes
/// and Euclidean jumps at interior nodes.
pub fn random_path(seed: u64) -> HybridPath {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(1..3);
    let modes = 3;
    let origin = HybridState::new(rng.random_range(0..modes), (0..dim).map(|_| random_value(&mut rng)).collect());
    let mut p = HybridPath::new(origin);
    let end = rng.random_range(64..1024);
    extend_randomly(&mut rng, &mut p, end, modes);
    p
}

/// Evaluation times: every table time, midpoints, and a few random points.
pub fn probe_times(path: &HybridPath, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let tbl = path.table();
    let mut ts = tbl.times.clone();
    ts.extend(tbl.times.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    ts.extend((0..20).map(|_| rng.random_range(0.0..path.horizon())));
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

/// Brute-force reader over the flattened table, independent of segment bookkeeping.
pub struct Table(pub PathTable);

impl Table {
    pub fn of(path: &HybridPath) -> Self {
        Table(path.table())
    }

    fn rows(&self) -> usize {
        self.0.len()
    }

    /// Index of the row holding the right-continuous value at `s`.
    fn right(&self, s: f64) -> usize {
        (0..self.rows()).rev().find(|&k| self.0.times[k] <= s).unwrap()
    }

    /// Index of the row holding the left limit at `s`: the `Pre` row at an event,
    /// otherwise the right value (grid nodes carry no discontinuity).
    fn left(&self, s: f64) -> usize {
        (0..self.rows())
            .find(|&k| self.0.times[k] == s && self.0.sides[k] == Side::Pre)
            .unwrap_or_else(|| self.right(s))
    }

    fn distinct_times(&self) -> Vec<f64> {
        let mut ts = self.0.times.clone();
        ts.dedup();
        ts
    }

    /// Integral over `[a, b)` of `f(mode, x)` for the held right values.
    fn integrate(&self, a: f64, b: f64, f: impl Fn(Mode, &[f64]) -> bool) -> f64 {
        let ts = self.distinct_times();
        let mut total = 0.0;
        for (i, &s) in ts.iter().enumerate() {
            let e = ts.get(i + 1).copied().unwrap_or(f64::INFINITY);
            let lo = s.max(a);
            let hi = e.min(b);
            let k = self.right(s);
            if hi > lo && f(self.0.modes[k], self.0.value(k)) {
                total += hi - lo;
            }
        }
        total
    }

    pub fn occupation(&self, t: f64, barrier: f64, window: f64, c: usize, prehistory: bool) -> f64 {
        let mut total = self.integrate((t - window).max(0.0), t, |_, x| x[c] >= barrier);
        if prehistory && t < window && self.0.value(0)[c] >= barrier {
            total += window - t;
        }
        total
    }

    pub fn loc(&self, t: f64, mode: Mode) -> f64 {
        self.integrate(0.0, t, |m, _| m == mode)
    }

    /// `(time, pre mode, post mode)` for every mode change.
    fn changes(&self) -> Vec<(f64, Mode, Mode)> {
        (0..self.rows().saturating_sub(1))
            .filter(|&k| self.0.sides[k] == Side::Pre && self.0.modes[k] != self.0.modes[k + 1])
            .map(|k| (self.0.times[k], self.0.modes[k], self.0.modes[k + 1]))
            .collect()
    }

    /// `(time, pre, post)` for every Euclidean jump without a mode change.
    fn euclid_jumps(&self) -> Vec<(f64, Vec<f64>, Vec<f64>)> {
        (0..self.rows().saturating_sub(1))
            .filter(|&k| self.0.sides[k] == Side::Pre && self.0.modes[k] == self.0.modes[k + 1])
            .map(|k| (self.0.times[k], self.0.value(k).to_vec(), self.0.value(k + 1).to_vec()))
            .collect()
    }

    pub fn cnt(&self, t: f64, from: Mode, to: Mode) -> usize {
        self.changes()
            .into_iter()
            .filter(|&(s, a, b)| s < t && a == from && b == to)
            .count()
    }

    pub fn age(&self, t: f64) -> f64 {
        let last = self
            .changes()
            .into_iter()
            .filter(|&(s, _, _)| s < t)
            .map(|(s, _, _)| s)
            .fold(0.0, f64::max);
        t - last
    }

    pub fn drawdown_left(&self, t: f64, c: usize) -> f64 {
        let x = self.0.value(self.left(t))[c];
        let mut m = x.max(self.0.value(0)[c]);
        for k in 0..self.rows() {
            if self.0.times[k] < t {
                m = m.max(self.0.value(k)[c]);
            }
        }
        m - x
    }

    pub fn drawdown(&self, t: f64, c: usize) -> f64 {
        let x = self.0.value(self.right(t))[c];
        let m = (0..self.rows())
            .filter(|&k| self.0.times[k] <= t)
            .map(|k| self.0.value(k)[c])
            .fold(f64::NEG_INFINITY, f64::max);
        m - x
    }

    pub fn jump_count_up_relative(&self, t: f64, threshold: f64, window: f64, c: usize) -> usize {
        let lo = (t - window).max(0.0);
        self.euclid_jumps()
            .into_iter()
            .filter(|(s, pre, post)| *s >= lo && *s < t && pre[c] != 0.0 && (post[c] - pre[c]) / pre[c] > threshold)
            .count()
    }

    pub fn jump_count_both_absolute(&self, t: f64, threshold: f64, window: f64) -> usize {
        let lo = (t - window).max(0.0);
        self.euclid_jumps()
            .into_iter()
            .filter(|(s, pre, post)| {
                let n = pre.iter().zip(post).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt();
                *s >= lo && *s < t && n > threshold
            })
            .count()
    }

    pub fn state_right(&self, s: f64) -> (Mode, Vec<f64>) {
        let k = self.right(s);
        (self.0.modes[k], self.0.value(k).to_vec())
    }

    pub fn state_left(&self, s: f64) -> (Mode, Vec<f64>) {
        let k = self.left(s);
        (self.0.modes[k], self.0.value(k).to_vec())
    }
}
