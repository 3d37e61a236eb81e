//! Intensity rows, the canonical mark partition, and thinning decisions.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::functionals::{softmax_rates, FunctionalTerm};
use crate::path::HybridPath;
use crate::Mode;

/// Slack allowed on `total_exit <= lambda` before the bound counts as violated.
pub const RATE_BOUND_TOLERANCE: f64 = 1e-12;

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Active row of the intensity matrix: exit rates from `current_mode`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateRow {
    current_mode: Mode,
    // sorted by target, targets distinct and != current_mode
    rates: Vec<(Mode, f64)>,
    lambda: f64,
}

impl RateRow {
    /// Validates the row; a total above `lambda + RATE_BOUND_TOLERANCE` is a
    /// [`SimError::RateBound`] reported at time `t`.
    pub fn at_time(t: f64, current_mode: Mode, mut rates: Vec<(Mode, f64)>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(SimError::domain(format!("lambda must be positive, got {lambda}")));
        }
        rates.sort_by_key(|r| r.0);
        for w in rates.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(SimError::domain(format!("duplicate target mode {}", w[0].0)));
            }
        }
        for &(to, q) in &rates {
            if to == current_mode {
                return Err(SimError::domain(format!(
                    "rate row for mode {current_mode} lists itself as a target"
                )));
            }
            if !(q >= 0.0 && q.is_finite()) {
                return Err(SimError::InvalidRate {
                    time: t,
                    from: current_mode,
                    to,
                    value: q,
                });
            }
        }
        let row = Self {
            current_mode,
            rates,
            lambda,
        };
        let total = row.total_exit();
        if total > lambda + RATE_BOUND_TOLERANCE {
            return Err(SimError::RateBound {
                time: t,
                mode: current_mode,
                total,
                lambda,
                rates: row.rates,
            });
        }
        Ok(row)
    }

    pub fn new(current_mode: Mode, rates: Vec<(Mode, f64)>, lambda: f64) -> Result<Self> {
        Self::at_time(f64::NAN, current_mode, rates, lambda)
    }

    pub fn current_mode(&self) -> Mode {
        self.current_mode
    }

    /// `(target, q)` pairs in increasing target order.
    pub fn rates(&self) -> &[(Mode, f64)] {
        &self.rates
    }

    pub fn rate(&self, to: Mode) -> f64 {
        self.rates
            .binary_search_by_key(&to, |r| r.0)
            .map_or(0.0, |k| self.rates[k].1)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn total_exit(&self) -> f64 {
        compensated_sum(self.rates.iter().map(|r| r.1))
    }
}

/// One interval `[lo, hi)` of the mark space; `target == None` is the stay interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarkCell {
    pub lo: f64,
    pub hi: f64,
    pub target: Option<Mode>,
}

impl MarkCell {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        !(self.hi > self.lo)
    }

    pub fn contains(&self, u: f64) -> bool {
        self.lo <= u && u < self.hi
    }
}

/// Disjoint cover of `[0, lambda)`: target intervals left-packed in increasing
/// target order, the stay interval last.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkPartition {
    current_mode: Mode,
    lambda: f64,
    cells: Vec<MarkCell>,
}

pub fn canonical_partition(row: &RateRow) -> MarkPartition {
    let lambda = row.lambda();
    let mut cells = Vec::with_capacity(row.rates().len() + 1);
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    let mut lo = 0.0_f64;
    for &(to, q) in row.rates() {
        let t = sum + q;
        if sum.abs() >= q.abs() {
            comp += (sum - t) + q;
        } else {
            comp += (q - t) + sum;
        }
        sum = t;
        let hi = (sum + comp).min(lambda).max(lo);
        cells.push(MarkCell {
            lo,
            hi,
            target: Some(to),
        });
        lo = hi;
    }
    cells.push(MarkCell {
        lo,
        hi: lambda,
        target: None,
    });
    MarkPartition {
        current_mode: row.current_mode(),
        lambda,
        cells,
    }
}

impl MarkPartition {
    pub fn current_mode(&self) -> Mode {
        self.current_mode
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn cells(&self) -> &[MarkCell] {
        &self.cells
    }

    /// Interval assigned to `target`, empty if the target has no rate.
    pub fn cell_for(&self, target: Mode) -> Option<&MarkCell> {
        self.cells.iter().find(|c| c.target == Some(target))
    }

    pub fn stay_cell(&self) -> &MarkCell {
        self.cells.last().expect("partition always has a stay cell")
    }

    /// Post-jump mode selected by the mark `u`.
    pub fn apply_mark(&self, u: f64) -> Result<Mode> {
        if !(u >= 0.0 && u < self.lambda) {
            return Err(SimError::domain(format!(
                "mark {u} outside [0, {})",
                self.lambda
            )));
        }
        let k = self.cells.partition_point(|c| c.hi <= u);
        Ok(self.cells[k].target.unwrap_or(self.current_mode))
    }

    /// `sum_j m(Delta_j(self) symmetric-difference Delta_j(other))` over targets.
    pub fn symmetric_difference(&self, other: &MarkPartition) -> f64 {
        let mut targets: Vec<Mode> = self
            .cells
            .iter()
            .chain(&other.cells)
            .filter_map(|c| c.target)
            .collect();
        targets.sort_unstable();
        targets.dedup();
        let empty = MarkCell {
            lo: 0.0,
            hi: 0.0,
            target: None,
        };
        targets
            .into_iter()
            .map(|j| {
                let a = self.cell_for(j).unwrap_or(&empty);
                let b = other.cell_for(j).unwrap_or(&empty);
                let overlap = (a.hi.min(b.hi) - a.lo.max(b.lo)).max(0.0);
                a.len().max(0.0) + b.len().max(0.0) - 2.0 * overlap
            })
            .sum()
    }
}

/// One term of an affine combination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedTerm {
    pub coef: f64,
    pub term: FunctionalTerm,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum CurveShape {
    /// `intercept + slope * (a - start)`.
    Linear { intercept: f64, slope: f64 },
    /// `scale * exp(rate * (a - start))`.
    Exponential { scale: f64, rate: f64 },
}

/// Curve shape in force for arguments from `start` up to the next piece.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePiece {
    pub start: f64,
    #[serde(flatten)]
    pub shape: CurveShape,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum RateExpr {
    /// `sum coef_k * term_k`.
    Affine { terms: Vec<WeightedTerm> },
    /// Piecewise curve of a single functional; arguments below the first piece use it.
    Curve {
        argument: FunctionalTerm,
        pieces: Vec<CurvePiece>,
    },
}

impl RateExpr {
    fn terms(&self) -> Box<dyn Iterator<Item = &FunctionalTerm> + '_> {
        match self {
            RateExpr::Affine { terms } => Box::new(terms.iter().map(|w| &w.term)),
            RateExpr::Curve { argument, .. } => Box::new(std::iter::once(argument)),
        }
    }

    fn validate(&self) -> Result<()> {
        for term in self.terms() {
            term.validate()?;
        }
        match self {
            RateExpr::Affine { terms } => {
                if let Some(w) = terms.iter().find(|w| !w.coef.is_finite()) {
                    return Err(SimError::config(format!("coefficient {} is not finite", w.coef)));
                }
            }
            RateExpr::Curve { pieces, .. } => {
                if pieces.is_empty() {
                    return Err(SimError::config("curve needs at least one piece"));
                }
                if pieces.windows(2).any(|w| !(w[1].start > w[0].start)) {
                    return Err(SimError::config("curve pieces must have increasing starts"));
                }
                for p in pieces {
                    let ok = p.start.is_finite()
                        && match p.shape {
                            CurveShape::Linear { intercept, slope } => {
                                intercept.is_finite() && slope.is_finite()
                            }
                            CurveShape::Exponential { scale, rate } => {
                                scale.is_finite() && rate.is_finite()
                            }
                        };
                    if !ok {
                        return Err(SimError::config("curve parameters must be finite"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, path: &HybridPath, t: f64) -> Result<f64> {
        match self {
            RateExpr::Affine { terms } => {
                let mut acc = 0.0;
                for w in terms {
                    acc += w.coef * w.term.evaluate(path, t)?;
                }
                Ok(acc)
            }
            RateExpr::Curve { argument, pieces } => {
                let a = argument.evaluate(path, t)?;
                let k = pieces.partition_point(|p| p.start <= a).saturating_sub(1);
                let p = &pieces[k];
                Ok(match p.shape {
                    CurveShape::Linear { intercept, slope } => intercept + slope * (a - p.start),
                    CurveShape::Exponential { scale, rate } => scale * (rate * (a - p.start)).exp(),
                })
            }
        }
    }
}

/// `q_{from,to} = min(cap, expr v 0)`, each post-processing step optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEntry {
    pub from: Mode,
    pub to: Mode,
    pub expr: RateExpr,
    #[serde(default)]
    pub floor_zero: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap_per_time: Option<f64>,
}

/// `theta_{from,to} = sum coef_k * term_k`, fed to the softmax rate map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogitEntry {
    pub from: Mode,
    pub to: Mode,
    pub terms: Vec<WeightedTerm>,
}

/// Declarative map from `(t, history)` to the active rate row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntensitySpec {
    Direct { entries: Vec<RateEntry> },
    Softmax { logits: Vec<LogitEntry> },
}

impl IntensitySpec {
    /// Constant rates `q_{from,to}`.
    pub fn constant(rates: &[(Mode, Mode, f64)]) -> Self {
        IntensitySpec::Direct {
            entries: rates
                .iter()
                .map(|&(from, to, q)| RateEntry {
                    from,
                    to,
                    expr: RateExpr::Affine {
                        terms: vec![WeightedTerm {
                            coef: q,
                            term: FunctionalTerm::Constant,
                        }],
                    },
                    floor_zero: false,
                    cap_per_time: None,
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut pairs: Vec<(Mode, Mode)> = Vec::new();
        let mut check_pair = |from: Mode, to: Mode| {
            if from == to {
                return Err(SimError::config(format!("rate entry {from}->{to} has from == to")));
            }
            if pairs.contains(&(from, to)) {
                return Err(SimError::config(format!("duplicate rate entry {from}->{to}")));
            }
            pairs.push((from, to));
            Ok(())
        };
        match self {
            IntensitySpec::Direct { entries } => {
                for e in entries {
                    check_pair(e.from, e.to)?;
                    e.expr.validate()?;
                    if let Some(cap) = e.cap_per_time {
                        if !(cap >= 0.0 && cap.is_finite()) {
                            return Err(SimError::config(format!("cap must be non-negative, got {cap}")));
                        }
                    }
                }
            }
            IntensitySpec::Softmax { logits } => {
                for l in logits {
                    check_pair(l.from, l.to)?;
                    RateExpr::Affine {
                        terms: l.terms.clone(),
                    }
                    .validate()?;
                }
            }
        }
        Ok(())
    }

    /// Every mode named by an entry, sorted.
    pub fn modes(&self) -> Vec<Mode> {
        let mut modes: Vec<Mode> = match self {
            IntensitySpec::Direct { entries } => entries.iter().flat_map(|e| [e.from, e.to]).collect(),
            IntensitySpec::Softmax { logits } => logits.iter().flat_map(|l| [l.from, l.to]).collect(),
        };
        modes.sort_unstable();
        modes.dedup();
        modes
    }

    /// Modes whose exit rates do not depend on the history.
    pub fn history_free_modes(&self) -> Vec<Mode> {
        let IntensitySpec::Direct { entries } = self else {
            return Vec::new();
        };
        let constant = |e: &RateEntry| match &e.expr {
            RateExpr::Affine { terms } => terms.iter().all(|w| w.term == FunctionalTerm::Constant),
            RateExpr::Curve { .. } => false,
        };
        self.modes()
            .into_iter()
            .filter(|&m| entries.iter().filter(|e| e.from == m).all(constant))
            .collect()
    }

    /// Largest Euclidean component read by any term.
    pub fn max_component(&self) -> Option<usize> {
        let terms: Vec<&FunctionalTerm> = match self {
            IntensitySpec::Direct { entries } => entries.iter().flat_map(|e| e.expr.terms()).collect(),
            IntensitySpec::Softmax { logits } => {
                logits.iter().flat_map(|l| l.terms.iter().map(|w| &w.term)).collect()
            }
        };
        terms.iter().filter_map(|t| t.component()).max()
    }

    /// Rates out of `mode` at `t`, read from the strict past of `history`.
    pub fn rates_for_mode(
        &self,
        mode: Mode,
        t: f64,
        history: &HybridPath,
        lambda: f64,
    ) -> Result<RateRow> {
        let rates = match self {
            IntensitySpec::Direct { entries } => {
                let mut rates = Vec::new();
                for e in entries.iter().filter(|e| e.from == mode) {
                    let mut q = e.expr.evaluate(history, t)?;
                    if q.is_nan() {
                        return Err(SimError::InvalidRate {
                            time: t,
                            from: e.from,
                            to: e.to,
                            value: q,
                        });
                    }
                    if e.floor_zero {
                        q = q.max(0.0);
                    }
                    if let Some(cap) = e.cap_per_time {
                        q = q.min(cap);
                    }
                    rates.push((e.to, q));
                }
                rates
            }
            IntensitySpec::Softmax { logits } => {
                let mut theta = Vec::new();
                for l in logits.iter().filter(|l| l.from == mode) {
                    let mut acc = 0.0;
                    for w in &l.terms {
                        acc += w.coef * w.term.evaluate(history, t)?;
                    }
                    if !acc.is_finite() {
                        return Err(SimError::InvalidRate {
                            time: t,
                            from: l.from,
                            to: l.to,
                            value: acc,
                        });
                    }
                    theta.push((l.to, acc));
                }
                softmax_rates(&theta, lambda)?
            }
        };
        RateRow::at_time(t, mode, rates, lambda)
    }
}

/// Active rate row at `t`; the current mode is `J_{t-}` of `history`.
pub fn evaluate_rates(
    spec: &IntensitySpec,
    t: f64,
    history: &HybridPath,
    lambda: f64,
) -> Result<RateRow> {
    if !(t >= 0.0 && t <= history.horizon()) {
        return Err(SimError::domain(format!(
            "rates requested at t={t} beyond the history horizon {}",
            history.horizon()
        )));
    }
    spec.rates_for_mode(history.mode_left_at(t), t, history, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::JumpSign;
    use crate::path::{EuclidJump, HybridState, Segment};

    fn row(mode: Mode, rates: &[(Mode, f64)], lambda: f64) -> RateRow {
        RateRow::new(mode, rates.to_vec(), lambda).unwrap()
    }

    #[test]
    fn partition_examples() {
        let p = canonical_partition(&row(0, &[(1, 0.3)], 2.0));
        assert_eq!(
            p.cells(),
            &[
                MarkCell { lo: 0.0, hi: 0.3, target: Some(1) },
                MarkCell { lo: 0.3, hi: 2.0, target: None },
            ]
        );
        let p = canonical_partition(&row(0, &[], 2.0));
        assert_eq!(p.cells(), &[MarkCell { lo: 0.0, hi: 2.0, target: None }]);
        let p = canonical_partition(&row(0, &[(2, 0.25), (1, 0.5)], 1.0));
        assert_eq!(
            p.cells(),
            &[
                MarkCell { lo: 0.0, hi: 0.5, target: Some(1) },
                MarkCell { lo: 0.5, hi: 0.75, target: Some(2) },
                MarkCell { lo: 0.75, hi: 1.0, target: None },
            ]
        );
    }

    #[test]
    fn apply_mark_examples() {
        let p = canonical_partition(&row(0, &[(1, 0.3)], 2.0));
        assert_eq!(p.apply_mark(0.1).unwrap(), 1);
        assert_eq!(p.apply_mark(0.3).unwrap(), 0);
        assert!(p.apply_mark(2.0).is_err());
        assert!(p.apply_mark(-0.0).is_ok());
        assert!(p.apply_mark(-1e-300).is_err());
        let p = canonical_partition(&row(0, &[(1, 0.5), (2, 0.25)], 1.0));
        assert_eq!(p.apply_mark(0.6).unwrap(), 2);
    }

    #[test]
    fn zero_rate_target_is_never_selected() {
        let p = canonical_partition(&row(0, &[(1, 0.0), (2, 0.5)], 1.0));
        assert_eq!(p.apply_mark(0.0).unwrap(), 2);
    }

    #[test]
    fn row_validation() {
        assert!(matches!(
            RateRow::at_time(1.0, 0, vec![(1, 1.5), (2, 0.6)], 2.0),
            Err(SimError::RateBound { .. })
        ));
        assert!(RateRow::new(0, vec![(1, 2.0 + 5e-13)], 2.0).is_ok());
        assert!(matches!(
            RateRow::at_time(1.0, 0, vec![(1, -0.1)], 2.0),
            Err(SimError::InvalidRate { .. })
        ));
        assert!(RateRow::new(0, vec![(0, 0.1)], 2.0).is_err());
        assert!(RateRow::new(0, vec![(1, 0.1), (1, 0.2)], 2.0).is_err());
    }

    fn flat(mode: Mode, x: f64, horizon: f64) -> HybridPath {
        let mut p = HybridPath::new(HybridState::new(mode, vec![x]));
        p.push_segment(Segment::new(mode, 1, vec![0.0, horizon], vec![x, x]).unwrap(), vec![])
            .unwrap();
        p
    }

    #[test]
    fn constant_spec_example() {
        let spec = IntensitySpec::constant(&[(0, 1, 0.3), (1, 0, 0.7)]);
        let r = evaluate_rates(&spec, 1.0, &flat(0, 0.0, 2.0), 2.0).unwrap();
        assert_eq!(r.rates(), &[(1, 0.3)]);
        let r = evaluate_rates(&spec, 1.0, &flat(1, 0.0, 2.0), 2.0).unwrap();
        assert_eq!(r.rates(), &[(0, 0.7)]);
    }

    #[test]
    fn capped_crash_counter() {
        let spec = IntensitySpec::Direct {
            entries: vec![RateEntry {
                from: 0,
                to: 1,
                expr: RateExpr::Affine {
                    terms: vec![
                        WeightedTerm { coef: 0.1, term: FunctionalTerm::Constant },
                        WeightedTerm {
                            coef: 0.8,
                            term: FunctionalTerm::JumpCount {
                                threshold: 0.15,
                                window_time: 1.0,
                                sign: JumpSign::Down,
                                relative: true,
                                component: 0,
                            },
                        },
                    ],
                },
                floor_zero: false,
                cap_per_time: Some(2.0),
            }],
        };
        let mut p = HybridPath::new(HybridState::new(0, vec![1.0]));
        let j = EuclidJump { time: 0.5, pre: vec![1.0], post: vec![0.8] };
        p.push_segment(
            Segment::new(0, 1, vec![0.0, 0.5, 1.0], vec![1.0, 0.8, 0.8]).unwrap(),
            vec![j],
        )
        .unwrap();
        let r = evaluate_rates(&spec, 1.0, &p, 2.0).unwrap();
        assert!((r.rate(1) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn floor_at_zero() {
        let spec = IntensitySpec::Direct {
            entries: vec![RateEntry {
                from: 0,
                to: 1,
                expr: RateExpr::Affine {
                    terms: vec![
                        WeightedTerm { coef: 0.2, term: FunctionalTerm::Constant },
                        WeightedTerm {
                            coef: -0.5,
                            term: FunctionalTerm::Occupation {
                                barrier: 1.0,
                                window_time: 1.0,
                                component: 0,
                                prehistory: false,
                            },
                        },
                    ],
                },
                floor_zero: true,
                cap_per_time: None,
            }],
        };
        let r = evaluate_rates(&spec, 5.0, &flat(0, 2.0, 5.0), 4.0).unwrap();
        assert_eq!(r.rate(1), 0.0);
        let RateExpr::Affine { .. } = &spec_entry(&spec).expr else { unreachable!() };
        let mut unfloored = spec.clone();
        if let IntensitySpec::Direct { entries } = &mut unfloored {
            entries[0].floor_zero = false;
        }
        assert!(matches!(
            evaluate_rates(&unfloored, 5.0, &flat(0, 2.0, 5.0), 4.0),
            Err(SimError::InvalidRate { .. })
        ));
    }

    fn spec_entry(spec: &IntensitySpec) -> &RateEntry {
        match spec {
            IntensitySpec::Direct { entries } => &entries[0],
            IntensitySpec::Softmax { .. } => unreachable!(),
        }
    }

    #[test]
    fn curve_pieces() {
        let expr = RateExpr::Curve {
            argument: FunctionalTerm::Age,
            pieces: vec![
                CurvePiece { start: 0.0, shape: CurveShape::Exponential { scale: 1.5, rate: -3.0 } },
                CurvePiece { start: 0.5, shape: CurveShape::Linear { intercept: 0.2, slope: 0.0 } },
                CurvePiece { start: 5.0, shape: CurveShape::Linear { intercept: 0.2, slope: 0.3 } },
            ],
        };
        let p = flat(0, 0.0, 12.0);
        assert_eq!(expr.evaluate(&p, 0.0).unwrap(), 1.5);
        assert_eq!(expr.evaluate(&p, 2.0).unwrap(), 0.2);
        assert!((expr.evaluate(&p, 10.0).unwrap() - 1.7).abs() < 1e-15);
    }

    #[test]
    fn symmetric_difference_of_shifted_rows() {
        let a = canonical_partition(&row(0, &[(1, 0.5), (2, 0.25)], 1.0));
        let b = canonical_partition(&row(0, &[(1, 0.4), (2, 0.25)], 1.0));
        // cell 1 shrinks by 0.1, cell 2 shifts left by 0.1
        assert!((a.symmetric_difference(&b) - 0.3).abs() < 1e-15);
        assert_eq!(a.symmetric_difference(&a), 0.0);
    }

    #[test]
    fn spec_validation() {
        assert!(IntensitySpec::constant(&[(0, 0, 0.1)]).validate().is_err());
        assert!(IntensitySpec::constant(&[(0, 1, 0.1), (0, 1, 0.2)]).validate().is_err());
        assert!(IntensitySpec::constant(&[(0, 1, 0.1), (1, 0, 0.2)]).validate().is_ok());
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let spec = IntensitySpec::Direct {
            entries: vec![RateEntry {
                from: 1,
                to: 0,
                expr: RateExpr::Curve {
                    argument: FunctionalTerm::Age,
                    pieces: vec![CurvePiece {
                        start: 0.0,
                        shape: CurveShape::Linear { intercept: 0.3, slope: 0.25 },
                    }],
                },
                floor_zero: false,
                cap_per_time: Some(2.0),
            }],
        };
        #[derive(Serialize, Deserialize)]
        struct Wrap {
            intensity: IntensitySpec,
        }
        let text = toml::to_string(&Wrap { intensity: spec.clone() }).unwrap();
        let back: Wrap = toml::from_str(&text).unwrap();
        assert_eq!(back.intensity, spec);
    }
}
