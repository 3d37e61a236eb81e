//! Event-driven construction of the approximate hybrid path.
//!
//! Between consecutive master atoms the Euclidean state is advanced in the
//! frozen mode by the mode's micro-algorithm. At each atom the rate row is
//! computed from the path built so far, and the atom's mark selects the new
//! mode through the canonical partition.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Result, SimError};
use crate::kernel::{canonical_partition, evaluate_rates, IntensitySpec, RateRow};
use crate::micro::{run_micro, MicroKind, MicroRequest, ModeDynamics};
use crate::noise::{CompoundPoissonSpec, NoiseTape, TapeSpec};
use crate::path::{sup_distance_with, Closure, HybridPath, HybridState};
use crate::Mode;

/// Everything that defines a model, independent of horizon, level, and noise.
#[derive(Clone)]
pub struct ModelSpec {
    pub lambda: f64,
    pub intensity: IntensitySpec,
    pub dynamics: Arc<dyn ModeDynamics>,
    /// Solver used in modes without an override.
    pub micro: MicroKind,
    pub micro_overrides: BTreeMap<Mode, MicroKind>,
    pub initial: HybridState,
    pub compound_poisson: Vec<CompoundPoissonSpec>,
}

impl std::fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelSpec")
            .field("lambda", &self.lambda)
            .field("intensity", &self.intensity)
            .field("micro", &self.micro)
            .field("micro_overrides", &self.micro_overrides)
            .field("initial", &self.initial)
            .field("compound_poisson", &self.compound_poisson)
            .finish_non_exhaustive()
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(SimError::config(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        self.intensity.validate()?;
        if self.initial.dim() != self.dynamics.dim() {
            return Err(SimError::config(format!(
                "initial state has dimension {}, dynamics have {}",
                self.initial.dim(),
                self.dynamics.dim()
            )));
        }
        if let Some(c) = self.intensity.max_component() {
            if c >= self.dynamics.dim() {
                return Err(SimError::config(format!(
                    "intensity reads component {c} of a {}-dimensional state",
                    self.dynamics.dim()
                )));
            }
        }
        if self.compound_poisson.len() < self.dynamics.jump_streams() {
            return Err(SimError::config(format!(
                "dynamics use {} jump streams but only {} compound Poisson specs are given",
                self.dynamics.jump_streams(),
                self.compound_poisson.len()
            )));
        }
        for cp in &self.compound_poisson {
            cp.validate()?;
        }
        let origin = HybridPath::new(self.initial.clone());
        for mode in self.intensity.history_free_modes() {
            self.intensity.rates_for_mode(mode, 0.0, &origin, self.lambda)?;
        }
        Ok(())
    }

    pub fn micro_for(&self, mode: Mode) -> MicroKind {
        self.micro_overrides.get(&mode).copied().unwrap_or(self.micro)
    }

    /// Tape layout this model consumes on `[0, horizon]` at resolution `n_ref`.
    pub fn tape_spec(&self, horizon: f64, n_ref: usize) -> TapeSpec {
        TapeSpec {
            horizon,
            n_ref,
            lambda: self.lambda,
            brownian_dim: self.dynamics.noise_dim(),
            compound_poisson: self.compound_poisson.clone(),
        }
    }
}

/// What happened at one master atom.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditRecord {
    /// 1-based atom index.
    pub index: usize,
    pub time: f64,
    pub mode_before: Mode,
    pub row: RateRow,
    pub mark: f64,
    pub mode_after: Mode,
}

impl AuditRecord {
    pub fn q_total(&self) -> f64 {
        self.row.total_exit()
    }

    /// Mode increment selected by the mark.
    pub fn decision(&self) -> Mode {
        self.mode_after - self.mode_before
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationOutput {
    pub path: HybridPath,
    pub audit: Vec<AuditRecord>,
}

fn check_inputs(model: &ModelSpec, horizon: f64, level: usize, tape: &NoiseTape) -> Result<()> {
    model.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(SimError::domain(format!("horizon must be positive, got {horizon}")));
    }
    if level == 0 {
        return Err(SimError::domain("level must be at least 1"));
    }
    if tape.lambda() != model.lambda {
        return Err(SimError::domain(format!(
            "tape was generated for lambda {} but the model uses {}",
            tape.lambda(),
            model.lambda
        )));
    }
    if tape.horizon() < horizon {
        return Err(SimError::domain(format!(
            "tape horizon {} is shorter than the requested horizon {horizon}",
            tape.horizon()
        )));
    }
    Ok(())
}

fn evolve(
    model: &ModelSpec,
    path: &mut HybridPath,
    t_end: f64,
    level: usize,
    tape: &NoiseTape,
) -> Result<()> {
    let mode = path.current_mode();
    let x0 = path.end_position().to_vec();
    let req = MicroRequest {
        mode,
        x0: &x0,
        t_start: path.horizon(),
        t_end,
        level,
    };
    let out = run_micro(model.micro_for(mode), &req, model.dynamics.as_ref(), tape)?;
    path.push_segment(out.segment, out.jumps)
}

/// Run the algorithm on `[0, horizon]` at level `n`.
pub fn simulate(model: &ModelSpec, horizon: f64, level: usize, tape: &NoiseTape) -> Result<SimulationOutput> {
    check_inputs(model, horizon, level, tape)?;
    let mut path = HybridPath::new(model.initial.clone());
    let mut audit = Vec::new();
    for (m, atom) in tape.atoms().iter().enumerate() {
        if atom.time > horizon {
            break;
        }
        evolve(model, &mut path, atom.time, level, tape)?;
        let row = evaluate_rates(&model.intensity, atom.time, &path, model.lambda)?;
        let mode_before = row.current_mode();
        let mode_after = canonical_partition(&row).apply_mark(atom.mark)?;
        if mode_after != mode_before {
            path.push_event(mode_after)?;
        }
        audit.push(AuditRecord {
            index: m + 1,
            time: atom.time,
            mode_before,
            row,
            mark: atom.mark,
            mode_after,
        });
    }
    if path.horizon() < horizon {
        evolve(model, &mut path, horizon, level, tape)?;
    }
    Ok(SimulationOutput { path, audit })
}

/// Decoupling statistics of two runs over `[0, T]` sharing a tape.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingStats {
    /// First time the mode trajectories differ.
    pub iota: Option<f64>,
    /// First atom index (1-based) at which the thinning decisions differ.
    pub kappa: Option<usize>,
    /// Time of atom `kappa`.
    pub kappa_time: Option<f64>,
    /// Sup distance on `[0, T]` if coupled, on `[0, iota)` otherwise.
    pub sup_error: f64,
}

impl CouplingStats {
    /// `kappa` absent forces `iota` absent; when both exist `T_kappa = iota`.
    pub fn coupling_consistent(&self) -> bool {
        match (self.kappa_time, self.iota) {
            (None, None) => true,
            (Some(tk), Some(i)) => tk == i,
            _ => false,
        }
    }
}

pub fn coupling_stats(
    fine: &SimulationOutput,
    coarse: &SimulationOutput,
    horizon: f64,
) -> Result<CouplingStats> {
    let iota = crate::lab::decoupling_time(&fine.path, &coarse.path);
    let kappa = crate::lab::disagreement_index(&fine.audit, &coarse.audit)?;
    let kappa_time = kappa.map(|k| fine.audit[k - 1].time);
    let sup_error = match iota {
        Some(t) => sup_distance_with(&fine.path, &coarse.path, t, Closure::Open)?,
        None => sup_distance_with(&fine.path, &coarse.path, horizon, Closure::Closed)?,
    };
    Ok(CouplingStats {
        iota,
        kappa,
        kappa_time,
        sup_error,
    })
}

/// Two runs on one tape: the fine run stands in for the exact process.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledOutput {
    pub fine: SimulationOutput,
    pub coarse: SimulationOutput,
    pub stats: CouplingStats,
}

pub fn simulate_coupled(
    model: &ModelSpec,
    horizon: f64,
    n_coarse: usize,
    n_fine: usize,
    tape: &NoiseTape,
) -> Result<CoupledOutput> {
    if n_coarse == 0 || n_fine % n_coarse != 0 {
        return Err(SimError::domain(format!(
            "fine level {n_fine} is not a multiple of coarse level {n_coarse}"
        )));
    }
    let fine = simulate(model, horizon, n_fine, tape)?;
    let coarse = simulate(model, horizon, n_coarse, tape)?;
    let stats = coupling_stats(&fine, &coarse, horizon)?;
    Ok(CoupledOutput {
        fine,
        coarse,
        stats,
    })
}
