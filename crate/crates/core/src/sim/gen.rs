use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::energy::EnergyTrace;
use crate::error::{Error, Result};
use crate::sim::Workload;
use crate::task::{ImpreciseTask, Payload, Slot, Subtask, TaskId, Unit};

/// Synthetic harvester behaviour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceModel {
    /// Independent on-slots with probability `p`.
    Bernoulli { p: f64 },
    /// Two-state chain started from its stationary distribution.
    Markov { stay_on: f64, stay_off: f64 },
    /// `on_len` on-slots at the start of every period.
    Periodic { period: usize, on_len: usize },
    /// The same amount every slot.
    Constant { joules: f64 },
}

fn check_p(what: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} must lie in [0, 1], got {p}")))
    }
}

pub fn gen_trace(
    model: TraceModel,
    slots: usize,
    seed: u64,
    joules_per_on_slot: f64,
    slot_duration: f64,
) -> Result<EnergyTrace> {
    if !(joules_per_on_slot.is_finite() && joules_per_on_slot >= 0.0) {
        return Err(Error::invalid("joules per on-slot must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let on = |b: bool| if b { joules_per_on_slot } else { 0.0 };
    let harvest: Vec<f64> = match model {
        TraceModel::Bernoulli { p } => {
            check_p("p", p)?;
            (0..slots).map(|_| on(rng.gen_bool(p))).collect()
        }
        TraceModel::Markov { stay_on, stay_off } => {
            check_p("stay_on", stay_on)?;
            check_p("stay_off", stay_off)?;
            let leave = (1.0 - stay_on) + (1.0 - stay_off);
            let p_on = if leave > 0.0 { (1.0 - stay_off) / leave } else { 0.5 };
            let mut state = rng.gen_bool(p_on);
            let mut out = Vec::with_capacity(slots);
            for _ in 0..slots {
                out.push(on(state));
                let stay = if state { stay_on } else { stay_off };
                if !rng.gen_bool(stay) {
                    state = !state;
                }
            }
            out
        }
        TraceModel::Periodic { period, on_len } => {
            if period == 0 || on_len > period {
                return Err(Error::invalid(format!(
                    "periodic trace needs period >= 1 and on_len <= period, got {period}/{on_len}"
                )));
            }
            (0..slots).map(|s| on(s % period < on_len)).collect()
        }
        TraceModel::Constant { joules } => {
            if !(joules.is_finite() && joules >= 0.0) {
                return Err(Error::invalid("constant harvest must be non-negative"));
            }
            vec![joules; slots]
        }
    };
    EnergyTrace::new(slot_duration, harvest)
}

/// How scripted per-layer utilities are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UtilityModel {
    /// Reaches the threshold exactly at layer `layer` (1-based), or at a
    /// uniformly drawn layer when `None`; grows linearly throughout.
    CrossAt { layer: Option<usize> },
    /// Cumulative sum of uniform gains in `[0, max_gain)`.
    Increments { max_gain: f64 },
    /// Stays below the threshold on every layer.
    AllMandatory,
}

/// Sporadic single-job tasks with identical layer structure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkloadSpec {
    pub n_tasks: usize,
    /// Minimum inter-arrival time.
    pub period_slots: Slot,
    pub deadline_factor: f64,
    /// Extra inter-arrival delay drawn uniformly from `[0, jitter_slots]`.
    pub jitter_slots: Slot,
    pub layers: usize,
    pub units_per_layer: usize,
    pub unit_cost: u32,
    pub unit_energy: f64,
    pub u_t: f64,
    pub utility_model: UtilityModel,
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.deadline_factor.is_finite() && self.deadline_factor >= 1.0) {
            return Err(Error::invalid(format!(
                "deadline factor must be >= 1, got {}",
                self.deadline_factor
            )));
        }
        if self.period_slots == 0 || self.layers == 0 || self.units_per_layer == 0 {
            return Err(Error::invalid("period, layers and units per layer must be positive"));
        }
        if let UtilityModel::CrossAt { layer: Some(l) } = self.utility_model {
            if l == 0 || l > self.layers {
                return Err(Error::invalid(format!("crossing layer {l} outside 1..={}", self.layers)));
            }
        }
        if let UtilityModel::Increments { max_gain } = self.utility_model {
            if !(max_gain.is_finite() && max_gain > 0.0) {
                return Err(Error::invalid("max gain must be positive"));
            }
        }
        Unit::new(self.unit_cost, self.unit_energy)?;
        Ok(())
    }
}

pub fn gen_workload(spec: &WorkloadSpec, seed: u64) -> Result<Workload> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Unit::new(spec.unit_cost, spec.unit_energy)?;
    let rel_deadline = ((spec.deadline_factor * spec.period_slots as f64).round() as Slot).max(1);
    let mut release = rng.gen_range(0..=spec.jitter_slots);
    let mut tasks = Vec::with_capacity(spec.n_tasks);
    for i in 0..spec.n_tasks {
        let utilities = draw_utilities(spec, &mut rng);
        let subtasks = utilities
            .into_iter()
            .map(|u| Subtask::new(vec![unit; spec.units_per_layer], Payload::Scripted(u)))
            .collect::<Result<Vec<_>>>()?;
        tasks.push(ImpreciseTask::new(
            TaskId(i as u32),
            release,
            release + rel_deadline,
            subtasks,
            vec![spec.u_t],
        )?);
        release += spec.period_slots + rng.gen_range(0..=spec.jitter_slots);
    }
    Ok(Workload::new(tasks))
}

fn draw_utilities(spec: &WorkloadSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let l = spec.layers;
    match spec.utility_model {
        UtilityModel::CrossAt { layer } => {
            let m = layer.unwrap_or_else(|| rng.gen_range(1..=l));
            (1..=l).map(|j| spec.u_t * j as f64 / m as f64).collect()
        }
        UtilityModel::Increments { max_gain } => {
            let mut u = 0.0;
            (0..l)
                .map(|_| {
                    u += rng.gen_range(0.0..max_gain);
                    u
                })
                .collect()
        }
        UtilityModel::AllMandatory => (1..=l).map(|j| spec.u_t * j as f64 / (l + 1) as f64).collect(),
    }
}
