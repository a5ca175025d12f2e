//! Slot-based simulation of a workload against an energy trace.
//!
//! Each slot proceeds in a fixed order:
//!
//! 1. harvest is added to the capacitor, overflow is recorded as waste;
//! 2. the idle draw is taken (never below zero);
//! 3. tasks whose release is this slot join the queue;
//! 4. tasks whose deadline has passed leave it;
//! 5. the scheduler picks a task, which runs one slot if the capacitor can
//!    pay for it without dropping below `e_man`; otherwise the device is off
//!    and the in-flight unit loses its progress;
//! 6. a finished subtask is scored and the task advances.

mod gen;
mod log;

use serde::{Deserialize, Serialize};

use crate::cluster::{assign, update_centroid, ClusterModel};
use crate::energy::{Capacitor, EnergyTrace};
use crate::error::{Error, Result};
use crate::sched::{select_next, DecisionReason, EnergyTaskSpec, Policy, PolicyKind, SchedContext};
use crate::task::{ImpreciseTask, Payload, PriorityParams, Slot, TaskId, TaskState, Transition};

pub use gen::{gen_trace, gen_workload, TraceModel, UtilityModel, WorkloadSpec};
pub use log::{replay_check, Action, LogDiff, LogRow, Mismatch, ScheduleLog};

/// Tasks plus, when subtasks carry features, one cluster model per layer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Workload {
    pub tasks: Vec<ImpreciseTask>,
    pub models: Vec<ClusterModel>,
}

impl Workload {
    pub fn new(tasks: Vec<ImpreciseTask>) -> Self {
        Workload {
            tasks,
            models: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids: Vec<TaskId> = self.tasks.iter().map(|t| t.id()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("duplicate task id {}", w[0])));
        }
        for m in &self.models {
            m.validate()?;
        }
        for t in &self.tasks {
            for (j, s) in t.subtasks().iter().enumerate() {
                if let Payload::Features(x) = s.payload() {
                    let m = self.models.get(j).ok_or_else(|| {
                        Error::invalid(format!("task {}: layer {j} has features but no model", t.id()))
                    })?;
                    if x.len() < m.input_dim() {
                        return Err(Error::DimensionMismatch {
                            expected: m.input_dim(),
                            found: x.len(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Longest `deadline - release` in the workload.
    pub fn max_relative_deadline(&self) -> Option<Slot> {
        self.tasks.iter().map(|t| t.deadline() - t.release()).max()
    }

    pub fn max_threshold(&self) -> Option<f64> {
        self.tasks.iter().map(|t| t.max_threshold()).reduce(f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacitorSpec {
    pub capacity: f64,
    pub initial_charge: f64,
    pub e_man: f64,
    pub e_opt: f64,
}

impl CapacitorSpec {
    pub fn build(&self) -> Result<Capacitor> {
        Capacitor::new(self.capacity, self.initial_charge, self.e_man, self.e_opt)
    }
}

/// Quantity compared against `e_opt` by the optional-work gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum EnergySignal {
    /// Capacitor charge after this slot's harvest.
    #[default]
    Charge,
    /// Energy harvested over the last `window` slots, this one included.
    HarvestWindow { window: usize },
}

/// Policy choice; unset `alpha`/`beta` default to 1 / longest relative
/// deadline and 1 / largest threshold of the workload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub energy_task: Option<EnergyTaskSpec>,
}

impl PolicySpec {
    pub fn new(kind: PolicyKind) -> Self {
        PolicySpec {
            kind,
            alpha: None,
            beta: None,
            energy_task: None,
        }
    }

    pub fn resolve(&self, workload: &Workload, e_opt: f64, eta: f64) -> Result<Policy> {
        let alpha = match self.alpha {
            Some(a) => a,
            None => 1.0 / workload.max_relative_deadline().unwrap_or(1) as f64,
        };
        let beta = match self.beta {
            Some(b) => b,
            None => match workload.max_threshold() {
                Some(u) if u > 0.0 => 1.0 / u,
                _ => 1.0,
            },
        };
        Policy::new(self.kind, PriorityParams::new(alpha, beta, e_opt, eta)?, self.energy_task)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub slot_duration: f64,
    pub capacitor: CapacitorSpec,
    /// Joules drawn every slot regardless of activity.
    pub idle_power: f64,
    pub eta: f64,
    pub policy: PolicySpec,
    pub horizon: Slot,
    /// Repeat the trace when it is shorter than the horizon.
    pub cycle_trace: bool,
    pub energy_signal: EnergySignal,
}

impl SimConfig {
    pub fn new(capacitor: CapacitorSpec, eta: f64, policy: PolicySpec, horizon: Slot) -> Self {
        SimConfig {
            slot_duration: 1.0,
            capacitor,
            idle_power: 0.0,
            eta,
            policy,
            horizon,
            cycle_trace: false,
            energy_signal: EnergySignal::Charge,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::invalid("horizon must be at least one slot"));
        }
        if !(self.slot_duration.is_finite() && self.slot_duration > 0.0) {
            return Err(Error::invalid("slot duration must be positive"));
        }
        if !(self.idle_power.is_finite() && self.idle_power >= 0.0) {
            return Err(Error::invalid("idle power must be non-negative"));
        }
        if !self.eta.is_finite() {
            return Err(Error::invalid("eta must be finite"));
        }
        if let EnergySignal::HarvestWindow { window: 0 } = self.energy_signal {
            return Err(Error::invalid("harvest window must be at least one slot"));
        }
        self.capacitor.build().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub id: TaskId,
    pub release: Slot,
    pub deadline: Slot,
    pub state: TaskState,
    pub success: bool,
    pub mandatory_met_at: Option<Slot>,
    pub completed_at: Option<Slot>,
    pub layers_executed: usize,
    pub final_utility: f64,
    pub energy_consumed: f64,
}

impl TaskOutcome {
    fn of(t: &ImpreciseTask) -> Self {
        TaskOutcome {
            id: t.id(),
            release: t.release(),
            deadline: t.deadline(),
            state: t.state(),
            success: t.is_schedulable_success(),
            mandatory_met_at: t.mandatory_met_at(),
            completed_at: t.completed_at(),
            layers_executed: t.layers_executed(),
            final_utility: t.current_utility(),
            energy_consumed: t.energy_consumed(),
        }
    }
}

/// Where the harvested energy went.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub harvested: f64,
    pub initial_charge: f64,
    pub final_charge: f64,
    pub consumed_run: f64,
    pub consumed_idle: f64,
    pub overflow: f64,
}

impl EnergyLedger {
    /// `harvested - (Δcharge + consumed + overflow)`; zero up to rounding.
    pub fn imbalance(&self) -> f64 {
        self.harvested
            - (self.final_charge - self.initial_charge + self.consumed_run + self.consumed_idle + self.overflow)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub policy: PolicyKind,
    pub alpha: f64,
    pub beta: f64,
    pub horizon: Slot,
    pub trace_cycled: bool,
    pub tasks_released: usize,
    pub tasks_schedulable_success: usize,
    pub tasks_full_complete: usize,
    pub deadline_misses: usize,
    /// Released tasks still undecided at the horizon.
    pub tasks_pending: usize,
    pub accumulated_utility: f64,
    pub energy_waste_unnecessary: f64,
    pub energy_waste_overflow: f64,
    pub busy_slots: u64,
    pub off_slots: u64,
    pub energy: EnergyLedger,
    pub tasks: Vec<TaskOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub log: ScheduleLog,
    pub report: SimReport,
    /// Cluster models after the run's online updates.
    pub models: Vec<ClusterModel>,
}

struct Harvest<'a> {
    trace: &'a [f64],
    cycle: bool,
}

impl Harvest<'_> {
    fn at(&self, s: Slot) -> f64 {
        let n = self.trace.len();
        let i = s as usize;
        if self.cycle {
            self.trace[i % n]
        } else {
            self.trace[i]
        }
    }
}

pub fn run_sim(config: &SimConfig, trace: &EnergyTrace, workload: &Workload) -> Result<SimRun> {
    config.validate()?;
    workload.validate()?;
    if trace.is_empty() {
        return Err(Error::invalid("energy trace is empty"));
    }
    let short = (trace.len() as u64) < config.horizon;
    if short && !config.cycle_trace {
        return Err(Error::invalid(format!(
            "trace has {} slots but the horizon is {}; enable cycling to repeat it",
            trace.len(),
            config.horizon
        )));
    }
    if (trace.slot_duration() - config.slot_duration).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "trace slot duration {} differs from configured {}",
            trace.slot_duration(),
            config.slot_duration
        )));
    }
    let harvest = Harvest {
        trace: trace.harvest(),
        cycle: short,
    };
    let mut cap = config.capacitor.build()?;
    let policy = config.policy.resolve(workload, cap.e_opt(), config.eta)?;

    let mut pending: Vec<ImpreciseTask> = workload.tasks.clone();
    pending.sort_by_key(|t| (t.release(), t.id()));
    let mut pending = pending.into_iter().peekable();
    let mut models = workload.models.clone();

    let mut queue: Vec<ImpreciseTask> = Vec::new();
    let mut done: Vec<ImpreciseTask> = Vec::new();
    let mut log = ScheduleLog::default();
    let mut ledger = EnergyLedger {
        initial_charge: cap.charge(),
        ..Default::default()
    };
    let mut waste_unnecessary = 0.0;
    let mut busy_slots = 0;
    let mut off_slots = 0;
    let mut released = 0;
    let mut recent: std::collections::VecDeque<f64> = Default::default();

    for s in 0..config.horizon {
        let h = harvest.at(s);
        let (c, overflow) = cap.step(h, 0.0)?;
        let idle = config.idle_power.min(c.charge());
        let (c, _) = c.step(0.0, idle)?;
        cap = c;
        ledger.harvested += h;
        ledger.overflow += overflow;
        ledger.consumed_idle += idle;

        while let Some(t) = pending.next_if(|t| t.release() <= s) {
            released += 1;
            queue.push(t);
        }

        waste_unnecessary += expire(&mut queue, &mut done, s, &mut log);

        let e_curr = match config.energy_signal {
            EnergySignal::Charge => cap.charge(),
            EnergySignal::HarvestWindow { window } => {
                recent.push_back(h);
                if recent.len() > window {
                    recent.pop_front();
                }
                recent.iter().sum()
            }
        };
        let ctx = SchedContext {
            now: s,
            charge: cap.charge(),
            e_curr,
            e_man: cap.e_man(),
        };
        let decision = select_next(&queue, &ctx, &policy);

        let chosen = match decision.reason {
            DecisionReason::Chosen => {
                let id = decision.chosen.expect("chosen decision names a task");
                let i = queue.iter().position(|t| t.id() == id).expect("chosen from queue");
                let need = queue[i].current_unit().expect("task has work").energy_per_slot();
                if cap.charge() >= cap.e_man() + need {
                    Some((i, need))
                } else {
                    None
                }
            }
            DecisionReason::NoTask => {
                log.push(LogRow::idle(s, Action::IdleNoTask));
                continue;
            }
            DecisionReason::ConservativeSkip => {
                log.push(LogRow::idle(s, Action::ConservativeSkip));
                continue;
            }
            DecisionReason::NoEnergy => None,
        };

        let Some((i, need)) = chosen else {
            log.push(LogRow::idle(s, Action::IdleNoEnergy));
            off_slots += 1;
            for t in queue.iter_mut() {
                t.lose_unit_progress();
            }
            continue;
        };

        cap = cap.step(0.0, need)?.0;
        ledger.consumed_run += need;
        busy_slots += 1;
        let task = &mut queue[i];
        let step = task.run_slot()?;
        log.push(LogRow {
            slot: s,
            task: Some(task.id()),
            subtask: Some(step.subtask),
            unit: Some(step.unit),
            action: if step.restarted {
                Action::RestartAfterFailure
            } else {
                Action::Run
            },
        });
        if !step.subtask_done {
            continue;
        }

        let utility = match task.subtasks()[step.subtask].payload() {
            Payload::Scripted(u) => *u,
            Payload::Features(x) => {
                let m = &mut models[step.subtask];
                let a = assign(m, x)?;
                update_centroid(m, &a, x)?;
                a.utility
            }
        };
        let id = task.id();
        let leave = match task.advance(utility, s + 1)? {
            Transition::Mandatory | Transition::Optional => false,
            Transition::MandatoryMet => {
                log.push(LogRow::event(s, id, Some(step.subtask), Action::CompleteMandatory));
                if policy.kind == PolicyKind::EdfM {
                    log.push(LogRow::event(s, id, None, Action::TerminateEarly));
                    true
                } else {
                    false
                }
            }
            Transition::Full { mandatory_met_now } => {
                if mandatory_met_now {
                    log.push(LogRow::event(s, id, Some(step.subtask), Action::CompleteMandatory));
                }
                log.push(LogRow::event(s, id, Some(step.subtask), Action::CompleteFull));
                true
            }
        };
        if leave {
            done.push(queue.remove(i));
        }
    }

    // Deadlines falling exactly on the horizon are still decided.
    waste_unnecessary += expire(&mut queue, &mut done, config.horizon, &mut log);

    ledger.final_charge = cap.charge();
    let mut outcomes: Vec<TaskOutcome> = done.iter().chain(&queue).map(TaskOutcome::of).collect();
    outcomes.sort_by_key(|o| (o.release, o.id));
    let success: Vec<&TaskOutcome> = outcomes.iter().filter(|o| o.success).collect();
    let report = SimReport {
        policy: policy.kind,
        alpha: policy.params.alpha,
        beta: policy.params.beta,
        horizon: config.horizon,
        trace_cycled: short,
        tasks_released: released,
        tasks_schedulable_success: success.len(),
        tasks_full_complete: outcomes.iter().filter(|o| o.state == TaskState::DoneFull).count(),
        deadline_misses: outcomes.iter().filter(|o| o.state == TaskState::Missed).count(),
        tasks_pending: queue.iter().filter(|t| !t.mandatory_met()).count(),
        accumulated_utility: success.iter().map(|o| o.final_utility).sum(),
        energy_waste_unnecessary: waste_unnecessary,
        energy_waste_overflow: ledger.overflow,
        busy_slots,
        off_slots,
        energy: ledger,
        tasks: outcomes,
    };
    Ok(SimRun { log, report, models })
}

/// Removes tasks whose deadline is at or before `now`; returns the energy
/// they consumed without meeting their mandatory portion.
fn expire(queue: &mut Vec<ImpreciseTask>, done: &mut Vec<ImpreciseTask>, now: Slot, log: &mut ScheduleLog) -> f64 {
    let mut wasted = 0.0;
    let mut i = 0;
    while i < queue.len() {
        if queue[i].deadline() > now {
            i += 1;
            continue;
        }
        let mut t = queue.remove(i);
        if t.mandatory_met() {
            if t.has_remaining_work() {
                log.push(LogRow::event(now, t.id(), None, Action::TerminateEarly));
            }
        } else {
            t.expire();
            wasted += t.energy_consumed();
            log.push(LogRow::event(now, t.id(), None, Action::DeadlineMiss));
        }
        done.push(t);
    }
    wasted
}
