//! Imprecise tasks: layered work whose mandatory portion ends, at run time,
//! once the measured utility reaches the task's threshold.
//!
//! A task is a chain of subtasks (one network layer plus its clustering
//! step each). A subtask is a chain of atomic units; a unit cut short by a
//! power failure starts over, completed units survive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discrete time index. A unit run in slot `s` finishes at time `s + 1`.
pub type Slot = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub u32);

impl std::fmt::Display for TaskId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Atomic slice of a subtask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unit {
    cost_slots: u32,
    energy_per_slot: f64,
}

impl Unit {
    pub fn new(cost_slots: u32, energy_per_slot: f64) -> Result<Self> {
        if cost_slots == 0 {
            return Err(Error::invalid("unit cost must be at least one slot"));
        }
        if !(energy_per_slot.is_finite() && energy_per_slot >= 0.0) {
            return Err(Error::invalid(format!(
                "unit energy must be non-negative, got {energy_per_slot}"
            )));
        }
        Ok(Unit {
            cost_slots,
            energy_per_slot,
        })
    }

    pub fn cost_slots(&self) -> u32 {
        self.cost_slots
    }

    pub fn energy_per_slot(&self) -> f64 {
        self.energy_per_slot
    }
}

/// Where a subtask's utility comes from once it completes.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// Fixed utility, for reproducible experiments.
    Scripted(f64),
    /// Layer output, scored against that layer's cluster model.
    Features(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subtask {
    units: Vec<Unit>,
    payload: Payload,
}

impl Subtask {
    pub fn new(units: Vec<Unit>, payload: Payload) -> Result<Self> {
        if units.is_empty() {
            return Err(Error::invalid("subtask has no units"));
        }
        match &payload {
            Payload::Scripted(u) if !(u.is_finite() && *u >= 0.0) => {
                return Err(Error::invalid(format!("scripted utility must be non-negative, got {u}")))
            }
            Payload::Features(x) if x.is_empty() || x.iter().any(|v| !v.is_finite()) => {
                return Err(Error::invalid("feature payload must be non-empty and finite"))
            }
            _ => {}
        }
        Ok(Subtask { units, payload })
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    /// Execution time in slots without interruptions.
    pub fn cost_slots(&self) -> u64 {
        self.units.iter().map(|u| u.cost_slots as u64).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskState {
    Waiting,
    Running,
    DoneMandatory,
    DoneFull,
    Missed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Progress {
    pub subtask: usize,
    pub unit: usize,
    pub slots_into_unit: u32,
}

/// What running one slot did to the task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunStep {
    pub subtask: usize,
    pub unit: usize,
    /// The unit was re-entered after a power failure discarded its progress.
    pub restarted: bool,
    pub unit_done: bool,
    pub subtask_done: bool,
}

/// Effect of [`ImpreciseTask::advance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    /// Still inside the mandatory portion.
    Mandatory,
    /// Utility crossed the threshold with layers left to run.
    MandatoryMet,
    /// An optional layer finished with layers left to run.
    Optional,
    /// Every layer has run.
    Full { mandatory_met_now: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpreciseTask {
    id: TaskId,
    release: Slot,
    deadline: Slot,
    subtasks: Vec<Subtask>,
    u_t: Vec<f64>,
    progress: Progress,
    evaluated: usize,
    current_utility: f64,
    state: TaskState,
    interrupted: bool,
    mandatory_met_at: Option<Slot>,
    completed_at: Option<Slot>,
    energy_consumed: f64,
}

impl ImpreciseTask {
    /// `u_t` holds either one threshold for every layer or one per layer.
    pub fn new(id: TaskId, release: Slot, deadline: Slot, subtasks: Vec<Subtask>, u_t: Vec<f64>) -> Result<Self> {
        if release >= deadline {
            return Err(Error::invalid(format!(
                "task {id}: release {release} must precede deadline {deadline}"
            )));
        }
        if subtasks.is_empty() {
            return Err(Error::invalid(format!("task {id} has no subtasks")));
        }
        if u_t.len() != 1 && u_t.len() != subtasks.len() {
            return Err(Error::invalid(format!(
                "task {id}: {} thresholds for {} subtasks",
                u_t.len(),
                subtasks.len()
            )));
        }
        if u_t.iter().any(|u| !(u.is_finite() && *u >= 0.0)) {
            return Err(Error::invalid(format!("task {id}: thresholds must be non-negative")));
        }
        Ok(ImpreciseTask {
            id,
            release,
            deadline,
            subtasks,
            u_t,
            progress: Progress::default(),
            evaluated: 0,
            current_utility: 0.0,
            state: TaskState::Waiting,
            interrupted: false,
            mandatory_met_at: None,
            completed_at: None,
            energy_consumed: 0.0,
        })
    }

    pub fn id(&self) -> TaskId {
        self.id
    }

    pub fn release(&self) -> Slot {
        self.release
    }

    pub fn deadline(&self) -> Slot {
        self.deadline
    }

    pub fn subtasks(&self) -> &[Subtask] {
        &self.subtasks
    }

    pub fn progress(&self) -> Progress {
        self.progress
    }

    pub fn current_utility(&self) -> f64 {
        self.current_utility
    }

    pub fn state(&self) -> TaskState {
        self.state
    }

    pub fn energy_consumed(&self) -> f64 {
        self.energy_consumed
    }

    pub fn mandatory_met_at(&self) -> Option<Slot> {
        self.mandatory_met_at
    }

    pub fn completed_at(&self) -> Option<Slot> {
        self.completed_at
    }

    /// Utility threshold that ends the mandatory portion at `layer`.
    pub fn threshold(&self, layer: usize) -> f64 {
        if self.u_t.len() == 1 {
            self.u_t[0]
        } else {
            self.u_t[layer.min(self.u_t.len() - 1)]
        }
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.u_t
    }

    /// Largest threshold of the task.
    pub fn max_threshold(&self) -> f64 {
        self.u_t.iter().copied().fold(0.0, f64::max)
    }

    pub fn mandatory_met(&self) -> bool {
        self.mandatory_met_at.is_some()
    }

    /// 1 while the task is in its mandatory portion, 0 afterwards.
    pub fn gamma(&self) -> u8 {
        if self.mandatory_met() {
            0
        } else {
            1
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self.state, TaskState::DoneFull | TaskState::Missed)
    }

    pub fn has_remaining_work(&self) -> bool {
        !self.is_terminal() && self.progress.subtask < self.subtasks.len()
    }

    /// Between subtasks, where the scheduler may switch away.
    pub fn at_preemption_point(&self) -> bool {
        self.progress.unit == 0 && self.progress.slots_into_unit == 0
    }

    pub fn current_unit(&self) -> Option<&Unit> {
        self.subtasks
            .get(self.progress.subtask)
            .and_then(|s| s.units.get(self.progress.unit))
    }

    /// Units of the current subtask not yet completed, with the slots still
    /// owed on the first of them.
    pub fn remaining_units(&self) -> (u32, &[Unit]) {
        match self.subtasks.get(self.progress.subtask) {
            Some(s) => (self.progress.slots_into_unit, &s.units[self.progress.unit..]),
            None => (0, &[]),
        }
    }

    /// Completed subtasks.
    pub fn layers_executed(&self) -> usize {
        self.progress.subtask
    }

    /// Executes one slot of the current unit.
    pub fn run_slot(&mut self) -> Result<RunStep> {
        if !self.has_remaining_work() {
            return Err(Error::invalid(format!("task {} has no work left", self.id)));
        }
        if self.evaluated < self.progress.subtask {
            return Err(Error::invalid(format!(
                "task {}: previous subtask awaits its utility",
                self.id
            )));
        }
        let unit = *self.current_unit().expect("remaining work implies a unit");
        let Progress { subtask, unit: unit_idx, .. } = self.progress;
        let restarted = self.interrupted && self.progress.slots_into_unit == 0;
        self.interrupted = false;
        if self.state == TaskState::Waiting {
            self.state = TaskState::Running;
        }
        self.energy_consumed += unit.energy_per_slot;
        self.progress.slots_into_unit += 1;

        let mut step = RunStep {
            subtask,
            unit: unit_idx,
            restarted,
            unit_done: false,
            subtask_done: false,
        };
        if self.progress.slots_into_unit == unit.cost_slots {
            step.unit_done = true;
            self.progress.slots_into_unit = 0;
            self.progress.unit += 1;
            if self.progress.unit == self.subtasks[subtask].units.len() {
                step.subtask_done = true;
                self.progress.unit = 0;
                self.progress.subtask += 1;
            }
        }
        Ok(step)
    }

    /// Power failure: the in-flight unit starts over. Returns whether any
    /// progress was discarded.
    pub fn lose_unit_progress(&mut self) -> bool {
        if self.progress.slots_into_unit > 0 {
            self.progress.slots_into_unit = 0;
            self.interrupted = true;
            true
        } else {
            false
        }
    }

    /// Records the utility measured after the subtask that just completed;
    /// `finished_at` is the time the subtask ended.
    pub fn advance(&mut self, utility: f64, finished_at: Slot) -> Result<Transition> {
        if self.is_terminal() {
            return Err(Error::invalid(format!("task {} already finished", self.id)));
        }
        if self.evaluated >= self.progress.subtask {
            return Err(Error::invalid(format!("task {}: no completed subtask to evaluate", self.id)));
        }
        if !(utility.is_finite() && utility >= 0.0) {
            return Err(Error::invalid(format!("utility must be non-negative, got {utility}")));
        }
        let layer = self.evaluated;
        self.evaluated += 1;
        self.current_utility = self.current_utility.max(utility);

        let mut crossed = false;
        if !self.mandatory_met() && self.current_utility >= self.threshold(layer) {
            self.mandatory_met_at = Some(finished_at);
            crossed = true;
        }
        if self.evaluated == self.subtasks.len() {
            // Running every layer satisfies the mandatory portion too.
            let mandatory_met_now = crossed || !self.mandatory_met();
            if self.mandatory_met_at.is_none() {
                self.mandatory_met_at = Some(finished_at);
            }
            self.completed_at = Some(finished_at);
            self.state = TaskState::DoneFull;
            return Ok(Transition::Full { mandatory_met_now });
        }
        if crossed {
            self.state = TaskState::DoneMandatory;
            Ok(Transition::MandatoryMet)
        } else if self.mandatory_met() {
            Ok(Transition::Optional)
        } else {
            Ok(Transition::Mandatory)
        }
    }

    /// Removes the task from contention at its deadline. Tasks that already
    /// met their mandatory portion keep their state; others are missed.
    pub fn expire(&mut self) {
        if !self.mandatory_met() && !self.is_terminal() {
            self.state = TaskState::Missed;
        }
    }

    /// Mandatory portion completed no later than the deadline.
    pub fn is_schedulable_success(&self) -> bool {
        self.mandatory_met_at.is_some_and(|t| t <= self.deadline)
    }
}

/// 1 inside the mandatory portion (`u < u_t`), 0 from the threshold on.
pub fn gamma(u: f64, u_t: f64) -> u8 {
    if u < u_t {
        1
    } else {
        0
    }
}

/// Scaling factors and energy inputs of the priority functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorityParams {
    pub alpha: f64,
    pub beta: f64,
    pub e_opt: f64,
    pub eta: f64,
}

impl PriorityParams {
    pub fn new(alpha: f64, beta: f64, e_opt: f64, eta: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) || !(beta.is_finite() && beta > 0.0) {
            return Err(Error::invalid(format!(
                "alpha and beta must be positive, got {alpha} and {beta}"
            )));
        }
        if !(e_opt.is_finite() && eta.is_finite()) {
            return Err(Error::invalid("e_opt and eta must be finite"));
        }
        Ok(PriorityParams { alpha, beta, e_opt, eta })
    }

    /// `η·E_curr < E_opt`: optional work is withheld.
    pub fn conservative(&self, e_curr: f64) -> bool {
        self.eta * e_curr < self.e_opt
    }
}

/// Slack and utility terms shared by both priority functions.
pub(crate) fn urgency(slack: f64, utility: f64, params: &PriorityParams) -> f64 {
    (1.0 - params.alpha * slack) + (1.0 - params.beta * utility)
}

/// `(1 − α(D − t)) + (1 − βU) + γ`; larger runs first.
pub fn zeta(task: &ImpreciseTask, now: Slot, params: &PriorityParams) -> f64 {
    let slack = task.deadline as f64 - now as f64;
    urgency(slack, task.current_utility, params) + task.gamma() as f64
}

/// [`zeta`] while `η·E_curr ≥ E_opt`; otherwise `γ·((1 − α(D − t)) + (1 − βU))`.
pub fn zeta_intermittent(task: &ImpreciseTask, now: Slot, e_curr: f64, params: &PriorityParams) -> f64 {
    if params.conservative(e_curr) {
        let slack = task.deadline as f64 - now as f64;
        task.gamma() as f64 * urgency(slack, task.current_utility, params)
    } else {
        zeta(task, now, params)
    }
}
