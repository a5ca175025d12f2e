//! Scheduling policies.
//!
//! [`select_next`] is called once per slot. A task stopped in the middle of
//! a subtask cannot be preempted by another task, so while one exists it is
//! the only candidate; power decisions still apply to it.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::{urgency, zeta, zeta_intermittent, ImpreciseTask, PriorityParams, Slot, TaskId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Edf,
    EdfM,
    Zeta,
    ZetaI,
    EnergyEdf,
    EnergyZeta,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::Edf,
        PolicyKind::EdfM,
        PolicyKind::Zeta,
        PolicyKind::ZetaI,
        PolicyKind::EnergyEdf,
        PolicyKind::EnergyZeta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Edf => "edf",
            PolicyKind::EdfM => "edf-m",
            PolicyKind::Zeta => "zeta",
            PolicyKind::ZetaI => "zeta-i",
            PolicyKind::EnergyEdf => "energy-edf",
            PolicyKind::EnergyZeta => "energy-zeta",
        }
    }

    pub fn uses_energy_task(self) -> bool {
        matches!(self, PolicyKind::EnergyEdf | PolicyKind::EnergyZeta)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown policy {s:?}")))
    }
}

/// Known periodic power-off windows, treated as a highest-priority task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyTaskSpec {
    pub period: Slot,
    pub off_length: Slot,
    pub offset: Slot,
}

impl EnergyTaskSpec {
    pub fn new(period: Slot, off_length: Slot, offset: Slot) -> Result<Self> {
        let spec = EnergyTaskSpec {
            period,
            off_length,
            offset,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.off_length == 0 || self.period <= self.off_length {
            return Err(Error::invalid(format!(
                "energy task needs period > off_length >= 1, got period {} off {}",
                self.period, self.off_length
            )));
        }
        Ok(())
    }

    pub fn in_window(&self, t: Slot) -> bool {
        t >= self.offset && (t - self.offset) % self.period < self.off_length
    }

    /// Window slots in `[0, t)`.
    fn off_before(&self, t: Slot) -> Slot {
        if t <= self.offset {
            return 0;
        }
        let d = t - self.offset;
        (d / self.period) * self.off_length + (d % self.period).min(self.off_length)
    }

    /// Window slots in `[from, to)`.
    pub fn off_slots_between(&self, from: Slot, to: Slot) -> Slot {
        if to <= from {
            0
        } else {
            self.off_before(to) - self.off_before(from)
        }
    }

    /// Earliest start `>= t` of `len` consecutive window-free slots, or
    /// `None` if no gap between windows is long enough.
    pub fn earliest_fit(&self, mut t: Slot, len: Slot) -> Option<Slot> {
        if len > self.period - self.off_length {
            return None;
        }
        loop {
            if t < self.offset {
                if t + len <= self.offset {
                    return Some(t);
                }
                t = self.offset + self.off_length;
                continue;
            }
            let start = self.offset + (t - self.offset) / self.period * self.period;
            if t < start + self.off_length {
                t = start + self.off_length;
                continue;
            }
            let next = start + self.period;
            if t + len <= next {
                return Some(t);
            }
            t = next + self.off_length;
        }
    }
}

/// Off-intervals `[offset + n·period, offset + n·period + off_length)`
/// clipped to `[0, horizon)`.
pub fn energy_task_windows(spec: &EnergyTaskSpec, horizon: Slot) -> Result<Vec<Range<Slot>>> {
    spec.validate()?;
    let mut out = Vec::new();
    let mut start = spec.offset;
    while start < horizon {
        out.push(start..(start + spec.off_length).min(horizon));
        start += spec.period;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub kind: PolicyKind,
    pub params: PriorityParams,
    pub energy_task: Option<EnergyTaskSpec>,
}

impl Policy {
    pub fn new(kind: PolicyKind, params: PriorityParams, energy_task: Option<EnergyTaskSpec>) -> Result<Self> {
        let p = Policy {
            kind,
            params,
            energy_task,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        PriorityParams::new(self.params.alpha, self.params.beta, self.params.e_opt, self.params.eta)?;
        match (self.kind.uses_energy_task(), &self.energy_task) {
            (true, None) => Err(Error::invalid(format!(
                "policy {} requires an energy task spec",
                self.kind
            ))),
            (_, Some(spec)) => spec.validate(),
            _ => Ok(()),
        }
    }

    fn windows(&self) -> Option<&EnergyTaskSpec> {
        if self.kind.uses_energy_task() {
            self.energy_task.as_ref()
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecisionReason {
    NoTask,
    NoEnergy,
    ConservativeSkip,
    Chosen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub chosen: Option<TaskId>,
    pub reason: DecisionReason,
}

impl Decision {
    fn idle(reason: DecisionReason) -> Self {
        Decision { chosen: None, reason }
    }

    fn run(id: TaskId) -> Self {
        Decision {
            chosen: Some(id),
            reason: DecisionReason::Chosen,
        }
    }
}

/// Energy state seen by the scheduler in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedContext {
    pub now: Slot,
    /// Stored energy; compared against `e_man`.
    pub charge: f64,
    /// Energy signal for the optional-work gate.
    pub e_curr: f64,
    pub e_man: f64,
}

pub fn edf_key(task: &ImpreciseTask) -> (Slot, Slot, TaskId) {
    (task.deadline(), task.release(), task.id())
}

/// EDF-M only sees tasks still inside their mandatory portion.
pub fn edf_m_filter(task: &ImpreciseTask) -> bool {
    task.gamma() == 1
}

/// Offsets, in slots of uninterrupted execution from the task's first
/// slot, at which another task may take over.
pub fn preemption_points(task: &ImpreciseTask) -> Vec<Slot> {
    let mut out = Vec::with_capacity(task.subtasks().len());
    let mut at = 0;
    for s in task.subtasks() {
        out.push(at);
        at += s.cost_slots();
    }
    out
}

/// Earliest time the task's current subtask can finish when its units only
/// run between windows. `None` if some unit never fits.
pub fn earliest_subtask_finish(task: &ImpreciseTask, now: Slot, spec: &EnergyTaskSpec) -> Option<Slot> {
    let (into, units) = task.remaining_units();
    let mut t = now;
    for (i, u) in units.iter().enumerate() {
        let cost = u.cost_slots() as Slot;
        if i == 0 && into > 0 {
            let rest = cost - into as Slot;
            if spec.earliest_fit(now, rest) == Some(now) {
                t = now + rest;
                continue;
            }
        }
        t = spec.earliest_fit(t, cost)? + cost;
    }
    Some(t)
}

/// The mandatory portion is unmet and not even the current subtask can
/// finish before the deadline.
pub fn provably_infeasible(task: &ImpreciseTask, now: Slot, spec: &EnergyTaskSpec) -> bool {
    !task.mandatory_met()
        && task.has_remaining_work()
        && earliest_subtask_finish(task, now, spec).map_or(true, |t| t > task.deadline())
}

/// Tasks reported unschedulable at release because their first subtask
/// cannot fit between windows before the deadline.
pub fn predict_unschedulable(tasks: &[ImpreciseTask], spec: &EnergyTaskSpec) -> Vec<TaskId> {
    tasks
        .iter()
        .filter(|t| provably_infeasible(t, t.release(), spec))
        .map(|t| t.id())
        .collect()
}

/// The next unit can run to completion before the next window.
fn unit_fits(task: &ImpreciseTask, now: Slot, spec: &EnergyTaskSpec) -> bool {
    let (into, units) = task.remaining_units();
    match units.first() {
        Some(u) => spec.earliest_fit(now, (u.cost_slots() - into) as Slot) == Some(now),
        None => false,
    }
}

fn priority(task: &ImpreciseTask, ctx: &SchedContext, policy: &Policy) -> f64 {
    let p = &policy.params;
    match policy.kind {
        PolicyKind::Zeta => zeta(task, ctx.now, p),
        PolicyKind::ZetaI => zeta_intermittent(task, ctx.now, ctx.e_curr, p),
        PolicyKind::EnergyZeta => {
            let spec = policy.energy_task.as_ref().expect("validated policy");
            let off = spec.off_slots_between(ctx.now, task.deadline()) as f64;
            let slack = task.deadline() as f64 - ctx.now as f64 - off;
            urgency(slack, task.current_utility(), p) + task.gamma() as f64
        }
        _ => unreachable!("deadline-ordered policy"),
    }
}

fn by_deadline(a: &ImpreciseTask, b: &ImpreciseTask) -> Ordering {
    edf_key(a).cmp(&edf_key(b))
}

/// Picks the task to run in slot `ctx.now`, or says why none runs.
pub fn select_next(queue: &[ImpreciseTask], ctx: &SchedContext, policy: &Policy) -> Decision {
    if ctx.charge < ctx.e_man {
        return Decision::idle(DecisionReason::NoEnergy);
    }
    let windows = policy.windows();
    if windows.is_some_and(|w| w.in_window(ctx.now)) {
        return Decision::idle(DecisionReason::NoEnergy);
    }

    if let Some(locked) = queue
        .iter()
        .find(|t| t.has_remaining_work() && !t.at_preemption_point())
    {
        if windows.is_some_and(|w| !unit_fits(locked, ctx.now, w)) {
            return Decision::idle(DecisionReason::NoEnergy);
        }
        return Decision::run(locked.id());
    }

    let mut cands: Vec<&ImpreciseTask> = queue
        .iter()
        .filter(|t| t.has_remaining_work())
        .filter(|t| policy.kind != PolicyKind::EdfM || edf_m_filter(t))
        .collect();
    if cands.is_empty() {
        return Decision::idle(DecisionReason::NoTask);
    }
    if policy.kind == PolicyKind::ZetaI && policy.params.conservative(ctx.e_curr) {
        cands.retain(|t| t.gamma() == 1);
        if cands.is_empty() {
            return Decision::idle(DecisionReason::ConservativeSkip);
        }
    }
    if let Some(w) = windows {
        cands.retain(|t| !provably_infeasible(t, ctx.now, w));
        if cands.is_empty() {
            return Decision::idle(DecisionReason::NoTask);
        }
        cands.retain(|t| unit_fits(t, ctx.now, w));
        if cands.is_empty() {
            return Decision::idle(DecisionReason::NoEnergy);
        }
    }

    let best = match policy.kind {
        PolicyKind::Edf | PolicyKind::EdfM | PolicyKind::EnergyEdf => {
            cands.into_iter().min_by(|a, b| by_deadline(a, b))
        }
        _ => cands.into_iter().min_by(|a, b| {
            priority(b, ctx, policy)
                .total_cmp(&priority(a, ctx, policy))
                .then(a.release().cmp(&b.release()))
                .then(a.id().cmp(&b.id()))
        }),
    };
    Decision::run(best.expect("non-empty candidates").id())
}
