use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::{Slot, TaskId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Run,
    RestartAfterFailure,
    IdleNoTask,
    IdleNoEnergy,
    ConservativeSkip,
    TerminateEarly,
    DeadlineMiss,
    CompleteMandatory,
    CompleteFull,
}

impl Action {
    /// Occupies the processor for the slot.
    pub fn is_execution(self) -> bool {
        matches!(self, Action::Run | Action::RestartAfterFailure)
    }

    /// One of the per-slot outcomes, as opposed to a task event.
    pub fn is_slot_action(self) -> bool {
        matches!(
            self,
            Action::Run
                | Action::RestartAfterFailure
                | Action::IdleNoTask
                | Action::IdleNoEnergy
                | Action::ConservativeSkip
        )
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Action::Run => "run",
            Action::RestartAfterFailure => "restart-after-failure",
            Action::IdleNoTask => "idle-no-task",
            Action::IdleNoEnergy => "idle-no-energy",
            Action::ConservativeSkip => "conservative-skip",
            Action::TerminateEarly => "terminate-early",
            Action::DeadlineMiss => "deadline-miss",
            Action::CompleteMandatory => "complete-mandatory",
            Action::CompleteFull => "complete-full",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRow {
    pub slot: Slot,
    pub task: Option<TaskId>,
    pub subtask: Option<usize>,
    pub unit: Option<usize>,
    pub action: Action,
}

impl LogRow {
    pub fn idle(slot: Slot, action: Action) -> Self {
        LogRow {
            slot,
            task: None,
            subtask: None,
            unit: None,
            action,
        }
    }

    pub fn event(slot: Slot, task: TaskId, subtask: Option<usize>, action: Action) -> Self {
        LogRow {
            slot,
            task: Some(task),
            subtask,
            unit: None,
            action,
        }
    }
}

/// Every slot contributes exactly one slot action, preceded by expiry
/// events and followed by completion events of that slot.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScheduleLog {
    pub rows: Vec<LogRow>,
}

impl ScheduleLog {
    pub fn push(&mut self, row: LogRow) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn count(&self, action: Action) -> usize {
        self.rows.iter().filter(|r| r.action == action).count()
    }

    /// The slot action of `slot`.
    pub fn slot_action(&self, slot: Slot) -> Option<&LogRow> {
        self.rows
            .iter()
            .find(|r| r.slot == slot && r.action.is_slot_action())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        // Header is written explicitly so an empty log still carries one.
        wtr.write_record(["slot", "task", "subtask", "unit", "action"])?;
        for r in &self.rows {
            let opt = |v: Option<String>| v.unwrap_or_default();
            wtr.write_record([
                r.slot.to_string(),
                opt(r.task.map(|t| t.to_string())),
                opt(r.subtask.map(|v| v.to_string())),
                opt(r.unit.map(|v| v.to_string())),
                r.action.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["slot", "task", "subtask", "unit", "action"] {
            return Err(Error::Format {
                what: "log csv",
                detail: format!("unexpected header {:?}", headers),
            });
        }
        let mut rows = Vec::new();
        for rec in rdr.deserialize() {
            rows.push(rec?);
        }
        Ok(ScheduleLog { rows })
    }
}

/// One position where two logs disagree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub index: usize,
    pub expected: Option<LogRow>,
    pub actual: Option<LogRow>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LogDiff {
    pub mismatches: Vec<Mismatch>,
}

impl LogDiff {
    pub fn is_empty(&self) -> bool {
        self.mismatches.is_empty()
    }

    /// Slot of the first disagreeing row.
    pub fn first_divergence(&self) -> Option<Slot> {
        self.mismatches.first().map(|m| {
            match (m.expected, m.actual) {
                (Some(e), Some(a)) => e.slot.min(a.slot),
                (Some(r), None) | (None, Some(r)) => r.slot,
                (None, None) => unreachable!(),
            }
        })
    }
}

impl fmt::Display for LogDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.mismatches {
            writeln!(f, "row {}: expected {:?}, got {:?}", m.index, m.expected, m.actual)?;
        }
        Ok(())
    }
}

/// Row-by-row comparison.
pub fn replay_check(actual: &ScheduleLog, expected: &ScheduleLog) -> LogDiff {
    let n = actual.rows.len().max(expected.rows.len());
    let mismatches = (0..n)
        .filter_map(|i| {
            let a = actual.rows.get(i).copied();
            let e = expected.rows.get(i).copied();
            (a != e).then_some(Mismatch {
                index: i,
                expected: e,
                actual: a,
            })
        })
        .collect();
    LogDiff { mismatches }
}
