#![allow(dead_code)]

pub mod oracle;
pub mod reference;

use impsched::energy::EnergyTrace;
use impsched::sched::{EnergyTaskSpec, PolicyKind};
use impsched::sim::{run_sim, CapacitorSpec, PolicySpec, ScheduleLog, SimConfig, SimRun, Workload};
use impsched::task::{ImpreciseTask, Payload, Slot, Subtask, TaskId, Unit};

/// Task whose subtasks are single units of `cost` slots drawing `energy`
/// per slot, with the given scripted utilities.
pub fn scripted(id: u32, release: Slot, deadline: Slot, utilities: &[f64], u_t: f64, cost: u32, energy: f64) -> ImpreciseTask {
    let subs = utilities
        .iter()
        .map(|&u| Subtask::new(vec![Unit::new(cost, energy).unwrap()], Payload::Scripted(u)).unwrap())
        .collect();
    ImpreciseTask::new(TaskId(id), release, deadline, subs, vec![u_t]).unwrap()
}

/// Task of `layers` subtasks, each `units` one-slot units.
pub fn layered(id: u32, release: Slot, deadline: Slot, utilities: &[f64], u_t: f64, units: usize) -> ImpreciseTask {
    let subs = utilities
        .iter()
        .map(|&u| Subtask::new(vec![Unit::new(1, 1.0).unwrap(); units], Payload::Scripted(u)).unwrap())
        .collect();
    ImpreciseTask::new(TaskId(id), release, deadline, subs, vec![u_t]).unwrap()
}

pub fn trace(harvest: Vec<f64>) -> EnergyTrace {
    EnergyTrace::new(1.0, harvest).unwrap()
}

pub fn golden(text: &str) -> ScheduleLog {
    ScheduleLog::read_csv(text.as_bytes()).unwrap()
}

pub struct Fixture {
    pub config: SimConfig,
    pub trace: EnergyTrace,
    pub workload: Workload,
}

impl Fixture {
    pub fn run(&self) -> SimRun {
        run_sim(&self.config, &self.trace, &self.workload).unwrap()
    }

    pub fn with_policy(&self, kind: PolicyKind) -> Fixture {
        let mut config = self.config;
        config.policy.kind = kind;
        Fixture {
            config,
            trace: self.trace.clone(),
            workload: self.workload.clone(),
        }
    }
}

/// Two four-layer tasks; the first is confident after one layer, the
/// second after two.
pub fn walkthrough() -> Fixture {
    let workload = Workload::new(vec![
        scripted(1, 1, 7, &[1.2, 1.5, 1.8, 2.0], 1.0, 1, 1.0),
        scripted(2, 3, 9, &[0.5, 1.1, 1.6, 2.0], 1.0, 1, 1.0),
    ]);
    let cap = CapacitorSpec {
        capacity: 10.0,
        initial_charge: 0.0,
        e_man: 1.0,
        e_opt: 3.0,
    };
    let mut config = SimConfig::new(cap, 0.8, PolicySpec::new(PolicyKind::ZetaI), 9);
    config.idle_power = 0.5;
    Fixture {
        config,
        trace: trace(vec![3.0, 0.0, 1.0, 1.0, 0.0, 2.0, 4.0, 1.0, 1.5]),
        workload,
    }
}

pub const WALKTHROUGH_LOG: &str = include_str!("../golden/walkthrough.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoTasks {
    ConstantPower,
    Outage,
    Imprecise,
}

/// Two 28-slot tasks (two layers of 14 one-slot units). The outage
/// harvests nothing during slots 30..=40.
pub fn two_tasks(scenario: TwoTasks) -> Fixture {
    let (us, kind) = match scenario {
        TwoTasks::Imprecise => ([1.0, 2.0], PolicyKind::EdfM),
        _ => ([0.2, 0.4], PolicyKind::Edf),
    };
    let workload = Workload::new(vec![layered(1, 0, 45, &us, 1.0, 14), layered(2, 25, 56, &us, 1.0, 14)]);
    let harvest = (0..60)
        .map(|s| if scenario != TwoTasks::ConstantPower && (30..=40).contains(&s) { 0.0 } else { 1.0 })
        .collect();
    let cap = CapacitorSpec {
        capacity: 2.0,
        initial_charge: 1.0,
        e_man: 1.0,
        e_opt: 1.0,
    };
    Fixture {
        config: SimConfig::new(cap, 1.0, PolicySpec::new(kind), 60),
        trace: trace(harvest),
        workload,
    }
}

pub const TWO_TASKS_A_LOG: &str = include_str!("../golden/two_tasks_a.csv");
pub const TWO_TASKS_B_LOG: &str = include_str!("../golden/two_tasks_b.csv");
pub const TWO_TASKS_C_LOG: &str = include_str!("../golden/two_tasks_c.csv");

fn persistent(workload: Workload, kind: PolicyKind, horizon: Slot) -> Fixture {
    let cap = CapacitorSpec {
        capacity: 1.0,
        initial_charge: 0.0,
        e_man: 0.0,
        e_opt: 0.0,
    };
    Fixture {
        config: SimConfig::new(cap, 1.0, PolicySpec::new(kind), horizon),
        trace: trace(vec![1.0; horizon as usize]),
        workload,
    }
}

/// EDF spends the first task's slack on optional layers and the second
/// task misses; ζ switches once the first task is confident.
pub fn separation_count(kind: PolicyKind) -> Fixture {
    let w = Workload::new(vec![
        scripted(1, 0, 6, &[1.5, 1.6, 1.7, 1.8, 1.9], 1.0, 1, 1.0),
        scripted(2, 1, 7, &[0.1, 0.2, 0.3, 0.4], 1.0, 1, 1.0),
    ]);
    persistent(w, kind, 12)
}

/// Both policies meet both deadlines; ζ spends the optional time on the
/// task whose later layers gain more.
pub fn separation_utility(kind: PolicyKind) -> Fixture {
    let w = Workload::new(vec![
        scripted(0, 0, 4, &[0.5, 2.25, 2.75, 3.25], 1.0, 1, 1.0),
        scripted(1, 1, 6, &[1.25, 1.5, 3.0], 1.0, 1, 1.0),
    ]);
    persistent(w, kind, 12)
}

/// Off-windows of 2 slots every 8, starting at slot 6.
pub fn energy_windows() -> EnergyTaskSpec {
    EnergyTaskSpec::new(8, 2, 6).unwrap()
}

/// A three-slot unit released just before a window, and a one-slot task
/// with the same deadline.
pub fn windowed(kind: PolicyKind) -> Fixture {
    let spec = energy_windows();
    let horizon = 24;
    let w = Workload::new(vec![
        scripted(0, 4, 11, &[1.0], 1.0, 3, 1.0),
        scripted(1, 5, 11, &[1.0], 1.0, 1, 1.0),
    ]);
    let harvest = (0..horizon).map(|s| if spec.in_window(s) { 0.0 } else { 1.0 }).collect();
    let cap = CapacitorSpec {
        capacity: 1.0,
        initial_charge: 0.0,
        e_man: 0.0,
        e_opt: 0.0,
    };
    let mut policy = PolicySpec::new(kind);
    policy.energy_task = Some(spec);
    Fixture {
        config: SimConfig::new(cap, 1.0, policy, horizon),
        trace: trace(harvest),
        workload: w,
    }
}
