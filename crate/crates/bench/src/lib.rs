//! Shared inputs for the benchmarks.

use impsched::energy::EnergyTrace;
use impsched::sim::{gen_trace, gen_workload, CapacitorSpec, TraceModel, UtilityModel, Workload, WorkloadSpec};

/// Bursty harvest: a two-state chain that mostly stays put.
pub fn bursty_trace(slots: usize) -> EnergyTrace {
    gen_trace(TraceModel::Markov { stay_on: 0.95, stay_off: 0.9 }, slots, 1, 2.0, 1.0).unwrap()
}

/// `n` four-layer tasks arriving every five slots or so.
pub fn workload(n: usize) -> Workload {
    let spec = WorkloadSpec {
        n_tasks: n,
        period_slots: 5,
        deadline_factor: 2.0,
        jitter_slots: 2,
        layers: 4,
        units_per_layer: 2,
        unit_cost: 1,
        unit_energy: 0.5,
        u_t: 1.0,
        utility_model: UtilityModel::CrossAt { layer: None },
    };
    gen_workload(&spec, 1).unwrap()
}

pub fn capacitor() -> CapacitorSpec {
    CapacitorSpec {
        capacity: 10.0,
        initial_charge: 2.0,
        e_man: 1.0,
        e_opt: 4.0,
    }
}
