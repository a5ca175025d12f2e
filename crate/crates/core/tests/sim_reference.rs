mod common;

use common::reference::{simulate, RefConfig, RefPolicy, RefTask};
use common::{scripted, trace};
use impsched::sched::PolicyKind;
use impsched::sim::{run_sim, CapacitorSpec, PolicySpec, SimConfig, Workload};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const HORIZON: u64 = 8;

fn variants() -> Vec<(u64, u64, Vec<f64>)> {
    let mut out = Vec::new();
    for release in [0, 2] {
        for deadline in [release + 3, HORIZON] {
            for layers in 1..=3usize {
                // Threshold 1 crossed at layer `c`, or never.
                for c in 1..=layers + 1 {
                    let us = (1..=layers)
                        .map(|j| if c <= layers { j as f64 / c as f64 } else { j as f64 / (layers + 2) as f64 })
                        .collect();
                    out.push((release, deadline, us));
                }
            }
        }
    }
    out
}

fn to_ref(id: u32, v: &(u64, u64, Vec<f64>)) -> RefTask {
    RefTask {
        id,
        release: v.0,
        deadline: v.1,
        utilities: v.2.clone(),
        u_t: 1.0,
        energy: 1.0,
    }
}

fn to_task(id: u32, v: &(u64, u64, Vec<f64>)) -> impsched::task::ImpreciseTask {
    scripted(id, v.0, v.1, &v.2, 1.0, 1, 1.0)
}

const POLICIES: [(PolicyKind, RefPolicy); 4] = [
    (PolicyKind::Edf, RefPolicy::Edf),
    (PolicyKind::EdfM, RefPolicy::EdfM),
    (PolicyKind::Zeta, RefPolicy::Zeta),
    (PolicyKind::ZetaI, RefPolicy::ZetaI),
];

fn configs() -> [(RefConfig, f64); 2] {
    [
        (
            RefConfig {
                capacity: 2.0,
                initial: 0.0,
                e_man: 0.0,
                e_opt: 1.5,
                eta: 1.0,
                idle: 0.0,
            },
            1.0,
        ),
        (
            RefConfig {
                capacity: 3.0,
                initial: 1.0,
                e_man: 0.5,
                e_opt: 2.0,
                eta: 0.9,
                idle: 0.25,
            },
            1.5,
        ),
    ]
}

fn sim_config(cfg: &RefConfig, kind: PolicyKind) -> SimConfig {
    let cap = CapacitorSpec {
        capacity: cfg.capacity,
        initial_charge: cfg.initial,
        e_man: cfg.e_man,
        e_opt: cfg.e_opt,
    };
    let mut c = SimConfig::new(cap, cfg.eta, PolicySpec::new(kind), HORIZON);
    c.idle_power = cfg.idle;
    c
}

fn check(cfg: &RefConfig, on: f64, tasks: &[(u32, &(u64, u64, Vec<f64>))], bits: u32) {
    let harvest: Vec<f64> = (0..HORIZON).map(|s| if bits >> s & 1 == 1 { on } else { 0.0 }).collect();
    let tr = trace(harvest.clone());
    let w = Workload::new(tasks.iter().map(|(id, v)| to_task(*id, v)).collect());
    let refs: Vec<RefTask> = tasks.iter().map(|(id, v)| to_ref(*id, v)).collect();
    for (kind, rp) in POLICIES {
        let got = run_sim(&sim_config(cfg, kind), &tr, &w).unwrap();
        let want = simulate(*cfg, &refs, &harvest, HORIZON, rp);
        let rows: Vec<String> = got.log.to_csv_string().lines().skip(1).map(str::to_owned).collect();
        assert_eq!(rows, want.rows, "{kind} {tasks:?} trace {harvest:?}");
        let r = &got.report;
        assert_eq!(r.tasks_schedulable_success, want.successes);
        assert_eq!(r.tasks_full_complete, want.full);
        assert_eq!(r.deadline_misses, want.misses);
        assert!((r.accumulated_utility - want.utility).abs() < 1e-9);
    }
}

#[test]
fn agrees_with_reference_on_all_small_instances() {
    let vs = variants();
    let mut runs = 0usize;
    for (cfg, on) in configs() {
        for bits in 0u32..(1 << HORIZON) {
            for a in &vs {
                check(&cfg, on, &[(0, a)], bits);
                runs += 1;
                for b in &vs {
                    check(&cfg, on, &[(0, a), (1, b)], bits);
                    runs += 1;
                }
            }
        }
    }
    assert!(runs > 100_000);
}

/// More harvest in any one slot never lowers the number of mandatory
/// portions met under EDF-M.
#[test]
fn extra_harvest_never_hurts_edf_m() {
    let vs = variants();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let (cfg, on) = configs()[0];
    let mut violations = Vec::new();
    for _ in 0..3000 {
        let n = rng.gen_range(1..=2);
        let picks: Vec<(u32, &(u64, u64, Vec<f64>))> =
            (0..n).map(|i| (i as u32, &vs[rng.gen_range(0..vs.len())])).collect();
        let refs: Vec<RefTask> = picks.iter().map(|(id, v)| to_ref(*id, v)).collect();
        let harvest: Vec<f64> = (0..HORIZON).map(|_| if rng.gen_bool(0.5) { on } else { 0.0 }).collect();
        let base = simulate(cfg, &refs, &harvest, HORIZON, RefPolicy::EdfM).successes;
        for s in 0..HORIZON as usize {
            let mut more = harvest.clone();
            more[s] += on;
            let w = Workload::new(picks.iter().map(|(id, v)| to_task(*id, v)).collect());
            let got = run_sim(&sim_config(&cfg, PolicyKind::EdfM), &trace(more.clone()), &w).unwrap();
            assert_eq!(
                got.report.tasks_schedulable_success,
                simulate(cfg, &refs, &more, HORIZON, RefPolicy::EdfM).successes
            );
            if got.report.tasks_schedulable_success < base {
                violations.push((picks.clone(), harvest.clone(), s));
            }
        }
    }
    assert!(violations.is_empty(), "{} violations, first {:?}", violations.len(), violations.first());
}
