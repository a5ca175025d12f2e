use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use impsched::check::{cluster_oracle_check, loss_gradient_check};
use impsched::energy::{analyze_trace, AnalysisOptions, EnergyTrace, EventParams};
use impsched::io::{parse_models, parse_workload, profile_to_json, read_trace_csv, workload_to_json, write_trace_csv};
use impsched::sched::{EnergyTaskSpec, PolicyKind};
use impsched::sim::{
    gen_trace, gen_workload, run_sim, CapacitorSpec, EnergySignal, PolicySpec, SimConfig, SimReport, TraceModel,
    UtilityModel, Workload, WorkloadSpec,
};
use serde_json::{json, Value};

use crate::*;

/// Input that does not satisfy a documented precondition.
#[derive(Debug)]
struct Invalid(String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

/// 2 for bad input (including unreadable files), 1 otherwise.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<impsched::Error>() {
            return if err.is_validation() || matches!(err, impsched::Error::Io(_)) { 2 } else { 1 };
        }
        if cause.is::<Invalid>() || cause.is::<io::Error>() || cause.is::<serde_json::Error>() {
            return 2;
        }
    }
    1
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Analyze(a) => analyze(a),
        Command::GenTrace(a) => generate_trace(a),
        Command::GenWorkload(a) => generate_workload(a),
        Command::Simulate(a) => simulate(a),
        Command::Compare(a) => compare(a),
        Command::LossCheck(a) => loss_check(a),
        Command::ClusterCheck(a) => cluster_check(a),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_trace(path: &Path, slot_duration: f64) -> Result<EnergyTrace> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_trace_csv(f, slot_duration).with_context(|| format!("reading {}", path.display()))
}

fn write_out(path: Option<&Path>, body: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, body).with_context(|| format!("writing {}", p.display())),
        None => {
            io::stdout().write_all(body.as_bytes())?;
            Ok(())
        }
    }
}

fn pretty(v: &impl serde::Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn options(e: &EventArgs) -> Result<(EventParams, AnalysisOptions)> {
    let params = EventParams::new(e.k, e.t)?;
    let opts = AnalysisOptions {
        n_max: e.nmax,
        min_support: e.min_support,
    };
    Ok((params, opts))
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let trace = read_trace(&a.trace, a.slot_duration)?;
    let (params, opts) = options(&a.event)?;
    let p = analyze_trace(&trace, &params, opts)?;
    let body = pretty(&profile_to_json(&p))?;
    if let Some(out) = &a.out {
        write_out(Some(out), &body)?;
    }
    if a.json {
        write_out(None, &body)?;
    } else {
        println!("slots          {}", trace.len());
        println!("event rate     {:.4}", p.event_rate);
        println!("KW(h, p)       {:.4}", p.kw_to_persistent);
        println!("KW(r, p)       {:.4}", p.kw_random_to_persistent);
        let note = if p.eta_degenerate { "  (degenerate series)" } else { "" };
        println!("eta            {:.4}{note}", p.eta);
    }
    Ok(())
}

fn generate_trace(a: GenTraceArgs) -> Result<()> {
    let model = match a.model {
        TraceKind::Bernoulli => TraceModel::Bernoulli { p: a.p },
        TraceKind::Markov => TraceModel::Markov {
            stay_on: a.stay_on,
            stay_off: a.stay_off,
        },
        TraceKind::Periodic => TraceModel::Periodic {
            period: a.period,
            on_len: a.on_len,
        },
        TraceKind::Constant => TraceModel::Constant { joules: a.joules },
    };
    let trace = gen_trace(model, a.slots, a.seed, a.joules, a.slot_duration)?;
    match &a.out {
        Some(p) => {
            let f = File::create(p).with_context(|| format!("writing {}", p.display()))?;
            write_trace_csv(&trace, BufWriter::new(f))?;
        }
        None => write_trace_csv(&trace, io::stdout().lock())?,
    }
    Ok(())
}

fn generate_workload(a: GenWorkloadArgs) -> Result<()> {
    let utility_model = match a.utility {
        UtilityKind::CrossAt => UtilityModel::CrossAt { layer: a.cross_layer },
        UtilityKind::Increments => UtilityModel::Increments { max_gain: a.max_gain },
        UtilityKind::AllMandatory => UtilityModel::AllMandatory,
    };
    let spec = WorkloadSpec {
        n_tasks: a.tasks,
        period_slots: a.period,
        deadline_factor: a.deadline_factor,
        jitter_slots: a.jitter,
        layers: a.layers,
        units_per_layer: a.units,
        unit_cost: a.unit_cost,
        unit_energy: a.unit_energy,
        u_t: a.ut,
        utility_model,
    };
    let w = gen_workload(&spec, a.seed)?;
    write_out(a.out.as_deref(), &(workload_to_json(&w)? + "\n"))
}

/// Everything a simulation needs, loaded once and shared across policies.
struct Inputs {
    trace: EnergyTrace,
    workload: Workload,
    base: SimConfig,
}

fn load_inputs(s: &SimArgs) -> Result<Inputs> {
    let trace = read_trace(&s.trace, s.slot_duration)?;
    let mut text = read_text(&s.workload)?;
    if let Some(ut) = s.ut {
        let mut v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", s.workload.display()))?;
        let Some(tasks) = v.get_mut("tasks").and_then(Value::as_array_mut) else {
            bail!(invalid("workload has no `tasks` array"));
        };
        for t in tasks {
            t["u_t"] = json!(ut);
        }
        text = v.to_string();
    }
    let mut workload = parse_workload(&text, s.run_power * s.slot_duration).with_context(|| format!("reading {}", s.workload.display()))?;
    if let Some(m) = &s.models {
        workload.models = parse_models(&read_text(m)?).with_context(|| format!("reading {}", m.display()))?;
    }
    workload.validate()?;

    let eta = match s.eta {
        Some(e) => e,
        None => {
            let (params, opts) = options(&s.event)?;
            analyze_trace(&trace, &params, opts)?.eta
        }
    };
    let cap = CapacitorSpec {
        capacity: s.capacity,
        initial_charge: s.initial_charge,
        e_man: s.eman,
        e_opt: s.eopt,
    };
    let energy_task = match (s.energy_period, s.energy_off) {
        (Some(p), Some(off)) => Some(EnergyTaskSpec::new(p, off, s.energy_offset)?),
        (None, None) => None,
        _ => bail!(invalid("--energy-period and --energy-off go together")),
    };
    let policy = PolicySpec {
        kind: PolicyKind::Edf,
        alpha: s.alpha,
        beta: s.beta,
        energy_task,
    };
    let horizon = s.horizon.unwrap_or(trace.len() as u64);
    let mut base = SimConfig::new(cap, eta, policy, horizon);
    base.slot_duration = s.slot_duration;
    base.idle_power = s.idle_power * s.slot_duration;
    base.cycle_trace = s.cycle;
    if let Some(window) = s.harvest_window {
        base.energy_signal = EnergySignal::HarvestWindow { window };
    }
    base.validate()?;
    Ok(Inputs { trace, workload, base })
}

fn config_for(inputs: &Inputs, kind: PolicyKind) -> Result<SimConfig> {
    if kind.uses_energy_task() && inputs.base.policy.energy_task.is_none() {
        bail!(invalid(format!("{kind} needs --energy-period and --energy-off")));
    }
    let mut cfg = inputs.base;
    cfg.policy.kind = kind;
    Ok(cfg)
}

fn summary(r: &SimReport, eta: f64) {
    println!("policy               {}", r.policy);
    println!("alpha / beta / eta   {:.4} / {:.4} / {:.4}", r.alpha, r.beta, eta);
    println!("horizon              {}{}", r.horizon, if r.trace_cycled { " (trace cycled)" } else { "" });
    println!("tasks released       {}", r.tasks_released);
    println!("schedulable success  {}", r.tasks_schedulable_success);
    println!("full completions     {}", r.tasks_full_complete);
    println!("deadline misses      {}", r.deadline_misses);
    println!("pending at horizon   {}", r.tasks_pending);
    println!("accumulated utility  {:.4}", r.accumulated_utility);
    println!("wasted on misses (J) {:.4}", r.energy_waste_unnecessary);
    println!("overflow (J)         {:.4}", r.energy_waste_overflow);
    println!("busy / off slots     {} / {}", r.busy_slots, r.off_slots);
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let inputs = load_inputs(&a.sim)?;
    let cfg = config_for(&inputs, a.policy)?;
    let run = run_sim(&cfg, &inputs.trace, &inputs.workload)?;
    if let Some(p) = &a.log {
        let f = File::create(p).with_context(|| format!("writing {}", p.display()))?;
        run.log.write_csv(BufWriter::new(f))?;
    }
    let body = pretty(&run.report)?;
    if let Some(p) = &a.out {
        write_out(Some(p), &body)?;
    }
    if a.json {
        write_out(None, &body)?;
    } else {
        summary(&run.report, cfg.eta);
    }
    Ok(())
}

fn row(r: &SimReport) -> Value {
    json!({
        "policy": r.policy,
        "schedulable_success": r.tasks_schedulable_success,
        "full_complete": r.tasks_full_complete,
        "deadline_misses": r.deadline_misses,
        "accumulated_utility": r.accumulated_utility,
        "energy_waste_unnecessary": r.energy_waste_unnecessary,
        "energy_waste_overflow": r.energy_waste_overflow,
        "busy_slots": r.busy_slots,
        "off_slots": r.off_slots,
    })
}

fn compare(a: CompareArgs) -> Result<()> {
    if a.policies.is_empty() {
        bail!(invalid("no policies given"));
    }
    let inputs = load_inputs(&a.sim)?;
    let configs = a.policies.iter().map(|&k| config_for(&inputs, k)).collect::<Result<Vec<_>>>()?;
    let threads = a.threads.unwrap_or(configs.len()).clamp(1, configs.len());

    let mut reports: Vec<Option<impsched::Result<SimReport>>> = (0..configs.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let (configs, inputs) = (&configs, &inputs);
                scope.spawn(move || {
                    (t..configs.len())
                        .step_by(threads)
                        .map(|i| (i, run_sim(&configs[i], &inputs.trace, &inputs.workload).map(|r| r.report)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("simulation thread panicked") {
                reports[i] = Some(r);
            }
        }
    });
    let reports = reports.into_iter().map(|r| r.expect("every policy ran")).collect::<impsched::Result<Vec<_>>>()?;

    let rows: Vec<Value> = reports.iter().map(row).collect();
    let body = pretty(&rows)?;
    if let Some(p) = &a.out {
        write_out(Some(p), &body)?;
    }
    if a.json {
        return write_out(None, &body);
    }
    println!(
        "{:<12} {:>8} {:>6} {:>7} {:>10} {:>10} {:>10} {:>6} {:>6}",
        "policy", "success", "full", "misses", "utility", "waste", "overflow", "busy", "off"
    );
    for r in &reports {
        println!(
            "{:<12} {:>8} {:>6} {:>7} {:>10.3} {:>10.3} {:>10.3} {:>6} {:>6}",
            r.policy.to_string(),
            r.tasks_schedulable_success,
            r.tasks_full_complete,
            r.deadline_misses,
            r.accumulated_utility,
            r.energy_waste_unnecessary,
            r.energy_waste_overflow,
            r.busy_slots,
            r.off_slots
        );
    }
    Ok(())
}

fn loss_check(a: LossCheckArgs) -> Result<()> {
    let c = loss_gradient_check(a.batches, a.seed, a.delta)?;
    if a.json {
        write_out(None, &pretty(&c)?)?;
    } else {
        println!("batches {}, coordinates {}, max relative error {:.3e}", c.batches, c.coordinates, c.max_rel_error);
    }
    if c.max_rel_error > a.tolerance {
        bail!("gradient error {:.3e} exceeds {:.1e}", c.max_rel_error, a.tolerance);
    }
    Ok(())
}

fn cluster_check(a: ClusterCheckArgs) -> Result<()> {
    let c = cluster_oracle_check(a.instances, a.seed)?;
    if a.json {
        write_out(None, &pretty(&c)?)?;
    } else {
        println!(
            "instances {}, assignment mismatches {}, chi2 max error {:.3e}",
            c.instances, c.mismatches, c.chi2_max_abs_error
        );
    }
    if c.mismatches > 0 || c.chi2_max_abs_error > a.tolerance {
        bail!("cluster oracle disagrees");
    }
    Ok(())
}
