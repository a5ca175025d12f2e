//! File formats.
//!
//! * trace CSV: header `slot,joules`, slots consecutive from 0;
//! * workload JSON: `{"tasks": [{"id", "release", "deadline", "u_t",
//!   "subtasks": [{"units": [{"cost", "energy"}], "utility" | "features"}]}]}`
//!   where `u_t` is a number or one number per subtask and a unit without
//!   `energy` uses the caller's default;
//! * model JSON: one cluster model object, or an array with one per layer;
//! * analysis JSON: see [`profile_to_json`].

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::cluster::ClusterModel;
use crate::energy::{EnergyTrace, HarvesterProfile};
use crate::error::{Error, Result};
use crate::sim::Workload;
use crate::task::{ImpreciseTask, Payload, Slot, Subtask, TaskId, Unit};

#[derive(Debug, Deserialize, Serialize)]
struct TraceRow {
    slot: u64,
    joules: f64,
}

pub fn read_trace_csv<R: Read>(r: R, slot_duration: f64) -> Result<EnergyTrace> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut harvest = Vec::new();
    for (i, row) in rdr.deserialize::<TraceRow>().enumerate() {
        let row = row?;
        if row.slot != i as u64 {
            return Err(Error::Format {
                what: "trace csv",
                detail: format!("expected slot {i}, found {}", row.slot),
            });
        }
        harvest.push(row.joules);
    }
    EnergyTrace::new(slot_duration, harvest)
}

pub fn write_trace_csv<W: Write>(trace: &EnergyTrace, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for (slot, &joules) in trace.harvest().iter().enumerate() {
        wtr.serialize(TraceRow {
            slot: slot as u64,
            joules,
        })?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(untagged)]
enum Thresholds {
    One(f64),
    PerLayer(Vec<f64>),
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct UnitFile {
    cost: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    energy: Option<f64>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct SubtaskFile {
    units: Vec<UnitFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    utility: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct TaskFile {
    id: u32,
    release: Slot,
    deadline: Slot,
    u_t: Thresholds,
    subtasks: Vec<SubtaskFile>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct WorkloadFile {
    tasks: Vec<TaskFile>,
}

/// Parses a workload; units without an `energy` field draw
/// `default_energy` joules per slot. Feature payloads are checked against
/// their models by [`Workload::validate`] once models are attached.
pub fn parse_workload(text: &str, default_energy: f64) -> Result<Workload> {
    let file: WorkloadFile = serde_json::from_str(text)?;
    let mut tasks = Vec::with_capacity(file.tasks.len());
    for t in file.tasks {
        let mut subtasks = Vec::with_capacity(t.subtasks.len());
        for (j, s) in t.subtasks.into_iter().enumerate() {
            let units = s
                .units
                .iter()
                .map(|u| Unit::new(u.cost, u.energy.unwrap_or(default_energy)))
                .collect::<Result<Vec<_>>>()?;
            let payload = match (s.utility, s.features) {
                (Some(u), None) => Payload::Scripted(u),
                (None, Some(x)) => Payload::Features(x),
                _ => {
                    return Err(Error::invalid(format!(
                        "task {} subtask {j}: exactly one of utility and features is required",
                        t.id
                    )))
                }
            };
            subtasks.push(Subtask::new(units, payload)?);
        }
        let u_t = match t.u_t {
            Thresholds::One(u) => vec![u],
            Thresholds::PerLayer(v) => v,
        };
        tasks.push(ImpreciseTask::new(TaskId(t.id), t.release, t.deadline, subtasks, u_t)?);
    }
    let mut ids: Vec<u32> = tasks.iter().map(|t| t.id().0).collect();
    ids.sort_unstable();
    if let Some(d) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::invalid(format!("duplicate task id {}", d[0])));
    }
    Ok(Workload::new(tasks))
}

pub fn workload_to_json(w: &Workload) -> Result<String> {
    let tasks = w
        .tasks
        .iter()
        .map(|t| TaskFile {
            id: t.id().0,
            release: t.release(),
            deadline: t.deadline(),
            u_t: match t.thresholds() {
                [u] => Thresholds::One(*u),
                v => Thresholds::PerLayer(v.to_vec()),
            },
            subtasks: t
                .subtasks()
                .iter()
                .map(|s| {
                    let (utility, features) = match s.payload() {
                        Payload::Scripted(u) => (Some(*u), None),
                        Payload::Features(x) => (None, Some(x.clone())),
                    };
                    SubtaskFile {
                        units: s
                            .units()
                            .iter()
                            .map(|u| UnitFile {
                                cost: u.cost_slots(),
                                energy: Some(u.energy_per_slot()),
                            })
                            .collect(),
                        utility,
                        features,
                    }
                })
                .collect(),
        })
        .collect();
    Ok(serde_json::to_string_pretty(&WorkloadFile { tasks })?)
}

/// Accepts a single model or an array of per-layer models.
pub fn parse_models(text: &str) -> Result<Vec<ClusterModel>> {
    let v: Value = serde_json::from_str(text)?;
    let models: Vec<ClusterModel> = if v.is_array() {
        serde_json::from_value(v)?
    } else {
        vec![serde_json::from_value(v)?]
    };
    for m in &models {
        m.validate()?;
    }
    Ok(models)
}

/// `{event_rate, kw_h, kw_r, eta, eta_degenerate, cee: {"-n_max": .., "n_max": ..}}`
/// with CEE keys in increasing `N`.
pub fn profile_to_json(p: &HarvesterProfile) -> Value {
    let mut cee = Map::new();
    for (n, v) in p.cee.iter() {
        cee.insert(n.to_string(), json!(v));
    }
    json!({
        "event_rate": p.event_rate,
        "kw_h": p.kw_to_persistent,
        "kw_r": p.kw_random_to_persistent,
        "eta": p.eta,
        "eta_degenerate": p.eta_degenerate,
        "cee": cee,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_round_trip() {
        let t = EnergyTrace::new(1.0, vec![0.0, 1.5, 2.0]).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&t, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "slot,joules\n0,0.0\n1,1.5\n2,2.0\n");
        assert_eq!(read_trace_csv(&buf[..], 1.0).unwrap(), t);
    }

    #[test]
    fn trace_rejects_gaps_and_garbage() {
        assert!(read_trace_csv("slot,joules\n0,1\n2,1\n".as_bytes(), 1.0).is_err());
        assert!(read_trace_csv("slot,joules\n0,abc\n".as_bytes(), 1.0).is_err());
        assert!(read_trace_csv("slot,joules\n0,-1\n".as_bytes(), 1.0).is_err());
    }

    #[test]
    fn workload_round_trip() {
        let text = r#"{"tasks":[{"id":1,"release":0,"deadline":5,"u_t":[1.0,2.0],
            "subtasks":[{"units":[{"cost":2}],"utility":0.5},{"units":[{"cost":1,"energy":3.0}],"utility":2.5}]}]}"#;
        let w = parse_workload(text, 0.25).unwrap();
        let t = &w.tasks[0];
        assert_eq!(t.subtasks()[0].units()[0].energy_per_slot(), 0.25);
        assert_eq!(t.subtasks()[1].units()[0].energy_per_slot(), 3.0);
        assert_eq!(t.threshold(1), 2.0);
        let again = parse_workload(&workload_to_json(&w).unwrap(), 9.0).unwrap();
        assert_eq!(again, w);
    }

    #[test]
    fn workload_validation() {
        let both = r#"{"tasks":[{"id":1,"release":0,"deadline":5,"u_t":1,
            "subtasks":[{"units":[{"cost":1}],"utility":0.5,"features":[1.0]}]}]}"#;
        assert!(parse_workload(both, 1.0).is_err());
        let no_model = r#"{"tasks":[{"id":1,"release":0,"deadline":5,"u_t":1,
            "subtasks":[{"units":[{"cost":1}],"features":[1.0]}]}]}"#;
        assert!(parse_workload(no_model, 1.0).unwrap().validate().is_err());
        let dup = r#"{"tasks":[
            {"id":1,"release":0,"deadline":5,"u_t":1,"subtasks":[{"units":[{"cost":1}],"utility":1}]},
            {"id":1,"release":0,"deadline":5,"u_t":1,"subtasks":[{"units":[{"cost":1}],"utility":1}]}]}"#;
        assert!(parse_workload(dup, 1.0).is_err());
        assert!(parse_workload("{", 1.0).is_err());
    }
}
