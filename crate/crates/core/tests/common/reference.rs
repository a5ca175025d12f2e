//! Straight-line slot simulator for workloads whose subtasks are single
//! one-slot units. Shares nothing with the library beyond plain data.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefPolicy {
    Edf,
    EdfM,
    Zeta,
    ZetaI,
}

#[derive(Debug, Clone)]
pub struct RefTask {
    pub id: u32,
    pub release: u64,
    pub deadline: u64,
    pub utilities: Vec<f64>,
    pub u_t: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct RefConfig {
    pub capacity: f64,
    pub initial: f64,
    pub e_man: f64,
    pub e_opt: f64,
    pub eta: f64,
    pub idle: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefOutcome {
    pub rows: Vec<String>,
    pub successes: usize,
    pub full: usize,
    pub misses: usize,
    pub utility: f64,
}

struct Live {
    t: RefTask,
    done: usize,
    u: f64,
    met: bool,
}

fn row(slot: u64, task: Option<u32>, sub: Option<usize>, unit: Option<usize>, action: &str) -> String {
    let f = |v: Option<String>| v.unwrap_or_default();
    format!(
        "{},{},{},{},{}",
        slot,
        f(task.map(|v| v.to_string())),
        f(sub.map(|v| v.to_string())),
        f(unit.map(|v| v.to_string())),
        action
    )
}

pub fn simulate(cfg: RefConfig, tasks: &[RefTask], harvest: &[f64], horizon: u64, policy: RefPolicy) -> RefOutcome {
    let alpha = 1.0 / tasks.iter().map(|t| t.deadline - t.release).max().unwrap_or(1) as f64;
    let umax = tasks.iter().map(|t| t.u_t).fold(0.0, f64::max);
    let beta = if umax > 0.0 { 1.0 / umax } else { 1.0 };

    let mut order: Vec<&RefTask> = tasks.iter().collect();
    order.sort_by_key(|t| (t.release, t.id));
    let mut charge = cfg.initial;
    let mut queue: Vec<Live> = Vec::new();
    let mut out = RefOutcome {
        rows: Vec::new(),
        successes: 0,
        full: 0,
        misses: 0,
        utility: 0.0,
    };

    let expire = |queue: &mut Vec<Live>, now: u64, out: &mut RefOutcome| {
        let mut keep = Vec::new();
        for l in queue.drain(..) {
            if l.t.deadline > now {
                keep.push(l);
            } else if l.met {
                out.rows.push(row(now, Some(l.t.id), None, None, "terminate-early"));
                out.successes += 1;
                out.utility += l.u;
            } else {
                out.rows.push(row(now, Some(l.t.id), None, None, "deadline-miss"));
                out.misses += 1;
            }
        }
        *queue = keep;
    };

    for s in 0..horizon {
        charge = (charge + harvest[s as usize]).min(cfg.capacity);
        charge -= cfg.idle.min(charge);
        for t in order.iter().filter(|t| t.release == s) {
            queue.push(Live {
                t: (*t).clone(),
                done: 0,
                u: 0.0,
                met: false,
            });
        }
        expire(&mut queue, s, &mut out);

        if charge < cfg.e_man {
            out.rows.push(row(s, None, None, None, "idle-no-energy"));
            continue;
        }
        let gated = policy == RefPolicy::ZetaI && cfg.eta * charge < cfg.e_opt;
        let visible: Vec<usize> = (0..queue.len())
            .filter(|&i| policy != RefPolicy::EdfM || !queue[i].met)
            .collect();
        if visible.is_empty() {
            out.rows.push(row(s, None, None, None, "idle-no-task"));
            continue;
        }
        let eligible: Vec<usize> = visible.into_iter().filter(|&i| !gated || !queue[i].met).collect();
        if eligible.is_empty() {
            out.rows.push(row(s, None, None, None, "conservative-skip"));
            continue;
        }
        let score = |l: &Live| -> f64 {
            let g = if l.met { 0.0 } else { 1.0 };
            let base = (1.0 - alpha * (l.t.deadline as f64 - s as f64)) + (1.0 - beta * l.u);
            if gated {
                g * base
            } else {
                base + g
            }
        };
        let mut best = eligible[0];
        for &i in &eligible[1..] {
            let (a, b) = (&queue[i], &queue[best]);
            let better = match policy {
                RefPolicy::Edf | RefPolicy::EdfM => {
                    (a.t.deadline, a.t.release, a.t.id) < (b.t.deadline, b.t.release, b.t.id)
                }
                RefPolicy::Zeta | RefPolicy::ZetaI => {
                    let (sa, sb) = (score(a), score(b));
                    sa > sb || (sa == sb && (a.t.release, a.t.id) < (b.t.release, b.t.id))
                }
            };
            if better {
                best = i;
            }
        }
        let l = &mut queue[best];
        if charge < cfg.e_man + l.t.energy {
            out.rows.push(row(s, None, None, None, "idle-no-energy"));
            continue;
        }
        charge -= l.t.energy;
        let j = l.done;
        out.rows.push(row(s, Some(l.t.id), Some(j), Some(0), "run"));
        l.done += 1;
        l.u = l.u.max(l.t.utilities[j]);
        let last = l.done == l.t.utilities.len();
        let crossed = !l.met && (l.u >= l.t.u_t || last);
        if crossed {
            l.met = true;
            out.rows.push(row(s, Some(l.t.id), Some(j), None, "complete-mandatory"));
        }
        if last {
            out.rows.push(row(s, Some(l.t.id), Some(j), None, "complete-full"));
            out.successes += 1;
            out.full += 1;
            out.utility += l.u;
            queue.remove(best);
        } else if crossed && policy == RefPolicy::EdfM {
            out.rows.push(row(s, Some(l.t.id), None, None, "terminate-early"));
            out.successes += 1;
            out.utility += l.u;
            queue.remove(best);
        }
    }
    expire(&mut queue, horizon, &mut out);
    for l in &queue {
        if l.met {
            out.successes += 1;
            out.utility += l.u;
        }
    }
    out
}
