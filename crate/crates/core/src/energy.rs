//! Energy-event detection, conditional energy event (CEE) curves, the
//! KW distance between curves, the η predictability factor and the
//! capacitor store.
//!
//! A harvest trace is turned into a boolean event series by a sliding
//! window: position `i` is an event when the `T` slots starting at `i`
//! together deliver at least `K` joules. The CEE curve then records, for
//! every run length `N` up to `n_max`, how likely an event is right after
//! `N` consecutive events (`N > 0`) or `N` consecutive gaps (`N < 0`).
//!
//! η compares the harvester's curve with two references: the ideal
//! correlative source (an event always follows an event, never follows a
//! gap) and a memoryless source with the same event rate. η = 1 for a
//! persistent source, 0 for a memoryless one, negative for sources that
//! are less predictable than chance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Run length used throughout when nothing else is configured.
pub const DEFAULT_N_MAX: usize = 20;

/// Minimum number of conditioning samples for a CEE entry in
/// [`analyze_trace`]; sparser entries fall back to the event rate.
pub const DEFAULT_MIN_SUPPORT: u64 = 30;

/// Per-slot harvested energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    slot_duration: f64,
    harvest: Vec<f64>,
}

impl EnergyTrace {
    pub fn new(slot_duration: f64, harvest: Vec<f64>) -> Result<Self> {
        if !(slot_duration.is_finite() && slot_duration > 0.0) {
            return Err(Error::invalid(format!(
                "slot duration must be positive, got {slot_duration}"
            )));
        }
        if harvest.is_empty() {
            return Err(Error::invalid("energy trace is empty"));
        }
        if let Some((i, v)) = harvest
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::invalid(format!(
                "harvest at slot {i} must be finite and non-negative, got {v}"
            )));
        }
        Ok(EnergyTrace {
            slot_duration,
            harvest,
        })
    }

    pub fn slot_duration(&self) -> f64 {
        self.slot_duration
    }

    pub fn harvest(&self) -> &[f64] {
        &self.harvest
    }

    pub fn len(&self) -> usize {
        self.harvest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.harvest.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.harvest.iter().sum()
    }
}

/// Threshold `K` joules accumulated over a window of `T` slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventParams {
    k_joules: f64,
    t_slots: usize,
}

impl EventParams {
    pub fn new(k_joules: f64, t_slots: usize) -> Result<Self> {
        if !(k_joules.is_finite() && k_joules > 0.0) {
            return Err(Error::invalid(format!("K must be positive, got {k_joules}")));
        }
        if t_slots == 0 {
            return Err(Error::invalid("T must be at least one slot"));
        }
        Ok(EventParams { k_joules, t_slots })
    }

    pub fn k_joules(&self) -> f64 {
        self.k_joules
    }

    pub fn t_slots(&self) -> usize {
        self.t_slots
    }
}

/// Boolean energy-event sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSeries {
    events: Vec<bool>,
}

impl EventSeries {
    pub fn new(events: Vec<bool>) -> Self {
        EventSeries { events }
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Fraction of positions holding an event; 0 for an empty series.
    pub fn event_rate(&self) -> f64 {
        if self.events.is_empty() {
            return 0.0;
        }
        self.events.iter().filter(|&&e| e).count() as f64 / self.events.len() as f64
    }
}

impl From<Vec<bool>> for EventSeries {
    fn from(events: Vec<bool>) -> Self {
        EventSeries::new(events)
    }
}

/// Marks every window position whose `T`-slot sum reaches `K`.
///
/// Each window is summed independently so that results do not depend on
/// accumulated rounding from earlier windows.
pub fn detect_events(trace: &EnergyTrace, params: &EventParams) -> Result<EventSeries> {
    let t = params.t_slots;
    if trace.len() < t {
        return Err(Error::invalid(format!(
            "trace has {} slots, shorter than the event window T = {t}",
            trace.len()
        )));
    }
    let events = trace
        .harvest
        .windows(t)
        .map(|w| w.iter().sum::<f64>() >= params.k_joules)
        .collect();
    Ok(EventSeries { events })
}

/// Conditional energy event curve over `N ∈ {-n_max..-1, 1..n_max}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CeeCurve {
    n_max: usize,
    // [-n_max, ..., -1, 1, ..., n_max]
    values: Vec<f64>,
    fallback_rate: f64,
    // Conditioning counts per entry, same layout as `values`. Empty for
    // analytic reference curves.
    support: Vec<u64>,
}

impl CeeCurve {
    /// Builds a curve from explicit values keyed by `N`.
    pub fn from_fn(n_max: usize, fallback_rate: f64, f: impl Fn(i64) -> f64) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::invalid("n_max must be at least 1"));
        }
        check_probability("fallback rate", fallback_rate)?;
        let values: Vec<f64> = support_points(n_max).map(f).collect();
        for (n, v) in support_points(n_max).zip(&values) {
            check_probability(&format!("CEE({n})"), *v)?;
        }
        Ok(CeeCurve {
            n_max,
            values,
            fallback_rate,
            support: Vec::new(),
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn fallback_rate(&self) -> f64 {
        self.fallback_rate
    }

    /// CEE(n). Panics when `n == 0` or `|n| > n_max`.
    pub fn get(&self, n: i64) -> f64 {
        self.values[self.index(n)]
    }

    /// Number of positions that conditioned entry `n`, when the curve was
    /// estimated from data.
    pub fn support(&self, n: i64) -> Option<u64> {
        if self.support.is_empty() {
            None
        } else {
            Some(self.support[self.index(n)])
        }
    }

    /// `(N, CEE(N))` pairs in increasing `N`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        support_points(self.n_max).zip(self.values.iter().copied())
    }

    pub fn to_map(&self) -> BTreeMap<i64, f64> {
        self.iter().collect()
    }

    fn index(&self, n: i64) -> usize {
        let m = self.n_max as i64;
        assert!(n != 0 && n.abs() <= m, "CEE index {n} outside ±1..±{m}");
        if n < 0 {
            (n + m) as usize
        } else {
            (m + n - 1) as usize
        }
    }
}

fn support_points(n_max: usize) -> impl Iterator<Item = i64> {
    let m = n_max as i64;
    (-m..=-1).chain(1..=m)
}

fn check_probability(what: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} must lie in [0, 1], got {p}")))
    }
}

/// CEE curve of an event series. Entries that are never conditioned take
/// the unconditional event rate.
pub fn compute_cee(events: &EventSeries, n_max: usize) -> Result<CeeCurve> {
    compute_cee_with_support(events, n_max, 1)
}

/// As [`compute_cee`], but entries conditioned by fewer than `min_support`
/// positions also take the unconditional event rate.
///
/// An entry `N > 0` counts position `j` when the `N` positions before `j`
/// are all events; the numerator counts those where `j` itself is an
/// event. Negative `N` is the same with gaps.
pub fn compute_cee_with_support(
    events: &EventSeries,
    n_max: usize,
    min_support: u64,
) -> Result<CeeCurve> {
    if n_max == 0 {
        return Err(Error::invalid("n_max must be at least 1"));
    }
    let ev = events.events();
    if n_max >= ev.len() {
        return Err(Error::invalid(format!(
            "n_max = {n_max} must be smaller than the series length {}",
            ev.len()
        )));
    }
    let rate = events.event_rate();
    let mut hits = vec![0u64; 2 * n_max];
    let mut seen = vec![0u64; 2 * n_max];

    // Length of the run of equal values ending at j-1.
    let mut run = 0usize;
    for j in 1..ev.len() {
        run = if j >= 2 && ev[j - 1] == ev[j - 2] { run + 1 } else { 1 };
        let longest = run.min(n_max);
        for n in 1..=longest {
            let idx = if ev[j - 1] { n_max + n - 1 } else { n_max - n };
            seen[idx] += 1;
            if ev[j] {
                hits[idx] += 1;
            }
        }
    }

    let min_support = min_support.max(1);
    let values = hits
        .iter()
        .zip(&seen)
        .map(|(&h, &s)| {
            if s >= min_support {
                h as f64 / s as f64
            } else {
                rate
            }
        })
        .collect();
    Ok(CeeCurve {
        n_max,
        values,
        fallback_rate: rate,
        support: seen,
    })
}

/// Ideal correlative source: an event always follows events and never
/// follows gaps.
pub fn reference_persistent(n_max: usize) -> Result<CeeCurve> {
    CeeCurve::from_fn(n_max, 1.0, |n| if n > 0 { 1.0 } else { 0.0 })
}

/// Memoryless source with event probability `p`: CEE(N) = p everywhere.
pub fn reference_random(p: f64, n_max: usize) -> Result<CeeCurve> {
    check_probability("event probability", p)?;
    CeeCurve::from_fn(n_max, p, |_| p)
}

/// Mean absolute difference between two curves over all `2·n_max` points.
pub fn kw_distance(h: &CeeCurve, p: &CeeCurve) -> Result<f64> {
    if h.n_max != p.n_max {
        return Err(Error::invalid(format!(
            "curves have different n_max ({} vs {})",
            h.n_max, p.n_max
        )));
    }
    let total: f64 = h
        .values
        .iter()
        .zip(&p.values)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(total / h.values.len() as f64)
}

/// η together with a flag marking the persistent-source convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eta {
    pub value: f64,
    /// Set when η was not computed from the ratio but fixed to 1 because the
    /// source is itself persistent.
    pub degenerate: bool,
}

/// `(kw_r - kw_h) / kw_r`. A zero `kw_r` yields η = 1 flagged degenerate.
pub fn eta_factor(kw_h: f64, kw_r: f64) -> Result<Eta> {
    if !(kw_h.is_finite() && kw_h >= 0.0) {
        return Err(Error::invalid(format!("kw_h must be non-negative, got {kw_h}")));
    }
    if !(kw_r.is_finite() && kw_r >= 0.0) {
        return Err(Error::invalid(format!("kw_r must be non-negative, got {kw_r}")));
    }
    if kw_r == 0.0 {
        return Ok(Eta {
            value: 1.0,
            degenerate: true,
        });
    }
    Ok(Eta {
        value: (kw_r - kw_h) / kw_r,
        degenerate: false,
    })
}

/// Knobs for [`analyze_trace`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub n_max: usize,
    pub min_support: u64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            n_max: DEFAULT_N_MAX,
            min_support: DEFAULT_MIN_SUPPORT,
        }
    }
}

/// Summary of a harvester's predictability.
#[derive(Debug, Clone, PartialEq)]
pub struct HarvesterProfile {
    pub kw_to_persistent: f64,
    pub kw_random_to_persistent: f64,
    pub eta: f64,
    pub eta_degenerate: bool,
    pub event_rate: f64,
    pub cee: CeeCurve,
}

/// Detects events and profiles them, see [`analyze_events`].
pub fn analyze_trace(
    trace: &EnergyTrace,
    params: &EventParams,
    opts: AnalysisOptions,
) -> Result<HarvesterProfile> {
    let events = detect_events(trace, params)?;
    analyze_events(&events, opts)
}

/// CEE curve, both KW distances and η for an event series.
pub fn analyze_events(events: &EventSeries, opts: AnalysisOptions) -> Result<HarvesterProfile> {
    let cee = compute_cee_with_support(events, opts.n_max, opts.min_support)?;
    let rate = events.event_rate();
    let persistent = reference_persistent(opts.n_max)?;
    let random = reference_random(rate, opts.n_max)?;
    let kw_h = kw_distance(&cee, &persistent)?;
    let kw_r = kw_distance(&random, &persistent)?;
    // A series that never misses is the persistent source itself.
    let eta = if rate == 1.0 {
        Eta {
            value: 1.0,
            degenerate: true,
        }
    } else {
        eta_factor(kw_h, kw_r)?
    };
    Ok(HarvesterProfile {
        kw_to_persistent: kw_h,
        kw_random_to_persistent: kw_r,
        eta: eta.value,
        eta_degenerate: eta.degenerate,
        event_rate: rate,
        cee,
    })
}

/// Energy store with operating thresholds.
///
/// `e_man` is the minimum charge for the device to operate, `e_opt` the
/// level above which optional work is considered affordable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capacitor {
    capacity: f64,
    charge: f64,
    e_man: f64,
    e_opt: f64,
}

impl Capacitor {
    pub fn new(capacity: f64, charge: f64, e_man: f64, e_opt: f64) -> Result<Self> {
        if !(capacity.is_finite() && capacity > 0.0) {
            return Err(Error::invalid(format!("capacity must be positive, got {capacity}")));
        }
        if !(charge.is_finite() && (0.0..=capacity).contains(&charge)) {
            return Err(Error::invalid(format!(
                "charge {charge} outside [0, {capacity}]"
            )));
        }
        if !(e_man.is_finite() && e_opt.is_finite() && 0.0 <= e_man && e_man <= e_opt && e_opt <= capacity)
        {
            return Err(Error::invalid(format!(
                "thresholds must satisfy 0 <= e_man ({e_man}) <= e_opt ({e_opt}) <= capacity ({capacity})"
            )));
        }
        Ok(Capacitor {
            capacity,
            charge,
            e_man,
            e_opt,
        })
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn charge(&self) -> f64 {
        self.charge
    }

    pub fn e_man(&self) -> f64 {
        self.e_man
    }

    pub fn e_opt(&self) -> f64 {
        self.e_opt
    }

    /// Adds `harvested`, removes `consumed`; returns the new store and the
    /// energy that did not fit.
    pub fn step(self, harvested: f64, consumed: f64) -> Result<(Capacitor, f64)> {
        capacitor_step(self, harvested, consumed)
    }
}

pub fn capacitor_step(cap: Capacitor, harvested: f64, consumed: f64) -> Result<(Capacitor, f64)> {
    if !(harvested.is_finite() && harvested >= 0.0) {
        return Err(Error::invalid(format!("harvested must be non-negative, got {harvested}")));
    }
    if !(consumed.is_finite() && consumed >= 0.0) {
        return Err(Error::invalid(format!("consumed must be non-negative, got {consumed}")));
    }
    let available = cap.charge + harvested;
    if consumed > available {
        return Err(Error::InsufficientEnergy {
            requested: consumed,
            available,
        });
    }
    let level = available - consumed;
    let wasted = (level - cap.capacity).max(0.0);
    let charge = level.min(cap.capacity);
    Ok((Capacitor { charge, ..cap }, wasted))
}
