mod common;

use common::oracle::cee_by_enumeration;
use impsched::energy::*;
use impsched::sim::{gen_trace, TraceModel};

#[test]
fn cee_matches_enumeration_for_all_short_series() {
    let mut checked = 0;
    for len in 2..=12usize {
        for bits in 0u32..(1 << len) {
            let ev: Vec<bool> = (0..len).map(|i| bits >> i & 1 == 1).collect();
            let series = EventSeries::new(ev.clone());
            for n_max in 1..=3.min(len - 1) {
                let got: Vec<(i64, f64)> = compute_cee(&series, n_max).unwrap().iter().collect();
                assert_eq!(got, cee_by_enumeration(&ev, n_max), "series {ev:?} n_max {n_max}");
                checked += 1;
            }
        }
    }
    assert!(checked > 20_000);
}

#[test]
fn detection_matches_window_sums() {
    let harvest = vec![0.0, 3.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.5];
    let t = EnergyTrace::new(1.0, harvest.clone()).unwrap();
    for w in 1..=4 {
        for k in [0.5, 1.0, 2.0, 3.0] {
            let got = detect_events(&t, &EventParams::new(k, w).unwrap()).unwrap();
            let want: Vec<bool> = (0..=harvest.len() - w)
                .map(|i| harvest[i..i + w].iter().sum::<f64>() >= k)
                .collect();
            assert_eq!(got.events(), &want[..]);
        }
    }
}

#[test]
fn markov_source_matches_closed_form() {
    let (stay_on, stay_off) = (0.95, 0.95);
    let trace = gen_trace(TraceModel::Markov { stay_on, stay_off }, 100_000, 11, 1.0, 1.0).unwrap();
    let p = analyze_trace(&trace, &EventParams::new(1.0, 1).unwrap(), AnalysisOptions::default()).unwrap();
    // A run of N events is followed by an event with probability stay_on
    // whatever N is; likewise gaps with 1 - stay_off.
    let oracle = CeeCurve::from_fn(20, 0.5, |n| if n > 0 { stay_on } else { 1.0 - stay_off }).unwrap();
    let kw_h = kw_distance(&oracle, &reference_persistent(20).unwrap()).unwrap();
    let kw_r = kw_distance(&reference_random(0.5, 20).unwrap(), &reference_persistent(20).unwrap()).unwrap();
    let eta = (kw_r - kw_h) / kw_r;
    assert!((eta - 0.9).abs() < 1e-12);
    assert!((p.eta - eta).abs() <= 0.05, "eta {} vs closed form {eta}", p.eta);
}

#[test]
fn bernoulli_source_is_unpredictable() {
    for seed in 0..5 {
        let trace = gen_trace(TraceModel::Bernoulli { p: 0.3 }, 100_000, seed, 1.0, 1.0).unwrap();
        let p = analyze_trace(&trace, &EventParams::new(1.0, 1).unwrap(), AnalysisOptions::default()).unwrap();
        assert!(p.eta.abs() <= 0.05, "seed {seed}: eta {}", p.eta);
        assert!((p.event_rate - 0.3).abs() < 0.01);
    }
}

#[test]
fn kw_is_mean_absolute_difference() {
    let a = CeeCurve::from_fn(3, 0.5, |n| (n + 3) as f64 / 6.0).unwrap();
    let b = reference_random(0.5, 3).unwrap();
    let oracle: f64 = (-3..=3).filter(|&n| n != 0).map(|n| ((n + 3) as f64 / 6.0 - 0.5).abs()).sum::<f64>() / 6.0;
    assert!((kw_distance(&a, &b).unwrap() - oracle).abs() < 1e-15);
    assert_eq!(kw_distance(&a, &a).unwrap(), 0.0);
}

#[test]
fn constant_trace_is_persistent() {
    let t = gen_trace(TraceModel::Constant { joules: 2.0 }, 500, 0, 0.0, 1.0).unwrap();
    let p = analyze_trace(&t, &EventParams::new(1.0, 1).unwrap(), AnalysisOptions::default()).unwrap();
    assert_eq!(p.eta, 1.0);
    assert!(p.eta_degenerate);
}

#[test]
fn periodic_source_is_predictable() {
    let t = gen_trace(TraceModel::Periodic { period: 60, on_len: 30 }, 60_000, 0, 1.0, 1.0).unwrap();
    let p = analyze_trace(&t, &EventParams::new(1.0, 1).unwrap(), AnalysisOptions::default()).unwrap();
    assert!(p.eta > 0.5, "eta {}", p.eta);
}

#[test]
fn capacitor_conserves_energy() {
    let mut c = Capacitor::new(5.0, 1.0, 0.5, 2.0).unwrap();
    let mut harvested = 0.0;
    let mut used = 0.0;
    let mut wasted = 0.0;
    for (h, u) in [(3.0, 0.5), (4.0, 0.0), (0.0, 2.0), (10.0, 1.0), (0.0, 0.0)] {
        let (next, w) = c.step(h, u).unwrap();
        harvested += h;
        used += u;
        wasted += w;
        c = next;
        assert!(c.charge() <= c.capacity());
    }
    assert!((harvested - (c.charge() - 1.0 + used + wasted)).abs() < 1e-12);
}
