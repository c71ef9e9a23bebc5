use std::collections::{BTreeSet, HashSet};

use bifurctrack::io::{
    generate_synthetic_event, qubo_from_json, qubo_to_json, BarrelLayout, RawHit, SynthConfig,
};
use bifurctrack::ising::{
    binary_from_spin, brute_force_minimum, qubo_energy, qubo_to_ising, ising_energy, spin_from_binary,
    BinaryState, QuboProblem,
};
use bifurctrack::metrics::{evaluate, truth_doublets, ttt_from_first_hits};
use bifurctrack::solvers::{solve_sa, SaConfig, SolveRun};
use bifurctrack::tracking::{
    assemble_qubo, bias_weight, build_triplets, extract_tracks, generate_doublets, pair_strength, Hit,
    TrackCandidate, TrackingConfig, Triplet,
};
use proptest::prelude::*;

/// Dense evaluation straight from the QUBO definition.
fn naive_qubo(bias: &[f64], pairs: &[(usize, usize, f64)], t: &[u8]) -> f64 {
    let lin: f64 = bias.iter().zip(t).map(|(a, &x)| a * f64::from(x)).sum();
    let quad: f64 = pairs.iter().map(|&(i, j, b)| b * f64::from(t[i] * t[j])).sum();
    lin + quad
}

fn qubo_strategy(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<(usize, usize, f64)>)> {
    (1..=max_n).prop_flat_map(|n| {
        let bias = prop::collection::vec(-2.0..2.0f64, n);
        let all: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let m = all.len();
        let pairs = prop::collection::vec((any::<bool>(), -2.0..2.0f64), m).prop_map(move |ws| {
            all.iter()
                .zip(ws)
                .filter(|(_, (keep, _))| *keep)
                .map(|(&(i, j), (_, w))| (i, j, w))
                .collect::<Vec<_>>()
        });
        (bias, pairs)
    })
}

fn event_for(seed: u64, tracks: usize, noise: f64) -> Vec<Hit> {
    generate_synthetic_event(&SynthConfig { n_tracks: tracks, noise_fraction: noise, seed, ..SynthConfig::default() })
        .unwrap()
        .event
        .hits
}

fn pipeline(hits: &[Hit], cfg: &TrackingConfig) -> (QuboProblem, Vec<Triplet>) {
    let d = generate_doublets(hits, cfg).unwrap();
    let t = build_triplets(&d, hits, cfg).unwrap();
    let q = assemble_qubo(&t, cfg).unwrap();
    (q.problem, q.triplets)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ising_energy_equals_qubo_energy((bias, pairs) in qubo_strategy(10), bits in prop::collection::vec(0u8..=1, 10)) {
        let n = bias.len();
        let p = QuboProblem::new(bias.clone(), pairs.clone()).unwrap();
        let t = &bits[..n];
        let s = spin_from_binary(&BinaryState::new(t.to_vec()).unwrap());
        let e_ising = ising_energy(&qubo_to_ising(&p), &s).unwrap();
        let e_naive = naive_qubo(&bias, &pairs, t);
        prop_assert!((e_ising - e_naive).abs() <= 1e-9 * (1.0 + e_naive.abs()));
    }

    #[test]
    fn spin_binary_round_trip(bits in prop::collection::vec(0u8..=1, 0..40)) {
        let b = BinaryState::new(bits).unwrap();
        prop_assert_eq!(binary_from_spin(&spin_from_binary(&b)), b);
    }

    #[test]
    fn brute_force_is_a_lower_bound((bias, pairs) in qubo_strategy(10), samples in prop::collection::vec(prop::collection::vec(0u8..=1, 10), 8)) {
        let p = QuboProblem::new(bias.clone(), pairs.clone()).unwrap();
        let (best, e) = brute_force_minimum(&p).unwrap();
        prop_assert!((qubo_energy(&p, &best).unwrap() - e).abs() < 1e-9);
        for s in samples {
            prop_assert!(e <= naive_qubo(&bias, &pairs, &s[..bias.len()]) + 1e-9);
        }
    }

    #[test]
    fn qubo_json_round_trip_is_exact((bias, pairs) in qubo_strategy(12)) {
        let p = QuboProblem::new(bias, pairs).unwrap();
        let (back, _) = qubo_from_json(&qubo_to_json(&p, serde_json::Value::Null), "mem").unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn bias_weight_bounded(d0 in -20.0..20.0f64, z0 in -20.0..20.0f64) {
        let cfg = TrackingConfig::default();
        let t = Triplet { hits: [1, 2, 3], qpt: 0.0, theta: 1.0, d0, z0, holes: 0, dtheta: 0.0 };
        let a = bias_weight(&t, &cfg);
        prop_assert!((0.0..cfg.alpha + cfg.beta).contains(&a));
    }

    #[test]
    fn ttt_never_increases_when_a_shot_hits_sooner(
        times in prop::collection::vec(prop::option::of(0.01..10.0f64), 1..40),
        which in any::<prop::sample::Index>(),
        factor in 0.0..1.0f64,
    ) {
        let before = ttt_from_first_hits(&times, 0.99).unwrap();
        let mut faster = times.clone();
        let k = which.index(faster.len());
        if let Some(t) = faster[k] {
            faster[k] = Some(t * factor);
        }
        let after = ttt_from_first_hits(&faster, 0.99).unwrap();
        match (before, after) {
            (Some(b), Some(a)) => prop_assert!(a <= b * (1.0 + 1e-12)),
            (None, None) => {}
            other => prop_assert!(false, "presence changed: {:?}", other),
        }
    }

    /// A fraction `p` of shots succeeding at one time `t` must give the
    /// restart formula `t · ln(0.01) / ln(1 − p)` (or `t` once `p ≥ 0.99`).
    #[test]
    fn ttt_matches_restart_formula(successes in 1usize..50, t in 0.1..5.0f64) {
        let shots = 50;
        let hits: Vec<Option<f64>> = (0..shots).map(|k| (k < successes).then_some(t)).collect();
        let p = successes as f64 / shots as f64;
        let expect = if p >= 0.99 { t } else { t * 0.01f64.ln() / (1.0 - p).ln() };
        let got = ttt_from_first_hits(&hits, 0.99).unwrap().unwrap();
        prop_assert!((got - expect).abs() <= 1e-9 * expect);
    }

    #[test]
    fn barrel_filter_idempotent(rows in prop::collection::vec((0u32..20, 0u32..10), 0..50)) {
        let layout = BarrelLayout::default();
        let raw: Vec<RawHit> = rows
            .iter()
            .enumerate()
            .map(|(k, &(volume_id, layer_id))| RawHit { hit_id: k as u64, x: 1.0, y: 0.0, z: 0.0, volume_id, layer_id, module_id: 0 })
            .collect();
        let once = layout.filter(&raw);
        prop_assert_eq!(layout.filter(&once), once.clone());
        prop_assert!(once.iter().all(|r| layout.layer_index(r.volume_id, r.layer_id).is_some()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn tracking_couplings_are_conflicts_or_strengths(seed in 0u64..1000, noise in 0.0..0.3f64) {
        let cfg = TrackingConfig::default();
        let hits = event_for(seed, 15, noise);
        let (p, triplets) = pipeline(&hits, &cfg);
        for pair in p.pairs() {
            if pair.weight != 1.0 {
                let s = -pair.weight;
                prop_assert!(s > cfg.s_min && s <= 1.0, "weight {}", pair.weight);
                prop_assert_eq!(s, pair_strength(&triplets[pair.i], &triplets[pair.j]));
            }
        }
        for &a in p.bias() {
            prop_assert!((0.0..cfg.alpha + cfg.beta).contains(&a));
        }
    }

    /// Every surviving triplet sits in a −S pair whose chain of −S pairs
    /// reaches the seed length.
    #[test]
    fn pruning_soundness(seed in 0u64..1000, noise in 0.0..0.3f64) {
        let cfg = TrackingConfig::default();
        let hits = event_for(seed, 10, noise);
        let (p, triplets) = pipeline(&hits, &cfg);
        let n = triplets.len();
        let mut next = vec![Vec::new(); n];
        let mut prev = vec![Vec::new(); n];
        for pair in p.pairs().iter().filter(|q| q.weight < 0.0) {
            let (a, b) = (&triplets[pair.i], &triplets[pair.j]);
            let (inner, outer) = if a.hits[1..] == b.hits[..2] { (pair.i, pair.j) } else { (pair.j, pair.i) };
            next[inner].push(outer);
            prev[outer].push(inner);
        }
        fn depth(k: usize, g: &[Vec<usize>]) -> usize {
            1 + g[k].iter().map(|&m| depth(m, g)).max().unwrap_or(0)
        }
        for k in 0..n {
            let best = next[k]
                .iter()
                .map(|&m| depth(k, &prev) + depth(m, &next))
                .chain(prev[k].iter().map(|&m| depth(m, &prev) + depth(k, &next)))
                .max();
            prop_assert!(best.is_some(), "triplet {k} has no quadruplet");
            prop_assert!(best.unwrap() + 2 >= cfg.min_seed_track_hits);
        }
    }

    #[test]
    fn qubo_assembly_is_deterministic(seed in 0u64..1000) {
        let cfg = TrackingConfig::default();
        let hits = event_for(seed, 10, 0.2);
        prop_assert_eq!(pipeline(&hits, &cfg), pipeline(&hits, &cfg));
    }

    #[test]
    fn candidates_never_share_or_repeat_hits(seed in 0u64..1000, picks in prop::collection::vec(any::<bool>(), 600)) {
        let cfg = TrackingConfig::default();
        let hits = event_for(seed, 12, 0.2);
        let (_, triplets) = pipeline(&hits, &cfg);
        let bits: Vec<u8> = (0..triplets.len()).map(|k| u8::from(picks[k % picks.len()])).collect();
        let cands = extract_tracks(&BinaryState::new(bits).unwrap(), &triplets, &cfg).unwrap();
        let mut seen = HashSet::new();
        for c in &cands {
            prop_assert!(c.hits.len() >= cfg.min_track_hits);
            for h in &c.hits {
                prop_assert!(seen.insert(*h), "hit {} reused", h);
            }
        }
    }

    #[test]
    fn unit_rescaling_keeps_surviving_triplets(seed in 0u64..1000) {
        let mm = TrackingConfig::default();
        let hits = event_for(seed, 10, 0.1);
        let cm_hits: Vec<Hit> = hits
            .iter()
            .map(|h| Hit { x: h.x / 10.0, y: h.y / 10.0, z: h.z / 10.0, ..h.clone() })
            .collect();
        let cm = TrackingConfig {
            mm_per_unit: 10.0,
            gamma: mm.gamma / 10.0,
            lambda: mm.lambda / 10.0,
            z_origin_max: mm.z_origin_max / 10.0,
            ..mm.clone()
        };
        let keys = |t: &[Triplet]| t.iter().map(|t| t.hits).collect::<Vec<_>>();
        let (p_mm, t_mm) = pipeline(&hits, &mm);
        let (p_cm, t_cm) = pipeline(&cm_hits, &cm);
        prop_assert_eq!(keys(&t_mm), keys(&t_cm));
        prop_assert_eq!(p_mm.pairs().len(), p_cm.pairs().len());
    }

    #[test]
    fn evaluation_counts_and_permutation_invariance(seed in 0u64..1000, rot in 0usize..50) {
        let cfg = TrackingConfig::default();
        let hits = event_for(seed, 8, 0.1);
        let truth = truth_doublets(&hits, cfg.min_track_hits);
        let (_, triplets) = pipeline(&hits, &cfg);
        let bits = BinaryState::new(vec![1; triplets.len()]).unwrap();
        let mut cands: Vec<TrackCandidate> = extract_tracks(&bits, &triplets, &cfg).unwrap();
        let r = evaluate(&cands, &truth);
        prop_assert_eq!(r.tp + r.fn_, truth.len());
        if !cands.is_empty() {
            let k = rot % cands.len();
            cands.rotate_left(k);
        }
        let mut shuffled = hits.clone();
        shuffled.reverse();
        let r2 = evaluate(&cands, &truth_doublets(&shuffled, cfg.min_track_hits));
        prop_assert_eq!((r.tp, r.fp, r.fn_), (r2.tp, r2.fp, r2.fn_));
    }
}

#[test]
fn synthetic_truth_doublet_count_matches_generator() {
    let ev = generate_synthetic_event(&SynthConfig { n_tracks: 25, noise_fraction: 0.1, seed: 9, ..SynthConfig::default() })
        .unwrap();
    // ten layers per track → nine segments each
    let truth: BTreeSet<_> = truth_doublets(&ev.event.hits, 4);
    assert_eq!(truth.len(), 25 * 9);
}

#[test]
fn synthetic_helix_yields_all_consecutive_doublets() {
    let cfg = TrackingConfig::default();
    for seed in 0..10 {
        let hits = event_for(seed, 1, 0.0);
        let d = generate_doublets(&hits, &cfg).unwrap();
        let mut by_layer: Vec<&Hit> = hits.iter().collect();
        by_layer.sort_by_key(|h| h.layer_index);
        for w in by_layer.windows(2) {
            assert!(d.iter().any(|x| (x.inner, x.outer) == (w[0].hit_id, w[1].hit_id)), "seed {seed}");
        }
    }
}

#[test]
fn high_curvature_track_rejected() {
    let cfg = TrackingConfig::default();
    // qpt = 1e-3 GeV⁻¹ lies above the 8e-4 cut.
    let gen = SynthConfig { n_tracks: 1, qpt_max: 1e-3, ..SynthConfig::default() };
    let mut found = false;
    for seed in 0..50 {
        let ev = generate_synthetic_event(&SynthConfig { seed, ..gen.clone() }).unwrap();
        let p = &ev.particles[0];
        if p.qpt.abs() < 9e-4 {
            continue;
        }
        found = true;
        let d = generate_doublets(&ev.event.hits, &cfg).unwrap();
        let t = build_triplets(&d, &ev.event.hits, &cfg).unwrap();
        assert!(t.is_empty(), "seed {seed}: qpt {}", p.qpt);
    }
    assert!(found);
}

#[test]
fn solve_run_json_round_trip() {
    let p = qubo_to_ising(&QuboProblem::new(vec![1.0, -1.0, 0.5], [(0, 1, -2.0), (1, 2, 1.5)]).unwrap());
    let run = solve_sa(&p, &SaConfig { sweeps: 20, shots: 3, ..SaConfig::default() }).unwrap();
    let text = serde_json::to_string(&run).unwrap();
    let back: SolveRun = serde_json::from_str(&text).unwrap();
    assert_eq!(back, run);
    // spins are stored as 0/1 bits
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v["shots"][0]["spins"].as_array().unwrap().iter().all(|b| b == 0 || b == 1));
}
