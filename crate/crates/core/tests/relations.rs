use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cuenet::synth::evaluate;
use cuenet::{
    generate, DecaySchedule, ExperimentConfig, GraphSpec, RelationGraph, RelaxParams, Sample, Schedules, Stage,
    StreamTable, TopologySpec,
};

fn obs(pairs: &[(&str, f64)]) -> Sample {
    pairs.iter().map(|(n, v)| (n.to_string(), vec![*v])).collect()
}

fn joint(preset: &str, steps: u64, seed: u64) -> RelationGraph {
    let cfg = ExperimentConfig::synthetic(preset, 5000, steps, seed);
    cfg.train(&cfg.generate_data().unwrap(), |_, _, _| {}).unwrap()
}

/// Fraction of rows whose brightest column lies within three neuron spacings
/// of `f(preferred_a)`, plus the mean ridge and off-relation weights.
fn ridge(g: &RelationGraph, a: &str, b: &str, f: impl Fn(f64) -> f64) -> (f64, f64, f64) {
    let edge = g.edge(a, b).unwrap();
    assert_eq!(edge.a, a);
    let (p, q) = (&g.node(a).unwrap().som, &g.node(b).unwrap().som);
    let (lo, hi) = q.preferred_bounds(0);
    let range = hi - lo;
    let spacing = range / q.n_neurons() as f64;
    let mut hits = 0;
    let (mut ridge_sum, mut off_sum, mut off_n) = (0.0, 0.0, 0);
    for i in 0..p.n_neurons() {
        let row = edge.link.row(i);
        let j = (0..row.len()).max_by(|&x, &y| row[x].total_cmp(&row[y])).unwrap();
        let target = f(p.preferred(i)[0]);
        if (q.preferred(j)[0] - target).abs() < 3.0 * spacing {
            hits += 1;
        }
        ridge_sum += row[j];
        for (k, w) in row.iter().enumerate() {
            if (q.preferred(k)[0] - target).abs() > 0.2 * range {
                off_sum += w;
                off_n += 1;
            }
        }
    }
    let n = p.n_neurons() as f64;
    (hits as f64 / n, ridge_sum / n, off_sum / off_n.max(1) as f64)
}

fn assert_ridge(g: &RelationGraph, a: &str, b: &str, f: impl Fn(f64) -> f64) {
    let (frac, on, off) = ridge(g, a, b, f);
    assert!(frac >= 0.8, "{a}-{b}: ridge holds on {:.0}% of rows", frac * 100.0);
    assert!(off < on, "{a}-{b}: off-relation mean {off} vs ridge mean {on}");
}

#[test]
fn square_pair_concentrates_on_the_relation() {
    let g = joint("pair_square", 20_000, 1);
    assert_ridge(&g, "x", "y", |x| x * x);
}

#[test]
fn chain_edges_each_trace_their_relation() {
    let g = joint("chain", 20_000, 2);
    assert_ridge(&g, "m1", "m2", |x| x * x);
    assert_ridge(&g, "m2", "m3", f64::sqrt);
}

#[test]
fn pairwise_order_does_not_matter() {
    let table = generate(&TopologySpec::chain(), 5000, 0.0, 3).unwrap();
    let spec = GraphSpec::scalar(&["m1", "m2", "m3"], 100, &[("m1", "m2"), ("m2", "m3")]);
    for order in [["m1", "m2", "m3"], ["m3", "m2", "m1"]] {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut g =
            RelationGraph::new(&spec, Schedules::defaults(15_000), RelaxParams::default(), &table, &mut rng)
                .unwrap();
        let stages = [Stage::new(order[0], order[1], 15_000), Stage::new(order[1], order[2], 15_000)];
        g.train_pairwise(&table, &stages, &mut rng).unwrap();
        assert_ridge(&g, "m1", "m2", |x| x * x);
        assert_ridge(&g, "m2", "m3", f64::sqrt);
    }
}

/// Drift grows about linearly with the retraining length; 500 steps is a
/// short top-up relative to the 20k-step original.
#[test]
fn floor_rate_retraining_barely_moves_the_link() {
    let mut g = joint("pair_square", 20_000, 4);
    let before = g.edge("x", "y").unwrap().link.clone();
    let floor = |s: DecaySchedule| DecaySchedule { initial: s.floor, ..s };
    let s = *g.schedules();
    g.set_schedules(Schedules { alpha: floor(s.alpha), eta: floor(s.eta), beta: floor(s.beta) }).unwrap();
    let table = generate(&TopologySpec::pair_square(), 5000, 0.0, 40).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    g.train_pairwise(&table, &[Stage::new("x", "y", 500)], &mut rng).unwrap();
    let after = &g.edge("x", "y").unwrap().link;
    let diff: f64 = before
        .weights_flat()
        .iter()
        .zip(after.weights_flat())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let rel = diff / before.frobenius_norm();
    assert!(rel < 0.01, "relative change {rel}");
}

#[test]
fn two_node_round_trip() {
    let g = joint("pair_square", 20_000, 5);
    let q = ["y".to_string()];
    let good = (0..200)
        .filter(|k| {
            let x = (*k as f64 + 0.5) / 200.0;
            let y = g.infer(&obs(&[("x", x)]), &q).unwrap().scalar("y").unwrap();
            (y - x * x).abs() < 5.0 / 100.0
        })
        .count();
    assert!(good >= 180, "{good}/200");
}

#[test]
fn masked_leaf_stays_within_twice_the_pair_tolerance() {
    let g = joint("tree", 30_000, 6);
    let spec = TopologySpec::tree();
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    for (leaf, other) in [("m2", "m3"), ("m3", "m2")] {
        let good = (0..200)
            .filter(|_| {
                let t = evaluate(&spec, rng.random_range(0.0..=1.0)).unwrap();
                let r = g.infer(&obs(&[("m1", t["m1"]), (other, t[other])]), &[leaf.to_string()]).unwrap();
                (r.scalar(leaf).unwrap() - t[leaf]).abs() < 2.0 * 5.0 / 100.0
            })
            .count();
        assert!(good >= 180, "{leaf}: {good}/200");
    }
}

#[test]
fn either_arc_of_the_cycle_agrees() {
    let g = joint("cycle", 30_000, 7);
    let a = g.without_edge("m3", "m1").unwrap();
    let b = g.without_edge("m1", "m2").unwrap();
    let q = ["m3".to_string()];
    let close = (0..200)
        .filter(|k| {
            let o = obs(&[("m1", (*k as f64 + 0.5) / 200.0)]);
            let ya = a.infer(&o, &q).unwrap().scalar("m3").unwrap();
            let yb = b.infer(&o, &q).unwrap().scalar("m3").unwrap();
            // m3 spans [0.25, 0.75].
            (ya - yb).abs() < 2.0 * 0.5 / 100.0
        })
        .count();
    assert!(close >= 180, "{close}/200");
}

#[test]
fn consistent_inputs_survive_denoising() {
    let g = joint("pair_square", 20_000, 8);
    let mut errs: Vec<f64> = (0..200)
        .flat_map(|k| {
            let x = (k as f64 + 0.5) / 200.0;
            let r = g.denoise(&obs(&[("x", x), ("y", x * x)])).unwrap();
            [r.scalar("x").unwrap() - x, r.scalar("y").unwrap() - x * x]
        })
        .map(f64::abs)
        .collect();
    errs.sort_by(f64::total_cmp);
    assert!(errs[errs.len() / 2] < 1.0 / 100.0, "median {}", errs[errs.len() / 2]);
    assert!(errs[errs.len() * 9 / 10] < 2.0 / 100.0, "90th percentile {}", errs[errs.len() * 9 / 10]);
}

#[test]
fn non_invertible_relation_returns_a_valid_preimage() {
    // y = 0.5 sin(pi x) + 0.5 folds [0, 1] onto [0.5, 1]: each y has two preimages.
    let g = joint("pair_sine", 20_000, 9);
    let f = |x: f64| 0.5 * (std::f64::consts::PI * x).sin() + 0.5;
    let q = ["x".to_string()];
    let good = (0..100)
        .filter(|k| {
            let y = 0.55 + 0.4 * *k as f64 / 99.0;
            let x = g.infer(&obs(&[("y", y)]), &q).unwrap().scalar("x").unwrap();
            (f(x) - y).abs() < 0.05
        })
        .count();
    assert!(good >= 90, "{good}/100");
}

#[test]
fn inference_is_read_only() {
    let g = joint("tree", 2000, 10);
    let before = serde_json::to_string(&g).unwrap();
    g.infer(&obs(&[("m1", 0.3)]), &["m2".into(), "m3".into()]).unwrap();
    g.denoise(&obs(&[("m1", 0.3), ("m2", 0.1), ("m3", 0.9)])).unwrap();
    assert_eq!(serde_json::to_string(&g).unwrap(), before);
}

#[test]
fn training_needs_full_frames() {
    let table = StreamTable::with_rows(vec!["x".into()], vec![vec![0.5]; 200]).unwrap();
    let spec = GraphSpec::scalar(&["x", "y"], 10, &[("x", "y")]);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    assert!(RelationGraph::new(&spec, Schedules::defaults(10), RelaxParams::default(), &table, &mut rng).is_err());
}
