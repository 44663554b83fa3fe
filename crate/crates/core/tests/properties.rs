//! Cross-module invariants on random instances.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use witness_lab::benchmarks::profile::{g_profile, profile_equivalence_report, GClass};
use witness_lab::benchmarks::random::{random_factored, random_tabular, random_tabular_class, RandomFactored, RandomTabular};
use witness_lab::benchmarks::{build_overparam_class, build_separation_family, build_tilde_family};
use witness_lab::elimination::{run_main, AlgoConfig, Mode};
use witness_lab::misfit::{collect_uniform, witnessed_misfit_estimate, witnessed_misfit_exact};
use witness_lab::test_functions::{bellman_function, build_scheffe_class};
use witness_lab::witness_rank::{build_matrix, sandwich_check, MatrixKind};
use witness_lab::{
    expand, occupancy, plan, sample_trajectory, FactoredMdp, ModelClass, Policy, SeedStreams, TestFunctionClass,
};

fn shape_strategy() -> impl Strategy<Value = (RandomTabular, u64)> {
    (1usize..=4, 1usize..=3, 1usize..=5, 1usize..=3, 1usize..=2, any::<u64>()).prop_map(|(h, k, s, b, r, seed)| {
        (
            RandomTabular {
                horizon: h,
                actions: k,
                states: s,
                branching: b,
                reward_support: r,
            },
            seed,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bellman_consistency((shape, seed) in shape_strategy()) {
        let m = random_tabular(&shape, &mut ChaCha8Rng::seed_from_u64(seed));
        let p = plan(&m);
        for h in 0..m.horizon() {
            for x in 0..m.states(h) {
                for a in 0..m.actions() {
                    let backup = m.reward(h, x, a).mean()
                        + m.transition(h, x, a).entries().iter().map(|&(y, q)| q * p.v[h + 1][y]).sum::<f64>();
                    prop_assert!((p.q[h][x][a] - backup).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn exact_misfits_are_nonnegative((shape, seed) in shape_strategy(), size in 1usize..=4) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let class = ModelClass::new(random_tabular_class(&shape, size, &mut r)).unwrap();
        let truth = class.get(0).clone();
        for f in [TestFunctionClass::bellman_class(&class), TestFunctionClass::tv_ball()] {
            for h in 0..class.horizon() {
                let w = build_matrix(&class, &truth, h, MatrixKind::Misfit(&f)).unwrap();
                for i in 0..class.len() {
                    for j in 0..class.len() {
                        prop_assert!(w.get(i, j) >= -1e-12);
                    }
                    prop_assert!(w.get(i, 0).abs() <= 1e-9, "truth column must vanish");
                }
            }
        }
    }

    #[test]
    fn bellman_matrix_is_a_feasible_sandwich((shape, seed) in shape_strategy(), size in 2usize..=4) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let class = ModelClass::new(random_tabular_class(&shape, size, &mut r)).unwrap();
        let truth = class.get(size - 1).clone();
        let f = TestFunctionClass::bellman_class(&class);
        for h in 0..class.horizon() {
            let eb = build_matrix(&class, &truth, h, MatrixKind::Bellman).unwrap();
            let w = build_matrix(&class, &truth, h, MatrixKind::Misfit(&f)).unwrap();
            prop_assert!(sandwich_check(&eb, 1.0, &eb, &w).unwrap());
        }
    }
}

// ── Sampling checks ──

#[test]
fn occupancy_matches_sampled_frequencies() {
    let mut r = ChaCha8Rng::seed_from_u64(21);
    let shape = RandomTabular {
        horizon: 3,
        actions: 3,
        states: 5,
        branching: 3,
        reward_support: 2,
    };
    let m = random_tabular(&shape, &mut r);
    let pi = Policy::uniform(&m);
    let n = 100_000;
    let mut rng = SeedStreams::new(3).stream("occupancy", 0);
    let mut counts = vec![vec![0usize; 5]; 4];
    for _ in 0..n {
        let t = sample_trajectory(&m, &pi, &mut rng);
        for (h, &x) in t.states.iter().enumerate() {
            counts[h][x] += 1;
        }
    }
    for (h, level_counts) in counts.iter().enumerate() {
        let d = occupancy(&m, &pi, h).unwrap();
        for (x, (&c, &p)) in level_counts.iter().zip(&d).enumerate() {
            let freq = c as f64 / n as f64;
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() <= 3.0 * sigma + 1e-12, "h={h} x={x}: {freq} vs {p}");
        }
    }
}

#[test]
fn importance_weighted_statistic_is_unbiased() {
    let mut r = ChaCha8Rng::seed_from_u64(22);
    let shape = RandomTabular {
        horizon: 2,
        actions: 2,
        states: 3,
        branching: 2,
        reward_support: 2,
    };
    let class = ModelClass::new(random_tabular_class(&shape, 3, &mut r)).unwrap();
    let (truth, roll_in, target) = (class.get(0), class.get(1), class.get(2));
    // A single fixed function: the supremum is its own integral.
    let f = TestFunctionClass::Finite {
        functions: vec![bellman_function(&target.plan)],
    };
    for h in 0..2 {
        let exact = witnessed_misfit_exact(roll_in, target, truth, h, &f).unwrap();
        let values: Vec<f64> = (0..100u64)
            .map(|s| {
                let mut rng = SeedStreams::new(s).stream("unbiased", h as u64);
                let data = collect_uniform(&truth.model, roll_in.policy(), h, 200, &mut rng).unwrap();
                witnessed_misfit_estimate(&data, target, &f).unwrap().value
            })
            .collect();
        let mean = values.iter().sum::<f64>() / 100.0;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 99.0;
        let se = (var / 100.0).sqrt();
        assert!((mean - exact).abs() <= 3.0 * se + 1e-12, "h={h}: mean {mean} exact {exact} se {se}");
    }
}

// ── Factored expansion ──

/// Direct dynamic programming over factored states, multiplying CPT rows on
/// the fly instead of expanding the model.
fn factored_value(m: &FactoredMdp) -> f64 {
    let s = m.structure();
    let n = s.state_count() as usize;
    let k = m.actions();
    let mut v = vec![0.0; n];
    for h in (0..m.horizon()).rev() {
        let mut next = vec![0.0; n];
        for (x, slot) in next.iter_mut().enumerate() {
            let values = s.decode(x);
            let mut best = f64::NEG_INFINITY;
            for a in 0..k {
                let mut q = m.reward_at(h, x).unwrap();
                for (y, vy) in v.iter().enumerate() {
                    let target = s.decode(y);
                    let p: f64 = (0..s.d())
                        .map(|i| m.cpt_row(h, i, s.parent_index(i, &values), a)[target[i]])
                        .product();
                    q += p * vy;
                }
                best = best.max(q);
            }
            *slot = best;
        }
        v = next;
    }
    (0..n)
        .map(|x| {
            let values = s.decode(x);
            let p: f64 = (0..s.d()).map(|i| m.initial()[i][values[i]]).product();
            p * v[x]
        })
        .sum()
}

#[test]
fn expansion_preserves_planning() {
    let mut r = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..10 {
        let spec = RandomFactored {
            horizon: r.gen_range(1..=3),
            actions: r.gen_range(1..=3),
            d: r.gen_range(1..=3),
            num_values: r.gen_range(2..=3),
            max_parents: r.gen_range(1..=2),
        };
        let m = random_factored(&spec, &mut r);
        let direct = factored_value(&m);
        let expanded = plan(&expand(&m).unwrap()).value;
        assert!((direct - expanded).abs() <= 1e-12, "{direct} vs {expanded}");
    }
}

// ── Test-function classes ──

#[test]
fn scheffe_class_is_symmetric() {
    let mut r = ChaCha8Rng::seed_from_u64(24);
    let class = ModelClass::new(random_tabular_class(&RandomTabular::default(), 3, &mut r)).unwrap();
    let f = build_scheffe_class(&class).unwrap();
    assert!(f.is_symmetric());
    assert!(TestFunctionClass::bellman_class(&class).is_symmetric());
}

// ── Elimination ──

#[test]
fn oracle_rounds_always_eliminate_the_chosen_model() {
    let mut r = ChaCha8Rng::seed_from_u64(25);
    for _ in 0..10 {
        let class = ModelClass::new(random_tabular_class(&RandomTabular::default(), 6, &mut r)).unwrap();
        let t = r.gen_range(0..6);
        let f = TestFunctionClass::bellman_class(&class);
        let rec = run_main(&class, class.get(t), &f, &AlgoConfig::default(), &SeedStreams::new(0).stream("o", 0)).unwrap();
        for round in rec.rounds.iter().filter(|r| !r.terminated) {
            assert!(round.eliminated.contains(&round.chosen), "round {}", round.round);
            assert!(!round.eliminated.contains(&t));
        }
    }
}

#[test]
fn sampling_runs_are_deterministic() {
    let (class, t) = witness_lab::benchmarks::instances::sampling_benchmark().unwrap();
    let f = TestFunctionClass::bellman_class(&class);
    let cfg = AlgoConfig {
        mode: Mode::Sampling,
        n: Some(300),
        n_e: Some(300),
        ..AlgoConfig::default()
    };
    let run = || run_main(&class, class.get(t), &f, &cfg, &SeedStreams::new(7).stream("run", 0)).unwrap();
    assert_eq!(run(), run());
}

// ── Benchmarks ──

#[test]
fn constructions_are_deterministic() {
    for d in 1..=3 {
        let a = serde_json::to_string(&build_separation_family(d).unwrap()).unwrap();
        let b = serde_json::to_string(&build_separation_family(d).unwrap()).unwrap();
        assert_eq!(a, b);
        let a = serde_json::to_string(&build_tilde_family(d).unwrap()).unwrap();
        let b = serde_json::to_string(&build_tilde_family(d).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn twins_are_reward_and_profile_equivalent_at_d4() {
    let report = profile_equivalence_report(4).unwrap();
    assert!(report.equivalent, "{:?}", report.mismatches);
    assert_eq!(report.sequences_checked, 256);
}

#[test]
fn separation_family_parameter_accounting() {
    for d in 1..=4 {
        let family = build_separation_family(d).unwrap();
        let m = &family[0];
        let s = m.structure();
        assert_eq!(s.num_values, 4);
        assert!(s.parents.iter().all(|p| p.len() == 1));
        let horizon = m.horizon();
        assert!(m.parameter_count() <= d * horizon * m.actions() * 16);
    }
    assert_eq!(build_overparam_class(3).unwrap().models.len(), 10 * 8);
}

#[test]
fn full_indicator_profiles_identify_states() {
    let mut r = ChaCha8Rng::seed_from_u64(26);
    let m = random_tabular(&RandomTabular::default(), &mut r);
    // One indicator table per (level, state): 1 at that state, 0 elsewhere.
    let mut functions = Vec::new();
    for h in 0..m.horizon() {
        for x in 0..m.states(h) {
            let table = (0..m.horizon())
                .map(|l| (0..m.states(l)).map(|y| vec![if (l, y) == (h, x) { 1.0 } else { 0.0 }; m.actions()]).collect())
                .collect();
            functions.push(table);
        }
    }
    let g = GClass { functions };
    for h in 0..m.horizon() {
        for x in 0..m.states(h) {
            let p = g_profile(&g, h, x).unwrap();
            let hits: Vec<usize> = p.rows.iter().enumerate().filter(|(_, r)| r[0] == 1.0).map(|(j, _)| j).collect();
            assert_eq!(hits.len(), 1);
            let offset: usize = (0..h).map(|l| m.states(l)).sum();
            assert_eq!(hits[0], offset + x);
        }
    }
    let constant = GClass {
        functions: vec![(0..m.horizon()).map(|l| vec![vec![0.5; m.actions()]; m.states(l)]).collect()],
    };
    assert_eq!(g_profile(&constant, 1, 0).unwrap().rows, g_profile(&constant, 1, 1).unwrap().rows);
}
