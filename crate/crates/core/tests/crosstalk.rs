mod common;

use std::collections::BTreeMap;

use common::{correlation, ks_p_value};
use optcal::crosstalk::{chain_adjacency, ChainParams};
use optcal::planner::StrategyKind;
use optcal::sampler::sample_multi;
use optcal::signal::{Param, Quadrature, RamseyModel};
use optcal::{
    build_chain_protocol, build_strategy, fit_least_squares, run_protocol, sample, GuessPolicy, ProtocolOptions,
    SampleMode, Target,
};

#[test]
fn chain_protocol_covers_every_parameter_once() {
    for n in 2..=50 {
        let exps = build_chain_protocol(n).unwrap();
        assert_eq!(exps.len(), 4);
        let adj = chain_adjacency(n);
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for (k, e) in exps.iter().enumerate() {
            assert!(e.violations(&adj).is_empty(), "n={n} exp {k}: {:?}", e.violations(&adj));
            for t in &e.targets {
                let key = match *t {
                    Target::Omega { qubit } => format!("w{qubit}"),
                    Target::Coupling { qubit, neighbor } => format!("J{}", qubit.min(neighbor)),
                };
                *seen.entry(key).or_default() += 1;
            }
        }
        assert_eq!(seen.len(), 2 * n - 1, "n={n}");
        assert!(seen.values().all(|&c| c == 1), "n={n}: {seen:?}");
    }
}

#[test]
fn noiseless_protocol_is_exact() {
    let chain = ChainParams::<f64>::random(9, (1.0, 0.2), (1.0, 0.2), (0.5, 1.0), 3).unwrap();
    for strategy in [StrategyKind::SingleTimeXY, StrategyKind::EquallySpacedX { n_times: 20 }] {
        let opts = ProtocolOptions {
            budget_per_qubit: 10_000,
            guess: GuessPolicy::Exact,
            mode: SampleMode::Noiseless,
            seed: 0,
        };
        let est = run_protocol(&chain, &strategy, &opts).unwrap();
        for i in 0..9 {
            assert!((est.omegas[i] - chain.omegas[i]).abs() < 1e-8, "{strategy:?} ω{i}");
            assert!((est.gammas[i] - chain.gammas[i]).abs() < 1e-8, "{strategy:?} γ{i}");
        }
        for e in 0..8 {
            assert!(
                (est.couplings[e] - chain.couplings[e]).abs() < 1e-8,
                "{strategy:?} J{e}"
            );
        }
    }
}

#[test]
fn ramsey_qubits_sample_independently() {
    let chain = ChainParams::new(vec![1.0, 1.1, 0.9], vec![0.5, 0.6, 0.4], vec![0.3, 0.2]).unwrap();
    let exp = &build_chain_protocol(3).unwrap()[0];
    let active: Vec<usize> = exp.ramsey_qubits().collect();
    assert!(active.len() >= 2);
    let (a, b) = (active[0], active[1]);
    let plan = optcal::fisher::MeasurementPlan::new(vec![optcal::PlanEntry {
        time: 0.8,
        quadrature: Quadrature::X,
        shots: 1,
    }])
    .unwrap();
    let trials = 10_000u64;
    let pairs: Vec<(f64, f64)> = (0..trials)
        .map(|s| {
            let out = sample_multi(exp, 0, &chain, &plan, s).unwrap();
            let pick = |i: usize| out[i].as_ref().unwrap().entries[0].mean;
            (pick(a), pick(b))
        })
        .collect();
    assert!(correlation(&pairs).abs() < 0.05);
}

#[test]
fn uncoupled_chain_reduces_to_single_qubits() {
    let chain = ChainParams::new(vec![1.0, 1.2, 0.8, 1.1], vec![1.0, 0.9, 1.1, 1.0], vec![0.0; 3]).unwrap();
    let strategy = StrategyKind::SingleTimeXY;
    let budget = 1_000;
    let seeds = 500u64;
    let protocol: Vec<Vec<f64>> = (0..seeds)
        .map(|s| {
            let opts = ProtocolOptions {
                budget_per_qubit: budget,
                guess: GuessPolicy::Exact,
                mode: SampleMode::Shots,
                seed: s,
            };
            run_protocol(&chain, &strategy, &opts).unwrap().omegas
        })
        .collect();
    for q in 0..4 {
        let truth = RamseyModel::two_param(chain.omegas[q], chain.gammas[q]);
        let plan = build_strategy(&strategy, &truth, budget, None).unwrap();
        let single: Vec<f64> = (0..seeds)
            .map(|s| {
                let data = sample(&truth, &plan, 1_000_000 + s).unwrap();
                fit_least_squares(&truth, &data, &[])
                    .unwrap()
                    .get(Param::Omega)
                    .unwrap()
            })
            .collect();
        let joint: Vec<f64> = protocol.iter().map(|w| w[q]).collect();
        let p = ks_p_value(joint, single);
        assert!(p > 0.01, "qubit {q}: p = {p}");
    }
}

#[test]
fn protocol_is_deterministic_across_thread_counts() {
    let chain = ChainParams::<f64>::random(8, (1.0, 0.2), (1.0, 0.2), (0.5, 1.0), 11).unwrap();
    let opts = ProtocolOptions {
        budget_per_qubit: 2_000,
        guess: GuessPolicy::Perturbed { relative_sigma: 0.05 },
        mode: SampleMode::Shots,
        seed: 42,
    };
    let strategy = StrategyKind::TwoTimeOptimalX;
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_protocol(&chain, &strategy, &opts).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run_protocol(&chain, &strategy, &opts).unwrap());
}
