//! One PASS/FAIL line per acceptance criterion.
//!
//! Runs as a plain binary so the report prints without capture. A failing
//! criterion is reported but does not fail the run unless `OPTCAL_STRICT=1`.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use common::{five_point, oracle_fisher, plan};
use optcal::crosstalk::{chain_adjacency, ChainParams};
use optcal::fisher::{fisher_matrix, VarianceModel};
use optcal::harness::{
    crosstalk_scaling, rmse_vs_budget, robustness_scan, shot_ratio_curve, BudgetSweep, CrosstalkSweep, RobustnessSweep,
    ShotRatioSweep, SweepResult,
};
use optcal::planner::{PlannerConfig, ShotAllocation, StrategyKind};
use optcal::signal::{expectation, expectation_gradient, Param, Quadrature, RamseyModel};
use optcal::topology::DEFAULT_NODE_LIMIT;
use optcal::{
    build_chain_protocol, crb, invert_xy, optimize_plan, run_protocol, sample, sm5_naive_fit, tile, validate_plan,
    CouplingGraph, GuessPolicy, Plan, ProtocolOptions, SampleMode, Target, TilingEffort,
};

struct Report {
    failed: usize,
}

impl Report {
    fn record(&mut self, name: &str, ok: bool, detail: String, elapsed: Duration) {
        if !ok {
            self.failed += 1;
        }
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("{tag} {name} ({:.1} s): {detail}", elapsed.as_secs_f64());
    }
}

fn timed<R>(f: impl FnOnce() -> R) -> (R, Duration) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed())
}

fn times(p: &Plan) -> Vec<f64> {
    let mut t: Vec<f64> = p.entries.iter().map(|e| e.time).collect();
    t.dedup();
    t
}

fn labels() -> Vec<String> {
    optcal::harness::default_strategies()
        .iter()
        .map(|s| s.label())
        .collect()
}

fn optimal_times(r: &mut Report) {
    let ((ok, detail), dt) = timed(|| {
        let mut ok = true;
        let mut parts = Vec::new();
        for g in [0.5, 1.0, 2.0] {
            let m = RamseyModel::two_param(g, g);
            let p = optimize_plan(&m, &[Param::Omega, Param::Gamma], &PlannerConfig::default()).unwrap();
            let t = times(&p);
            let hit = t.len() == 2 && (t[0] * g - 0.4439).abs() < 1e-2 && (t[1] * g - 1.7846).abs() < 1e-2;
            ok &= hit;
            parts.push(format!(
                "γ={g}: γt={:?}",
                t.iter().map(|v| (v * g * 1e4).round() / 1e4).collect::<Vec<_>>()
            ));
        }
        (ok, parts.join("; "))
    });
    r.record(
        "optimal two-time X design",
        ok && dt < Duration::from_secs(10),
        detail,
        dt,
    );
}

/// Golden-section minimum of `f` on `[a, b]`.
fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let k = (5f64.sqrt() - 1.0) / 2.0;
    while b - a > 1e-10 * (1.0 + a.abs()) {
        let (c, d) = (b - k * (b - a), a + k * (b - a));
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    (a + b) / 2.0
}

fn xy_trace(w: f64, g: f64, t: f64) -> f64 {
    let m = RamseyModel::two_param(w, g);
    let p = plan(&[(t, Quadrature::X, 500), (t, Quadrature::Y, 500)]);
    crb(&fisher_matrix(&m, &[Param::Omega, Param::Gamma], &p, VarianceModel::UnitShot).unwrap())
        .unwrap()
        .trace_bound
}

fn analytic_optimum(r: &mut Report) {
    let ((ok, detail), dt) = timed(|| {
        let mut worst_t = 0.0f64;
        let mut worst_w = 0.0f64;
        for g in [0.5, 1.0, 2.0] {
            let t = golden(|t| xy_trace(1.0, g, t), 0.05 / g, 5.0 / g);
            worst_t = worst_t.max((t * g - 1.0).abs());
            let base = xy_trace(1.0, g, 1.0 / g);
            for w in [-2.0, 0.3, 1.0, 3.0] {
                worst_w = worst_w.max((xy_trace(w, g, 1.0 / g) / base - 1.0).abs());
            }
        }
        (
            worst_t < 1e-3 && worst_w < 1e-12,
            format!("max |γt*−1| = {worst_t:.2e}, max ω variation = {worst_w:.2e}"),
        )
    });
    r.record("XY single-time optimum at 1/γ, ω-independent", ok, detail, dt);
}

fn nmr_cross_check(r: &mut Report) {
    let ((ok, detail), dt) = timed(|| {
        let mut ok = true;
        let mut parts = Vec::new();
        for g in [0.5, 1.0, 2.0] {
            let m = RamseyModel::pure_decay(1.0, g);
            let cfg = PlannerConfig {
                shots: ShotAllocation::EqualPinned,
                ..PlannerConfig::default()
            };
            let p = optimize_plan(&m, &[Param::Amplitude, Param::Gamma], &cfg).unwrap();
            let t: Vec<f64> = times(&p).iter().map(|v| v * g).collect();
            ok &= t.len() == 2 && t[0] < 5e-2 && (t[1] - 1.1).abs() < 5e-2;
            parts.push(format!(
                "γ={g}: γt={:?}",
                t.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>()
            ));
        }
        (ok, parts.join("; "))
    });
    r.record("pure-decay design at {0, 1.1/γ}", ok, detail, dt);
}

fn omega_rows(res: &SweepResult, strategy: &str) -> Vec<(f64, f64, f64)> {
    res.rows
        .iter()
        .filter(|row| row.strategy == strategy && row.param == "omega")
        .map(|row| (row.grid_value, row.rmse, row.crb))
        .collect()
}

fn budget_checks(r: &mut Report) {
    let spec = BudgetSweep::default();
    let (res, dt) = timed(|| rmse_vs_budget(&spec).unwrap());

    let mut ok = true;
    let mut parts = Vec::new();
    for s in labels() {
        let worst = omega_rows(&res, &s)
            .iter()
            .map(|&(_, rmse, crb)| (rmse / crb - 1.0).abs())
            .fold(0.0f64, f64::max);
        ok &= worst <= 0.1;
        parts.push(format!("{s} max |RMSE/CRB−1| = {worst:.3}"));
    }
    r.record(
        "Monte Carlo RMSE matches the CRB",
        ok && dt < Duration::from_secs(180),
        parts.join("; "),
        dt,
    );

    let xy = omega_rows(&res, "single-time-xy");
    let two = omega_rows(&res, "two-time-optimal-x");
    let ratios: Vec<f64> = xy.iter().zip(&two).map(|(a, b)| a.1 / b.1).collect();
    let crb_ratio = xy[0].2 / two[0].2;
    let ok = ratios.iter().all(|q| (0.65..=0.76).contains(q));
    r.record(
        "RMSE(XY)/RMSE(two-time) in [0.65, 0.76]",
        ok,
        format!(
            "RMSE ratios {:?} across budgets, CRB ratio {crb_ratio:.3}, variance ratio {:.3}",
            ratios.iter().map(|q| (q * 1e3).round() / 1e3).collect::<Vec<_>>(),
            crb_ratio * crb_ratio
        ),
        Duration::ZERO,
    );

    let mut ok = true;
    let mut parts = Vec::new();
    for s in labels() {
        let pts = omega_rows(&res, &s);
        let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        ok &= (-0.55..=-0.45).contains(&slope);
        parts.push(format!("{s} {slope:.3}"));
    }
    r.record(
        "shot-noise slope in [−0.55, −0.45]",
        ok,
        parts.join("; "),
        Duration::ZERO,
    );
}

fn robustness(r: &mut Report) {
    let (res, dt) = timed(|| robustness_scan(&RobustnessSweep::default()).unwrap());
    let spread: BTreeMap<String, f64> = labels()
        .into_iter()
        .map(|s| {
            let v: Vec<f64> = omega_rows(&res, &s).iter().map(|p| p.1).collect();
            let hi = v.iter().copied().fold(f64::MIN, f64::max);
            let lo = v.iter().copied().fold(f64::MAX, f64::min);
            (s, hi / lo)
        })
        .collect();
    let xy = spread["single-time-xy"];
    let ok = spread.iter().all(|(k, &v)| k == "single-time-xy" || xy < v);
    let detail = spread
        .iter()
        .map(|(k, v)| format!("{k} {v:.3}"))
        .collect::<Vec<_>>()
        .join("; ");
    r.record("XY is least sensitive to the dephasing guess", ok, detail, dt);
}

fn shot_ratio(r: &mut Report) {
    let spec = ShotRatioSweep::default();
    let (res, dt) = timed(|| shot_ratio_curve(&spec).unwrap());
    let mut ok = true;
    let mut parts = Vec::new();
    for row in &res.rows {
        let x = row.grid_value;
        if x <= 1.0 {
            ok &= (row.rmse - 1.0).abs() <= 0.1;
        }
        if x == 3.0 {
            ok &= (row.rmse - 0.6).abs() <= 0.1;
        }
        parts.push(format!("{x}: {:.3}", row.rmse));
    }
    r.record("shot ratio ≈1 for γ ≤ ω and ≈0.6 at γ = 3ω", ok, parts.join(", "), dt);
}

fn crosstalk(r: &mut Report) {
    let (res, dt) = timed(|| crosstalk_scaling(&CrosstalkSweep::default()).unwrap());
    let mut ok = true;
    let mut parts = Vec::new();
    let per_n = |s: &str| -> Vec<(f64, f64)> {
        res.rows
            .iter()
            .filter(|row| row.strategy == s && row.param == "J")
            .map(|row| (row.grid_value, row.rmse))
            .collect()
    };
    for s in labels() {
        let v = per_n(&s);
        let hi = v.iter().map(|p| p.1).fold(f64::MIN, f64::max);
        let lo = v.iter().map(|p| p.1).fold(f64::MAX, f64::min);
        ok &= hi / lo < 2.0;
        parts.push(format!("{s} max/min {:.3}", hi / lo));
    }
    let xy = per_n("single-time-xy");
    for (k, &(n, e)) in xy.iter().enumerate() {
        for s in labels().iter().filter(|s| s.as_str() != "single-time-xy") {
            ok &= e < per_n(s)[k].1;
        }
        parts.push(format!("n={n} XY {e:.4}"));
    }
    let flagged = res.rows.iter().filter(|row| row.flagged()).count();
    parts.push(format!("{flagged} flagged rows"));
    r.record(
        "crosstalk J error flat in n, XY best",
        ok && dt < Duration::from_secs(300),
        parts.join("; "),
        dt,
    );
}

fn negative_control(r: &mut Report) {
    let ((ok, detail), dt) = timed(|| {
        let trials = 100u64;
        let (mut naive, mut proto) = (0.0, 0.0);
        for s in 0..trials {
            let chain = ChainParams::<f64>::random(3, (1.0, 0.2), (1.0, 0.2), (0.5, 1.0), 7_000 + s).unwrap();
            let opts = ProtocolOptions {
                budget_per_qubit: 10_000,
                guess: GuessPolicy::Exact,
                mode: SampleMode::Shots,
                seed: s,
            };
            let est = run_protocol(&chain, &StrategyKind::SingleTimeXY, &opts).unwrap();
            proto += est
                .couplings
                .iter()
                .zip(&chain.couplings)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>();
            let init = [chain.omegas[1], chain.gammas[1], chain.couplings[0], chain.couplings[1]];
            let fit = sm5_naive_fit(&chain, est.total_shots, 20, init, s).unwrap();
            naive += fit
                .couplings
                .iter()
                .zip(&chain.couplings)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>();
        }
        let ratio = (naive / proto).sqrt();
        (ratio >= 5.0, format!("naive/protocol J RMSE = {ratio:.1}"))
    });
    r.record("global-superposition fit is ≥5× worse", ok, detail, dt);
}

fn property_suites(r: &mut Report) {
    let ((fails, detail), dt) = timed(|| {
        let mut fails: Vec<&str> = Vec::new();

        let p = plan(&[
            (0.3, Quadrature::X, 120),
            (0.9, Quadrature::Y, 200),
            (1.7, Quadrature::X, 150),
        ]);
        for m in [
            RamseyModel::two_param(1.0, 1.0),
            RamseyModel::five_param(0.8, 0.1, 0.3, 1.2, 0.5),
        ] {
            for vm in [VarianceModel::UnitShot, VarianceModel::Binomial] {
                let free = m.params();
                let free = if free.len() == 5 { &free[..3] } else { free };
                let fi = fisher_matrix(&m, free, &p, vm).unwrap();
                let o = oracle_fisher(&m, &fi.labels, &p, vm);
                let scale = o.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
                let bad =
                    (0..fi.dim()).any(|i| (0..fi.dim()).any(|j| (fi.matrix[i][j] - o[i][j]).abs() > 1e-4 * scale));
                if bad {
                    fails.push("fisher");
                }
            }
        }

        let mut grad_ok = true;
        let mut circle_ok = true;
        let mut invert_ok = true;
        for k in 0..200 {
            let u = |s: f64| ((k as f64 + 1.0) * s).sin() * 0.5 + 0.5;
            let (w, g, t) = (-3.0 + 6.0 * u(0.917), 0.05 + 2.0 * u(1.371), 0.05 + 0.95 * u(2.113));
            let m = RamseyModel::five_param(0.9, 0.05, 0.2, w, g);
            for q in [Quadrature::X, Quadrature::Y] {
                let gr = expectation_gradient(&m, q, t, m.params()).unwrap();
                let scale = gr.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                for (i, &p) in m.params().iter().enumerate() {
                    let v0 = m.get(p).unwrap();
                    let fd = five_point(
                        |v| expectation(&m.with(p, v).unwrap(), q, t).unwrap(),
                        v0,
                        1e-3 * v0.abs().max(1.0),
                    );
                    grad_ok &= (fd - gr[i]).abs() <= 1e-6 * gr[i].abs().max(scale) + 1e-14;
                }
            }
            let m = RamseyModel::two_param(w, g);
            let x = expectation(&m, Quadrature::X, t).unwrap();
            let y = expectation(&m, Quadrature::Y, t).unwrap();
            circle_ok &= (x * x + y * y - (-2.0 * g * t).exp()).abs() < 1e-12;
            let inv = invert_xy(x, y, t, None).unwrap();
            invert_ok &= (inv.omega - w).abs() < 1e-9 && (inv.gamma - g).abs() < 1e-9;
        }
        for (ok, name) in [(grad_ok, "gradient"), (circle_ok, "X²+Y²"), (invert_ok, "invert_xy")] {
            if !ok {
                fails.push(name);
            }
        }

        let m = RamseyModel::two_param(1.0, 0.5);
        let sp = plan(&[(0.4, Quadrature::X, 100), (1.3, Quadrature::Y, 400)]);
        let runs: Vec<_> = (0..1000).map(|s| sample(&m, &sp, s).unwrap()).collect();
        for (k, e) in sp.entries.iter().enumerate() {
            let mu = expectation(&m, e.quadrature, e.time).unwrap();
            let v: Vec<f64> = runs.iter().map(|r| r.entries[k].mean).collect();
            let (mean, sd) = common::mean_sd(&v);
            let expect = ((1.0 - mu * mu) / e.shots as f64).sqrt();
            if (sd / expect - 1.0).abs() > 0.1 || (mean - mu).abs() > 4.0 * expect / 1000f64.sqrt() {
                fails.push("sampler moments");
            }
        }

        for s in 0..100u64 {
            let g = CouplingGraph::random(2 + (s as usize % 19), 0.2, s).unwrap();
            if !validate_plan(&g, &tile(&g, TilingEffort::Greedy).unwrap()).is_empty() {
                fails.push("tiler");
                break;
            }
        }

        for n in 2..=50 {
            let exps = build_chain_protocol(n).unwrap();
            let adj = chain_adjacency(n);
            let mut seen: BTreeMap<(u8, usize), usize> = BTreeMap::new();
            for e in &exps {
                for t in &e.targets {
                    let key = match *t {
                        Target::Omega { qubit } => (0, qubit),
                        Target::Coupling { qubit, neighbor } => (1, qubit.min(neighbor)),
                    };
                    *seen.entry(key).or_default() += 1;
                }
            }
            let exact = seen.len() == 2 * n - 1 && seen.values().all(|&c| c == 1);
            if !exact || exps.iter().any(|e| !e.violations(&adj).is_empty()) {
                fails.push("chain coverage");
                break;
            }
        }

        let chain = ChainParams::<f64>::random(6, (1.0, 0.2), (1.0, 0.2), (0.5, 1.0), 1).unwrap();
        let opts = ProtocolOptions {
            budget_per_qubit: 2_000,
            guess: GuessPolicy::Perturbed { relative_sigma: 0.05 },
            mode: SampleMode::Shots,
            seed: 9,
        };
        let a = run_protocol(&chain, &StrategyKind::TwoTimeOptimalX, &opts).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap()
            .install(|| run_protocol(&chain, &StrategyKind::TwoTimeOptimalX, &opts).unwrap());
        let small = BudgetSweep {
            budgets: vec![1_000],
            trials: 30,
            ..BudgetSweep::default()
        };
        if a != b || rmse_vs_budget(&small).unwrap().rows != rmse_vs_budget(&small).unwrap().rows {
            fails.push("determinism");
        }

        let detail = if fails.is_empty() {
            "fisher, gradient, X²+Y², sampler, invert_xy, tiler, chain coverage, determinism".to_string()
        } else {
            format!("failing: {}", fails.join(", "))
        };
        (fails.len(), detail)
    });
    r.record("property suites", fails == 0, detail, dt);
}

fn tiling(r: &mut Report) {
    let ((ok, detail), dt) = timed(|| {
        let paths: Vec<usize> = (4..=30)
            .map(|n| {
                tile(&CouplingGraph::path(n).unwrap(), TilingEffort::Greedy)
                    .unwrap()
                    .len()
            })
            .collect();
        let hh = CouplingGraph::heavy_hex(3).unwrap();
        let p = tile(
            &hh,
            TilingEffort::Exhaustive {
                limit: DEFAULT_NODE_LIMIT,
            },
        )
        .unwrap();
        let ok = paths.iter().all(|&k| k == 4) && p.len() == 4 && validate_plan(&hh, &p).is_empty();
        (
            ok,
            format!(
                "paths n=4..30 → {:?}; heavy-hex ({} qubits) → {} (search complete: {:?})",
                paths.iter().copied().collect::<std::collections::BTreeSet<_>>(),
                hh.n,
                p.len(),
                p.exhaustive_complete
            ),
        )
    });
    r.record("tiling counts", ok, detail, dt);
}

fn main() {
    let mut r = Report { failed: 0 };
    optimal_times(&mut r);
    analytic_optimum(&mut r);
    nmr_cross_check(&mut r);
    budget_checks(&mut r);
    robustness(&mut r);
    shot_ratio(&mut r);
    crosstalk(&mut r);
    negative_control(&mut r);
    property_suites(&mut r);
    tiling(&mut r);
    println!("{} criteria failed", r.failed);
    if r.failed > 0 && std::env::var("OPTCAL_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
