mod common;

use common::mean_sd;
use optcal::planner::StrategyKind;
use optcal::signal::{Param, RamseyModel};
use optcal::{build_strategy, fit_least_squares, sample, Samples};

#[test]
fn fits_are_unbiased_at_large_budgets() {
    let truth = RamseyModel::two_param(1.0, 1.0);
    for kind in [StrategyKind::SingleTimeXY, StrategyKind::TwoTimeOptimalX] {
        let plan = build_strategy(&kind, &truth, 100_000, None).unwrap();
        let fits: Vec<(f64, f64)> = (0..300)
            .map(|s| {
                let data = sample(&truth, &plan, s).unwrap();
                let r = fit_least_squares(&truth, &data, &[]).unwrap();
                assert!(r.converged);
                (r.get(Param::Omega).unwrap(), r.get(Param::Gamma).unwrap())
            })
            .collect();
        for (k, name) in [(0, "omega"), (1, "gamma")] {
            let v: Vec<f64> = fits.iter().map(|f| if k == 0 { f.0 } else { f.1 }).collect();
            let (mean, sd) = mean_sd(&v);
            assert!(
                (mean - 1.0).abs() < 4.0 * sd / (v.len() as f64).sqrt(),
                "{kind:?} {name}: {mean} ± {sd}"
            );
        }
    }
}

#[test]
fn fit_survives_a_file_round_trip() {
    let truth = RamseyModel::two_param(0.7, 0.4);
    let plan = build_strategy(&StrategyKind::EquallySpacedX { n_times: 20 }, &truth, 5_000, None).unwrap();
    let data = sample(&truth, &plan, 9).unwrap();
    let mut buf = Vec::new();
    data.to_csv_writer(&mut buf).unwrap();
    let back = Samples::from_csv_reader(buf.as_slice()).unwrap();
    let a = fit_least_squares(&truth, &data, &[]).unwrap();
    let b = fit_least_squares(&truth, &back, &[]).unwrap();
    assert_eq!(a.params, b.params);
}
