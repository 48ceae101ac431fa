use driftmle::mc::{ergodic_average, run_experiment_with_info};
use driftmle::model::predicted_std;
use driftmle::{invariant_law, DiffusionModel, Execution, ExperimentConfig, Method};

fn config(a: &str, b: &str, ns: Vec<u64>, alphas: Vec<f64>, replicates: u32, master_seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        label: "t".into(),
        model: DiffusionModel::parse(a, b, 2.0, 1.0).unwrap(),
        alphas,
        ns,
        replicates,
        method: Method::Milstein,
        master_seed,
        substeps: 1,
    }
}

#[cfg(feature = "parallel")]
#[test]
fn identical_across_thread_pools() {
    let cfg = config("1-x", "2+sin(x)", vec![50, 100], vec![0.5, 0.9], 24, 7);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| driftmle::mc::run_experiment_with(&cfg, Execution::Parallel).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(16));
    assert_eq!(
        one,
        driftmle::mc::run_experiment_with(&cfg, Execution::Sequential).unwrap()
    );
}

#[test]
fn std_decreases_in_alpha() {
    let cfg = config("1-x", "2+sin(x)", vec![1000], vec![0.1, 0.5, 0.9], 100, 500);
    let out = run_experiment_with_info(&cfg, None, Execution::Parallel).unwrap();
    let std: Vec<f64> = out.cells.iter().map(|c| c.std_theta_hat).collect();
    assert!(std[2] < std[1] && std[1] < std[0], "{std:?}");
}

#[test]
fn ergodic_average_of_information_for_ou() {
    let model = DiffusionModel::parse("-x", "1", 2.0, 1.0).unwrap();
    let avg = ergodic_average(&model, |x| model.d(x).unwrap(), 1e4, 1e-3, Method::Milstein, 600).unwrap();
    assert!((avg - 0.25).abs() < 0.01, "{avg}");
}

#[test]
fn ergodic_second_moment_matches_quadrature() {
    let model = DiffusionModel::parse("1-x", "2+sin(x)", 2.0, 1.0).unwrap();
    let law = invariant_law(&model).unwrap();
    let quad = law.moment(2).unwrap();
    let avg = ergodic_average(&model, |x| x * x, 1e4, 1e-3, Method::Milstein, 601).unwrap();
    assert!((avg / quad - 1.0).abs() < 0.03, "ergodic {avg}, quadrature {quad}");
}

#[test]
fn ergodic_information_matches_quadrature_for_heavy_tails() {
    let model = DiffusionModel::parse("-x/(1+x^2)", "1", 2.0, 1.0).unwrap();
    let info = invariant_law(&model).unwrap().info;
    let avg = ergodic_average(&model, |x| model.d(x).unwrap(), 1e4, 1e-3, Method::Milstein, 602).unwrap();
    assert!((avg / info - 1.0).abs() < 0.02, "ergodic {avg}, quadrature {info}");
}

// ~1e9 simulation steps; run with `cargo test -- --ignored`.
#[test]
#[ignore]
fn observed_std_matches_prediction_for_ou() {
    let cfg = config("-x", "1", vec![2000], vec![0.9], 500, 700);
    let out = run_experiment_with_info(&cfg, Some(0.25), Execution::Parallel).unwrap();
    let cell = &out.cells[0];
    let predicted = predicted_std(0.25, 2000, 0.9);
    assert_eq!(cell.predicted_std, Some(predicted));
    assert!(
        (cell.std_theta_hat / predicted - 1.0).abs() < 0.2,
        "{} vs {predicted}",
        cell.std_theta_hat
    );
}
