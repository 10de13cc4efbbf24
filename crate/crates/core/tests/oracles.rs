//! Closed-form checks of the simulator against independent calculations.

use approx::assert_relative_eq;
use posthoc::decomposition::check_identity;
use posthoc::oracle::mc_vs_oracle_against;
use posthoc::sweep::{
    fig1_model, fig2_model, run_sweep, simulate_accumulator, simulate_report, Execution, SweepAxis, SweepConfig,
};
use posthoc::validation::random_discrete;
use posthoc::{enumerate_exact, DiscreteModelConfig, PolicyRule, Regime, RngSeed, TheoryType};
use statrs::distribution::{ContinuousCDF, Normal};

#[test]
fn post_hoc_publication_rate_matches_max_of_normals() {
    // Single uniform type: D publishes iff the largest of 100 measured
    // qualities, each N(0, 0.5^2 + 1), clears 2.
    let mut model = fig2_model();
    model.prob_good = 0.0;
    let n = 400_000u64;
    let acc = simulate_accumulator(&model, n, RngSeed::new(5, 0), Execution::default()).unwrap();
    let rate = acc.cell(Regime::PostHoc, TheoryType::Bad).n as f64 / n as f64;
    let phi = Normal::new(0.0, 1.25f64.sqrt()).unwrap().cdf(2.0);
    let exact = 1.0 - phi.powi(100);
    let se = (exact * (1.0 - exact) / n as f64).sqrt();
    assert!(rate > 0.0 && rate < 1.0);
    assert!((rate - exact).abs() < 4.0 * se, "rate {rate} vs {exact} (se {se})");
}

#[test]
fn a_priori_uniform_selection_is_unbiased() {
    // A uniformly drawn idea has E(mu) = 0 and E(mu_hat - mu) = 0.
    let n = 200_000u64;
    let r = simulate_report(&fig1_model(), n, RngSeed::new(9, 0), Execution::default()).unwrap();
    let se = r.standard_errors.mean_mu_o.unwrap();
    assert!(r.mean_mu_o.abs() < 4.0 * se, "{} (se {se})", r.mean_mu_o);
    let cell = r.cell(Regime::APriori, TheoryType::Bad);
    let bias = cell.mean_mu_hat.unwrap() - cell.mean_mu.unwrap();
    assert!(bias.abs() < 4.0 * 2f64.sqrt() / (n as f64).sqrt(), "{bias}");
}

#[test]
fn post_hoc_quality_matches_regression_on_maximum() {
    // With mu, eps iid N(0,1), E(mu | mu_hat) = mu_hat / 2, so the post hoc
    // pick has E(mu) = E(max of 100 N(0,2)) / 2. The expected maximum of 100
    // standard normals is 2.5076.
    let n = 200_000u64;
    let r = simulate_report(&fig1_model(), n, RngSeed::new(10, 0), Execution::default()).unwrap();
    let expected = 2.5076 * 2f64.sqrt() / 2.0;
    assert_relative_eq!(r.mean_mu_d, expected, max_relative = 0.005);
    let cell = r.cell(Regime::PostHoc, TheoryType::Bad);
    assert_relative_eq!(cell.mean_mu_hat.unwrap(), 2.0 * expected, max_relative = 0.005);
}

#[test]
fn exact_reports_satisfy_identity_to_machine_precision() {
    let mut rng = RngSeed::new(21, 0).rng();
    for _ in 0..200 {
        let cfg = random_discrete(&mut rng);
        let Ok(exact) = enumerate_exact(&cfg) else { continue };
        let scale = 1f64.max(exact.mean_mu_o.abs()).max(exact.mean_mu_d.abs());
        assert!(exact.identity_residual.abs() <= 1e-14 * scale, "{cfg:?}: {}", exact.identity_residual);
    }
}

#[test]
fn mismatched_hurdle_is_detected() {
    // Negative control: simulate with a hurdle the oracle does not know about.
    let cfg = DiscreteModelConfig {
        mu_values: vec![-0.5, 0.2, 1.0],
        eps_points: vec![(-1.0, 0.3), (0.0, 0.4), (1.0, 0.3)],
        prob_good: 0.5,
        good_policy: PolicyRule::TopK { k: 1 },
        bad_policy: PolicyRule::UniformAll,
        hurdle: f64::NEG_INFINITY,
    };
    let exact = enumerate_exact(&cfg).unwrap();
    let faulty = DiscreteModelConfig { hurdle: 0.5, ..cfg };
    let zs = mc_vs_oracle_against(&faulty, &exact, 100_000, RngSeed::new(4, 0), Execution::default()).unwrap();
    assert!(zs.iter().any(|z| z.z.abs() > 10.0), "{zs:?}");
}

#[test]
fn homogeneous_types_have_no_darwinian_learning() {
    let result = run_sweep(
        &SweepConfig {
            base: fig2_model(),
            axis: SweepAxis::HeterogeneityQ,
            grid: vec![0.0, 0.5],
            n_trials: 200_000,
            master_seed: 8,
        },
        Execution::default(),
    )
    .unwrap();
    for p in &result.points {
        check_identity(p.report.as_ref().unwrap()).unwrap();
    }
    let r = result.points[0].report.as_ref().unwrap();
    let se = r.standard_errors.darwinian_learning.unwrap();
    assert!(r.darwinian_learning.abs() <= 4.0 * se, "{} (se {se})", r.darwinian_learning);
    let imp_se = r.standard_errors.improvement.unwrap();
    assert!(r.improvement.unwrap() >= -4.0 * imp_se);
}
