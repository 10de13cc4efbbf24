//! Invariant suite behind `validate`: the structural identities, the
//! single-type results, the exact oracle and run determinism.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::decomposition::{check_identity, identity_scale};
use crate::error::{Error, Result};
use crate::model::{draw_universe, ScalarDistribution, UniverseConfig};
use crate::oracle::{enumerate_exact, mc_vs_oracle_against, DiscreteModelConfig};
use crate::rng::RngSeed;
use crate::sweep::{collect_trials, fig1_model, fig2_model, simulate_report, Execution};
use crate::theorizing::{limited_attention, select_post_hoc, ModelConfig, PolicyRule, TheoryPolicy, WeightVector};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

/// Trial budgets for one pass of the suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub identity_configs: usize,
    pub identity_trials: u64,
    pub single_type_trials: u64,
    pub attention_universes: usize,
    pub selection_trials: u64,
    pub oracle_trials: u64,
}

impl Budget {
    pub const QUICK: Budget = Budget {
        identity_configs: 20,
        identity_trials: 2_000,
        single_type_trials: 20_000,
        attention_universes: 2_000,
        selection_trials: 100_000,
        oracle_trials: 50_000,
    };

    pub const FULL: Budget = Budget {
        identity_configs: 100,
        identity_trials: 10_000,
        single_type_trials: 100_000,
        attention_universes: 10_000,
        selection_trials: 1_000_000,
        oracle_trials: 1_000_000,
    };
}

fn random_rule<R: Rng>(rng: &mut R, n: usize) -> PolicyRule {
    match rng.random_range(0..3) {
        0 => PolicyRule::UniformAll,
        1 => PolicyRule::TopK { k: rng.random_range(1..=n) },
        _ => PolicyRule::EliminateWorst { q: rng.random_range(0.0..0.99) },
    }
}

fn random_law<R: Rng>(rng: &mut R, sd_range: std::ops::Range<f64>) -> ScalarDistribution {
    if rng.random_bool(0.75) {
        ScalarDistribution::normal(rng.random_range(-1.0..1.0), rng.random_range(sd_range))
    } else {
        let k = rng.random_range(2..=4);
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut points: Vec<(f64, f64)> = raw
            .iter()
            .map(|w| (rng.random_range(-2.0..2.0), w / total))
            .collect();
        let drift: f64 = 1.0 - points.iter().map(|p| p.1).sum::<f64>();
        points[0].1 += drift;
        ScalarDistribution::Discrete { points }
    }
}

/// A random valid model: 2 to 50 ideas, normal or discrete laws, any mix of
/// policy rules, and a hurdle that is either absent or near the typical
/// measured quality.
pub fn random_model<R: Rng>(rng: &mut R) -> ModelConfig {
    let n = rng.random_range(2..=50);
    let prob_good = match rng.random_range(0..6) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.random_range(0.05..0.95),
    };
    let hurdle = if rng.random_bool(0.3) {
        f64::NEG_INFINITY
    } else {
        rng.random_range(-1.0..1.5)
    };
    ModelConfig {
        universe: UniverseConfig::new(n, random_law(rng, 0.1..3.0), random_law(rng, 0.1..2.0)),
        prob_good,
        good_policy: TheoryPolicy::good(random_rule(rng, n)),
        bad_policy: TheoryPolicy::bad(random_rule(rng, n)),
        hurdle,
    }
}

/// A random model small enough to enumerate exactly.
pub fn random_discrete<R: Rng>(rng: &mut R) -> DiscreteModelConfig {
    let n = rng.random_range(2..=5);
    let k = rng.random_range(2..=3);
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut eps_points: Vec<(f64, f64)> = raw.iter().map(|w| (rng.random_range(-1.5..1.5), w / total)).collect();
    let drift = 1.0 - eps_points.iter().map(|p| p.1).sum::<f64>();
    eps_points[0].1 += drift;
    DiscreteModelConfig {
        mu_values: (0..n).map(|_| rng.random_range(-1.0..2.0)).collect(),
        eps_points,
        prob_good: rng.random_range(0.2..0.8),
        good_policy: random_rule(rng, n),
        bad_policy: random_rule(rng, n),
        hurdle: if rng.random_bool(0.5) { f64::NEG_INFINITY } else { rng.random_range(-0.5..1.0) },
    }
}

fn suite_rng(tag: u64) -> ChaCha8Rng {
    RngSeed::new(0x5eed, tag).rng()
}

/// `|residual| / scale` over random configs; configs whose sample leaves a
/// present cell empty are redrawn and counted.
pub fn identity_check(configs: usize, trials: u64, exec: Execution) -> Result<Check> {
    let mut rng = suite_rng(1);
    let (mut worst, mut done, mut redrawn) = (0.0f64, 0usize, 0usize);
    while done < configs {
        let model = random_model(&mut rng);
        let seed = RngSeed::new(rng.random(), 0);
        let report = match simulate_report(&model, trials, seed, exec) {
            Ok(r) => r,
            Err(Error::EmptyCell { .. }) => {
                redrawn += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let residual = check_identity(&report)?;
        worst = worst.max(residual.abs() / identity_scale(&report));
        worst = worst.max(report.identity_residual.abs() / identity_scale(&report));
        done += 1;
    }
    Ok(Check::new(
        "decomposition identity",
        worst <= 1e-10,
        format!("{done} configs x {trials} trials, max relative residual {worst:.2e}, {redrawn} redrawn for empty cells"),
    ))
}

fn mean_se(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut s, mut ss) = (0.0, 0.0, 0.0);
    for x in xs {
        n += 1.0;
        s += x;
        ss += x * x;
    }
    let m = s / n;
    (m, ((ss / n - m * m).max(0.0) * n / (n - 1.0) / n).sqrt())
}

/// Selection bias of post hoc picks and the paired quality gain over a
/// priori picks, single uniform type.
pub fn single_type_checks(trials: u64, exec: Execution) -> Result<[Check; 2]> {
    let (o, d) = collect_trials(&fig1_model(), trials, RngSeed::new(11, 0), exec)?;
    let (bias, bias_se) = mean_se(d.iter().map(|r| r.mu_hat_star - r.mu_star));
    let (gain, gain_se) = mean_se(o.iter().zip(&d).map(|(a, b)| b.mu_star - a.mu_star));
    const Z99: f64 = 2.5758293035489;
    Ok([
        Check::new(
            "post hoc selection is biased upward",
            bias - Z99 * bias_se > 0.0,
            format!("E(mu_hat - mu | post hoc) = {bias:.4} (se {bias_se:.4}, {trials} trials)"),
        ),
        Check::new(
            "post hoc raises quality for a single uniform type",
            gain > 3.0 * gain_se,
            format!("E(mu|D) - E(mu|O) = {gain:.4} (se {gain_se:.4}, {trials} paired trials)"),
        ),
    ])
}

/// Reading only the best-measured candidate equals post hoc selection with
/// uniform weights on the candidate set.
pub fn attention_check(universes: usize) -> Result<Check> {
    let mut rng = suite_rng(3);
    let mut mismatches = 0usize;
    for u in 0..universes {
        let n = rng.random_range(1..=60);
        let cfg = UniverseConfig::new(n, ScalarDistribution::standard_normal(), ScalarDistribution::standard_normal());
        let universe = draw_universe(&cfg, RngSeed::new(17, u as u64));
        let mut support: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
        if support.is_empty() {
            support.push(rng.random_range(0..n));
        }
        let mut w = vec![0.0; n];
        for &i in &support {
            w[i] = 1.0 / support.len() as f64;
        }
        let total: f64 = w.iter().sum();
        w[support[0]] += 1.0 - total;
        let weights = WeightVector::new(w)?;
        if limited_attention(&support, &universe)? != select_post_hoc(&weights, &universe) {
            mismatches += 1;
        }
    }
    Ok(Check::new(
        "limited attention equals post hoc selection",
        mismatches == 0,
        format!("{mismatches} mismatches over {universes} universes"),
    ))
}

/// Good types dominate a priori publications, bad types post hoc ones, and
/// a priori publications have higher true quality, under the two-type preset.
pub fn selection_checks(trials: u64, exec: Execution) -> Result<[Check; 2]> {
    let r = simulate_report(&fig2_model(), trials, RngSeed::new(13, 0), exec)?;
    let se = &r.standard_errors;
    let gap = r.p_good_given_o - r.p_good_given_d;
    let gap_se = se.p_good_given_o.unwrap_or(0.0).hypot(se.p_good_given_d.unwrap_or(0.0));
    let diff = r.mean_mu_o - r.mean_mu_d;
    let diff_se = se.difference.unwrap_or(0.0);
    Ok([
        Check::new(
            "publications sort good types to a priori, bad to post hoc",
            gap > 3.0 * gap_se && r.p_good_given_o > 0.5 && r.p_good_given_d < 0.5,
            format!(
                "P(G|O,pub) = {:.4}, P(G|D,pub) = {:.4}, gap se {gap_se:.4}",
                r.p_good_given_o, r.p_good_given_d
            ),
        ),
        Check::new(
            "a priori publications have higher true quality",
            diff > 3.0 * diff_se,
            format!("E(mu|O,pub) - E(mu|D,pub) = {diff:.4} (se {diff_se:.4})"),
        ),
    ])
}

/// The two-idea instance: qualities 0 and 1, noise +-1 equiprobable.
pub fn hand_instance() -> DiscreteModelConfig {
    DiscreteModelConfig {
        mu_values: vec![0.0, 1.0],
        eps_points: vec![(-1.0, 0.5), (1.0, 0.5)],
        prob_good: 0.0,
        good_policy: PolicyRule::UniformAll,
        bad_policy: PolicyRule::UniformAll,
        hurdle: f64::NEG_INFINITY,
    }
}

/// Largest |z| and the share of quantities within 4 standard errors over
/// random enumerable instances.
pub fn oracle_check(instances: usize, trials: u64, exec: Execution) -> Result<Check> {
    let hand = enumerate_exact(&hand_instance())?;
    let hand_ok = hand.mean_mu_d == 0.75 && hand.mean_mu_o == 0.5;
    let hand_z = mc_vs_oracle_against(&hand_instance(), &hand, trials, RngSeed::new(19, 0), exec)?;
    let hand_max = hand_z.iter().map(|z| z.z.abs()).fold(0.0, f64::max);
    let mut rng = suite_rng(5);
    let (mut within, mut total, mut skipped) = (0usize, 0usize, 0usize);
    let mut used = 0usize;
    while used < instances {
        let cfg = random_discrete(&mut rng);
        let exact = enumerate_exact(&cfg)?;
        match mc_vs_oracle_against(&cfg, &exact, trials, RngSeed::new(rng.random(), 0), exec) {
            Ok(zs) => {
                total += zs.len();
                within += zs.iter().filter(|z| z.z.abs() <= 4.0).count();
                used += 1;
            }
            Err(Error::EmptyCell { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    let share = within as f64 / total.max(1) as f64;
    Ok(Check::new(
        "simulation matches exact enumeration",
        hand_ok && hand_max <= 4.0 && share >= 0.95,
        format!(
            "hand instance E(mu|D) = {}, E(mu|O) = {}, max |z| {hand_max:.2}; random instances {within}/{total} within 4 se ({skipped} skipped)",
            hand.mean_mu_d, hand.mean_mu_o
        ),
    ))
}

/// Worker count must not change a report.
pub fn determinism_check(trials: u64) -> Result<Check> {
    let model = fig2_model();
    let a = simulate_report(&model, trials, RngSeed::new(7, 0), Execution::sequential())?;
    let b = simulate_report(&model, trials, RngSeed::new(7, 0), Execution::with_workers(4))?;
    let same = serde_json::to_string(&a).ok() == serde_json::to_string(&b).ok();
    Ok(Check::new(
        "results independent of worker count",
        same,
        format!("{trials} trials, 1 vs 4 workers"),
    ))
}

pub fn run_suite(budget: Budget, exec: Execution) -> Result<Vec<Check>> {
    let mut checks = vec![identity_check(budget.identity_configs, budget.identity_trials, exec)?];
    checks.extend(single_type_checks(budget.single_type_trials, exec)?);
    checks.push(attention_check(budget.attention_universes)?);
    checks.extend(selection_checks(budget.selection_trials, exec)?);
    checks.push(oracle_check(if budget == Budget::QUICK { 5 } else { 20 }, budget.oracle_trials, exec)?);
    checks.push(determinism_check(budget.single_type_trials)?);
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_models_are_valid() {
        let mut rng = suite_rng(99);
        for _ in 0..500 {
            random_model(&mut rng).validate().unwrap();
            random_discrete(&mut rng).validate().unwrap();
        }
    }

    #[test]
    fn attention_equivalence_holds_on_small_sample() {
        assert!(attention_check(500).unwrap().passed);
    }
}
