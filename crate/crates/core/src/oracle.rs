//! Exact ground truth for small models with fixed true qualities and a
//! finite noise law: every noise vector is enumerated with its probability.

use serde::{Deserialize, Serialize};

use crate::decomposition::StandardErrors;
use crate::error::{Error, Result};
use crate::model::{ScalarDistribution, UniverseConfig};
use crate::rng::RngSeed;
use crate::sweep::{simulate_report, Execution};
use crate::theorizing::{weights_for_mu, ModelConfig, PolicyRule, Regime, TheoryPolicy, TheoryType};

/// Largest number of noise vectors `enumerate_exact` will visit.
pub const ENUMERATION_BUDGET: f64 = 1e7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteModelConfig {
    pub mu_values: Vec<f64>,
    pub eps_points: Vec<(f64, f64)>,
    pub prob_good: f64,
    pub good_policy: PolicyRule,
    pub bad_policy: PolicyRule,
    #[serde(with = "crate::io::config::hurdle_serde")]
    pub hurdle: f64,
}

impl DiscreteModelConfig {
    /// Number of noise vectors to enumerate, `|eps_points|^N`.
    pub fn noise_vectors(&self) -> f64 {
        (self.eps_points.len() as f64).powi(self.mu_values.len() as i32)
    }

    /// The same model in the simulator's terms.
    pub fn to_model(&self) -> ModelConfig {
        let n = self.mu_values.len();
        ModelConfig {
            universe: UniverseConfig {
                n_ideas: n,
                mu_dist: ScalarDistribution::point_mass(0.0),
                eps_dist: ScalarDistribution::Discrete {
                    points: self.eps_points.clone(),
                },
                fixed_mu: Some(self.mu_values.clone()),
            },
            prob_good: self.prob_good,
            good_policy: TheoryPolicy::good(self.good_policy),
            bad_policy: TheoryPolicy::bad(self.bad_policy),
            hurdle: self.hurdle,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu_values.is_empty() {
            return Err(Error::config("mu_values", "expected at least one idea, got none"));
        }
        self.to_model().validate()?;
        let required = self.noise_vectors();
        if required > ENUMERATION_BUDGET {
            return Err(Error::Budget {
                required,
                limit: ENUMERATION_BUDGET,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactCell {
    pub regime: Regime,
    pub theory_type: TheoryType,
    /// Joint probability of this type, this regime's selection, and publication.
    pub probability: f64,
    pub mean_mu: Option<f64>,
    pub mean_mu_hat: Option<f64>,
    pub se_mean_mu: Option<f64>,
    pub se_mean_mu_hat: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactReport {
    pub cells: Vec<ExactCell>,
    #[serde(rename = "p_good_given_O")]
    pub p_good_given_o: f64,
    #[serde(rename = "p_good_given_D")]
    pub p_good_given_d: f64,
    #[serde(rename = "mean_mu_O")]
    pub mean_mu_o: f64,
    #[serde(rename = "mean_mu_D")]
    pub mean_mu_d: f64,
    #[serde(rename = "mean_mu_hat_O")]
    pub mean_mu_hat_o: f64,
    #[serde(rename = "mean_mu_hat_D")]
    pub mean_mu_hat_d: f64,
    pub darwinian_learning: f64,
    pub statistical_learning: f64,
    pub improvement: Option<f64>,
    pub identity_residual: f64,
    /// Always null: exact values carry no sampling error.
    pub standard_errors: StandardErrors,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub single_type: Option<TheoryType>,
}

impl ExactReport {
    pub fn cell(&self, regime: Regime, theory_type: TheoryType) -> &ExactCell {
        let r = Regime::BOTH.iter().position(|&x| x == regime).unwrap();
        let t = TheoryType::BOTH.iter().position(|&x| x == theory_type).unwrap();
        &self.cells[2 * r + t]
    }
}

#[derive(Clone, Copy, Default)]
struct Mass {
    p: f64,
    mu: f64,
    mu_hat: f64,
}

impl Mass {
    fn add(&mut self, p: f64, mu: f64, mu_hat: f64) {
        self.p += p;
        self.mu += p * mu;
        self.mu_hat += p * mu_hat;
    }
}

pub fn enumerate_exact(config: &DiscreteModelConfig) -> Result<ExactReport> {
    config.validate()?;
    let mu = &config.mu_values;
    let n = mu.len();
    let h = config.hurdle;
    let prior = [config.prob_good, 1.0 - config.prob_good];
    let rules = [config.good_policy, config.bad_policy];
    let weights = [weights_for_mu(&rules[0], mu)?, weights_for_mu(&rules[1], mu)?];

    // [regime][type]
    let mut mass = [[Mass::default(); 2]; 2];

    // A priori: the pick is independent of noise, so each idea contributes
    // its weight times its own publication mass.
    for t in 0..2 {
        if prior[t] == 0.0 {
            continue;
        }
        for &i in weights[t].support() {
            let w = prior[t] * weights[t].weights()[i];
            for &(e, p) in &config.eps_points {
                let mu_hat = mu[i] + e;
                if mu_hat > h {
                    mass[0][t].add(w * p, mu[i], mu_hat);
                }
            }
        }
    }

    // Post hoc: odometer over all noise vectors.
    let k = config.eps_points.len();
    let mut digits = vec![0usize; n];
    let mut mu_hat = vec![0.0; n];
    loop {
        let mut p = 1.0;
        for i in 0..n {
            let (e, pe) = config.eps_points[digits[i]];
            mu_hat[i] = mu[i] + e;
            p *= pe;
        }
        for t in 0..2 {
            if prior[t] == 0.0 {
                continue;
            }
            let mut best = None::<usize>;
            for &i in weights[t].support() {
                if best.is_none_or(|b| mu_hat[i] > mu_hat[b]) {
                    best = Some(i);
                }
            }
            let best = best.expect("non-empty support");
            if mu_hat[best] > h {
                mass[1][t].add(prior[t] * p, mu[best], mu_hat[best]);
            }
        }
        let mut pos = 0;
        loop {
            if pos == n {
                return finish(config, &mass);
            }
            digits[pos] += 1;
            if digits[pos] < k {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

fn finish(config: &DiscreteModelConfig, mass: &[[Mass; 2]; 2]) -> Result<ExactReport> {
    let prior = [config.prob_good, 1.0 - config.prob_good];
    for (r, regime) in Regime::BOTH.into_iter().enumerate() {
        for (t, theory_type) in TheoryType::BOTH.into_iter().enumerate() {
            if prior[t] > 0.0 && mass[r][t].p == 0.0 {
                return Err(Error::EmptyCell { regime, theory_type });
            }
        }
    }
    let mean = |m: &Mass| (m.p > 0.0).then(|| m.mu / m.p);
    let mean_hat = |m: &Mass| (m.p > 0.0).then(|| m.mu_hat / m.p);

    let mut cells = Vec::with_capacity(4);
    for (r, regime) in Regime::BOTH.into_iter().enumerate() {
        for (t, theory_type) in TheoryType::BOTH.into_iter().enumerate() {
            cells.push(ExactCell {
                regime,
                theory_type,
                probability: mass[r][t].p,
                mean_mu: mean(&mass[r][t]),
                mean_mu_hat: mean_hat(&mass[r][t]),
                se_mean_mu: None,
                se_mean_mu_hat: None,
            });
        }
    }

    let total = |r: usize| mass[r][0].p + mass[r][1].p;
    let p_o = mass[0][0].p / total(0);
    let p_d = mass[1][0].p / total(1);
    let mean_o = (mass[0][0].mu + mass[0][1].mu) / total(0);
    let mean_d = (mass[1][0].mu + mass[1][1].mu) / total(1);
    let mean_hat_o = (mass[0][0].mu_hat + mass[0][1].mu_hat) / total(0);
    let mean_hat_d = (mass[1][0].mu_hat + mass[1][1].mu_hat) / total(1);

    let single_type = if prior[0] == 0.0 {
        Some(TheoryType::Bad)
    } else if prior[1] == 0.0 {
        Some(TheoryType::Good)
    } else {
        None
    };
    let (dl, sl) = match single_type {
        Some(t) => {
            let s = if t == TheoryType::Good { 0 } else { 1 };
            (0.0, mean(&mass[1][s]).unwrap() - mean(&mass[0][s]).unwrap())
        }
        None => {
            let m = |r: usize, t: usize| mean(&mass[r][t]).unwrap();
            let dl = (p_o - p_d) * (m(0, 0) - m(0, 1));
            let sl = p_d * (m(1, 0) - m(0, 0)) + (1.0 - p_d) * (m(1, 1) - m(0, 1));
            (dl, sl)
        }
    };

    Ok(ExactReport {
        cells,
        p_good_given_o: p_o,
        p_good_given_d: p_d,
        mean_mu_o: mean_o,
        mean_mu_d: mean_d,
        mean_mu_hat_o: mean_hat_o,
        mean_mu_hat_d: mean_hat_d,
        darwinian_learning: dl,
        statistical_learning: sl,
        improvement: (mean_o > 0.0).then(|| mean_d / mean_o - 1.0),
        identity_residual: (mean_o - mean_d) - (dl - sl),
        standard_errors: StandardErrors::default(),
        single_type,
    })
}

/// Standardized gap between one simulated quantity and its exact value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZScore {
    pub quantity: String,
    pub simulated: f64,
    pub exact: f64,
    pub standard_error: Option<f64>,
    pub z: f64,
}

fn z_score(quantity: &str, simulated: f64, exact: f64, se: Option<f64>) -> ZScore {
    let gap = simulated - exact;
    let z = match se {
        Some(se) if se > 0.0 => gap / se,
        _ if gap.abs() <= 1e-12 * exact.abs().max(1.0) => 0.0,
        _ => f64::INFINITY.copysign(gap),
    };
    ZScore {
        quantity: quantity.to_string(),
        simulated,
        exact,
        standard_error: se,
        z,
    }
}

/// Runs the simulator on the discrete model and standardizes each reported
/// quantity against `exact`.
pub fn mc_vs_oracle_against(
    config: &DiscreteModelConfig,
    exact: &ExactReport,
    n_trials: u64,
    seed: RngSeed,
    exec: Execution,
) -> Result<Vec<ZScore>> {
    if n_trials < 10_000 {
        return Err(Error::config(
            "n_trials",
            format!("expected at least 10000 trials, got {n_trials}"),
        ));
    }
    let mc = simulate_report(&config.to_model(), n_trials, seed, exec)?;
    let se = &mc.standard_errors;
    let mut out = vec![
        z_score("p_good_given_O", mc.p_good_given_o, exact.p_good_given_o, se.p_good_given_o),
        z_score("p_good_given_D", mc.p_good_given_d, exact.p_good_given_d, se.p_good_given_d),
        z_score("mean_mu_O", mc.mean_mu_o, exact.mean_mu_o, se.mean_mu_o),
        z_score("mean_mu_D", mc.mean_mu_d, exact.mean_mu_d, se.mean_mu_d),
        z_score("darwinian_learning", mc.darwinian_learning, exact.darwinian_learning, se.darwinian_learning),
        z_score(
            "statistical_learning",
            mc.statistical_learning,
            exact.statistical_learning,
            se.statistical_learning,
        ),
    ];
    for r in Regime::BOTH {
        for t in TheoryType::BOTH {
            let (m, x) = (mc.cell(r, t), exact.cell(r, t));
            if let (Some(a), Some(b)) = (m.mean_mu, x.mean_mu) {
                out.push(z_score(&format!("mean_mu[{r},{t}]"), a, b, m.se_mean_mu));
            }
        }
    }
    Ok(out)
}

pub fn mc_vs_oracle(config: &DiscreteModelConfig, n_trials: u64, seed: RngSeed) -> Result<Vec<ZScore>> {
    let exact = enumerate_exact(config)?;
    mc_vs_oracle_against(config, &exact, n_trials, seed, Execution::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hand(eps: Vec<(f64, f64)>) -> DiscreteModelConfig {
        DiscreteModelConfig {
            mu_values: vec![0.0, 1.0],
            eps_points: eps,
            prob_good: 0.0,
            good_policy: PolicyRule::UniformAll,
            bad_policy: PolicyRule::UniformAll,
            hurdle: f64::NEG_INFINITY,
        }
    }

    #[test]
    fn two_idea_instance_is_exact() {
        let r = enumerate_exact(&hand(vec![(-1.0, 0.5), (1.0, 0.5)])).unwrap();
        assert_eq!(r.mean_mu_d, 0.75);
        assert_eq!(r.mean_mu_o, 0.5);
        assert_eq!(r.identity_residual, 0.0);
        assert_eq!(r.single_type, Some(TheoryType::Bad));
    }

    #[test]
    fn zero_noise_post_hoc_finds_the_best() {
        let r = enumerate_exact(&hand(vec![(0.0, 1.0)])).unwrap();
        assert_eq!(r.mean_mu_d, 1.0);
        assert_eq!(r.mean_mu_o, 0.5);
    }

    #[test]
    fn single_best_good_type_recommends_the_best() {
        let mut c = hand(vec![(-1.0, 0.5), (1.0, 0.5)]);
        c.prob_good = 1.0;
        c.good_policy = PolicyRule::TopK { k: 1 };
        let r = enumerate_exact(&c).unwrap();
        assert_eq!(r.mean_mu_o, 1.0);
        assert_eq!(r.single_type, Some(TheoryType::Good));
    }

    #[test]
    fn budget_is_enforced() {
        let mut c = hand(vec![(-1.0, 0.25), (0.0, 0.5), (1.0, 0.25)]);
        c.mu_values = vec![0.0; 15];
        match enumerate_exact(&c).unwrap_err() {
            Error::Budget { required, limit } => {
                assert_eq!(required, 3f64.powi(15));
                assert_eq!(limit, ENUMERATION_BUDGET);
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn bias_and_post_hoc_gain_hold_exactly_on_a_three_idea_instance() {
        let c = DiscreteModelConfig {
            mu_values: vec![-0.5, 0.2, 0.9],
            eps_points: vec![(-1.0, 0.3), (0.0, 0.4), (1.5, 0.3)],
            prob_good: 0.0,
            good_policy: PolicyRule::UniformAll,
            bad_policy: PolicyRule::UniformAll,
            hurdle: f64::NEG_INFINITY,
        };
        let r = enumerate_exact(&c).unwrap();
        assert!(r.mean_mu_hat_d - r.mean_mu_d > 0.0);
        assert!(r.mean_mu_d > r.mean_mu_o);
        // eps has mean 0.15, so a priori measured minus true is exactly that
        assert!((r.mean_mu_hat_o - r.mean_mu_o - 0.15).abs() < 1e-15);
    }

    #[test]
    fn hand_instance_simulation_agrees() {
        let c = hand(vec![(-1.0, 0.5), (1.0, 0.5)]);
        let zs = mc_vs_oracle(&c, 10_000, RngSeed::new(42, 0)).unwrap();
        let d = zs.iter().find(|z| z.quantity == "mean_mu_D").unwrap();
        assert!(d.z.abs() <= 4.0, "{d:?}");
        assert!(zs.iter().all(|z| z.z.abs() <= 4.0), "{zs:?}");
    }

    #[test]
    fn too_few_trials_rejected() {
        let c = hand(vec![(-1.0, 0.5), (1.0, 0.5)]);
        assert!(mc_vs_oracle(&c, 100, RngSeed::new(0, 0)).is_err());
    }
}
