//! Theory types, selection rules and the single research episode.

use std::cmp::Ordering;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{draw_universe, IdeaUniverse, UniverseConfig};
use crate::rng::RngSeed;

// Sub-stream tags of a trial stream.
const STREAM_TYPE: u64 = 0;
const STREAM_UNIVERSE: u64 = 1;
const STREAM_SELECT: u64 = 2;

/// Slack for `ceil((1 - q) * N)` so that e.g. q = 0.98, N = 100 retains
/// exactly 2 ideas despite `1 - 0.98` not being representable.
const RETAIN_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoryType {
    Good,
    Bad,
}

impl TheoryType {
    pub const BOTH: [TheoryType; 2] = [TheoryType::Good, TheoryType::Bad];
}

impl fmt::Display for TheoryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TheoryType::Good => "good",
            TheoryType::Bad => "bad",
        })
    }
}

/// Whether the theory is written before (`APriori`) or after (`PostHoc`)
/// the measured qualities are seen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    APriori,
    PostHoc,
}

impl Regime {
    pub const BOTH: [Regime; 2] = [Regime::APriori, Regime::PostHoc];
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::APriori => "a_priori",
            Regime::PostHoc => "post_hoc",
        })
    }
}

/// How a theory type spreads its a priori weight over ideas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyRule {
    /// Equal weight on every idea.
    UniformAll,
    /// Equal weight on the `k` ideas with the highest true quality.
    TopK { k: usize },
    /// Drops the worst share `q` of ideas by true quality and weights the
    /// rest equally.
    EliminateWorst { q: f64 },
}

impl PolicyRule {
    /// Number of ideas receiving positive weight in a universe of `n`.
    pub fn retained(&self, n: usize) -> Result<usize> {
        match *self {
            PolicyRule::UniformAll => Ok(n),
            PolicyRule::TopK { k } => {
                if k == 0 || k > n {
                    Err(Error::config(
                        "top_k.k",
                        format!("expected 1 <= k <= n_ideas = {n}, got {k}"),
                    ))
                } else {
                    Ok(k)
                }
            }
            PolicyRule::EliminateWorst { q } => {
                if !(0.0..1.0).contains(&q) {
                    return Err(Error::config(
                        "eliminate_worst.q",
                        format!("expected a share in [0, 1), got {q}"),
                    ));
                }
                let keep = ((1.0 - q) * n as f64 - RETAIN_EPS).ceil().max(0.0) as usize;
                if keep == 0 {
                    Err(Error::config(
                        "eliminate_worst.q",
                        format!("q = {q} retains no ideas out of {n}"),
                    ))
                } else {
                    Ok(keep.min(n))
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryPolicy {
    pub label: TheoryType,
    pub rule: PolicyRule,
}

impl TheoryPolicy {
    pub fn good(rule: PolicyRule) -> Self {
        Self {
            label: TheoryType::Good,
            rule,
        }
    }

    pub fn bad(rule: PolicyRule) -> Self {
        Self {
            label: TheoryType::Bad,
            rule,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub universe: UniverseConfig,
    /// Prior probability that a theory is of the good type.
    pub prob_good: f64,
    pub good_policy: TheoryPolicy,
    pub bad_policy: TheoryPolicy,
    /// Publication requires measured quality strictly above this value.
    #[serde(with = "crate::io::config::hurdle_serde")]
    pub hurdle: f64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.universe.validate()?;
        if !(0.0..=1.0).contains(&self.prob_good) {
            return Err(Error::config(
                "prob_good",
                format!("expected a probability in [0, 1], got {}", self.prob_good),
            ));
        }
        if self.hurdle.is_nan() {
            return Err(Error::config("hurdle", "expected a number, got NaN"));
        }
        let n = self.universe.n_ideas;
        self.good_policy
            .rule
            .retained(n)
            .map_err(|e| prefix_field(e, "good_policy"))?;
        self.bad_policy
            .rule
            .retained(n)
            .map_err(|e| prefix_field(e, "bad_policy"))?;
        Ok(())
    }

    pub fn policy(&self, theory_type: TheoryType) -> &TheoryPolicy {
        match theory_type {
            TheoryType::Good => &self.good_policy,
            TheoryType::Bad => &self.bad_policy,
        }
    }

    /// Set when no type can rule any idea out, so the theory set is all ideas.
    pub fn falsifiability_warning(&self) -> bool {
        let n = self.universe.n_ideas;
        let all = |p: &TheoryPolicy| p.rule.retained(n).map(|k| k == n).unwrap_or(false);
        all(&self.good_policy) && all(&self.bad_policy)
    }
}

fn prefix_field(err: Error, prefix: &str) -> Error {
    match err {
        Error::Config { field, message } => Error::Config {
            field: format!("{prefix}.{field}"),
            message,
        },
        other => other,
    }
}

/// A priori recommendation distribution over ideas.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
    support: Vec<usize>,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Precondition("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Precondition(format!("weights sum to {total}, not 1")));
        }
        let support: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
        if support.is_empty() {
            return Err(Error::Precondition("weight support is empty".into()));
        }
        Ok(Self { weights, support })
    }

    /// Equal weight on `support`, which must be ascending and in range.
    fn uniform_on(n: usize, support: Vec<usize>) -> Self {
        let w = 1.0 / support.len() as f64;
        let mut weights = vec![0.0; n];
        for &i in &support {
            weights[i] = w;
        }
        Self { weights, support }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Ascending indices with positive weight.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Descending true quality, lowest index first among equals.
fn by_quality_desc(mu: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| mu[b].total_cmp(&mu[a]).then(a.cmp(&b))
}

/// Ascending indices of the `keep` ideas with highest true quality.
pub(crate) fn top_by_quality(mu: &[f64], keep: usize) -> Vec<usize> {
    let n = mu.len();
    if keep >= n {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.select_nth_unstable_by(keep - 1, by_quality_desc(mu));
    idx.truncate(keep);
    idx.sort_unstable();
    idx
}

/// Weights of a policy on a given universe; ranking uses true quality.
pub fn build_weights(policy: &TheoryPolicy, universe: &IdeaUniverse) -> Result<WeightVector> {
    weights_for_mu(&policy.rule, &universe.mu)
}

pub(crate) fn weights_for_mu(rule: &PolicyRule, mu: &[f64]) -> Result<WeightVector> {
    let n = mu.len();
    let keep = rule.retained(n)?;
    Ok(WeightVector::uniform_on(n, top_by_quality(mu, keep)))
}

/// Categorical draw from the weights.
pub fn select_a_priori(weights: &WeightVector, seed: RngSeed) -> usize {
    let u: f64 = seed.rng().random();
    draw_categorical(weights, u)
}

fn draw_categorical(weights: &WeightVector, u: f64) -> usize {
    let mut acc = 0.0;
    for &i in &weights.support {
        acc += weights.weights[i];
        if u < acc {
            return i;
        }
    }
    *weights.support.last().expect("support is non-empty")
}

/// Highest measured quality among ideas with positive weight.
pub fn select_post_hoc(weights: &WeightVector, universe: &IdeaUniverse) -> usize {
    argmax_measured(weights.support.iter().copied(), &universe.mu_hat)
        .expect("support is non-empty")
}

/// Only the candidate with the largest measured quality gets read.
pub fn limited_attention(candidates: &[usize], universe: &IdeaUniverse) -> Result<usize> {
    if let Some(&bad) = candidates.iter().find(|&&i| i >= universe.len()) {
        return Err(Error::Precondition(format!(
            "candidate {bad} is outside a universe of {} ideas",
            universe.len()
        )));
    }
    argmax_measured(candidates.iter().copied(), &universe.mu_hat)
        .ok_or_else(|| Error::Precondition("candidate set is empty".into()))
}

/// Argmax with ties going to the lowest index, whatever the iteration order.
fn argmax_measured(indices: impl Iterator<Item = usize>, mu_hat: &[f64]) -> Option<usize> {
    indices.fold(None, |best, i| match best {
        None => Some(i),
        Some(b) => {
            if mu_hat[i] > mu_hat[b] || (mu_hat[i] == mu_hat[b] && i < b) {
                Some(i)
            } else {
                Some(b)
            }
        }
    })
}

/// One research episode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub regime: Regime,
    pub theory_type: TheoryType,
    pub selected: usize,
    pub mu_star: f64,
    pub mu_hat_star: f64,
    pub published: bool,
}

pub fn run_trial(
    config: &ModelConfig,
    regime: Regime,
    trial_index: u64,
    seed: RngSeed,
) -> Result<TrialRecord> {
    config.validate()?;
    let (o, d) = paired_trial(config, trial_index, seed);
    Ok(match regime {
        Regime::APriori => o,
        Regime::PostHoc => d,
    })
}

/// Both regimes of one episode on the same theory type and universe.
pub fn run_paired_trial(
    config: &ModelConfig,
    trial_index: u64,
    seed: RngSeed,
) -> Result<(TrialRecord, TrialRecord)> {
    config.validate()?;
    Ok(paired_trial(config, trial_index, seed))
}

/// Streams of a trial are children of `seed.derive(trial_index)`; type and
/// universe streams do not depend on the regime.
pub(crate) fn paired_trial(
    config: &ModelConfig,
    trial_index: u64,
    seed: RngSeed,
) -> (TrialRecord, TrialRecord) {
    let trial = seed.derive(trial_index);
    let u: f64 = trial.derive(STREAM_TYPE).rng().random();
    let theory_type = if u < config.prob_good {
        TheoryType::Good
    } else {
        TheoryType::Bad
    };
    let universe = draw_universe(&config.universe, trial.derive(STREAM_UNIVERSE));
    let weights = weights_for_mu(&config.policy(theory_type).rule, &universe.mu)
        .expect("validated policy");

    let record = |regime, selected: usize| {
        let mu_hat_star = universe.mu_hat[selected];
        TrialRecord {
            trial_index,
            regime,
            theory_type,
            selected,
            mu_star: universe.mu[selected],
            mu_hat_star,
            published: mu_hat_star > config.hurdle,
        }
    };
    let o = record(
        Regime::APriori,
        select_a_priori(&weights, trial.derive(STREAM_SELECT)),
    );
    let d = record(Regime::PostHoc, select_post_hoc(&weights, &universe));
    (o, d)
}
