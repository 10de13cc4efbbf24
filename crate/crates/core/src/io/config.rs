//! JSON run configuration.
//!
//! ```json
//! {
//!   "n_ideas": 100,
//!   "mu_dist": {"kind": "normal", "mean": 0.0, "sd": 0.5},
//!   "eps_dist": {"kind": "normal", "mean": 0.0, "sd": 1.0},
//!   "prob_good": 0.5,
//!   "good_policy": {"rule": "top_k", "k": 2},
//!   "bad_policy": {"rule": "uniform_all"},
//!   "hurdle": 2.0,
//!   "trials": 1000000,
//!   "seed": 42,
//!   "sweep": {"axis": "heterogeneity_q", "grid": [0.0, 0.5, 0.98]}
//! }
//! ```
//!
//! `prob_good`, `trials` and `seed` are optional; `sweep` selects a sweep
//! run. `hurdle` also accepts the strings `"-inf"` and `"inf"`.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::model::{ScalarDistribution, UniverseConfig};
use crate::sweep::{SweepAxis, SweepConfig, DEFAULT_SEED, DEFAULT_TRIALS};
use crate::theorizing::{ModelConfig, PolicyRule, TheoryPolicy};

pub const DEFAULT_PROB_GOOD: f64 = 0.5;

/// Serde adapter writing infinite hurdles as `"-inf"` / `"inf"`.
pub mod hurdle_serde {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(h: &f64, s: S) -> Result<S::Ok, S::Error> {
        if h.is_finite() {
            s.serialize_f64(*h)
        } else if *h > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(s) => match s.as_str() {
                "-inf" => Ok(f64::NEG_INFINITY),
                "inf" => Ok(f64::INFINITY),
                other => Err(D::Error::custom(format!(
                    "expected a number, \"-inf\" or \"inf\", got {other:?}"
                ))),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
}

/// The document exactly as written, before defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub n_ideas: usize,
    pub mu_dist: ScalarDistribution,
    pub eps_dist: ScalarDistribution,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prob_good: Option<f64>,
    pub good_policy: PolicyRule,
    pub bad_policy: PolicyRule,
    #[serde(with = "hurdle_serde")]
    pub hurdle: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

/// Single-model run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub n_trials: u64,
    pub master_seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ParsedConfig {
    Model(RunConfig),
    Sweep(SweepConfig),
}

impl ParsedConfig {
    pub fn model(&self) -> &ModelConfig {
        match self {
            ParsedConfig::Model(r) => &r.model,
            ParsedConfig::Sweep(s) => &s.base,
        }
    }

    pub fn master_seed(&self) -> u64 {
        match self {
            ParsedConfig::Model(r) => r.master_seed,
            ParsedConfig::Sweep(s) => s.master_seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            ParsedConfig::Model(r) => r.master_seed = seed,
            ParsedConfig::Sweep(s) => s.master_seed = seed,
        }
    }

    pub fn set_trials(&mut self, n: u64) {
        match self {
            ParsedConfig::Model(r) => r.n_trials = n,
            ParsedConfig::Sweep(s) => s.n_trials = n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ParsedConfig::Model(r) => {
                if r.n_trials == 0 {
                    return Err(Error::config("trials", "expected an integer >= 1, got 0"));
                }
                r.model.validate()
            }
            ParsedConfig::Sweep(s) => s.validate(),
        }
    }

    /// Fully explicit document; parsing it gives back `self`.
    pub fn to_document(&self) -> ConfigDocument {
        let (model, trials, seed, sweep) = match self {
            ParsedConfig::Model(r) => (&r.model, r.n_trials, r.master_seed, None),
            ParsedConfig::Sweep(s) => (
                &s.base,
                s.n_trials,
                s.master_seed,
                Some(SweepSection {
                    axis: s.axis,
                    grid: s.grid.clone(),
                }),
            ),
        };
        ConfigDocument {
            n_ideas: model.universe.n_ideas,
            mu_dist: model.universe.mu_dist.clone(),
            eps_dist: model.universe.eps_dist.clone(),
            prob_good: Some(model.prob_good),
            good_policy: model.good_policy.rule,
            bad_policy: model.bad_policy.rule,
            hurdle: model.hurdle,
            trials: Some(trials),
            seed: Some(seed),
            sweep,
        }
    }

    /// Canonical JSON value (object keys sorted).
    pub fn canonical_value(&self) -> Value {
        serde_json::to_value(self.to_document()).expect("config documents serialize")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Parsed {
    pub config: ParsedConfig,
    /// Human-readable `key = value` for every default that was filled in.
    pub defaults_applied: Vec<String>,
}

const KEYS: [&str; 10] = [
    "n_ideas",
    "mu_dist",
    "eps_dist",
    "prob_good",
    "good_policy",
    "bad_policy",
    "hurdle",
    "trials",
    "seed",
    "sweep",
];

fn expected_form(key: &str) -> &'static str {
    match key {
        "n_ideas" => "a positive integer",
        "mu_dist" | "eps_dist" => {
            r#"{"kind": "normal", "mean": x, "sd": s} or {"kind": "discrete", "points": [[value, prob], ...]}"#
        }
        "prob_good" => "a probability in [0, 1]",
        "good_policy" | "bad_policy" => {
            r#"{"rule": "uniform_all"}, {"rule": "top_k", "k": k} or {"rule": "eliminate_worst", "q": q}"#
        }
        "hurdle" => r#"a number, "-inf" or "inf""#,
        "trials" => "a positive integer",
        "seed" => "an unsigned 64-bit integer",
        "sweep" => r#"{"axis": "heterogeneity_q" | "mu_sd" | "none", "grid": [x, ...]}"#,
        _ => "nothing (unknown key)",
    }
}

fn schema_error(key: &str, received: &Value, detail: impl std::fmt::Display) -> Error {
    Error::config(
        key,
        format!("expected {}, got {received} ({detail})", expected_form(key)),
    )
}

fn field<T: DeserializeOwned>(obj: &Map<String, Value>, key: &str) -> Result<Option<T>> {
    match obj.get(key) {
        None => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|e| schema_error(key, v, e)),
    }
}

fn required<T: DeserializeOwned>(obj: &Map<String, Value>, key: &str) -> Result<T> {
    field(obj, key)?.ok_or_else(|| {
        Error::config(key, format!("expected {}, got nothing (key is required)", expected_form(key)))
    })
}

#[derive(Deserialize)]
struct Hurdle(#[serde(with = "hurdle_serde")] f64);

pub fn parse_document(text: &str) -> Result<ConfigDocument> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Parse(format!("expected a JSON object at top level, got {value}")))?;
    if let Some(k) = obj.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(Error::config(
            k.as_str(),
            format!("unknown key; expected one of {}", KEYS.join(", ")),
        ));
    }
    Ok(ConfigDocument {
        n_ideas: required(obj, "n_ideas")?,
        mu_dist: required(obj, "mu_dist")?,
        eps_dist: required(obj, "eps_dist")?,
        prob_good: field(obj, "prob_good")?,
        good_policy: required(obj, "good_policy")?,
        bad_policy: required(obj, "bad_policy")?,
        hurdle: required::<Hurdle>(obj, "hurdle")?.0,
        trials: field(obj, "trials")?,
        seed: field(obj, "seed")?,
        sweep: field(obj, "sweep")?,
    })
}

/// Parses and fully validates a configuration document.
pub fn parse_config(text: &str) -> Result<Parsed> {
    let doc = parse_document(text)?;
    let mut defaults_applied = Vec::new();
    let prob_good = doc.prob_good.unwrap_or_else(|| {
        defaults_applied.push(format!("prob_good = {DEFAULT_PROB_GOOD}"));
        DEFAULT_PROB_GOOD
    });
    let n_trials = doc.trials.unwrap_or_else(|| {
        defaults_applied.push(format!("trials = {DEFAULT_TRIALS}"));
        DEFAULT_TRIALS
    });
    let master_seed = doc.seed.unwrap_or_else(|| {
        defaults_applied.push(format!("seed = {DEFAULT_SEED}"));
        DEFAULT_SEED
    });
    let model = ModelConfig {
        universe: UniverseConfig::new(doc.n_ideas, doc.mu_dist, doc.eps_dist),
        prob_good,
        good_policy: TheoryPolicy::good(doc.good_policy),
        bad_policy: TheoryPolicy::bad(doc.bad_policy),
        hurdle: doc.hurdle,
    };
    let config = match doc.sweep {
        None => ParsedConfig::Model(RunConfig {
            model,
            n_trials,
            master_seed,
        }),
        Some(s) => ParsedConfig::Sweep(SweepConfig {
            base: model,
            axis: s.axis,
            grid: s.grid,
            n_trials,
            master_seed,
        }),
    };
    config.validate()?;
    Ok(Parsed {
        config,
        defaults_applied,
    })
}

pub fn serialize_config(config: &ParsedConfig) -> String {
    serde_json::to_string_pretty(&config.to_document()).expect("config documents serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::fig2_model;
    use proptest::prelude::*;

    fn fig2_doc() -> String {
        r#"{
            "n_ideas": 100,
            "mu_dist": {"kind": "normal", "mean": 0.0, "sd": 0.5},
            "eps_dist": {"kind": "normal", "mean": 0.0, "sd": 1.0},
            "prob_good": 0.5,
            "good_policy": {"rule": "top_k", "k": 2},
            "bad_policy": {"rule": "uniform_all"},
            "hurdle": 2.0
        }"#
        .to_string()
    }

    #[test]
    fn parses_figure_two_model_with_defaults() {
        let parsed = parse_config(&fig2_doc()).unwrap();
        match &parsed.config {
            ParsedConfig::Model(r) => {
                assert_eq!(r.model, fig2_model());
                assert_eq!(r.n_trials, DEFAULT_TRIALS);
                assert_eq!(r.master_seed, 42);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(parsed.defaults_applied.len(), 2);
    }

    #[test]
    fn figure_two_round_trips() {
        let cfg = ParsedConfig::Model(RunConfig {
            model: fig2_model(),
            n_trials: 1000,
            master_seed: 3,
        });
        let back = parse_config(&serialize_config(&cfg)).unwrap();
        assert_eq!(back.config, cfg);
        assert!(back.defaults_applied.is_empty());
    }

    #[test]
    fn out_of_range_prob_good_is_named() {
        let text = fig2_doc().replace("\"prob_good\": 0.5", "\"prob_good\": 1.5");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("prob_good") && err.contains("1.5"), "{err}");
    }

    #[test]
    fn policy_must_fit_universe() {
        let text = fig2_doc().replace("\"n_ideas\": 100", "\"n_ideas\": 1");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("good_policy"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = fig2_doc().replace("\"hurdle\": 2.0", "\"hurdle\": 2.0, \"hurdel\": 3");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("hurdel"), "{err}");
        let text = fig2_doc().replace("\"sd\": 0.5", "\"sd\": 0.5, \"skew\": 1");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn wrong_types_name_key_and_value() {
        let text = fig2_doc().replace("\"n_ideas\": 100", "\"n_ideas\": \"many\"");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("n_ideas") && err.contains("many") && err.contains("positive integer"), "{err}");
    }

    #[test]
    fn missing_required_key() {
        let text = fig2_doc().replace("\"hurdle\": 2.0", "\"trials\": 10");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("hurdle"), "{err}");
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(parse_config("{ not json"), Err(Error::Parse(_))));
    }

    #[test]
    fn infinite_hurdle_round_trips() {
        let text = fig2_doc().replace("\"hurdle\": 2.0", "\"hurdle\": \"-inf\"");
        let parsed = parse_config(&text).unwrap();
        assert_eq!(parsed.config.model().hurdle, f64::NEG_INFINITY);
        let back = parse_config(&serialize_config(&parsed.config)).unwrap();
        assert_eq!(back.config, parsed.config);
    }

    #[test]
    fn sweep_section_builds_sweep_config() {
        let text = fig2_doc().replace(
            "\"hurdle\": 2.0",
            "\"hurdle\": 2.0, \"trials\": 20000, \"sweep\": {\"axis\": \"heterogeneity_q\", \"grid\": [0.0, 0.5]}",
        );
        match parse_config(&text).unwrap().config {
            ParsedConfig::Sweep(s) => {
                assert_eq!(s.axis, SweepAxis::HeterogeneityQ);
                assert_eq!(s.grid, vec![0.0, 0.5]);
                assert_eq!(s.n_trials, 20_000);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn digest_value_ignores_key_order() {
        let a = parse_config(&fig2_doc()).unwrap().config.canonical_value();
        let reordered = r#"{"hurdle": 2.0, "bad_policy": {"rule": "uniform_all"},
            "good_policy": {"k": 2, "rule": "top_k"}, "prob_good": 0.5,
            "eps_dist": {"sd": 1.0, "mean": 0.0, "kind": "normal"},
            "mu_dist": {"sd": 0.5, "kind": "normal", "mean": 0.0}, "n_ideas": 100}"#;
        let b = parse_config(reordered).unwrap().config.canonical_value();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    fn arb_dist() -> impl Strategy<Value = ScalarDistribution> {
        prop_oneof![
            (-5.0..5.0f64, 0.0..3.0f64).prop_map(|(m, s)| ScalarDistribution::normal(m, s)),
            prop::collection::vec((-3.0..3.0f64, 1u32..5), 1..4).prop_map(|pts| {
                let total: u32 = pts.iter().map(|p| p.1).sum();
                let mut points: Vec<(f64, f64)> =
                    pts.iter().map(|&(v, w)| (v, w as f64 / total as f64)).collect();
                // make the probabilities sum to one within the tolerance
                let s: f64 = points.iter().map(|p| p.1).sum();
                points[0].1 += 1.0 - s;
                ScalarDistribution::Discrete { points }
            }),
        ]
    }

    fn arb_rule(n: usize) -> impl Strategy<Value = PolicyRule> {
        prop_oneof![
            Just(PolicyRule::UniformAll),
            (1..=n).prop_map(|k| PolicyRule::TopK { k }),
            (0.0..0.9f64).prop_map(|q| PolicyRule::EliminateWorst { q }),
        ]
    }

    fn arb_config() -> impl Strategy<Value = ParsedConfig> {
        (1usize..200).prop_flat_map(|n| {
            (
                arb_dist(),
                arb_dist(),
                0.0..=1.0f64,
                arb_rule(n),
                arb_rule(n),
                prop_oneof![(-4.0..4.0f64), Just(f64::NEG_INFINITY)],
                10_000u64..2_000_000,
                any::<u64>(),
                prop::option::of(prop::collection::vec(0.0..0.99f64, 1..5)),
            )
                .prop_map(move |(mu, eps, pg, good, bad, h, trials, seed, grid)| {
                    let model = ModelConfig {
                        universe: UniverseConfig::new(n, mu, eps),
                        prob_good: pg,
                        good_policy: TheoryPolicy::good(good),
                        bad_policy: TheoryPolicy::bad(bad),
                        hurdle: h,
                    };
                    match grid {
                        None => ParsedConfig::Model(RunConfig {
                            model,
                            n_trials: trials,
                            master_seed: seed,
                        }),
                        Some(mut g) => {
                            g.sort_by(f64::total_cmp);
                            g.dedup();
                            ParsedConfig::Sweep(SweepConfig {
                                base: model,
                                axis: SweepAxis::HeterogeneityQ,
                                grid: g,
                                n_trials: trials,
                                master_seed: seed,
                            })
                        }
                    }
                })
        })
    }

    proptest! {
        #[test]
        fn parse_inverts_serialize(cfg in arb_config()) {
            prop_assume!(cfg.validate().is_ok());
            let back = parse_config(&serialize_config(&cfg)).unwrap();
            prop_assert_eq!(back.config, cfg);
        }
    }
}
