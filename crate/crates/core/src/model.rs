//! Idea universes: true qualities, noisy measurements, and the panel-data
//! reading of measured quality as a t-statistic.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngSeed;

const PROB_SUM_TOL: f64 = 1e-12;

/// Law of a scalar quality or noise term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarDistribution {
    /// `sd == 0` is a point mass at `mean`.
    Normal { mean: f64, sd: f64 },
    /// Finite law given as `(value, probability)` pairs.
    Discrete { points: Vec<(f64, f64)> },
}

impl ScalarDistribution {
    pub fn normal(mean: f64, sd: f64) -> Self {
        ScalarDistribution::Normal { mean, sd }
    }

    pub fn standard_normal() -> Self {
        Self::normal(0.0, 1.0)
    }

    pub fn point_mass(value: f64) -> Self {
        Self::normal(value, 0.0)
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        match self {
            ScalarDistribution::Normal { mean, sd } => {
                if !mean.is_finite() {
                    return Err(Error::config(
                        format!("{field}.mean"),
                        format!("expected a finite number, got {mean}"),
                    ));
                }
                if !sd.is_finite() || *sd < 0.0 {
                    return Err(Error::config(
                        format!("{field}.sd"),
                        format!("expected a finite number >= 0, got {sd}"),
                    ));
                }
            }
            ScalarDistribution::Discrete { points } => {
                if points.is_empty() {
                    return Err(Error::config(
                        format!("{field}.points"),
                        "expected at least one (value, probability) pair, got none",
                    ));
                }
                for (i, &(v, p)) in points.iter().enumerate() {
                    if !v.is_finite() {
                        return Err(Error::config(
                            format!("{field}.points[{i}]"),
                            format!("expected a finite value, got {v}"),
                        ));
                    }
                    if !(p > 0.0 && p <= 1.0) {
                        return Err(Error::config(
                            format!("{field}.points[{i}]"),
                            format!("expected a probability in (0, 1], got {p}"),
                        ));
                    }
                }
                let total: f64 = points.iter().map(|&(_, p)| p).sum();
                if (total - 1.0).abs() > PROB_SUM_TOL {
                    return Err(Error::config(
                        format!("{field}.points"),
                        format!("expected probabilities summing to 1, got {total}"),
                    ));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ScalarDistribution::Normal { mean, sd } => {
                if *sd == 0.0 {
                    *mean
                } else {
                    let z: f64 = rng.sample(StandardNormal);
                    mean + sd * z
                }
            }
            ScalarDistribution::Discrete { points } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(v, p) in points {
                    acc += p;
                    if u < acc {
                        return v;
                    }
                }
                points[points.len() - 1].0
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ScalarDistribution::Normal { mean, .. } => *mean,
            ScalarDistribution::Discrete { points } => points.iter().map(|&(v, p)| v * p).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            ScalarDistribution::Normal { sd, .. } => sd * sd,
            ScalarDistribution::Discrete { points } => {
                let m = self.mean();
                points.iter().map(|&(v, p)| p * (v - m).powi(2)).sum()
            }
        }
    }

    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }

    /// True when every draw is exactly zero.
    pub fn is_zero_point_mass(&self) -> bool {
        match self {
            ScalarDistribution::Normal { mean, sd } => *mean == 0.0 && *sd == 0.0,
            ScalarDistribution::Discrete { points } => points.iter().all(|&(v, _)| v == 0.0),
        }
    }

    /// Law of `factor * X`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            ScalarDistribution::Normal { mean, sd } => ScalarDistribution::Normal {
                mean: factor * mean,
                sd: factor.abs() * sd,
            },
            ScalarDistribution::Discrete { points } => ScalarDistribution::Discrete {
                points: points.iter().map(|&(v, p)| (factor * v, p)).collect(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniverseConfig {
    pub n_ideas: usize,
    pub mu_dist: ScalarDistribution,
    pub eps_dist: ScalarDistribution,
    /// Holds true qualities at these values instead of drawing them from
    /// `mu_dist`. Used to run the simulator on exactly enumerable models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_mu: Option<Vec<f64>>,
}

impl UniverseConfig {
    pub fn new(n_ideas: usize, mu_dist: ScalarDistribution, eps_dist: ScalarDistribution) -> Self {
        Self {
            n_ideas,
            mu_dist,
            eps_dist,
            fixed_mu: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ideas == 0 {
            return Err(Error::config("n_ideas", "expected an integer >= 1, got 0"));
        }
        self.mu_dist.validate("mu_dist")?;
        self.eps_dist.validate("eps_dist")?;
        if let Some(mu) = &self.fixed_mu {
            if mu.len() != self.n_ideas {
                return Err(Error::config(
                    "fixed_mu",
                    format!("expected {} values, got {}", self.n_ideas, mu.len()),
                ));
            }
            if let Some(bad) = mu.iter().find(|v| !v.is_finite()) {
                return Err(Error::config("fixed_mu", format!("expected finite values, got {bad}")));
            }
        }
        Ok(())
    }

    /// Standard deviation of measured quality, `sqrt(Var(mu) + Var(eps))`.
    pub fn sd_mu_hat(&self) -> f64 {
        (self.mu_dist.variance() + self.eps_dist.variance()).sqrt()
    }
}

/// One draw of true and measured qualities for all ideas.
#[derive(Clone, Debug, PartialEq)]
pub struct IdeaUniverse {
    pub mu: Vec<f64>,
    pub mu_hat: Vec<f64>,
}

impl IdeaUniverse {
    pub fn new(mu: Vec<f64>, mu_hat: Vec<f64>) -> Result<Self> {
        if mu.len() != mu_hat.len() {
            return Err(Error::Precondition(format!(
                "mu has {} entries but mu_hat has {}",
                mu.len(),
                mu_hat.len()
            )));
        }
        if mu.is_empty() {
            return Err(Error::Precondition("universe must hold at least one idea".into()));
        }
        if mu.iter().chain(&mu_hat).any(|v| !v.is_finite()) {
            return Err(Error::Precondition("universe values must be finite".into()));
        }
        Ok(Self { mu, mu_hat })
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
}

pub fn sample_universe(config: &UniverseConfig, seed: RngSeed) -> Result<IdeaUniverse> {
    config.validate()?;
    Ok(draw_universe(config, seed))
}

/// Unchecked draw for hot loops; `config` must already be validated.
pub(crate) fn draw_universe(config: &UniverseConfig, seed: RngSeed) -> IdeaUniverse {
    let mut rng = seed.rng();
    let n = config.n_ideas;
    let mu: Vec<f64> = match &config.fixed_mu {
        Some(fixed) => fixed.clone(),
        None => (0..n).map(|_| config.mu_dist.sample(&mut rng)).collect(),
    };
    let mu_hat = if config.eps_dist.is_zero_point_mass() {
        mu.clone()
    } else {
        mu.iter().map(|m| m + config.eps_dist.sample(&mut rng)).collect()
    };
    IdeaUniverse { mu, mu_hat }
}

/// Panel of `n_obs` observations per idea, `x = chi + e` with `sd(e) = sigma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelConfig {
    pub n_obs: usize,
    pub chi_dist: ScalarDistribution,
    pub sigma: f64,
}

impl PanelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_obs == 0 {
            return Err(Error::config("n_obs", "expected an integer >= 1, got 0"));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::config(
                "sigma",
                format!("expected a finite number > 0, got {}", self.sigma),
            ));
        }
        self.chi_dist.validate("chi_dist")
    }

    /// `sqrt(M) / sigma`, the factor turning an effect into its t-statistic.
    pub fn t_scale(&self) -> f64 {
        (self.n_obs as f64).sqrt() / self.sigma
    }
}

/// Universe whose measured qualities are the ideas' t-statistics: true
/// quality is the scaled effect and the noise is standard normal.
pub fn panel_to_universe(panel: &PanelConfig, n_ideas: usize) -> Result<UniverseConfig> {
    panel.validate()?;
    let config = UniverseConfig::new(
        n_ideas,
        panel.chi_dist.scaled(panel.t_scale()),
        ScalarDistribution::standard_normal(),
    );
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1_universe() -> UniverseConfig {
        UniverseConfig::new(
            100,
            ScalarDistribution::standard_normal(),
            ScalarDistribution::standard_normal(),
        )
    }

    #[test]
    fn sample_has_requested_length() {
        let u = sample_universe(&fig1_universe(), RngSeed::new(1, 0)).unwrap();
        assert_eq!(u.mu.len(), 100);
        assert_eq!(u.mu_hat.len(), 100);
    }

    #[test]
    fn measured_variance_is_two_at_figure_one_parameters() {
        let cfg = fig1_universe();
        let (mut s, mut ss, mut n) = (0.0, 0.0, 0.0);
        for t in 0..2_000 {
            let u = sample_universe(&cfg, RngSeed::new(9, t)).unwrap();
            for x in u.mu_hat {
                s += x;
                ss += x * x;
                n += 1.0;
            }
        }
        let var = ss / n - (s / n).powi(2);
        // sd of a sample variance of normals is var * sqrt(2 / n)
        let se = 2.0 * (2.0 / n).sqrt();
        assert!((var - 2.0).abs() < 4.0 * se, "var = {var}");
    }

    #[test]
    fn zero_noise_gives_exact_measurement() {
        let cfg = UniverseConfig::new(
            5,
            ScalarDistribution::standard_normal(),
            ScalarDistribution::point_mass(0.0),
        );
        let u = sample_universe(&cfg, RngSeed::new(3, 3)).unwrap();
        assert_eq!(u.mu, u.mu_hat);

        let cfg = UniverseConfig::new(
            5,
            ScalarDistribution::standard_normal(),
            ScalarDistribution::Discrete {
                points: vec![(0.0, 1.0)],
            },
        );
        let u = sample_universe(&cfg, RngSeed::new(3, 3)).unwrap();
        assert_eq!(u.mu, u.mu_hat);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = fig1_universe();
        let a = sample_universe(&cfg, RngSeed::new(11, 5)).unwrap();
        let b = sample_universe(&cfg, RngSeed::new(11, 5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_distributions_name_the_field() {
        let cfg = UniverseConfig::new(
            3,
            ScalarDistribution::normal(0.0, -1.0),
            ScalarDistribution::standard_normal(),
        );
        let err = sample_universe(&cfg, RngSeed::new(0, 0)).unwrap_err();
        assert!(err.to_string().contains("mu_dist.sd"), "{err}");

        let cfg = UniverseConfig::new(
            3,
            ScalarDistribution::standard_normal(),
            ScalarDistribution::Discrete {
                points: vec![(1.0, 0.5), (-1.0, 0.4)],
            },
        );
        let err = sample_universe(&cfg, RngSeed::new(0, 0)).unwrap_err();
        assert!(err.to_string().contains("eps_dist.points"), "{err}");

        let cfg = UniverseConfig::new(0, ScalarDistribution::standard_normal(), ScalarDistribution::standard_normal());
        assert!(sample_universe(&cfg, RngSeed::new(0, 0)).is_err());
    }

    #[test]
    fn discrete_sampling_matches_probabilities() {
        let d = ScalarDistribution::Discrete {
            points: vec![(-1.0, 0.25), (2.0, 0.75)],
        };
        let mut rng = RngSeed::new(5, 0).rng();
        let n = 100_000;
        let hits = (0..n).filter(|_| d.sample(&mut rng) == 2.0).count() as f64 / n as f64;
        let se = (0.75f64 * 0.25 / n as f64).sqrt();
        assert!((hits - 0.75).abs() < 4.0 * se);
        assert_eq!(d.mean(), 1.25);
    }

    #[test]
    fn panel_identity_scaling() {
        let panel = PanelConfig {
            n_obs: 1,
            chi_dist: ScalarDistribution::normal(0.0, 0.5),
            sigma: 1.0,
        };
        let u = panel_to_universe(&panel, 100).unwrap();
        assert_eq!(u.mu_dist, ScalarDistribution::normal(0.0, 0.5));
        assert_eq!(u.eps_dist, ScalarDistribution::standard_normal());
    }

    #[test]
    fn panel_four_observations_double_the_spread() {
        let panel = PanelConfig {
            n_obs: 4,
            chi_dist: ScalarDistribution::normal(0.0, 0.5),
            sigma: 1.0,
        };
        let u = panel_to_universe(&panel, 100).unwrap();
        assert_eq!(u.mu_dist, ScalarDistribution::normal(0.0, 1.0));
    }

    #[test]
    fn panel_noise_is_always_standard_normal() {
        for (m, sigma) in [(1, 0.3), (25, 2.0), (400, 7.5)] {
            let panel = PanelConfig {
                n_obs: m,
                chi_dist: ScalarDistribution::normal(0.1, 0.2),
                sigma,
            };
            let u = panel_to_universe(&panel, 10).unwrap();
            assert_eq!(u.eps_dist, ScalarDistribution::standard_normal());
            let expected = 0.2 * (m as f64).sqrt() / sigma;
            assert_eq!(u.mu_dist.sd(), expected);
        }
    }

    #[test]
    fn panel_discrete_effects_scale_pointwise() {
        let panel = PanelConfig {
            n_obs: 9,
            chi_dist: ScalarDistribution::Discrete {
                points: vec![(0.0, 0.5), (1.0, 0.5)],
            },
            sigma: 1.5,
        };
        let u = panel_to_universe(&panel, 3).unwrap();
        assert_eq!(
            u.mu_dist,
            ScalarDistribution::Discrete {
                points: vec![(0.0, 0.5), (2.0, 0.5)]
            }
        );
    }

    #[test]
    fn panel_rejects_nonpositive_sigma() {
        let panel = PanelConfig {
            n_obs: 9,
            chi_dist: ScalarDistribution::standard_normal(),
            sigma: 0.0,
        };
        assert!(panel_to_universe(&panel, 3).is_err());
    }
}
