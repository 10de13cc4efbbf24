//! Conditional means over published trials and the split of the a priori
//! versus post hoc quality gap into Darwinian and Statistical Learning.
//!
//! All moments are accumulated in fixed chunks of consecutive trials and the
//! chunks are merged in trial order, so floating-point results do not depend
//! on how many workers produced them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::theorizing::{Regime, TheoryType, TrialRecord};

/// Trials per accumulation chunk.
pub const CHUNK_TRIALS: usize = 4096;

fn regime_slot(r: Regime) -> usize {
    match r {
        Regime::APriori => 0,
        Regime::PostHoc => 1,
    }
}

fn type_slot(t: TheoryType) -> usize {
    match t {
        TheoryType::Good => 0,
        TheoryType::Bad => 1,
    }
}

/// Running sums over the published trials of one (regime, type) cell.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CellMoments {
    pub n: u64,
    pub sum_mu: f64,
    pub sum_mu_sq: f64,
    pub sum_mu_hat: f64,
    pub sum_mu_hat_sq: f64,
}

impl CellMoments {
    #[inline]
    fn push(&mut self, mu: f64, mu_hat: f64) {
        self.n += 1;
        self.sum_mu += mu;
        self.sum_mu_sq += mu * mu;
        self.sum_mu_hat += mu_hat;
        self.sum_mu_hat_sq += mu_hat * mu_hat;
    }

    fn merge(&mut self, other: &CellMoments) {
        self.n += other.n;
        self.sum_mu += other.sum_mu;
        self.sum_mu_sq += other.sum_mu_sq;
        self.sum_mu_hat += other.sum_mu_hat;
        self.sum_mu_hat_sq += other.sum_mu_hat_sq;
    }

    fn mean_mu(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum_mu / self.n as f64)
    }

    fn mean_mu_hat(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum_mu_hat / self.n as f64)
    }

    /// Variance of the sample mean of mu.
    fn var_mean_mu(&self) -> Option<f64> {
        var_of_mean(self.n, self.sum_mu, self.sum_mu_sq)
    }

    fn var_mean_mu_hat(&self) -> Option<f64> {
        var_of_mean(self.n, self.sum_mu_hat, self.sum_mu_hat_sq)
    }
}

fn var_of_mean(n: u64, sum: f64, sum_sq: f64) -> Option<f64> {
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let s2 = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    Some(s2 / nf)
}

/// Mergeable per-cell moments plus trial counts per (regime, type).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ReportAccumulator {
    cells: [[CellMoments; 2]; 2],
    trials: [[u64; 2]; 2],
}

impl ReportAccumulator {
    #[inline]
    pub fn push(&mut self, record: &TrialRecord) {
        let (r, t) = (regime_slot(record.regime), type_slot(record.theory_type));
        self.trials[r][t] += 1;
        if record.published {
            self.cells[r][t].push(record.mu_star, record.mu_hat_star);
        }
    }

    pub fn merge(&mut self, other: &ReportAccumulator) {
        for r in 0..2 {
            for t in 0..2 {
                self.cells[r][t].merge(&other.cells[r][t]);
                self.trials[r][t] += other.trials[r][t];
            }
        }
    }

    pub fn cell(&self, regime: Regime, theory_type: TheoryType) -> &CellMoments {
        &self.cells[regime_slot(regime)][type_slot(theory_type)]
    }

    pub fn trials(&self, regime: Regime, theory_type: TheoryType) -> u64 {
        self.trials[regime_slot(regime)][type_slot(theory_type)]
    }

    /// Accumulates a batch in `CHUNK_TRIALS` blocks merged in order.
    pub fn from_records(records: &[TrialRecord]) -> Self {
        merge_in_order(records.chunks(CHUNK_TRIALS).map(|chunk| {
            let mut acc = ReportAccumulator::default();
            for r in chunk {
                acc.push(r);
            }
            acc
        }))
    }
}

/// Left fold of chunk accumulators in iteration order.
pub fn merge_in_order(chunks: impl IntoIterator<Item = ReportAccumulator>) -> ReportAccumulator {
    chunks.into_iter().fold(ReportAccumulator::default(), |mut acc, c| {
        acc.merge(&c);
        acc
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalCell {
    pub regime: Regime,
    pub theory_type: TheoryType,
    pub n_published: u64,
    pub mean_mu: Option<f64>,
    pub mean_mu_hat: Option<f64>,
    pub se_mean_mu: Option<f64>,
    pub se_mean_mu_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub undefined_reason: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StandardErrors {
    #[serde(rename = "p_good_given_O")]
    pub p_good_given_o: Option<f64>,
    #[serde(rename = "p_good_given_D")]
    pub p_good_given_d: Option<f64>,
    #[serde(rename = "mean_mu_O")]
    pub mean_mu_o: Option<f64>,
    #[serde(rename = "mean_mu_D")]
    pub mean_mu_d: Option<f64>,
    /// Of `mean_mu_D - mean_mu_O`.
    pub difference: Option<f64>,
    pub darwinian_learning: Option<f64>,
    pub statistical_learning: Option<f64>,
    pub improvement: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    /// Ordered (a_priori, good), (a_priori, bad), (post_hoc, good), (post_hoc, bad).
    pub cells: Vec<ConditionalCell>,
    #[serde(rename = "p_good_given_O")]
    pub p_good_given_o: f64,
    #[serde(rename = "p_good_given_D")]
    pub p_good_given_d: f64,
    #[serde(rename = "mean_mu_O")]
    pub mean_mu_o: f64,
    #[serde(rename = "mean_mu_D")]
    pub mean_mu_d: f64,
    pub darwinian_learning: f64,
    pub statistical_learning: f64,
    pub improvement: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub improvement_undefined_reason: Option<String>,
    pub identity_residual: f64,
    pub standard_errors: StandardErrors,
    #[serde(rename = "n_trials_O")]
    pub n_trials_o: u64,
    #[serde(rename = "n_trials_D")]
    pub n_trials_d: u64,
    #[serde(rename = "n_published_O")]
    pub n_published_o: u64,
    #[serde(rename = "n_published_D")]
    pub n_published_d: u64,
    /// Set when only one theory type occurs; Darwinian Learning is then 0
    /// by construction.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub single_type: Option<TheoryType>,
}

impl DecompositionReport {
    pub fn cell(&self, regime: Regime, theory_type: TheoryType) -> &ConditionalCell {
        &self.cells[2 * regime_slot(regime) + type_slot(theory_type)]
    }

    fn cell_mean(&self, regime: Regime, theory_type: TheoryType) -> Result<f64> {
        self.cell(regime, theory_type)
            .mean_mu
            .ok_or(Error::EmptyCell { regime, theory_type })
    }

    /// `mean_mu_X - [P(G|X) E(mu|G,X) + P(B|X) E(mu|B,X)]` for X = O, D.
    pub fn mixture_residuals(&self) -> Result<(f64, f64)> {
        let mix = |regime, p: f64, mean: f64| -> Result<f64> {
            let mut m = 0.0;
            for (t, w) in [(TheoryType::Good, p), (TheoryType::Bad, 1.0 - p)] {
                if w > 0.0 {
                    m += w * self.cell_mean(regime, t)?;
                }
            }
            Ok(mean - m)
        };
        Ok((
            mix(Regime::APriori, self.p_good_given_o, self.mean_mu_o)?,
            mix(Regime::PostHoc, self.p_good_given_d, self.mean_mu_d)?,
        ))
    }

    pub fn from_accumulator(acc: &ReportAccumulator) -> Result<Self> {
        let present = |t| acc.trials(Regime::APriori, t) + acc.trials(Regime::PostHoc, t) > 0;
        let types: Vec<TheoryType> = TheoryType::BOTH.into_iter().filter(|&t| present(t)).collect();
        if types.is_empty() {
            return Err(Error::Precondition("no trials to summarize".into()));
        }
        for &t in &types {
            for r in Regime::BOTH {
                if acc.cell(r, t).n == 0 {
                    return Err(Error::EmptyCell {
                        regime: r,
                        theory_type: t,
                    });
                }
            }
        }

        let mut cells = Vec::with_capacity(4);
        for r in Regime::BOTH {
            for t in TheoryType::BOTH {
                let m = acc.cell(r, t);
                cells.push(ConditionalCell {
                    regime: r,
                    theory_type: t,
                    n_published: m.n,
                    mean_mu: m.mean_mu(),
                    mean_mu_hat: m.mean_mu_hat(),
                    se_mean_mu: m.var_mean_mu().map(f64::sqrt),
                    se_mean_mu_hat: m.var_mean_mu_hat().map(f64::sqrt),
                    undefined_reason: (m.n == 0).then(|| {
                        if present(t) {
                            "no published trials".to_string()
                        } else {
                            format!("no {t} theory types drawn")
                        }
                    }),
                });
            }
        }

        let pooled = |r| {
            let mut m = *acc.cell(r, TheoryType::Good);
            m.merge(acc.cell(r, TheoryType::Bad));
            m
        };
        let (pool_o, pool_d) = (pooled(Regime::APriori), pooled(Regime::PostHoc));
        let p_good = |pool: &CellMoments, r| acc.cell(r, TheoryType::Good).n as f64 / pool.n as f64;
        let p_o = p_good(&pool_o, Regime::APriori);
        let p_d = p_good(&pool_d, Regime::PostHoc);
        let mean_o = pool_o.sum_mu / pool_o.n as f64;
        let mean_d = pool_d.sum_mu / pool_d.n as f64;
        let var_p = |p: f64, n: u64| p * (1.0 - p) / n as f64;
        let var_p_o = var_p(p_o, pool_o.n);
        let var_p_d = var_p(p_d, pool_d.n);
        let var_mean_o = pool_o.var_mean_mu();
        let var_mean_d = pool_d.var_mean_mu();

        let single_type = (types.len() == 1).then(|| types[0]);
        let (dl, sl, var_dl, var_sl) = match single_type {
            Some(t) => {
                let c_o = acc.cell(Regime::APriori, t);
                let c_d = acc.cell(Regime::PostHoc, t);
                let sl = c_d.mean_mu().unwrap() - c_o.mean_mu().unwrap();
                let var_sl = sum_opt([c_d.var_mean_mu(), c_o.var_mean_mu()]);
                (0.0, sl, Some(0.0), var_sl)
            }
            None => {
                let mean = |r, t| acc.cell(r, t).mean_mu().unwrap();
                let var = |r, t| acc.cell(r, t).var_mean_mu();
                let (g_o, b_o) = (mean(Regime::APriori, TheoryType::Good), mean(Regime::APriori, TheoryType::Bad));
                let (g_d, b_d) = (mean(Regime::PostHoc, TheoryType::Good), mean(Regime::PostHoc, TheoryType::Bad));
                let (vg_o, vb_o) = (var(Regime::APriori, TheoryType::Good), var(Regime::APriori, TheoryType::Bad));
                let (vg_d, vb_d) = (var(Regime::PostHoc, TheoryType::Good), var(Regime::PostHoc, TheoryType::Bad));

                let dl = (p_o - p_d) * (g_o - b_o);
                let sl = p_d * (g_d - g_o) + (1.0 - p_d) * (b_d - b_o);

                let var_dl = sum_opt([vg_o, vb_o]).map(|v_gap| {
                    (g_o - b_o).powi(2) * (var_p_o + var_p_d) + (p_o - p_d).powi(2) * v_gap
                });
                let var_sl = sum_opt([vg_d, vg_o]).zip(sum_opt([vb_d, vb_o])).map(|(vg, vb)| {
                    ((g_d - g_o) - (b_d - b_o)).powi(2) * var_p_d
                        + p_d * p_d * vg
                        + (1.0 - p_d).powi(2) * vb
                });
                (dl, sl, var_dl, var_sl)
            }
        };

        let (improvement, improvement_undefined_reason) = match ratio(mean_d, mean_o) {
            Improvement::Ratio(x) => (Some(x), None),
            Improvement::Undefined { difference } => (
                None,
                Some(format!(
                    "mean_mu_O = {mean_o} <= 0; mean_mu_D - mean_mu_O = {difference}"
                )),
            ),
        };
        let var_improvement = match (improvement, var_mean_o, var_mean_d) {
            (Some(_), Some(vo), Some(vd)) => {
                Some(vd / (mean_o * mean_o) + (mean_d / (mean_o * mean_o)).powi(2) * vo)
            }
            _ => None,
        };

        let mut report = DecompositionReport {
            cells,
            p_good_given_o: p_o,
            p_good_given_d: p_d,
            mean_mu_o: mean_o,
            mean_mu_d: mean_d,
            darwinian_learning: dl,
            statistical_learning: sl,
            improvement,
            improvement_undefined_reason,
            identity_residual: 0.0,
            standard_errors: StandardErrors {
                p_good_given_o: Some(var_p_o.sqrt()),
                p_good_given_d: Some(var_p_d.sqrt()),
                mean_mu_o: var_mean_o.map(f64::sqrt),
                mean_mu_d: var_mean_d.map(f64::sqrt),
                difference: sum_opt([var_mean_o, var_mean_d]).map(f64::sqrt),
                darwinian_learning: var_dl.map(f64::sqrt),
                statistical_learning: var_sl.map(f64::sqrt),
                improvement: var_improvement.map(f64::sqrt),
            },
            n_trials_o: acc.trials(Regime::APriori, TheoryType::Good)
                + acc.trials(Regime::APriori, TheoryType::Bad),
            n_trials_d: acc.trials(Regime::PostHoc, TheoryType::Good)
                + acc.trials(Regime::PostHoc, TheoryType::Bad),
            n_published_o: pool_o.n,
            n_published_d: pool_d.n,
            single_type,
        };
        report.identity_residual = check_identity(&report)?;
        Ok(report)
    }
}

fn sum_opt<const N: usize>(xs: [Option<f64>; N]) -> Option<f64> {
    xs.into_iter().sum()
}

/// Report on published trials of a priori (`trials_o`) and post hoc
/// (`trials_d`) batches drawn from the same model.
pub fn estimate_report(
    trials_o: &[TrialRecord],
    trials_d: &[TrialRecord],
) -> Result<DecompositionReport> {
    if let Some(r) = trials_o.iter().find(|r| r.regime != Regime::APriori) {
        return Err(Error::Precondition(format!(
            "trial {} in the a priori batch has regime {}",
            r.trial_index, r.regime
        )));
    }
    if let Some(r) = trials_d.iter().find(|r| r.regime != Regime::PostHoc) {
        return Err(Error::Precondition(format!(
            "trial {} in the post hoc batch has regime {}",
            r.trial_index, r.regime
        )));
    }
    let mut acc = ReportAccumulator::from_records(trials_o);
    acc.merge(&ReportAccumulator::from_records(trials_d));
    DecompositionReport::from_accumulator(&acc)
}

/// `(E(mu|O) - E(mu|D)) - (DL - SL)` from the report's fields.
pub fn check_identity(report: &DecompositionReport) -> Result<f64> {
    for t in TheoryType::BOTH {
        if report.single_type.is_some_and(|s| s != t) {
            continue;
        }
        for r in Regime::BOTH {
            report.cell_mean(r, t)?;
        }
    }
    Ok((report.mean_mu_o - report.mean_mu_d)
        - (report.darwinian_learning - report.statistical_learning))
}

/// Relative tolerance scale used for the identity check.
pub fn identity_scale(report: &DecompositionReport) -> f64 {
    1f64.max(report.mean_mu_o.abs()).max(report.mean_mu_d.abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Improvement {
    Ratio(f64),
    /// The ratio is meaningless when the a priori mean is not positive;
    /// carries `mean_mu_D - mean_mu_O` instead.
    Undefined { difference: f64 },
}

impl Improvement {
    pub fn value(&self) -> Option<f64> {
        match self {
            Improvement::Ratio(x) => Some(*x),
            Improvement::Undefined { .. } => None,
        }
    }
}

fn ratio(mean_d: f64, mean_o: f64) -> Improvement {
    if mean_o > 0.0 {
        Improvement::Ratio(mean_d / mean_o - 1.0)
    } else {
        Improvement::Undefined {
            difference: mean_d - mean_o,
        }
    }
}

pub fn improvement_ratio(report: &DecompositionReport) -> Improvement {
    ratio(report.mean_mu_d, report.mean_mu_o)
}
