//! Runs figure presets and turns their results into tables and plot specs.

use serde::Serialize;

use crate::decomposition::{DecompositionReport, ReportAccumulator};
use crate::error::Result;
use crate::io::emit::{report_csv, sweep_csv, versioned_json};
use crate::io::plot::{
    Bars, HistogramPanel, LinePanel, LineSeries, Marker, MeanLine, PlotKind, PlotSpec, PointSeries,
    COLOR_A_PRIORI, COLOR_BAD, COLOR_GOOD, COLOR_POST_HOC,
};
use crate::rng::RngSeed;
use crate::sweep::{
    collect_trials, find_crossing, run_sweep, run_trials, Execution, FigureJob, HistogramJob,
    ScatterJob, SweepAxis, SweepResult, TrialSink,
};
use crate::theorizing::{Regime, TheoryType, TrialRecord};

/// Histogram range for selected true quality; values outside are clamped
/// into the edge bins.
pub const HIST_LO: f64 = -2.0;
pub const HIST_HI: f64 = 2.5;
pub const HIST_BINS: usize = 45;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Panel {
    All,
    Published,
}

impl Panel {
    pub const BOTH: [Panel; 2] = [Panel::All, Panel::Published];
}

fn r_slot(r: Regime) -> usize {
    match r {
        Regime::APriori => 0,
        Regime::PostHoc => 1,
    }
}

fn t_slot(t: TheoryType) -> usize {
    match t {
        TheoryType::Good => 0,
        TheoryType::Bad => 1,
    }
}

/// Counts of selected true quality by regime, panel and theory type.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QualityHistogram {
    pub edges: Vec<f64>,
    /// Indexed `[regime][panel][type][bin]`.
    counts: [[[Vec<u64>; 2]; 2]; 2],
    sums: [[f64; 2]; 2],
}

impl Default for QualityHistogram {
    fn default() -> Self {
        let width = (HIST_HI - HIST_LO) / HIST_BINS as f64;
        let zero = || vec![0u64; HIST_BINS];
        Self {
            edges: (0..=HIST_BINS).map(|i| HIST_LO + i as f64 * width).collect(),
            counts: std::array::from_fn(|_| std::array::from_fn(|_| [zero(), zero()])),
            sums: [[0.0; 2]; 2],
        }
    }
}

impl QualityHistogram {
    fn bin(x: f64) -> usize {
        let b = ((x - HIST_LO) / (HIST_HI - HIST_LO) * HIST_BINS as f64).floor();
        b.clamp(0.0, (HIST_BINS - 1) as f64) as usize
    }

    pub fn push(&mut self, rec: &TrialRecord) {
        let (r, t, b) = (r_slot(rec.regime), t_slot(rec.theory_type), Self::bin(rec.mu_star));
        self.counts[r][0][t][b] += 1;
        self.sums[r][0] += rec.mu_star;
        if rec.published {
            self.counts[r][1][t][b] += 1;
            self.sums[r][1] += rec.mu_star;
        }
    }

    pub fn counts(&self, regime: Regime, panel: Panel, theory_type: TheoryType) -> &[u64] {
        &self.counts[r_slot(regime)][panel as usize][t_slot(theory_type)]
    }

    pub fn total(&self, regime: Regime, panel: Panel) -> u64 {
        TheoryType::BOTH
            .iter()
            .map(|&t| self.counts(regime, panel, t).iter().sum::<u64>())
            .sum()
    }

    /// Mean selected true quality in a panel; `None` when the panel is empty.
    pub fn mean(&self, regime: Regime, panel: Panel) -> Option<f64> {
        let n = self.total(regime, panel);
        (n > 0).then(|| self.sums[r_slot(regime)][panel as usize] / n as f64)
    }

    fn merge(&mut self, other: &Self) {
        for r in 0..2 {
            for p in 0..2 {
                self.sums[r][p] += other.sums[r][p];
                for t in 0..2 {
                    for (a, b) in self.counts[r][p][t].iter_mut().zip(&other.counts[r][p][t]) {
                        *a += b;
                    }
                }
            }
        }
    }
}

#[derive(Default)]
struct HistogramSink {
    report: ReportAccumulator,
    hist: QualityHistogram,
}

impl TrialSink for HistogramSink {
    fn record(&mut self, o: &TrialRecord, d: &TrialRecord) {
        self.report.push(o);
        self.report.push(d);
        self.hist.push(o);
        self.hist.push(d);
    }

    fn merge(&mut self, other: Self) {
        self.report.merge(&other.report);
        self.hist.merge(&other.hist);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FigureData {
    Scatter {
        a_priori: Vec<TrialRecord>,
        post_hoc: Vec<TrialRecord>,
    },
    Histogram {
        report: Box<DecompositionReport>,
        histogram: QualityHistogram,
        sd: (f64, f64),
        hurdle: f64,
    },
    Sweep(SweepResult),
}

pub fn run_figure(job: &FigureJob, exec: Execution) -> Result<FigureData> {
    Ok(match job {
        FigureJob::Scatter(ScatterJob { model, n_trials, master_seed }) => {
            let (a_priori, post_hoc) = collect_trials(model, *n_trials, RngSeed::new(*master_seed, 0), exec)?;
            FigureData::Scatter { a_priori, post_hoc }
        }
        FigureJob::Histogram(HistogramJob { model, n_trials, master_seed }) => {
            let sink: HistogramSink = run_trials(model, *n_trials, RngSeed::new(*master_seed, 0), exec)?;
            FigureData::Histogram {
                report: Box::new(DecompositionReport::from_accumulator(&sink.report)?),
                histogram: sink.hist,
                sd: (model.universe.mu_dist.sd(), model.universe.sd_mu_hat()),
                hurdle: model.hurdle,
            }
        }
        FigureJob::Sweep(cfg) => FigureData::Sweep(run_sweep(cfg, exec)?),
    })
}

const SCATTER_COLUMNS: &str = "trial_index,regime,theory_type,selected,mu_star,mu_hat_star,published";

fn scatter_csv(a_priori: &[TrialRecord], post_hoc: &[TrialRecord]) -> String {
    let mut out = format!("{SCATTER_COLUMNS}\n");
    for r in a_priori.iter().chain(post_hoc) {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.trial_index, r.regime, r.theory_type, r.selected, r.mu_star, r.mu_hat_star, r.published
        ));
    }
    out
}

impl FigureData {
    pub fn csv(&self) -> String {
        match self {
            FigureData::Scatter { a_priori, post_hoc } => scatter_csv(a_priori, post_hoc),
            FigureData::Histogram { report, sd, .. } => report_csv(report, sd.0, sd.1),
            FigureData::Sweep(result) => sweep_csv(result),
        }
    }

    pub fn json(&self) -> Result<String> {
        match self {
            FigureData::Scatter { a_priori, post_hoc } => versioned_json(
                "selected_ideas",
                &serde_json::json!({ "a_priori": a_priori, "post_hoc": post_hoc }),
            ),
            FigureData::Histogram { report, histogram, .. } => versioned_json(
                "decomposition_report",
                &serde_json::json!({ "report": report, "histogram": histogram }),
            ),
            FigureData::Sweep(result) => versioned_json("sweep_result", result),
        }
    }

    /// Plot specs keyed by file-name suffix.
    pub fn plots(&self) -> Result<Vec<(String, PlotSpec)>> {
        match self {
            FigureData::Scatter { a_priori, post_hoc } => Ok(vec![(String::new(), scatter_plot(a_priori, post_hoc))]),
            FigureData::Histogram { histogram, hurdle, .. } => Ok(Regime::BOTH
                .iter()
                .map(|&r| (format!("_{r}"), histogram_plot(histogram, r, *hurdle)))
                .collect()),
            FigureData::Sweep(result) => Ok(vec![(String::new(), sweep_plot(result)?)]),
        }
    }
}

fn scatter_plot(a_priori: &[TrialRecord], post_hoc: &[TrialRecord]) -> PlotSpec {
    let pts = |v: &[TrialRecord]| v.iter().map(|r| (r.mu_hat_star, r.mu_star)).collect();
    PlotSpec {
        title: format!("{} selected ideas", a_priori.len() + post_hoc.len()),
        x_label: "measured quality".into(),
        y_label: "true quality".into(),
        kind: PlotKind::Scatter {
            series: vec![
                PointSeries {
                    label: "a priori".into(),
                    color: COLOR_A_PRIORI.into(),
                    marker: Marker::Circle,
                    points: pts(a_priori),
                },
                PointSeries {
                    label: "post hoc".into(),
                    color: COLOR_POST_HOC.into(),
                    marker: Marker::Star,
                    points: pts(post_hoc),
                },
            ],
            diagonal: true,
        },
    }
}

fn histogram_plot(h: &QualityHistogram, regime: Regime, hurdle: f64) -> PlotSpec {
    let (name, color) = match regime {
        Regime::APriori => ("a priori", COLOR_A_PRIORI),
        Regime::PostHoc => ("post hoc", COLOR_POST_HOC),
    };
    let panels = Panel::BOTH
        .iter()
        .map(|&p| HistogramPanel {
            title: match p {
                Panel::All => format!("All ({} trials)", h.total(regime, p)),
                Panel::Published => format!("Published ({} trials)", h.total(regime, p)),
            },
            bin_edges: h.edges.clone(),
            stacks: vec![
                Bars { label: "good type".into(), color: COLOR_GOOD.into(), counts: h.counts(regime, p, TheoryType::Good).to_vec() },
                Bars { label: "bad type".into(), color: COLOR_BAD.into(), counts: h.counts(regime, p, TheoryType::Bad).to_vec() },
            ],
            mean_lines: h
                .mean(regime, p)
                .map(|x| MeanLine { label: format!("mean {x:.3}"), color: color.into(), x })
                .into_iter()
                .collect(),
            note: (p == Panel::Published).then(|| format!("hurdle: measured quality > {hurdle}")),
        })
        .collect();
    PlotSpec {
        title: format!("Selected true quality, {name} theorizing"),
        x_label: "true quality of selected idea".into(),
        y_label: "trials".into(),
        kind: PlotKind::HistogramPair { panels },
    }
}

fn sweep_plot(result: &SweepResult) -> Result<PlotSpec> {
    let xs = result.grid();
    let reports: Vec<_> = result.points.iter().map(|p| p.report.as_ref()).collect();
    let crossing = find_crossing(result).unwrap_or(None);
    let x_label = match result.axis {
        SweepAxis::HeterogeneityQ => "share of ideas eliminated by good types",
        SweepAxis::MuSd => "sd of true quality",
        SweepAxis::None => "grid value",
    };
    Ok(PlotSpec {
        title: "Improvement from post hoc theorizing".into(),
        x_label: x_label.into(),
        y_label: String::new(),
        kind: PlotKind::Line {
            panels: vec![
                LinePanel {
                    y_label: "improvement".into(),
                    series: vec![LineSeries { label: "improvement".into(), color: "#000000".into(), ys: result.improvements() }],
                    zero_line: true,
                    crossing,
                },
                LinePanel {
                    y_label: "learning terms".into(),
                    series: vec![
                        LineSeries {
                            label: "Darwinian learning".into(),
                            color: COLOR_A_PRIORI.into(),
                            ys: reports.iter().map(|r| r.map(|r| r.darwinian_learning)).collect(),
                        },
                        LineSeries {
                            label: "statistical learning".into(),
                            color: COLOR_POST_HOC.into(),
                            ys: reports.iter().map(|r| r.map(|r| r.statistical_learning)).collect(),
                        },
                    ],
                    zero_line: true,
                    crossing: None,
                },
            ],
            xs,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::plot::render_svg;
    use crate::sweep::{figure_preset, FigureName};

    #[test]
    fn fig1_scatter_has_200_marks() {
        let data = run_figure(&figure_preset(FigureName::Fig1), Execution::default()).unwrap();
        let plots = data.plots().unwrap();
        assert_eq!(plots.len(), 1);
        let (svg, _) = render_svg(&plots[0].1).unwrap();
        assert_eq!(svg.matches(r#"class="mark""#).count(), 200);
        assert_eq!(data.csv().lines().count(), 201);
    }

    #[test]
    fn histogram_totals_match_report() {
        let mut job = figure_preset(FigureName::Fig2);
        job.set_trials(20_000);
        let FigureData::Histogram { report, histogram, .. } = run_figure(&job, Execution::default()).unwrap() else {
            panic!("fig2 is a histogram job");
        };
        assert_eq!(histogram.total(Regime::APriori, Panel::All), 20_000);
        assert_eq!(histogram.total(Regime::APriori, Panel::Published), report.n_published_o);
        assert_eq!(histogram.total(Regime::PostHoc, Panel::Published), report.n_published_d);
        let m = histogram.mean(Regime::APriori, Panel::Published).unwrap();
        assert!((m - report.mean_mu_o).abs() < 1e-9);
    }

    #[test]
    fn sweep_plot_marks_crossing_between_brackets() {
        let mut job = figure_preset(FigureName::Fig3);
        job.set_trials(20_000);
        if let FigureJob::Sweep(cfg) = &mut job {
            cfg.grid = vec![0.3, 0.6, 0.9];
        }
        let data = run_figure(&job, Execution::default()).unwrap();
        let FigureData::Sweep(result) = &data else { panic!() };
        let (svg, _) = render_svg(&data.plots().unwrap()[0].1).unwrap();
        if let Some(c) = find_crossing(result).unwrap() {
            assert!((0.3..=0.9).contains(&c));
            assert_eq!(svg.matches(r#"class="crossing""#).count(), 1);
        }
    }
}
