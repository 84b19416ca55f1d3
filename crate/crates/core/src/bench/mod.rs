//! Metrics, the rho sweep, and the seeded experiment matrix.

mod config;
mod matrix;

pub use config::{BenchConfig, DataSource, PolicySource, ControllerSource, METHODS};
pub use matrix::{format_table, read_summary, report, run_matrix, CellRow, SUMMARY_HEADER};

use std::path::PathBuf;

use thiserror::Error;

use crate::baselines::BaselineError;
use crate::dmvf::DmvfError;
use crate::features::{FeatureError, SceneDataset};
use crate::ffagent::{AgentCursor, AgentError, PolicyBank, Strategy};
use crate::mffnet::{run_mffnet, ControllerConfig, MffError};
use crate::netsim::{Channel, ChannelConfig, NetError};
use crate::run::{PeriodRecord, ReportError, RunReport};
use crate::simkernel::SimParams;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid bench config: {0}")]
    Config(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("missing checkpoint {0}")]
    MissingCheckpoint(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Dmvf(#[from] DmvfError),
    #[error(transparent)]
    Mff(#[from] MffError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

/// Fraction of important frames with a selected frame no more than
/// `window` frames away. With no important frames the result is 1.
pub fn coverage(selected: &[usize], truth: &[bool], window: usize) -> f64 {
    let important = truth.iter().filter(|&&b| b).count();
    if important == 0 {
        log::warn!("coverage requested for a scene without important frames");
        return 1.0;
    }
    let mut near = vec![false; truth.len()];
    for &f in selected.iter().filter(|&&f| f < truth.len()) {
        let hi = (f + window).min(truth.len() - 1);
        for n in &mut near[f.saturating_sub(window)..=hi] {
            *n = true;
        }
    }
    let covered = truth.iter().zip(&near).filter(|(&t, &n)| t && n).count();
    covered as f64 / important as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub coverage: f64,
    /// Coverage of the controller's compact summary, when there is one.
    pub summary_coverage: Option<f64>,
    pub processing_rate: f64,
    pub p2p_bytes: u64,
    pub central_bytes: u64,
}

/// Frames counted for coverage: what reached the controller if the method
/// has one, otherwise every agent's selections.
pub fn coverage_frames(report: &RunReport) -> Vec<usize> {
    match &report.delivered {
        Some(d) => d.clone(),
        None => report.selected_union(),
    }
}

pub fn metrics(report: &RunReport, truth: &[bool], window: usize) -> Metrics {
    Metrics {
        coverage: coverage(&coverage_frames(report), truth, window),
        // Summary frames already include their neighbour windows.
        summary_coverage: report.summary.as_ref().map(|s| coverage(s, truth, 0)),
        processing_rate: report.processing_rate(),
        p2p_bytes: report.comm.p2p.attempted_bytes,
        central_bytes: report.comm.central.attempted_bytes,
    }
}

/// Every agent fast-forwards with the same fixed strategy and no
/// coordination.
pub fn run_ffnet(
    dataset: &SceneDataset,
    policies: &dyn PolicyBank,
    strategy: Strategy,
    period: usize,
) -> Result<RunReport, BenchError> {
    if period == 0 {
        return Err(BenchError::Config("period must be positive".into()));
    }
    policies.check_dim(dataset.dim())?;
    let (n, len) = (dataset.num_views(), dataset.len());
    let mut report = RunReport::new(format!("ffnet-{}", strategy.name()), n, len, period);
    let mut cursors = vec![AgentCursor::default(); n];
    for p in 0..len.div_ceil(period) {
        let (start, end) = (p * period, ((p + 1) * period).min(len));
        let selected: Vec<Vec<usize>> = (0..n)
            .map(|a| cursors[a].advance(policies.policy(strategy), dataset.view(a), end))
            .collect();
        report.periods.push(PeriodRecord {
            index: p,
            start,
            end,
            strategies: vec![strategy; n],
            processed: selected.iter().map(Vec::len).collect(),
            scores: None,
            main_views: None,
        });
        for (a, s) in selected.into_iter().enumerate() {
            report.selections[a].extend(s);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub rho: f64,
    pub coverage: f64,
    pub summary_coverage: f64,
    pub processing_rate: f64,
}

/// One lossless centralized run per threshold.
pub fn sweep_rho(
    dataset: &SceneDataset,
    policies: &dyn PolicyBank,
    base: &ControllerConfig,
    rhos: &[f64],
    eval_window: usize,
) -> Result<Vec<SweepRow>, BenchError> {
    if rhos.is_empty() {
        return Err(BenchError::Config("empty rho list".into()));
    }
    rhos.iter()
        .map(|&rho| {
            let cfg = ControllerConfig {
                sim: SimParams::new(base.sim.alpha, rho).map_err(MffError::from)?,
                ..base.clone()
            };
            let mut channel = Channel::new(dataset.num_views(), &ChannelConfig::lossless())?;
            let report = run_mffnet(dataset, policies, &cfg, None, &mut channel)?;
            let m = metrics(&report, dataset.global_truth(), eval_window);
            Ok(SweepRow {
                rho,
                coverage: m.coverage,
                summary_coverage: m.summary_coverage.unwrap_or(0.0),
                processing_rate: m.processing_rate,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("rho,coverage,summary_coverage,processing_rate\n");
    for r in rows {
        out.push_str(&format!(
            "{:.6},{:.6},{:.6},{:.6}\n",
            r.rho, r.coverage, r.summary_coverage, r.processing_rate
        ));
    }
    out
}

/// Distinct (coverage, rate) points that no other point dominates (higher
/// coverage is better, lower rate is better). Sorted by rate.
pub fn pareto_front(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut front: Vec<(f64, f64)> = Vec::new();
    for &(c, r) in points {
        let dominated = points
            .iter()
            .any(|&(c2, r2)| c2 >= c && r2 <= r && (c2 > c || r2 < r));
        if !dominated && !front.contains(&(c, r)) {
            front.push((c, r));
        }
    }
    front.sort_by(|a, b| a.1.total_cmp(&b.1));
    front
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn coverage_examples() {
        let mut truth = vec![false; 200];
        truth[100] = true;
        assert_eq!(coverage(&[100], &truth, 0), 1.0);
        assert_eq!(coverage(&[], &truth, 4), 0.0);
        assert_eq!(coverage(&[103], &truth, 4), 1.0);
        assert_eq!(coverage(&[106], &truth, 4), 0.0);
        assert_eq!(coverage(&[96], &truth, 4), 1.0);
        assert_eq!(coverage(&[0], &[false; 5], 4), 1.0);
        let all: Vec<usize> = (0..200).filter(|&t| truth[t]).collect();
        assert_eq!(coverage(&all, &truth, 0), 1.0);
    }

    #[test]
    fn front_keeps_non_dominated() {
        let pts = [(0.9, 0.05), (0.8, 0.04), (0.85, 0.06), (0.95, 0.07), (0.9, 0.05)];
        assert_eq!(pareto_front(&pts), vec![(0.8, 0.04), (0.9, 0.05), (0.95, 0.07)]);
    }

    proptest! {
        #[test]
        fn coverage_monotone_under_additions(
            truth in prop::collection::vec(any::<bool>(), 1..300),
            sel in prop::collection::vec(0usize..300, 0..20),
            extra in 0usize..300,
            window in 0usize..6,
        ) {
            let base = coverage(&sel, &truth, window);
            let mut more = sel.clone();
            more.push(extra);
            let c = coverage(&more, &truth, window);
            prop_assert!(c >= base);
            prop_assert!((0.0..=1.0).contains(&c));
        }
    }
}
