//! Forecast verification: contingency tables, categorical scores, and
//! deterministic SVG charts.
//!
//! Scores follow the standard 2x2 event conventions. Every ratio with a
//! zero denominator is reported as `None` and rendered as the literal
//! `NA`, never as NaN.

mod charts;
mod metrics;

pub use charts::{render_performance_diagram, render_sweep_chart, DiagramPoint, SweepSeries};
pub(crate) use metrics::fmt_metric;
pub use metrics::{
    delta_scores, scores, scores_csv, tabulate, ContingencyTable, Scores, ScoresDelta,
};
