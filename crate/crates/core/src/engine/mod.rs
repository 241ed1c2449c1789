//! The active learning loop, its metrics and its reports.

mod metrics;
mod report;
mod run;
mod select;

pub use metrics::{dice_score, variability_interval, voc_score};
pub use report::{
    mean_curve, read_curve_csv, render_svg, summarize, write_curve_csv, write_report,
    write_summary_csv, write_svg, BandPoint, CurveSummary,
};
pub use run::{
    initial_labels, run_repetition, run_strategy, run_strategy_traced, CurvePoint, Dataset,
    LearningCurve, PreprocessConfig, QueryRecord, RepetitionTrace, RunConfig, Strategy,
};
pub use select::{select_random, select_uncertain};
