//! Out-of-sample evaluation: rolling schedule, pricing and hedging errors,
//! forecast-comparison tests, parameter stability, regressions and decile
//! portfolios.

mod hedge;
mod portfolio;
mod regress;
mod report;
mod schedule;
mod stats;

pub use hedge::{hedge_error, hedge_error_with, model_delta, rmse, OptionModel, StructuralModel, HedgeSummary};
pub use portfolio::{decile_backtest, group_metrics, read_returns_csv, CrossSection, DecileReport, GroupMetrics};
pub use regress::{ols, phi_stability, with_intercept, OlsFit};
pub use report::{
    evaluate_period, pairwise_matrix, stars, write_matrix_csv, write_period_csv, PairwiseMatrix, PairwiseTest,
    PeriodReport,
};
pub use schedule::{build_schedule, RollingPeriod, Window};
pub use stats::{dm_test, wilcoxon_test, DmResult, WilcoxonResult};

use crate::autodiff::AdError;
use crate::skr::SkrError;
use crate::trainer::TrainError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("dates span {months} calendar months, at least 5 are needed")]
    ShortSpan { months: i32 },
    #[error("dates are not sorted")]
    Unsorted,
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("{what} needs at least {need} values, got {got}")]
    TooShort { what: &'static str, need: usize, got: usize },
    #[error("dimension {got} differs from {expected} at position {index}")]
    Dimension { index: usize, expected: usize, got: usize },
    #[error("design matrix has rank {rank} < {cols}")]
    RankDeficient { rank: usize, cols: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Skr(#[from] SkrError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
