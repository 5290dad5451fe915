//! Threshold-free evaluation: ROC AUC, per-region overlap and the evaluation
//! report.

mod pro;
mod report;
mod roc;

pub use pro::{aupro_at, connected_components, pro_curve, write_pro_curve_csv, ProCurve};
pub use report::{evaluate, CategoryMetrics, EvalEntry, EvalReport, MetricSet, AUPRO_LIMITS};
pub use roc::roc_auc;
