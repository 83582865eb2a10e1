//! Normalized-RMSE evaluation, coverage sweeps, the image-statistics
//! ablation, rendered comparisons and model reports.

mod report;
mod rmse;
mod sweep;

pub use report::{model_report, render_comparison, ModelReport, RenderComparison, RenderRequest, REFERENCE_SIZES, REFERENCE_SPHERE};
pub use rmse::{evaluate, prepare_scenes, scale_error, EvalReport, Predictor, SceneResult};
pub use sweep::{ablate_ec, coverage_sweep, AblationReport, CoveragePoint, CoverageReport};
