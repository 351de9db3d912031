//! Registration accuracy: point errors `‖Y_i − W(X_i)‖` at targets,
//! displacement interpolation to arbitrary targets, and aggregation across
//! runs.

mod interpolate;
mod report;
mod targets;

pub use interpolate::{
    interpolate_displacement, DisplacementInterpolator, InterpolationMode, TargetMap, Warp, COINCIDENCE_TOL,
};
pub use report::{
    compute_errors, nodal_errors, summarize_runs, summary_to_csv, ErrorSummary, EvalReport, GroupBy, ReportMeta,
    SummaryRow,
};
pub use targets::{load_fiducials_csv, parse_fiducials_csv, TargetSet, FIDUCIAL_HEADER};
