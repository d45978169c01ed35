//! Classification metrics, cross-validation and detection scoring.

pub mod cv;
pub mod detection;
pub mod metrics;

pub use cv::{kfold_cv, stratified_folds, with_privileged, CvOptions, CvReport, FoldResult, Grid, PrivilegedSource};
pub use detection::{bbox_overlap, match_detections, missrate_fppi_curve, BBox, CurvePoint, ImageBoxes, MatchResult};
pub use metrics::{accuracy, f1_score, macro_f1};
