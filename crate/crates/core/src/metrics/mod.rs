//! Instance and semantic segmentation metrics.
//!
//! Instance evaluation is AP at a fixed IoU threshold (0.75 by default) with
//! instances split into small / medium / large bins by voxel count. Semantic
//! evaluation is the Jaccard index and the Dice similarity coefficient.

mod ap;
mod bins;
mod overlap;
mod semantic;

pub use ap::{
    ap_at_threshold, average_precision, evaluate_instances, match_instances, BinReport, BinReports,
    MatchReport, MatchedPair, Matching, DEFAULT_IOU_THRESHOLD,
};
pub use bins::{SizeBins, SizeCategory};
pub use overlap::{iou, overlap_table, OverlapTable};
pub use semantic::{semantic_metrics, SemanticScores};
