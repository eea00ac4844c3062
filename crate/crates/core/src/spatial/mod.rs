//! Point sets, the KD-tree index and global distance summaries.

mod distance;
mod kdtree;
mod points;

pub use distance::{
    distance_summary, DistanceMode, DistanceSummary, DEFAULT_SAMPLE_PAIRS, DEFAULT_SAMPLE_SEED,
    EXACT_SUMMARY_LIMIT,
};
pub use kdtree::{Availability, Axis, KdTree, Neighbor, NeighborList, QueryStats};
pub use points::{euclidean, Point, PointSet};
