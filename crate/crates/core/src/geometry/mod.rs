//! Oriented-box geometry: representations, volumes, the rotation-weighted
//! IoU, exact rotated IoU by polygon clipping, and a Monte-Carlo oracle.

mod aabb;
mod boxes;
mod oracle;
mod polygon;

pub use aabb::{
    aabb_intersection_volume, aabb_iou, center_distance_term, rotation_weight, rwiou,
    rwiou_params, volume,
};
pub(crate) use aabb::{axis_overlap, axis_span, clamped_weight};
pub use boxes::{Alpha, Box3D, BoxParams8, IoUScalar};
pub use oracle::{mc_iou_oracle, McEstimate, MIN_MC_SAMPLES};
pub use polygon::{bev_corners, bev_intersection_area, convex_polygon_area, rotated_iou_exact, rotated_iou_pred};
