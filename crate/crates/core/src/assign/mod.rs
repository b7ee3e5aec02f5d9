//! BEV grid geometry and label assignment.

mod dcla;
mod grid;
mod types;

pub use dcla::{
    assign_center, assign_dcla, dynamic_k, dynamic_k_from_ious, selection_cost, AssignConfig,
    AssignmentDump, AssignmentResult, GtAssignment, GtDump, HeatmapEntry, IouKind,
};
pub use grid::{CellIndex, GridSpec};
pub use types::{GroundTruth, PredictionMap};
