//! Network-free training loop: synthetic scenes, per-cell parameter maps
//! fitted by gradient descent and the comparison experiments built on it.

mod balance;
mod fit;
mod scene;
mod state;

pub use balance::{balance_experiment, BalanceReport};
pub use fit::{
    class_stats, fit_scene, fit_seed, mean_final_iou, per_gt_true_iou, run_seeds, AssignerKind,
    ClassStats, DivergenceInfo, ExperimentReport, FitConfig, FitSetup, OptimizerConfig,
    RegressionKind, StepRecord, DIVERGENCE_LIMIT,
};
pub use scene::{generate_scene, SceneConfig, SizeClass, MAX_PLACEMENT_ATTEMPTS};
pub use state::{synthetic_predictions, InitKind, TrainState, INITIAL_LOGIT, SATURATED_LOGIT};
