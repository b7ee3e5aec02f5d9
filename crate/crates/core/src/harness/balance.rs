use serde::{Deserialize, Serialize};

use super::fit::{run_seeds, AssignerKind, ClassStats, FitSetup};
use super::scene::SceneConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub r: usize,
    pub warm_up_steps: usize,
    /// Mean positive count per size class, pooled over all seeds.
    pub per_class: Vec<ClassStats>,
    /// Largest over smallest class mean (1 for a single populated class).
    pub ratio: f64,
}

/// Positive counts per size class after a warm-up fit with DCLA at radius
/// `r`. Classes with no objects are left out of the ratio.
pub fn balance_experiment(
    scene: &SceneConfig,
    setup: &FitSetup,
    r: usize,
    seeds: &[u64],
) -> Result<BalanceReport> {
    if scene.n_classes() < 2 {
        return Err(Error::InvalidConfig(
            "balance experiment needs at least two size classes".into(),
        ));
    }
    let setup = FitSetup {
        assigner: AssignerKind::Dcla { r },
        ..*setup
    };
    let reports = run_seeds(scene, &setup, seeds)?;
    let mut sums = vec![0usize; scene.n_classes()];
    let mut counts = vec![0usize; scene.n_classes()];
    for rep in &reports {
        for c in &rep.per_class {
            // mean_k * n_gts is an exact small integer
            sums[c.class_id] += (c.mean_k * c.n_gts as f64).round() as usize;
            counts[c.class_id] += c.n_gts;
        }
    }
    let per_class: Vec<ClassStats> = (0..scene.n_classes())
        .map(|class_id| ClassStats {
            class_id,
            n_gts: counts[class_id],
            mean_k: if counts[class_id] == 0 {
                0.0
            } else {
                sums[class_id] as f64 / counts[class_id] as f64
            },
        })
        .collect();
    let populated: Vec<f64> = per_class
        .iter()
        .filter(|c| c.n_gts > 0)
        .map(|c| c.mean_k)
        .collect();
    let max = populated.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = populated.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = if populated.len() < 2 {
        1.0
    } else if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    };
    Ok(BalanceReport {
        r,
        warm_up_steps: setup.optimizer.n_steps,
        per_class,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assign::GridSpec;
    use crate::harness::OptimizerConfig;

    fn scene() -> SceneConfig {
        SceneConfig::new(GridSpec::new(0.0, 0.0, 0.5, 40, 40).unwrap(), 6, 0)
    }

    #[test]
    fn center_assignment_gives_one_positive_per_class() {
        let setup = FitSetup {
            optimizer: OptimizerConfig {
                step_size: 0.05,
                n_steps: 5,
            },
            ..FitSetup::default()
        };
        let rep = balance_experiment(&scene(), &setup, 0, &[1, 2]).unwrap();
        assert!(rep.per_class.iter().all(|c| c.mean_k == 1.0));
        assert_eq!(rep.ratio, 1.0);
    }

    #[test]
    fn single_class_is_rejected() {
        let mut s = scene();
        s.size_classes.truncate(1);
        assert!(balance_experiment(&s, &FitSetup::default(), 1, &[0]).is_err());
    }
}
