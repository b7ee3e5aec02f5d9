use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assign::{GridSpec, GroundTruth};
use crate::error::{Error, Result};
use crate::geometry::{bev_intersection_area, Box3D};

/// One object category: mean extents `(l, w, h)` and the half-width of the
/// uniform jitter applied to each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeClass {
    pub name: String,
    pub mean: [f64; 3],
    pub spread: [f64; 3],
}

impl SizeClass {
    pub fn new(name: &str, mean: [f64; 3], spread: [f64; 3]) -> Self {
        Self {
            name: name.to_string(),
            mean,
            spread,
        }
    }

    pub fn vehicle() -> Self {
        Self::new("vehicle", [4.7, 2.1, 1.7], [0.5, 0.2, 0.2])
    }

    pub fn pedestrian() -> Self {
        Self::new("pedestrian", [0.9, 0.9, 1.75], [0.1, 0.1, 0.15])
    }

    pub fn cyclist() -> Self {
        Self::new("cyclist", [1.8, 0.8, 1.7], [0.2, 0.1, 0.15])
    }
}

fn default_classes() -> Vec<SizeClass> {
    vec![
        SizeClass::vehicle(),
        SizeClass::pedestrian(),
        SizeClass::cyclist(),
    ]
}

fn default_separation() -> usize {
    3
}

fn default_margin() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub grid: GridSpec,
    pub n_objects: usize,
    #[serde(default = "default_classes")]
    pub size_classes: Vec<SizeClass>,
    #[serde(default)]
    pub seed: u64,
    /// Minimum Manhattan distance between object center cells.
    #[serde(default = "default_separation")]
    pub min_center_separation: usize,
    /// Object centers keep this many cells away from the grid border.
    #[serde(default = "default_margin")]
    pub edge_margin: usize,
}

impl SceneConfig {
    pub fn new(grid: GridSpec, n_objects: usize, seed: u64) -> Self {
        Self {
            grid,
            n_objects,
            size_classes: default_classes(),
            seed,
            min_center_separation: default_separation(),
            edge_margin: default_margin(),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.size_classes.len()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

/// Nearest value `v` with `exp(ln v) == v`, so an object stored in
/// log-extent form decodes back to itself bit for bit.
fn snap_to_log_grid(mut v: f64) -> f64 {
    for _ in 0..8 {
        let back = v.ln().exp();
        if back == v {
            break;
        }
        v = back;
    }
    v
}

/// Places `n_objects` boxes by rejection sampling. Classes are used
/// round-robin, yaw is uniform in `[0, 2π)`, boxes rest on `z = 0`, BEV
/// footprints never overlap and center cells keep the configured
/// separation.
pub fn generate_scene(cfg: &SceneConfig) -> Result<(Vec<GroundTruth>, GridSpec)> {
    let grid = cfg.grid;
    grid.validate()?;
    if cfg.n_objects > 0 && cfg.size_classes.is_empty() {
        return Err(Error::InvalidConfig("scene needs at least one size class".into()));
    }
    let margin = cfg.edge_margin as f64 * grid.cell_size;
    let (x0, x1) = (grid.x_min + margin, grid.x_max() - margin);
    let (y0, y1) = (grid.y_min + margin, grid.y_max() - margin);
    if cfg.n_objects > 0 && (x0 >= x1 || y0 >= y1) {
        return Err(Error::InvalidConfig(format!(
            "edge margin {} leaves no room on a {}x{} grid",
            cfg.edge_margin, grid.n_rows, grid.n_cols
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut gts: Vec<GroundTruth> = Vec::with_capacity(cfg.n_objects);
    let mut centers = Vec::with_capacity(cfg.n_objects);
    let mut attempts = 0;
    while gts.len() < cfg.n_objects {
        if attempts == MAX_PLACEMENT_ATTEMPTS {
            return Err(Error::PlacementInfeasible {
                requested: cfg.n_objects,
                placed: gts.len(),
                attempts,
                config: serde_json::to_string(cfg).unwrap_or_default(),
            });
        }
        attempts += 1;
        let class_id = gts.len() % cfg.size_classes.len();
        let class = &cfg.size_classes[class_id];
        let ext: [f64; 3] = std::array::from_fn(|k| {
            let s = class.spread[k];
            let jitter = if s > 0.0 { rng.random_range(-s..s) } else { 0.0 };
            snap_to_log_grid((class.mean[k] + jitter).max(1e-3))
        });
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let x = rng.random_range(x0..x1);
        let y = rng.random_range(y0..y1);
        let bbox = Box3D::new(x, y, 0.5 * ext[2], ext[0], ext[1], ext[2], theta)?;
        let cell = grid.world_to_cell(x, y)?;
        if centers
            .iter()
            .any(|c: &crate::assign::CellIndex| c.manhattan(&cell) < cfg.min_center_separation)
        {
            continue;
        }
        if gts.iter().any(|g| bev_intersection_area(&g.bbox, &bbox) > 0.0) {
            continue;
        }
        gts.push(GroundTruth::new(bbox, class_id));
        centers.push(cell);
    }
    Ok((gts, grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotated_iou_exact;

    fn grid64() -> GridSpec {
        GridSpec::new(0.0, 0.0, 0.5, 64, 64).unwrap()
    }

    #[test]
    fn extents_survive_the_log_round_trip() {
        let (gts, _) = generate_scene(&SceneConfig::new(grid64(), 8, 5)).unwrap();
        for g in &gts {
            for e in g.bbox.extents() {
                assert_eq!(e.ln().exp(), e);
            }
        }
    }

    #[test]
    fn empty_scene() {
        let (gts, _) = generate_scene(&SceneConfig::new(grid64(), 0, 1)).unwrap();
        assert!(gts.is_empty());
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = SceneConfig::new(grid64(), 6, 42);
        assert_eq!(generate_scene(&cfg).unwrap(), generate_scene(&cfg).unwrap());
        assert_ne!(
            generate_scene(&cfg).unwrap().0,
            generate_scene(&cfg.with_seed(43)).unwrap().0
        );
    }

    #[test]
    fn cars_do_not_overlap() {
        let mut cfg = SceneConfig::new(grid64(), 8, 5);
        cfg.size_classes = vec![SizeClass::vehicle()];
        let (gts, grid) = generate_scene(&cfg).unwrap();
        assert_eq!(gts.len(), 8);
        for (i, a) in gts.iter().enumerate() {
            assert!(grid.contains(a.bbox.x, a.bbox.y));
            for b in &gts[i + 1..] {
                assert_eq!(rotated_iou_exact(&a.bbox, &b.bbox).value(), 0.0);
            }
        }
    }

    #[test]
    fn infeasible_placement_names_config() {
        let mut cfg = SceneConfig::new(GridSpec::new(0.0, 0.0, 0.5, 8, 8).unwrap(), 50, 0);
        cfg.edge_margin = 0;
        match generate_scene(&cfg) {
            Err(Error::PlacementInfeasible { requested, config, .. }) => {
                assert_eq!(requested, 50);
                assert!(config.contains("\"n_objects\":50"));
            }
            other => panic!("expected placement failure, got {other:?}"),
        }
    }
}
