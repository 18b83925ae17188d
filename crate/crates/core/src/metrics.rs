//! Repertoire metrics: Approach Coverage over a workspace grid, Grasp
//! Coverage over the object boundary, and cross-seed aggregation.

use serde::{Deserialize, Serialize};

use crate::engine::GenerationLog;
use crate::env::{EnvConfig, Shape};
use crate::error::{Error, Result};
use crate::model::{Trajectory, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Edge length of a workspace cell (m).
    pub cell_size: f64,
    /// Target arc length of one boundary segment (m).
    pub segment_length: f64,
    /// Workspace box; defaults to the arm's reach around its base.
    pub workspace: Option<Bounds>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            cell_size: 0.02,
            segment_length: 0.01,
            workspace: None,
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.cell_size > 0.0) {
            v.push("cell_size > 0".to_string());
        }
        if !(self.segment_length > 0.0) {
            v.push("segment_length > 0".to_string());
        }
        if let Some(b) = self.workspace {
            if !(b.min[0] < b.max[0] && b.min[1] < b.max[1]) {
                v.push("workspace min < max".to_string());
            }
        }
        v
    }

    pub fn workspace_for(&self, env: &EnvConfig) -> Bounds {
        self.workspace.unwrap_or_else(|| {
            let [bx, by] = env.base_position;
            let r = env.reach();
            Bounds {
                min: [bx - r, by - r],
                max: [bx + r, by + r],
            }
        })
    }
}

/// Occupancy grid over the operational space.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageGrid {
    min: Vec2,
    cell: f64,
    dims: [usize; 2],
    occupied: Vec<bool>,
    count: usize,
}

impl CoverageGrid {
    pub fn new(bounds: Bounds, cell: f64) -> Self {
        let n = |axis: usize| (((bounds.max[axis] - bounds.min[axis]) / cell).ceil() as usize).max(1);
        let dims = [n(0), n(1)];
        CoverageGrid {
            min: Vec2::new(bounds.min[0], bounds.min[1]),
            cell,
            dims,
            occupied: vec![false; dims[0] * dims[1]],
            count: 0,
        }
    }

    pub fn for_env(env: &EnvConfig, cfg: &MetricsConfig) -> Self {
        CoverageGrid::new(cfg.workspace_for(env), cfg.cell_size)
    }

    pub fn total_cells(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    pub fn occupied_cells(&self) -> usize {
        self.count
    }

    /// Cell index of `p`; points outside the box land on border cells and
    /// the second value is `true`.
    pub fn cell_of(&self, p: Vec2) -> (usize, bool) {
        let rel = (p - self.min) / self.cell;
        let mut outside = false;
        let mut idx = [0usize; 2];
        for axis in 0..2 {
            let f = rel[axis].floor();
            let max = (self.dims[axis] - 1) as f64;
            if !(0.0..=max).contains(&f) {
                outside = true;
            }
            idx[axis] = f.clamp(0.0, max) as usize;
        }
        (idx[1] * self.dims[0] + idx[0], outside)
    }

    /// Marks the cell of `p`; returns whether `p` was outside the box.
    pub fn mark(&mut self, p: Vec2) -> bool {
        let (i, outside) = self.cell_of(p);
        if !self.occupied[i] {
            self.occupied[i] = true;
            self.count += 1;
        }
        outside
    }

    pub fn coverage(&self) -> f64 {
        self.count as f64 / self.total_cells() as f64
    }

    /// Same geometry, nothing occupied.
    pub fn cleared(&self) -> Self {
        CoverageGrid {
            occupied: vec![false; self.occupied.len()],
            count: 0,
            ..self.clone()
        }
    }
}

/// Object boundary split into equal-length pieces, with a hit flag per piece.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceDiscretization {
    shape: Shape,
    hits: Vec<bool>,
    count: usize,
}

impl SurfaceDiscretization {
    pub fn new(shape: Shape, target_length: f64) -> Self {
        let n = ((shape.perimeter() / target_length).round() as usize).max(1);
        SurfaceDiscretization {
            shape,
            hits: vec![false; n],
            count: 0,
        }
    }

    pub fn for_env(env: &EnvConfig, cfg: &MetricsConfig) -> Self {
        SurfaceDiscretization::new(env.object.shape, cfg.segment_length)
    }

    pub fn total_segments(&self) -> usize {
        self.hits.len()
    }

    pub fn hit_segments(&self) -> usize {
        self.count
    }

    /// Segment containing a boundary point given in the object frame.
    pub fn segment_of(&self, local: Vec2) -> usize {
        let n = self.hits.len();
        let fraction = match self.shape {
            Shape::Circle { .. } => {
                let a = local.y.atan2(local.x).rem_euclid(2.0 * std::f64::consts::PI);
                a / (2.0 * std::f64::consts::PI)
            }
            Shape::Box { half_extents: [hx, hy] } => {
                // Arc length, counter-clockwise from the bottom-left corner.
                let (x, y) = (local.x.clamp(-hx, hx), local.y.clamp(-hy, hy));
                let gaps = [y + hy, hx - x, hy - y, x + hx];
                let edge = (0..4)
                    .min_by(|&a, &b| gaps[a].total_cmp(&gaps[b]))
                    .unwrap();
                let s = match edge {
                    0 => x + hx,
                    1 => 2.0 * hx + (y + hy),
                    2 => 2.0 * hx + 2.0 * hy + (hx - x),
                    _ => 4.0 * hx + 2.0 * hy + (hy - y),
                };
                s / self.shape.perimeter()
            }
        };
        ((fraction * n as f64).floor() as usize).min(n - 1)
    }

    pub fn mark(&mut self, local: Vec2) {
        let i = self.segment_of(local);
        if !self.hits[i] {
            self.hits[i] = true;
            self.count += 1;
        }
    }

    pub fn coverage(&self) -> f64 {
        self.count as f64 / self.hits.len() as f64
    }

    pub fn cleared(&self) -> Self {
        SurfaceDiscretization {
            shape: self.shape,
            hits: vec![false; self.hits.len()],
            count: 0,
        }
    }
}

/// Fraction of workspace cells visited by the end-effector of at least one
/// successful trajectory.
pub fn approach_coverage<'a>(
    successes: impl IntoIterator<Item = &'a Trajectory>,
    grid: &CoverageGrid,
) -> f64 {
    let mut grid = grid.cleared();
    let mut outside = 0usize;
    for traj in successes.into_iter().filter(|t| t.success) {
        for p in traj.ee_positions() {
            outside += grid.mark(p) as usize;
        }
    }
    if outside > 0 {
        log::warn!("{outside} end-effector samples fell outside the coverage box");
    }
    grid.coverage()
}

/// Fraction of boundary segments holding the first contact point of at least
/// one successful trajectory.
pub fn grasp_coverage<'a>(
    successes: impl IntoIterator<Item = &'a Trajectory>,
    surf: &SurfaceDiscretization,
) -> Result<f64> {
    let mut surf = surf.cleared();
    for (i, traj) in successes.into_iter().enumerate().filter(|(_, t)| t.success) {
        let contact = traj.first_contact.ok_or(Error::MissingContact(i))?;
        surf.mark(contact.local);
    }
    Ok(surf.coverage())
}

/// Incremental AC/GC accumulator used while a run progresses.
#[derive(Clone, Debug)]
pub struct CoverageTracker {
    grid: CoverageGrid,
    surface: SurfaceDiscretization,
}

impl CoverageTracker {
    pub fn new(env: &EnvConfig, cfg: &MetricsConfig) -> Self {
        CoverageTracker {
            grid: CoverageGrid::for_env(env, cfg),
            surface: SurfaceDiscretization::for_env(env, cfg),
        }
    }

    /// Adds a trajectory; unsuccessful ones are ignored.
    pub fn add(&mut self, traj: &Trajectory) -> Result<()> {
        if !traj.success {
            return Ok(());
        }
        let contact = traj.first_contact.ok_or(Error::MissingContact(0))?;
        for p in traj.ee_positions() {
            self.grid.mark(p);
        }
        self.surface.mark(contact.local);
        Ok(())
    }

    pub fn approach(&self) -> f64 {
        self.grid.coverage()
    }

    pub fn grasp(&self) -> f64 {
        self.surface.coverage()
    }
}

/// 1.96 for a two-sided 95% normal interval.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Mean and 95% half-width `z * sd / sqrt(n)`; the half-width needs two samples.
pub fn mean_ci(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, Some(Z_95 * var.sqrt() / (n as f64).sqrt()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub rollouts: usize,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub ci95: Option<f64>,
}

pub const AGGREGATE_METRICS: [&str; 4] = [
    "success",
    "successes_total",
    "approach_coverage",
    "grasp_coverage",
];

fn metric_value(log: &GenerationLog, metric: &str) -> f64 {
    match metric {
        "success" => (log.successes_total > 0) as u8 as f64,
        "successes_total" => log.successes_total as f64,
        "approach_coverage" => log.approach_coverage,
        "grasp_coverage" => log.grasp_coverage,
        other => unreachable!("unknown metric {other}"),
    }
}

/// Aligns per-seed series on cumulative-rollout checkpoints (the union of
/// every series' rollout counts) and reports mean and 95% CI per metric.
/// At each checkpoint a series contributes its latest log at or before it.
pub fn aggregate_runs(series: &[Vec<GenerationLog>]) -> Vec<AggregateRow> {
    let mut checkpoints: Vec<usize> = series
        .iter()
        .flat_map(|s| s.iter().map(|l| l.rollouts))
        .collect();
    checkpoints.sort_unstable();
    checkpoints.dedup();

    let mut rows = Vec::with_capacity(checkpoints.len() * AGGREGATE_METRICS.len());
    for &cp in &checkpoints {
        let at: Vec<&GenerationLog> = series
            .iter()
            .filter_map(|s| s.iter().take_while(|l| l.rollouts <= cp).last())
            .collect();
        for metric in AGGREGATE_METRICS {
            let values: Vec<f64> = at.iter().map(|l| metric_value(l, metric)).collect();
            let (mean, ci95) = mean_ci(&values);
            rows.push(AggregateRow {
                rollouts: cp,
                metric: metric.to_string(),
                n: values.len(),
                mean,
                ci95,
            });
        }
    }
    rows
}
