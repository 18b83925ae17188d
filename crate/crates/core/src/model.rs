//! Shared data model: genomes, behavior descriptors, trajectories, individuals,
//! archives and run configuration.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::metrics::MetricsConfig;
use crate::variation::MutationParams;

pub type Vec2 = nalgebra::Vector2<f64>;

/// Number of joint-space waypoints encoded in a genome.
pub const WAYPOINTS: usize = 3;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a - 2.0 * PI
    } else {
        a
    }
}

/// Planar pose: a position and a heading in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub position: Vec2,
    pub orientation: f64,
}

impl Pose2 {
    pub fn new(position: Vec2, orientation: f64) -> Self {
        Pose2 {
            position,
            orientation,
        }
    }

    fn rotate(theta: f64, v: Vec2) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
    }

    /// Maps a point expressed in this frame into the parent frame.
    pub fn transform_point(&self, local: Vec2) -> Vec2 {
        self.position + Self::rotate(self.orientation, local)
    }

    /// Maps a parent-frame point into this frame.
    pub fn inverse_transform_point(&self, world: Vec2) -> Vec2 {
        Self::rotate(-self.orientation, world - self.position)
    }

    pub fn transform_vector(&self, local: Vec2) -> Vec2 {
        Self::rotate(self.orientation, local)
    }

    pub fn inverse_transform_vector(&self, world: Vec2) -> Vec2 {
        Self::rotate(-self.orientation, world)
    }

    /// `self * other`: `other` is expressed in this frame.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        Pose2 {
            position: self.transform_point(other.position),
            orientation: self.orientation + other.orientation,
        }
    }

    /// Pose of `other` expressed in this frame.
    pub fn relative(&self, other: &Pose2) -> Pose2 {
        Pose2 {
            position: self.inverse_transform_point(other.position),
            orientation: other.orientation - self.orientation,
        }
    }
}

/// Flat gene vector: three joint-space waypoints followed by the closure-timing
/// gene. Every gene is normalized into `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Genome {
    genes: Vec<f64>,
}

impl Genome {
    /// Gene count for an arm with `joints` joints.
    pub fn len_for(joints: usize) -> usize {
        WAYPOINTS * joints + 1
    }

    /// Builds a genome, rejecting malformed lengths and out-of-range genes.
    pub fn new(genes: Vec<f64>) -> Result<Self> {
        check_shape(&genes)?;
        if let Some((index, &value)) = genes
            .iter()
            .enumerate()
            .find(|(_, g)| !(-1.0..=1.0).contains(*g))
        {
            return Err(Error::GeneOutOfRange { index, value });
        }
        Ok(Genome { genes })
    }

    /// Builds a genome for a specific joint count.
    pub fn for_joints(genes: Vec<f64>, joints: usize) -> Result<Self> {
        let expected = Self::len_for(joints);
        if genes.len() != expected {
            return Err(Error::GenomeLength {
                expected,
                actual: genes.len(),
            });
        }
        Genome::new(genes)
    }

    /// Builds a genome by clamping every gene into range. Length is still checked.
    pub(crate) fn clamped(mut genes: Vec<f64>) -> Self {
        debug_assert!(check_shape(&genes).is_ok());
        for g in &mut genes {
            *g = g.clamp(-1.0, 1.0);
        }
        Genome { genes }
    }

    pub fn genes(&self) -> &[f64] {
        &self.genes
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn joints(&self) -> usize {
        (self.genes.len() - 1) / WAYPOINTS
    }

    /// Genes of waypoint `i` (0-based).
    pub fn waypoint(&self, i: usize) -> &[f64] {
        let j = self.joints();
        &self.genes[i * j..(i + 1) * j]
    }

    pub fn closure_gene(&self) -> f64 {
        self.genes[self.genes.len() - 1]
    }
}

fn check_shape(genes: &[f64]) -> Result<()> {
    if genes.len() < WAYPOINTS + 1 || !(genes.len() - 1).is_multiple_of(WAYPOINTS) {
        let joints = (genes.len().saturating_sub(1) / WAYPOINTS).max(1);
        return Err(Error::GenomeLength {
            expected: Genome::len_for(joints),
            actual: genes.len(),
        });
    }
    Ok(())
}

impl TryFrom<Vec<f64>> for Genome {
    type Error = Error;

    fn try_from(genes: Vec<f64>) -> Result<Self> {
        Genome::new(genes)
    }
}

impl From<Genome> for Vec<f64> {
    fn from(g: Genome) -> Self {
        g.genes
    }
}

/// Clamps raw genes into `[-1, 1]` after checking the length against `joints`.
pub fn genome_clamp(genes: &[f64], joints: usize) -> Result<Genome> {
    let expected = Genome::len_for(joints);
    if genes.len() != expected {
        return Err(Error::GenomeLength {
            expected,
            actual: genes.len(),
        });
    }
    Ok(Genome::clamped(genes.to_vec()))
}

/// One of the five behavior-descriptor slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Slot {
    /// Object position at the end of the episode.
    ObjectFinal,
    /// End-effector position at first touch.
    TouchPosition,
    /// End-effector orientation at first touch.
    TouchOrientation,
    /// End-effector position at mid-episode.
    MidPosition,
    /// End-effector orientation at mid-episode.
    MidOrientation,
}

impl Slot {
    pub const ALL: [Slot; 5] = [
        Slot::ObjectFinal,
        Slot::TouchPosition,
        Slot::TouchOrientation,
        Slot::MidPosition,
        Slot::MidOrientation,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// 1-based slot number (`b1` .. `b5`).
    pub fn number(self) -> usize {
        self.index() + 1
    }

    pub fn from_number(n: usize) -> Option<Slot> {
        n.checked_sub(1).and_then(|i| Slot::ALL.get(i).copied())
    }

    pub fn is_orientation(self) -> bool {
        matches!(self, Slot::TouchOrientation | Slot::MidOrientation)
    }

    /// Slots that are only defined once the gripper touched the object.
    pub fn needs_touch(self) -> bool {
        matches!(self, Slot::TouchPosition | Slot::TouchOrientation)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SlotValue {
    Position(Vec2),
    Angle(f64),
}

/// Five-slot behavior descriptor. The touch slots exist only when the
/// rollout recorded a touch, so eligibility is carried by `touch`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorDescriptor {
    object_final: Vec2,
    touch: Option<Pose2>,
    mid: Pose2,
}

impl BehaviorDescriptor {
    pub fn new(object_final: Vec2, touch: Option<Pose2>, mid: Pose2) -> Self {
        let wrap = |p: Pose2| Pose2::new(p.position, wrap_angle(p.orientation));
        BehaviorDescriptor {
            object_final,
            touch: touch.map(wrap),
            mid: wrap(mid),
        }
    }

    pub fn object_final(&self) -> Vec2 {
        self.object_final
    }

    pub fn touch(&self) -> Option<Pose2> {
        self.touch
    }

    pub fn mid(&self) -> Pose2 {
        self.mid
    }

    pub fn touched(&self) -> bool {
        self.touch.is_some()
    }

    pub fn is_eligible(&self, slot: Slot) -> bool {
        !slot.needs_touch() || self.touched()
    }

    pub fn eligibility(&self) -> [bool; 5] {
        Slot::ALL.map(|s| self.is_eligible(s))
    }

    pub fn value(&self, slot: Slot) -> Option<SlotValue> {
        match slot {
            Slot::ObjectFinal => Some(SlotValue::Position(self.object_final)),
            Slot::TouchPosition => self.touch.map(|p| SlotValue::Position(p.position)),
            Slot::TouchOrientation => self.touch.map(|p| SlotValue::Angle(p.orientation)),
            Slot::MidPosition => Some(SlotValue::Position(self.mid.position)),
            Slot::MidOrientation => Some(SlotValue::Angle(self.mid.orientation)),
        }
    }

    /// All five slots as one flat vector; ineligible components are zero.
    ///
    /// Layout: `[b1.x, b1.y, b2.x, b2.y, b3, b4.x, b4.y, b5]`.
    pub fn concatenated(&self) -> [f64; 8] {
        let touch = self.touch.unwrap_or(Pose2::new(Vec2::zeros(), 0.0));
        [
            self.object_final.x,
            self.object_final.y,
            touch.position.x,
            touch.position.y,
            touch.orientation,
            self.mid.position.x,
            self.mid.position.y,
            self.mid.orientation,
        ]
    }
}

/// Phase of an episode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Approach,
    Closing,
    PostClosure,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Approach => "approach",
            Phase::Closing => "closing",
            Phase::PostClosure => "post-closure",
        }
    }
}

/// Which gripper bodies are within contact tolerance of the object.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactFlags {
    pub palm: bool,
    pub left: bool,
    pub right: bool,
}

impl ContactFlags {
    pub fn any(&self) -> bool {
        self.palm || self.left || self.right
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub joints: Vec<f64>,
    pub ee: Pose2,
    pub gripper_width: f64,
    pub object: Pose2,
    pub contacts: ContactFlags,
    pub phase: Phase,
}

/// First gripper/object contact point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactPoint {
    /// World coordinates of the point on the object boundary.
    pub world: Vec2,
    /// The same point in the object frame at the moment of contact.
    pub local: Vec2,
}

/// Full record of one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<StepRecord>,
    pub t_touch: Option<usize>,
    pub t_close: usize,
    pub closure_end: Option<usize>,
    pub grasp_established_at: Option<usize>,
    pub first_contact: Option<ContactPoint>,
    pub success: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn ee_positions(&self) -> impl Iterator<Item = Vec2> + '_ {
        self.steps.iter().map(|s| s.ee.position)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MutationKind {
    Init,
    Explore,
    Refine,
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub generation: usize,
    pub parent: Option<u64>,
    pub kind: MutationKind,
}

/// Per-slot novelty scores. `None` marks a slot with no valid score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Novelty(pub [Option<f64>; 5]);

impl Novelty {
    pub fn get(&self, slot: Slot) -> Option<f64> {
        self.0[slot.index()]
    }

    pub fn set(&mut self, slot: Slot, value: Option<f64>) {
        debug_assert!(value.is_none_or(|v| v >= 0.0));
        self.0[slot.index()] = value;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub id: u64,
    pub genome: Genome,
    pub descriptor: BehaviorDescriptor,
    pub novelty: Novelty,
    pub success: bool,
    pub meta: Meta,
}

/// Archive entry: a descriptor tagged with the individual it came from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchivedDescriptor {
    pub id: u64,
    pub descriptor: BehaviorDescriptor,
}

/// Append-only long-term memory of behavior descriptors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NoveltyArchive {
    entries: Vec<ArchivedDescriptor>,
}

impl NoveltyArchive {
    pub fn push(&mut self, id: u64, descriptor: BehaviorDescriptor) {
        self.entries.push(ArchivedDescriptor { id, descriptor });
    }

    pub fn entries(&self) -> &[ArchivedDescriptor] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Drops every entry. Only the impatience restart does this.
    pub(crate) fn clear(&mut self) {
        self.entries.clear();
    }
}

/// The output repertoire: every individual whose rollout was a success.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SuccessArchive {
    entries: Vec<Individual>,
}

impl SuccessArchive {
    pub fn push(&mut self, ind: Individual) {
        debug_assert!(ind.success);
        self.entries.push(ind);
    }

    pub fn entries(&self) -> &[Individual] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl FromIterator<Individual> for SuccessArchive {
    fn from_iter<I: IntoIterator<Item = Individual>>(iter: I) -> Self {
        SuccessArchive {
            entries: iter.into_iter().collect(),
        }
    }
}

/// All hyperparameters of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Population size.
    pub mu: usize,
    /// Offspring per generation.
    pub lambda: usize,
    /// Rollout budget, including the initial population.
    pub budget: usize,
    pub p_explore: f64,
    pub p_refine: f64,
    /// Restart period (generations) while no success exists.
    pub impatience_period: usize,
    pub regeneration_period: usize,
    /// Offspring descriptors added to the novelty archive per generation.
    pub archive_additions: usize,
    /// Nearest-neighbor count for novelty.
    pub k: usize,
    pub seed: u64,
    /// Whether an impatience restart also empties the novelty archive.
    pub clear_archive_on_impatience: bool,
    /// Record elapsed seconds in the generation logs. Off by default so
    /// artifacts are byte-reproducible.
    pub record_wall_time: bool,
    /// Worker threads for offspring rollouts; `None` uses the global pool.
    pub threads: Option<usize>,
    pub mutation: MutationParams,
    pub metrics: MetricsConfig,
    pub env: EnvConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mu: 100,
            lambda: 50,
            budget: 20_000,
            p_explore: 0.5,
            p_refine: 0.5,
            impatience_period: 500,
            regeneration_period: 10,
            archive_additions: 10,
            k: 15,
            seed: 0,
            clear_archive_on_impatience: true,
            record_wall_time: false,
            threads: None,
            mutation: MutationParams::default(),
            metrics: MetricsConfig::default(),
            env: EnvConfig::default(),
        }
    }
}

/// Violated configuration constraints; empty when the config is valid.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.contains(needle))
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(self.violations))
        }
    }
}

pub fn validate_config(cfg: &RunConfig) -> ValidationReport {
    let mut v = Vec::new();
    if cfg.lambda < 1 {
        v.push(format!("lambda ≥ 1 (got {})", cfg.lambda));
    }
    if cfg.mu < cfg.lambda {
        v.push(format!("mu ≥ lambda (got mu={}, lambda={})", cfg.mu, cfg.lambda));
    }
    if cfg.k < 1 {
        v.push("k ≥ 1 (got 0)".to_string());
    }
    for (name, p) in [("p_e", cfg.p_explore), ("p_r", cfg.p_refine)] {
        if !(0.0..=1.0).contains(&p) {
            v.push(format!("{name} ∈ [0, 1] (got {p})"));
        }
    }
    let sum = cfg.p_explore + cfg.p_refine;
    if !sum.is_finite() || (sum - 1.0).abs() > 1e-9 {
        v.push(format!("p_e + p_r = 1 (got {sum})"));
    }
    if cfg.impatience_period == 0 {
        v.push("G_I > 0 (got 0)".to_string());
    }
    if cfg.regeneration_period == 0 {
        v.push("G_R > 0 (got 0)".to_string());
    }
    if cfg.archive_additions > cfg.lambda {
        v.push(format!(
            "n_a ≤ lambda (got n_a={}, lambda={})",
            cfg.archive_additions, cfg.lambda
        ));
    }
    if cfg.budget < cfg.mu {
        v.push(format!(
            "budget ≥ mu (got budget={}, mu={})",
            cfg.budget, cfg.mu
        ));
    }
    if cfg.threads == Some(0) {
        v.push("threads ≥ 1 when set".to_string());
    }
    v.extend(cfg.mutation.validate());
    v.extend(cfg.metrics.validate());
    v.extend(cfg.env.validate());
    ValidationReport { violations: v }
}
