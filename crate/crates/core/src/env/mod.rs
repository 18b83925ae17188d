//! Deterministic planar grasping environment.
//!
//! A three-joint arm carries a parallel-jaw gripper over a table (the line
//! `y = 0`) on which a single object rests. A genome decodes into three
//! joint-space waypoints plus the step at which the gripper starts closing.
//! The arm tracks a cubic through the rest pose and the waypoints; while the
//! jaws close the arm holds still. When both fingers touch the object and the
//! contact normals pass the friction-cone test, the object is attached to the
//! gripper for the rest of the episode. Any other overlap slides the object
//! horizontally out of the way.

pub mod contact;
pub mod interp;
pub mod kinematics;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::model::{
    ContactFlags, ContactPoint, Genome, Phase, Pose2, StepRecord, Trajectory, Vec2, WAYPOINTS,
};

pub use contact::{antipodal_check, push_resolve, Segment, SegmentContact, Shape};
pub use interp::{interpolate, JointTrajectory};
pub use kinematics::forward_kinematics;

/// Anything that turns a genome into a deterministic episode.
pub trait Environment: Sync {
    fn joints(&self) -> usize;
    fn steps(&self) -> usize;
    fn rollout(&self, genome: &Genome) -> Trajectory;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GripperConfig {
    /// Maximum jaw opening (m).
    pub max_opening: f64,
    pub finger_length: f64,
    /// Opening lost per closing step (m).
    pub closure_speed: f64,
}

impl Default for GripperConfig {
    fn default() -> Self {
        GripperConfig {
            max_opening: 0.12,
            finger_length: 0.06,
            closure_speed: 0.12 / 20.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectConfig {
    pub shape: Shape,
    /// Horizontal position of the object's center; it rests on the table.
    pub x: f64,
}

impl ObjectConfig {
    pub fn initial_pose(&self) -> Pose2 {
        Pose2::new(Vec2::new(self.x, self.shape.resting_height()), 0.0)
    }
}

impl Default for ObjectConfig {
    fn default() -> Self {
        ObjectConfig {
            shape: Shape::Circle { radius: 0.04 },
            x: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Episode length in steps.
    pub steps: usize,
    pub link_lengths: Vec<f64>,
    pub joint_limits: Vec<[f64; 2]>,
    pub base_position: [f64; 2],
    pub rest_config: Vec<f64>,
    pub gripper: GripperConfig,
    pub object: ObjectConfig,
    pub contact_tol: f64,
    pub friction: f64,
    /// Required rise of the object center above its initial height.
    pub lift_height: f64,
    /// Latest closure start, as a fraction of the episode.
    pub max_close_fraction: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            steps: 200,
            link_lengths: vec![0.4, 0.3, 0.2],
            joint_limits: vec![[-PI, PI]; 3],
            base_position: [0.0, 0.25],
            rest_config: vec![PI / 2.0, -PI / 2.0, -PI / 2.0],
            gripper: GripperConfig::default(),
            object: ObjectConfig::default(),
            contact_tol: 1e-3,
            friction: 0.5,
            lift_height: 0.1,
            max_close_fraction: 0.9,
        }
    }
}

impl EnvConfig {
    pub fn joints(&self) -> usize {
        self.link_lengths.len()
    }

    pub fn base(&self) -> Vec2 {
        Vec2::new(self.base_position[0], self.base_position[1])
    }

    pub fn reach(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        let j = self.joints();
        if self.steps < 2 {
            v.push(format!("T ≥ 2 (got {})", self.steps));
        }
        if j == 0 {
            v.push("at least one link".to_string());
        }
        if self.link_lengths.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            v.push("link lengths must be positive".to_string());
        }
        if self.joint_limits.len() != j {
            v.push(format!("{} joint limits for {} joints", self.joint_limits.len(), j));
        }
        if self.joint_limits.iter().any(|[lo, hi]| !(lo < hi)) {
            v.push("joint limits need min < max".to_string());
        }
        if self.rest_config.len() != j {
            v.push(format!("rest config has {} entries for {} joints", self.rest_config.len(), j));
        }
        let g = &self.gripper;
        if !(g.max_opening > 0.0 && g.finger_length > 0.0 && g.closure_speed > 0.0) {
            v.push("gripper dimensions and closure speed must be positive".to_string());
        }
        if !self.object.shape.is_valid() {
            v.push("object dimensions must be positive".to_string());
        }
        if !(self.contact_tol >= 0.0) {
            v.push("contact_tol ≥ 0".to_string());
        }
        if !(self.friction >= 0.0) {
            v.push("friction ≥ 0".to_string());
        }
        if !(self.lift_height > 0.0) {
            v.push("lift_height > 0".to_string());
        }
        if !(0.0..1.0).contains(&self.max_close_fraction) {
            v.push("max_close_fraction ∈ [0, 1)".to_string());
        }
        v
    }
}

/// Decoded controller: joint-space waypoints and the closure start step.
#[derive(Clone, Debug, PartialEq)]
pub struct Controller {
    pub waypoints: [Vec<f64>; WAYPOINTS],
    pub t_close: usize,
}

pub fn decode_genome(g: &Genome, env: &EnvConfig) -> Controller {
    debug_assert_eq!(g.len(), Genome::len_for(env.joints()));
    let map = |genes: &[f64]| -> Vec<f64> {
        genes
            .iter()
            .zip(&env.joint_limits)
            .map(|(x, [lo, hi])| lo + (x + 1.0) / 2.0 * (hi - lo))
            .collect()
    };
    let waypoints = [map(g.waypoint(0)), map(g.waypoint(1)), map(g.waypoint(2))];
    let t_close =
        ((g.closure_gene() + 1.0) / 2.0 * env.max_close_fraction * env.steps as f64).round();
    Controller {
        waypoints,
        t_close: t_close as usize,
    }
}

/// Palm, left finger, right finger.
pub fn gripper_segments(ee: &Pose2, width: f64, g: &GripperConfig) -> [Segment; 3] {
    let half_palm = g.max_opening / 2.0;
    let half = width / 2.0;
    let p = |x: f64, y: f64| ee.transform_point(Vec2::new(x, y));
    [
        Segment::new(p(0.0, -half_palm), p(0.0, half_palm)),
        Segment::new(p(0.0, half), p(g.finger_length, half)),
        Segment::new(p(0.0, -half), p(g.finger_length, -half)),
    ]
}

/// The built-in planar environment.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlanarEnv {
    pub config: EnvConfig,
}

impl PlanarEnv {
    pub fn new(config: EnvConfig) -> Self {
        PlanarEnv { config }
    }
}

impl Environment for PlanarEnv {
    fn joints(&self) -> usize {
        self.config.joints()
    }

    fn steps(&self) -> usize {
        self.config.steps
    }

    fn rollout(&self, genome: &Genome) -> Trajectory {
        rollout(genome, &self.config)
    }
}

/// Simulates one episode of `env.steps` steps.
pub fn rollout(genome: &Genome, env: &EnvConfig) -> Trajectory {
    let ctl = decode_genome(genome, env);
    let plan = interpolate(&env.rest_config, &ctl.waypoints, env.steps, &env.joint_limits);
    let shape = env.object.shape;
    let initial = env.object.initial_pose();
    let base = env.base();

    let mut object = initial;
    let mut width = env.gripper.max_opening;
    let mut phase = Phase::Approach;
    let mut frozen: Option<Vec<f64>> = None;
    let mut attached: Option<Pose2> = None;
    let mut t_touch = None;
    let mut first_contact = None;
    let mut closure_end = None;
    let mut grasp_at = None;
    let mut steps = Vec::with_capacity(env.steps);

    for t in 0..env.steps {
        if phase == Phase::Approach && t == ctl.t_close {
            phase = Phase::Closing;
            frozen = Some(plan.setpoint(t));
        }
        let q = match (phase, &frozen) {
            (Phase::Closing, Some(q)) => q.clone(),
            _ => plan.setpoint(t),
        };
        let ee = forward_kinematics(base, &env.link_lengths, &q);
        if phase == Phase::Closing {
            width = (width - env.gripper.closure_speed).max(0.0);
        }
        if let Some(rel) = attached {
            object = ee.compose(&rel);
        }

        let segs = gripper_segments(&ee, width, &env.gripper);
        let contacts = segs.map(|s| contact::query_segment(&shape, &object, &s));
        let touching = contacts.map(|c| c.distance <= env.contact_tol);
        let flags = ContactFlags {
            palm: touching[0],
            left: touching[1],
            right: touching[2],
        };

        if t_touch.is_none() && flags.any() {
            t_touch = Some(t);
            let nearest = contacts
                .iter()
                .min_by(|a, b| a.distance.total_cmp(&b.distance))
                .expect("three gripper segments");
            first_contact = Some(ContactPoint {
                world: nearest.boundary_point,
                local: object.inverse_transform_point(nearest.boundary_point),
            });
        }

        let mut closure_done = false;
        if attached.is_none() {
            if phase == Phase::Closing {
                let (l, r) = (&contacts[1], &contacts[2]);
                if touching[1] && touching[2] {
                    closure_done = true;
                    let ok = antipodal_check(
                        (l.boundary_point, l.normal),
                        (r.boundary_point, r.normal),
                        env.friction,
                    );
                    if ok {
                        attached = Some(ee.relative(&object));
                        grasp_at = Some(t);
                    }
                } else if width <= 0.0 {
                    closure_done = true;
                } else {
                    object = contact::resolve_pushes(object, &contacts);
                }
            } else {
                object = contact::resolve_pushes(object, &contacts);
            }
        } else if phase == Phase::Closing {
            closure_done = true;
        }

        steps.push(StepRecord {
            t,
            joints: q,
            ee,
            gripper_width: width,
            object,
            contacts: flags,
            phase,
        });

        if closure_done {
            closure_end = Some(t);
            phase = Phase::PostClosure;
        }
    }

    let success =
        attached.is_some() && object.position.y >= initial.position.y + env.lift_height;
    Trajectory {
        steps,
        t_touch,
        t_close: ctl.t_close,
        closure_end,
        grasp_established_at: grasp_at,
        first_contact,
        success,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn genome(genes: Vec<f64>) -> Genome {
        Genome::new(genes).unwrap()
    }

    #[test]
    fn midpoint_decode() {
        let env = EnvConfig::default();
        let c = decode_genome(&genome(vec![0.0; 10]), &env);
        for w in &c.waypoints {
            assert!(w.iter().all(|q| q.abs() < 1e-15));
        }
        assert_eq!(c.t_close, 90);
    }

    #[test]
    fn closure_gene_endpoints() {
        let env = EnvConfig::default();
        let mut genes = vec![0.0; 10];
        genes[9] = -1.0;
        assert_eq!(decode_genome(&genome(genes.clone()), &env).t_close, 0);
        genes[9] = 1.0;
        assert_eq!(decode_genome(&genome(genes), &env).t_close, 180);
    }

    #[test]
    fn trajectory_has_exact_length() {
        let env = EnvConfig::default();
        let traj = rollout(&genome(vec![0.2; 10]), &env);
        assert_eq!(traj.len(), env.steps);
        assert!(traj.steps.iter().enumerate().all(|(i, s)| s.t == i));
    }
}
