//! Serial-chain planar forward kinematics.

use crate::model::{wrap_angle, Pose2, Vec2};

/// Joint positions of the chain, base first, end-effector last.
pub fn chain_points(base: Vec2, link_lengths: &[f64], q: &[f64]) -> Vec<Vec2> {
    debug_assert_eq!(link_lengths.len(), q.len());
    let mut points = Vec::with_capacity(q.len() + 1);
    let mut p = base;
    let mut heading = 0.0;
    points.push(p);
    for (&len, &angle) in link_lengths.iter().zip(q) {
        heading += angle;
        p += len * Vec2::new(heading.cos(), heading.sin());
        points.push(p);
    }
    points
}

/// End-effector pose: tip of the last link, heading = sum of joint angles (wrapped).
pub fn forward_kinematics(base: Vec2, link_lengths: &[f64], q: &[f64]) -> Pose2 {
    let tip = *chain_points(base, link_lengths, q)
        .last()
        .expect("chain has a base point");
    Pose2::new(tip, wrap_angle(q.iter().sum()))
}
