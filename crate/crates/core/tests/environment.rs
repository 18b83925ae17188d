use std::f64::consts::PI;

use e2r::env::interp::{interpolate, waypoint_times};
use e2r::env::{decode_genome, forward_kinematics, rollout, EnvConfig};
use e2r::model::{Genome, Phase, Vec2};
use e2r::novelty::extract_descriptors;
use proptest::prelude::*;

/// Joint angles placing the end effector at `p` with heading `phi`, elbow-down branch.
fn inverse_kinematics(env: &EnvConfig, p: Vec2, phi: f64) -> [f64; 3] {
    let l = &env.link_lengths;
    let wrist = p - l[2] * Vec2::new(phi.cos(), phi.sin()) - env.base();
    let c2 = (wrist.norm_squared() - l[0] * l[0] - l[1] * l[1]) / (2.0 * l[0] * l[1]);
    let q2 = -c2.clamp(-1.0, 1.0).acos();
    let q1 = wrist.y.atan2(wrist.x) - (l[1] * q2.sin()).atan2(l[0] + l[1] * q2.cos());
    let q3 = phi - q1 - q2;
    let wrap = |a: f64| (a + PI).rem_euclid(2.0 * PI) - PI;
    [wrap(q1), wrap(q2), wrap(q3)]
}

fn genes_for(env: &EnvConfig, waypoints: [[f64; 3]; 3], t_close: usize) -> Genome {
    let mut genes: Vec<f64> = waypoints.iter().flatten().map(|q| q / PI).collect();
    genes.push(2.0 * t_close as f64 / (env.max_close_fraction * env.steps as f64) - 1.0);
    Genome::new(genes).unwrap()
}

/// Above the object, astride it, then lifted, all pointing straight down.
fn astride_genome(env: &EnvConfig) -> Genome {
    let x = env.object.x;
    let down = -PI / 2.0;
    let above = inverse_kinematics(env, Vec2::new(x, 0.25), down);
    let astride = inverse_kinematics(env, Vec2::new(x, 0.09), down);
    let lifted = inverse_kinematics(env, Vec2::new(x, 0.35), down);
    genes_for(env, [above, astride, lifted], 2 * env.steps / 3)
}

#[test]
fn inverse_kinematics_reaches_its_target() {
    let env = EnvConfig::default();
    let q = inverse_kinematics(&env, Vec2::new(0.5, 0.09), -PI / 2.0);
    let ee = forward_kinematics(env.base(), &env.link_lengths, &q);
    assert!((ee.position - Vec2::new(0.5, 0.09)).norm() < 1e-12);
}

#[test]
fn constructed_grasp_succeeds() {
    let env = EnvConfig::default();
    let traj = rollout(&astride_genome(&env), &env);
    assert!(traj.t_touch.is_some());
    assert!(traj.grasp_established_at.is_some());
    assert!(traj.success);
    let last = traj.steps.last().unwrap();
    assert!(last.object.position.y >= 0.04 + env.lift_height);
}

#[test]
fn far_away_motion_leaves_the_object_alone() {
    let env = EnvConfig::default();
    let up = inverse_kinematics(&env, Vec2::new(-0.3, 0.7), PI / 2.0);
    let g = genes_for(&env, [up, up, up], 100);
    let traj = rollout(&g, &env);
    assert!(traj.t_touch.is_none());
    assert!(!traj.success);
    let d = extract_descriptors(&traj, env.steps).unwrap();
    assert_eq!(d.object_final(), env.object.initial_pose().position);
    assert!(traj.steps.iter().all(|s| s.object == env.object.initial_pose()));
}

#[test]
fn rest_waypoints_give_a_constant_trajectory() {
    let env = EnvConfig::default();
    let q0 = env.rest_config.clone();
    let plan = interpolate(&q0, &[q0.clone(), q0.clone(), q0.clone()], env.steps, &env.joint_limits);
    for t in 0..env.steps {
        let q = plan.setpoint(t);
        for (a, b) in q.iter().zip(&q0) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

fn genome_strategy() -> impl Strategy<Value = Genome> {
    prop::collection::vec(-1.0f64..=1.0, 10).prop_map(|g| Genome::new(g).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rollout_is_deterministic(g in genome_strategy()) {
        let env = EnvConfig::default();
        prop_assert_eq!(rollout(&g, &env), rollout(&g, &env));
    }

    #[test]
    fn episode_invariants(g in genome_strategy()) {
        let env = EnvConfig::default();
        let traj = rollout(&g, &env);
        prop_assert_eq!(traj.len(), env.steps);
        let t_close = decode_genome(&g, &env).t_close;
        prop_assert_eq!(traj.t_close, t_close);

        // Phases advance approach -> closing -> post-closure, never backwards.
        let rank = |p: Phase| match p { Phase::Approach => 0, Phase::Closing => 1, Phase::PostClosure => 2 };
        prop_assert!(traj.steps.windows(2).all(|w| rank(w[0].phase) <= rank(w[1].phase)));
        prop_assert!(traj.steps.iter().all(|s| (0.0..=env.gripper.max_opening).contains(&s.gripper_width)));

        // Untouched objects never move.
        let first_touch = traj.t_touch.unwrap_or(env.steps);
        prop_assert!(traj.steps[..first_touch].iter().all(|s| s.object == env.object.initial_pose()));

        // The object is fixed in the gripper frame once grasped.
        if let Some(t) = traj.grasp_established_at {
            let rel = traj.steps[t].ee.relative(&traj.steps[t].object);
            for s in &traj.steps[t..] {
                let r = s.ee.relative(&s.object);
                prop_assert!((r.position - rel.position).norm() < 1e-9);
            }
        }
        if traj.success {
            prop_assert!(traj.grasp_established_at.is_some());
            prop_assert!(traj.steps.last().unwrap().object.position.y >= env.object.initial_pose().position.y + env.lift_height);
        }
    }

    #[test]
    fn pass_through_waypoints(g in genome_strategy()) {
        let env = EnvConfig::default();
        let ctl = decode_genome(&g, &env);
        let plan = interpolate(&env.rest_config, &ctl.waypoints, env.steps, &env.joint_limits);
        let times = waypoint_times(env.steps);
        let targets = [&env.rest_config, &ctl.waypoints[0], &ctl.waypoints[1], &ctl.waypoints[2]];
        for (t, want) in times.iter().zip(targets) {
            for (a, b) in plan.eval(*t).iter().zip(want.iter()) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }
    }
}
