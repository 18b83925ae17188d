//! Cubic joint-space interpolation through the rest configuration and three waypoints.

use crate::model::WAYPOINTS;

/// Cubic in Newton form through four nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cubic {
    nodes: [f64; 4],
    coeffs: [f64; 4],
}

impl Cubic {
    pub fn through(nodes: [f64; 4], values: [f64; 4]) -> Self {
        // Divided differences, in place.
        let mut c = values;
        for order in 1..4 {
            for i in (order..4).rev() {
                c[i] = (c[i] - c[i - 1]) / (nodes[i] - nodes[i - order]);
            }
        }
        Cubic { nodes, coeffs: c }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let [c0, c1, c2, c3] = self.coeffs;
        let [x0, x1, x2, _] = self.nodes;
        c0 + (t - x0) * (c1 + (t - x1) * (c2 + (t - x2) * c3))
    }
}

/// Per-joint cubic profiles for a whole episode.
#[derive(Clone, Debug, PartialEq)]
pub struct JointTrajectory {
    profiles: Vec<Cubic>,
    limits: Vec<[f64; 2]>,
}

/// Waypoint instants: `0, T/3, 2T/3, T`.
pub fn waypoint_times(steps: usize) -> [f64; 4] {
    let t = steps as f64;
    [0.0, t / 3.0, 2.0 * t / 3.0, t]
}

impl JointTrajectory {
    /// Unclamped polynomial value of every joint at (real) time `t`.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        self.profiles.iter().map(|p| p.eval(t)).collect()
    }

    /// Setpoint at integer step `t`, clamped to joint limits.
    pub fn setpoint(&self, t: usize) -> Vec<f64> {
        self.profiles
            .iter()
            .zip(&self.limits)
            .map(|(p, [lo, hi])| p.eval(t as f64).clamp(*lo, *hi))
            .collect()
    }

    pub fn joints(&self) -> usize {
        self.profiles.len()
    }
}

/// Fits the per-joint cubic through `(0, q0), (T/3, w1), (2T/3, w2), (T, w3)`.
pub fn interpolate(
    q0: &[f64],
    waypoints: &[Vec<f64>; WAYPOINTS],
    steps: usize,
    limits: &[[f64; 2]],
) -> JointTrajectory {
    let nodes = waypoint_times(steps);
    let profiles = (0..q0.len())
        .map(|j| {
            Cubic::through(
                nodes,
                [q0[j], waypoints[0][j], waypoints[1][j], waypoints[2][j]],
            )
        })
        .collect();
    JointTrajectory {
        profiles,
        limits: limits.to_vec(),
    }
}

/// Samples clamped setpoints at steps `0..steps`.
pub fn sample_setpoints(traj: &JointTrajectory, steps: usize) -> Vec<Vec<f64>> {
    (0..steps).map(|t| traj.setpoint(t)).collect()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use proptest::prelude::*;

    use super::*;

    const LIMITS: [[f64; 2]; 3] = [[-PI, PI]; 3];

    /// Lagrange-basis evaluation, independent of the Newton form.
    fn lagrange(nodes: [f64; 4], values: [f64; 4], t: f64) -> f64 {
        (0..4)
            .map(|i| {
                let basis: f64 = (0..4)
                    .filter(|&j| j != i)
                    .map(|j| (t - nodes[j]) / (nodes[i] - nodes[j]))
                    .product();
                values[i] * basis
            })
            .sum()
    }

    #[test]
    fn constant_when_all_points_equal() {
        let q0 = vec![0.3, -0.2, 1.0];
        let wps = [q0.clone(), q0.clone(), q0.clone()];
        let traj = interpolate(&q0, &wps, 200, &LIMITS);
        for t in 0..200 {
            for (a, b) in traj.setpoint(t).iter().zip(&q0) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn passes_through_first_waypoint() {
        let q0 = vec![0.0, 0.0, 0.0];
        let wps = [vec![1.0, -0.5, 0.25], vec![0.2, 0.4, -1.2], vec![-0.7, 0.1, 0.9]];
        let traj = interpolate(&q0, &wps, 200, &LIMITS);
        let at = traj.eval(200.0 / 3.0);
        for (a, b) in at.iter().zip(&wps[0]) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    proptest! {
        #[test]
        fn matches_lagrange_oracle(
            vals in proptest::array::uniform4(-3.0f64..3.0),
            t in 0.0f64..200.0,
        ) {
            let nodes = waypoint_times(200);
            let c = Cubic::through(nodes, vals);
            prop_assert!((c.eval(t) - lagrange(nodes, vals, t)).abs() < 1e-9);
            for (n, v) in nodes.iter().zip(vals) {
                prop_assert!((c.eval(*n) - v).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn setpoints_are_clamped() {
        let q0 = vec![3.0, 0.0, 0.0];
        let wps = [vec![3.1, 0.0, 0.0], vec![-3.1, 0.0, 0.0], vec![3.1, 0.0, 0.0]];
        let traj = interpolate(&q0, &wps, 200, &LIMITS);
        for sp in sample_setpoints(&traj, 200) {
            assert!(sp[0] >= -PI && sp[0] <= PI);
        }
    }
}
