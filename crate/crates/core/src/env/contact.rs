//! Gripper/object contact geometry: segment queries, push resolution and the
//! two-contact force-closure test.

use serde::{Deserialize, Serialize};

use crate::model::{Pose2, Vec2};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Segment { a, b }
    }

    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        let d = self.b - self.a;
        let len2 = d.norm_squared();
        if len2 == 0.0 {
            return self.a;
        }
        let s = ((p - self.a).dot(&d) / len2).clamp(0.0, 1.0);
        self.a + s * d
    }

    fn at(&self, s: f64) -> Vec2 {
        self.a + s * (self.b - self.a)
    }

    fn perpendicular(&self) -> Vec2 {
        let d = self.b - self.a;
        let n = Vec2::new(-d.y, d.x);
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vec2::new(0.0, 1.0)
        }
    }
}

/// Object geometry in its own frame (center at the origin).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Circle { radius: f64 },
    Box { half_extents: [f64; 2] },
}

impl Shape {
    /// Height of the center when the object rests unrotated on `y = 0`.
    pub fn resting_height(&self) -> f64 {
        match *self {
            Shape::Circle { radius } => radius,
            Shape::Box { half_extents } => half_extents[1],
        }
    }

    pub fn perimeter(&self) -> f64 {
        match *self {
            Shape::Circle { radius } => 2.0 * std::f64::consts::PI * radius,
            Shape::Box { half_extents: [hx, hy] } => 4.0 * (hx + hy),
        }
    }

    pub fn is_valid(&self) -> bool {
        match *self {
            Shape::Circle { radius } => radius > 0.0 && radius.is_finite(),
            Shape::Box { half_extents: [hx, hy] } => {
                hx > 0.0 && hy > 0.0 && hx.is_finite() && hy.is_finite()
            }
        }
    }

    fn box_sdf(h: [f64; 2], p: Vec2) -> f64 {
        let qx = p.x.abs() - h[0];
        let qy = p.y.abs() - h[1];
        let outside = Vec2::new(qx.max(0.0), qy.max(0.0)).norm();
        outside + qx.max(qy).min(0.0)
    }

    fn box_normal(h: [f64; 2], p: Vec2) -> Vec2 {
        let qx = p.x.abs() - h[0];
        let qy = p.y.abs() - h[1];
        let sx = if p.x < 0.0 { -1.0 } else { 1.0 };
        let sy = if p.y < 0.0 { -1.0 } else { 1.0 };
        if qx > 0.0 || qy > 0.0 {
            let g = Vec2::new(sx * qx.max(0.0), sy * qy.max(0.0));
            g / g.norm()
        } else if qx > qy {
            Vec2::new(sx, 0.0)
        } else {
            Vec2::new(0.0, sy)
        }
    }
}

/// Closest approach between a gripper segment and the object.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentContact {
    /// Signed gap; negative values are penetration depths.
    pub distance: f64,
    pub segment_point: Vec2,
    /// Point on the object boundary, world frame.
    pub boundary_point: Vec2,
    /// Outward object normal at `boundary_point`, world frame.
    pub normal: Vec2,
}

impl SegmentContact {
    pub fn penetration(&self) -> f64 {
        (-self.distance).max(0.0)
    }
}

pub fn query_segment(shape: &Shape, pose: &Pose2, seg: &Segment) -> SegmentContact {
    match *shape {
        Shape::Circle { radius } => {
            let c = pose.position;
            let q = seg.closest_point(c);
            let v = q - c;
            let d = v.norm();
            let normal = if d > 1e-15 { v / d } else { seg.perpendicular() };
            SegmentContact {
                distance: d - radius,
                segment_point: q,
                boundary_point: c + radius * normal,
                normal,
            }
        }
        Shape::Box { half_extents } => {
            let local = Segment::new(
                pose.inverse_transform_point(seg.a),
                pose.inverse_transform_point(seg.b),
            );
            let f = |s: f64| Shape::box_sdf(half_extents, local.at(s));
            let s = box_candidates(half_extents, &local)
                .into_iter()
                .chain([golden_section_min(f, 0.0, 1.0)])
                .min_by(|a, b| f(*a).total_cmp(&f(*b)))
                .expect("candidate list is never empty");
            let p = local.at(s);
            let d = Shape::box_sdf(half_extents, p);
            let n = Shape::box_normal(half_extents, p);
            SegmentContact {
                distance: d,
                segment_point: pose.transform_point(p),
                boundary_point: pose.transform_point(p - d * n),
                normal: pose.transform_vector(n),
            }
        }
    }
}

/// Segment parameters where the box SDF along `seg` can attain its minimum:
/// endpoints, corner projections and crossings of the SDF's crease lines.
fn box_candidates(h: [f64; 2], seg: &Segment) -> Vec<f64> {
    let d = seg.b - seg.a;
    let mut out = vec![0.0, 1.0];
    let len2 = d.norm_squared();
    if len2 == 0.0 {
        return out;
    }
    for (cx, cy) in [(h[0], h[1]), (-h[0], h[1]), (h[0], -h[1]), (-h[0], -h[1])] {
        out.push((Vec2::new(cx, cy) - seg.a).dot(&d) / len2);
    }
    // Lines n . p = c on which the interior SDF has a kink.
    let c = h[0] - h[1];
    let lines = [
        (Vec2::new(1.0, 0.0), 0.0),
        (Vec2::new(0.0, 1.0), 0.0),
        (Vec2::new(1.0, -1.0), c),
        (Vec2::new(1.0, 1.0), c),
        (Vec2::new(-1.0, -1.0), c),
        (Vec2::new(-1.0, 1.0), c),
    ];
    for (n, c) in lines {
        let den = n.dot(&d);
        if den != 0.0 {
            out.push((c - n.dot(&seg.a)) / den);
        }
    }
    out.retain(|s| (0.0..=1.0).contains(s));
    out
}

fn golden_section_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    [0.0, mid, 1.0]
        .into_iter()
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap()
}

/// Horizontal displacement that resolves one penetrating contact.
///
/// The object slides along the sign of the contact normal's horizontal
/// component by the full penetration depth. A purely vertical normal gives no push.
pub fn horizontal_push(contact: &SegmentContact) -> f64 {
    let depth = contact.penetration();
    if depth == 0.0 || contact.normal.x.abs() < 1e-12 {
        return 0.0;
    }
    -contact.normal.x.signum() * depth
}

/// Applies a single push to the object pose; height and heading are untouched.
pub fn push_resolve(object: Pose2, contact: &SegmentContact) -> Pose2 {
    let dx = horizontal_push(contact);
    Pose2::new(object.position + Vec2::new(dx, 0.0), object.orientation)
}

/// Resolves all simultaneous penetrations. Opposing pushes jam the object.
pub fn resolve_pushes(object: Pose2, contacts: &[SegmentContact]) -> Pose2 {
    let pushes: Vec<f64> = contacts
        .iter()
        .map(horizontal_push)
        .filter(|dx| *dx != 0.0)
        .collect();
    let right = pushes.iter().any(|dx| *dx > 0.0);
    let left = pushes.iter().any(|dx| *dx < 0.0);
    if right && left {
        return object;
    }
    let dx = pushes
        .into_iter()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(0.0);
    Pose2::new(object.position + Vec2::new(dx, 0.0), object.orientation)
}

/// Two-contact frictional force closure for a parallel jaw: the angle between
/// `n1` and `-n2` must not exceed `2 * atan(mu_f)`. Normals point out of the object.
pub fn antipodal_check(contact_1: (Vec2, Vec2), contact_2: (Vec2, Vec2), mu_f: f64) -> bool {
    let (p1, n1) = contact_1;
    let (p2, n2) = contact_2;
    if p1 == p2 {
        return false;
    }
    let (l1, l2) = (n1.norm(), n2.norm());
    if l1 == 0.0 || l2 == 0.0 {
        return false;
    }
    let cos = (-n1.dot(&n2) / (l1 * l2)).clamp(-1.0, 1.0);
    cos.acos() <= 2.0 * mu_f.max(0.0).atan()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn unit(deg: f64) -> Vec2 {
        let r = deg.to_radians();
        Vec2::new(r.cos(), r.sin())
    }

    #[test]
    fn opposed_normals_always_close() {
        let c1 = (Vec2::new(-0.04, 0.0), Vec2::new(-1.0, 0.0));
        let c2 = (Vec2::new(0.04, 0.0), Vec2::new(1.0, 0.0));
        for mu in [0.0, 0.1, 0.5, 2.0] {
            assert!(antipodal_check(c1, c2, mu));
        }
    }

    #[test]
    fn cone_limit_at_half_friction() {
        // 2 * atan(0.5) is about 53.13 degrees.
        let p1 = Vec2::new(0.0, 0.0);
        let p2 = Vec2::new(1.0, 0.0);
        let n1 = unit(0.0);
        assert!(!antipodal_check((p1, n1), (p2, -unit(90.0)), 0.5));
        assert!(antipodal_check((p1, n1), (p2, -unit(40.0)), 0.5));
        assert!(antipodal_check((p1, n1), (p2, -unit(53.0)), 0.5));
        assert!(!antipodal_check((p1, n1), (p2, -unit(53.2)), 0.5));
    }

    #[test]
    fn circle_query_from_the_left() {
        let shape = Shape::Circle { radius: 0.04 };
        let pose = Pose2::new(Vec2::new(0.5, 0.04), 0.0);
        let x = 0.5 - 0.04 + 0.004;
        let seg = Segment::new(Vec2::new(x, 0.0), Vec2::new(x, 0.1));
        let c = query_segment(&shape, &pose, &seg);
        assert!((c.distance + 0.004).abs() < 1e-12);
        assert!((c.normal - Vec2::new(-1.0, 0.0)).norm() < 1e-12);
        let moved = push_resolve(pose, &c);
        assert!((moved.position.x - 0.504).abs() < 1e-12);
        assert_eq!(moved.position.y, 0.04);
    }

    #[test]
    fn opposing_squeeze_jams() {
        let shape = Shape::Circle { radius: 0.04 };
        let pose = Pose2::new(Vec2::new(0.0, 0.04), 0.0);
        let left = Segment::new(Vec2::new(-0.039, 0.0), Vec2::new(-0.039, 0.08));
        let right = Segment::new(Vec2::new(0.039, 0.0), Vec2::new(0.039, 0.08));
        let contacts = [
            query_segment(&shape, &pose, &left),
            query_segment(&shape, &pose, &right),
        ];
        assert_eq!(resolve_pushes(pose, &contacts), pose);
    }

    #[test]
    fn vertical_normal_does_not_push() {
        let shape = Shape::Circle { radius: 0.04 };
        let pose = Pose2::new(Vec2::new(0.0, 0.04), 0.0);
        let seg = Segment::new(Vec2::new(-0.02, 0.075), Vec2::new(0.02, 0.075));
        let c = query_segment(&shape, &pose, &seg);
        assert!(c.distance < 0.0);
        assert_eq!(push_resolve(pose, &c), pose);
    }

    #[test]
    fn box_query_matches_face_distance() {
        let shape = Shape::Box {
            half_extents: [0.03, 0.05],
        };
        let pose = Pose2::new(Vec2::new(0.2, 0.05), 0.0);
        let seg = Segment::new(Vec2::new(0.26, -0.5), Vec2::new(0.26, 0.5));
        let c = query_segment(&shape, &pose, &seg);
        assert!((c.distance - 0.03).abs() < 1e-9);
        assert!((c.normal - Vec2::new(1.0, 0.0)).norm() < 1e-9);
        assert!((c.boundary_point.x - 0.23).abs() < 1e-9);

        let rotated = Pose2::new(pose.position, PI / 2.0);
        let c = query_segment(&shape, &rotated, &seg);
        assert!((c.distance - 0.01).abs() < 1e-9);
    }

    #[test]
    fn box_penetration_uses_nearest_face() {
        let shape = Shape::Box {
            half_extents: [0.03, 0.05],
        };
        let pose = Pose2::new(Vec2::new(0.0, 0.05), 0.0);
        let seg = Segment::new(Vec2::new(-0.025, 0.02), Vec2::new(-0.025, 0.08));
        let c = query_segment(&shape, &pose, &seg);
        assert!((c.distance + 0.005).abs() < 1e-9);
        assert!((c.normal - Vec2::new(-1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn push_accumulation() {
        let shape = Shape::Circle { radius: 0.04 };
        let mut pose = Pose2::new(Vec2::new(0.0, 0.04), 0.0);
        let depths = [0.002, 0.001, 0.0035, 0.0005];
        let mut expected = 0.0;
        for d in depths {
            let x = pose.position.x - 0.04 + d;
            let seg = Segment::new(Vec2::new(x, 0.01), Vec2::new(x, 0.07));
            let c = query_segment(&shape, &pose, &seg);
            pose = push_resolve(pose, &c);
            expected += d;
        }
        assert!((pose.position.x - expected).abs() < 1e-12);
    }
}
