//! Synthetic articulated stick figure with exact point-level
//! correspondence between samples.
//!
//! Every generated shape is the same canonical point set pushed through
//! a pose-dependent warp, so point `i` of any shape corresponds to point
//! `i` of every other shape by construction. That gives benchmarks an
//! exact correspondence ground truth with zero annotation noise.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{rotate_point, PointCloud, RotationPair};

/// Number of scalars in a pose.
pub const POSE_DIM: usize = 8;

pub const TORSO_BEND_MAX: f64 = 0.5;
pub const ARM_SWING_MAX: f64 = 0.8;
pub const LEG_SWING_MAX: f64 = 0.6;
pub const LOG_STRETCH_MAX: f64 = 0.25;
pub const LEAN_MAX: f64 = 0.3;
pub const YAW_MAX: f64 = PI / 4.0;

/// Articulation parameters of one sample.
///
/// All angles are radians. `yaw` and `lean` form the rigid part of the
/// pose and are applied exactly like a [`RotationPair`], so rigidly
/// posed samples live in the family the rotation search explores.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseParams {
    /// Forward/backward bend of the upper body about the pelvis.
    pub torso_bend: f64,
    /// Swing of the left / right arm about its shoulder.
    pub arm_swing: [f64; 2],
    /// Swing of the left / right leg about its hip.
    pub leg_swing: [f64; 2],
    /// Log of the vertical stretch factor about the pelvis.
    pub log_stretch: f64,
    /// Rigid sideways tilt (rotation about the z axis).
    pub lean: f64,
    /// Rigid turn (rotation about the y axis).
    pub yaw: f64,
}

impl PoseParams {
    /// The pose that leaves the canonical shape untouched, bit for bit.
    pub fn identity() -> Self {
        PoseParams {
            torso_bend: 0.0,
            arm_swing: [0.0; 2],
            leg_swing: [0.0; 2],
            log_stretch: 0.0,
            lean: 0.0,
            yaw: 0.0,
        }
    }

    /// Fixed scalar order: bend, arms, legs, stretch, lean, yaw.
    pub fn to_array(self) -> [f64; POSE_DIM] {
        [
            self.torso_bend,
            self.arm_swing[0],
            self.arm_swing[1],
            self.leg_swing[0],
            self.leg_swing[1],
            self.log_stretch,
            self.lean,
            self.yaw,
        ]
    }

    /// Inverse of [`Self::to_array`].
    pub fn from_array(a: [f64; POSE_DIM]) -> Self {
        PoseParams {
            torso_bend: a[0],
            arm_swing: [a[1], a[2]],
            leg_swing: [a[3], a[4]],
            log_stretch: a[5],
            lean: a[6],
            yaw: a[7],
        }
    }

    /// Check every component against its documented bound.
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.torso_bend, TORSO_BEND_MAX, "torso_bend"),
            (self.arm_swing[0], ARM_SWING_MAX, "arm_swing[0]"),
            (self.arm_swing[1], ARM_SWING_MAX, "arm_swing[1]"),
            (self.leg_swing[0], LEG_SWING_MAX, "leg_swing[0]"),
            (self.leg_swing[1], LEG_SWING_MAX, "leg_swing[1]"),
            (self.log_stretch, LOG_STRETCH_MAX, "log_stretch"),
            (self.lean, LEAN_MAX, "lean"),
            (self.yaw, YAW_MAX, "yaw"),
        ];
        for (v, bound, name) in checks {
            if !v.is_finite() || v.abs() > bound {
                return Err(Error::Contract(format!(
                    "pose component {name} = {v} outside [-{bound}, {bound}]"
                )));
            }
        }
        Ok(())
    }

    /// Draw a pose uniformly within all bounds.
    pub fn sample(rng: &mut ChaCha8Rng) -> Self {
        let mut draw = |b: f64| rng.gen_range(-b..b);
        PoseParams {
            torso_bend: draw(TORSO_BEND_MAX),
            arm_swing: [draw(ARM_SWING_MAX), draw(ARM_SWING_MAX)],
            leg_swing: [draw(LEG_SWING_MAX), draw(LEG_SWING_MAX)],
            log_stretch: draw(LOG_STRETCH_MAX),
            lean: draw(LEAN_MAX),
            yaw: draw(YAW_MAX),
        }
    }

    /// Sum of absolute component values; bounds the warp displacement
    /// (see [`warp_point`]).
    pub fn magnitude(&self) -> f64 {
        self.to_array().iter().map(|v| v.abs()).sum()
    }
}

/// One generated sample: the warped cloud and the pose that made it.
/// Point `i` always descends from canonical point `i`.
#[derive(Clone, Debug)]
pub struct SyntheticShape {
    pub cloud: PointCloud,
    pub pose: PoseParams,
}

// --- canonical body geometry (all inside the unit ball) ---

const PELVIS: [f64; 3] = [0.0, -0.25, 0.0];

enum Part {
    Segment { a: [f64; 3], b: [f64; 3], r: f64 },
    Ball { c: [f64; 3], r: f64 },
}

/// The seven body parts with sampling weights roughly proportional to
/// their surface areas.
fn parts() -> [(Part, f64); 7] {
    [
        // Torso.
        (
            Part::Segment {
                a: PELVIS,
                b: [0.0, 0.35, 0.0],
                r: 0.12,
            },
            0.452,
        ),
        // Head.
        (
            Part::Ball {
                c: [0.0, 0.48, 0.0],
                r: 0.10,
            },
            0.126,
        ),
        // Pelvis block.
        (
            Part::Segment {
                a: PELVIS,
                b: [0.0, -0.33, 0.0],
                r: 0.10,
            },
            0.063,
        ),
        // Left arm, right arm.
        (
            Part::Segment {
                a: [-0.14, 0.30, 0.0],
                b: [-0.45, 0.05, 0.0],
                r: 0.05,
            },
            0.126,
        ),
        (
            Part::Segment {
                a: [0.14, 0.30, 0.0],
                b: [0.45, 0.05, 0.0],
                r: 0.05,
            },
            0.126,
        ),
        // Left leg, right leg.
        (
            Part::Segment {
                a: [-0.08, -0.28, 0.0],
                b: [-0.18, -0.72, 0.0],
                r: 0.06,
            },
            0.170,
        ),
        (
            Part::Segment {
                a: [0.08, -0.28, 0.0],
                b: [0.18, -0.72, 0.0],
                r: 0.06,
            },
            0.170,
        ),
    ]
}

/// Split `n` points over the parts by largest remainder: every part gets
/// the floor of its proportional share, and leftover points go to the
/// largest fractional remainders (lowest part index on ties).
pub(crate) fn part_counts(n: usize) -> [usize; 7] {
    let weights: Vec<f64> = parts().iter().map(|(_, w)| *w).collect();
    let total: f64 = weights.iter().sum();
    let mut counts = [0usize; 7];
    let mut rema: Vec<(f64, usize)> = Vec::with_capacity(7);
    let mut assigned = 0;
    for (i, w) in weights.iter().enumerate() {
        let share = n as f64 * w / total;
        counts[i] = share.floor() as usize;
        assigned += counts[i];
        rema.push((share - share.floor(), i));
    }
    // Largest remainder first; ties resolved toward the lower index.
    rema.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for k in 0..n - assigned {
        counts[rema[k % 7].1] += 1;
    }
    counts
}

const GOLDEN_FRAC: f64 = 0.618_033_988_749_894_9; // 1/phi

/// Orthonormal frame perpendicular to `d` (not necessarily unit).
fn frame(d: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let d = [d[0] / n, d[1] / n, d[2] / n];
    let h = if d[1].abs() < 0.9 {
        [0.0, 1.0, 0.0]
    } else {
        [1.0, 0.0, 0.0]
    };
    let mut u = [
        d[1] * h[2] - d[2] * h[1],
        d[2] * h[0] - d[0] * h[2],
        d[0] * h[1] - d[1] * h[0],
    ];
    let un = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    u = [u[0] / un, u[1] / un, u[2] / un];
    let v = [
        d[1] * u[2] - d[2] * u[1],
        d[2] * u[0] - d[0] * u[2],
        d[0] * u[1] - d[1] * u[0],
    ];
    (u, v)
}

/// Deterministic points on a capsule side wall via a golden-angle helix.
fn segment_points(a: [f64; 3], b: [f64; 3], r: f64, m: usize, phase: f64, out: &mut Vec<[f64; 3]>) {
    let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let (u, v) = frame(d);
    for i in 0..m {
        let t = (i as f64 + 0.5) / m as f64;
        let ang = 2.0 * PI * (i as f64 * GOLDEN_FRAC + phase);
        let (sa, ca) = ang.sin_cos();
        out.push([
            a[0] + d[0] * t + r * (ca * u[0] + sa * v[0]),
            a[1] + d[1] * t + r * (ca * u[1] + sa * v[1]),
            a[2] + d[2] * t + r * (ca * u[2] + sa * v[2]),
        ]);
    }
}

/// Deterministic points on a sphere via the golden spiral.
fn ball_points(c: [f64; 3], r: f64, m: usize, phase: f64, out: &mut Vec<[f64; 3]>) {
    for i in 0..m {
        let y = 1.0 - 2.0 * (i as f64 + 0.5) / m as f64;
        let ring = (1.0 - y * y).max(0.0).sqrt();
        let ang = 2.0 * PI * (i as f64 * GOLDEN_FRAC + phase);
        let (sa, ca) = ang.sin_cos();
        out.push([c[0] + r * ring * ca, c[1] + r * y, c[2] + r * ring * sa]);
    }
}

/// The canonical articulated figure with exactly `n` surface points,
/// entirely inside the unit ball. Fully deterministic: the same `n`
/// always produces the same cloud.
pub fn canonical_shape(n: usize) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::EmptyCloud("canonical_shape"));
    }
    let counts = part_counts(n);
    let mut pts = Vec::with_capacity(n);
    for (k, (part, _)) in parts().iter().enumerate() {
        let phase = k as f64 * 0.137;
        match *part {
            Part::Segment { a, b, r } => segment_points(a, b, r, counts[k], phase, &mut pts),
            Part::Ball { c, r } => ball_points(c, r, counts[k], phase, &mut pts),
        }
    }
    PointCloud::new(
        pts.into_iter()
            .map(|p| [p[0] as f32, p[1] as f32, p[2] as f32])
            .collect(),
    )
}

/// Cubic smoothstep on `[0, 1]`.
fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Rotate `q` about the x axis through `pivot`.
fn rot_x_about(q: [f64; 3], pivot: [f64; 3], angle: f64) -> [f64; 3] {
    let (s, c) = angle.sin_cos();
    let y = q[1] - pivot[1];
    let z = q[2] - pivot[2];
    [q[0], pivot[1] + c * y - s * z, pivot[2] + s * y + c * z]
}

/// Rotate `q` about the z axis through `pivot`.
fn rot_z_about(q: [f64; 3], pivot: [f64; 3], angle: f64) -> [f64; 3] {
    let (s, c) = angle.sin_cos();
    let x = q[0] - pivot[0];
    let y = q[1] - pivot[1];
    [pivot[0] + c * x - s * y, pivot[1] + s * x + c * y, q[2]]
}

/// Warp one canonical point by a pose.
///
/// Stage order (fixed; stages do not commute): arm swings, leg swings,
/// torso bend, vertical stretch, then the rigid yaw + lean applied
/// exactly as `RotationPair { alpha: yaw, beta: lean }`. Region weights
/// are smoothstep functions of the *canonical* position, so the warp is
/// smooth and every stage with a zero parameter is skipped — the
/// identity pose returns the input bit for bit.
///
/// Displacement bound: each stage moves a point by at most
/// `2 * |parameter|` inside the unit ball (rotations: angle times lever
/// arm under 2; stretch: `|e^s - 1| * 1.25 < 2|s|` for `|s| <= 0.25`),
/// so `|warp(p) - p| <= 2 * pose.magnitude()`.
pub fn warp_point(p: [f64; 3], pose: &PoseParams) -> [f64; 3] {
    let mut q = p;
    let side = usize::from(p[0] >= 0.0); // 0 = left (x < 0), 1 = right

    // Arm swing about the shoulder (z-axis rotation), weighted by how far
    // out along the arm the canonical point sits.
    let w_arm = smoothstep((p[0].abs() - 0.11) / 0.10);
    if pose.arm_swing[side] != 0.0 && w_arm > 0.0 {
        let sx = if side == 0 { -0.14 } else { 0.14 };
        q = rot_z_about(q, [sx, 0.30, 0.0], pose.arm_swing[side] * w_arm);
    }

    // Leg swing about the hip (x-axis rotation), weighted by depth below
    // the hip line.
    let w_leg = smoothstep((-0.30 - p[1]) / 0.10);
    if pose.leg_swing[side] != 0.0 && w_leg > 0.0 {
        let hx = if side == 0 { -0.08 } else { 0.08 };
        q = rot_x_about(q, [hx, -0.28, 0.0], pose.leg_swing[side] * w_leg);
    }

    // Torso bend about the pelvis, growing with height.
    let w_bend = smoothstep((p[1] - PELVIS[1]) / 0.55);
    if pose.torso_bend != 0.0 && w_bend > 0.0 {
        q = rot_x_about(q, PELVIS, pose.torso_bend * w_bend);
    }

    // Vertical stretch about the pelvis height.
    if pose.log_stretch != 0.0 {
        q[1] = PELVIS[1] + (q[1] - PELVIS[1]) * pose.log_stretch.exp();
    }

    // Rigid part, identical to the rotation-search family.
    if pose.yaw != 0.0 || pose.lean != 0.0 {
        let rot = RotationPair::new(pose.yaw, pose.lean)
            .expect("pose bounds are inside the rotation family bounds");
        q = rotate_point(&rot, q);
    }
    q
}

/// Warp a whole cloud. Point `i` of the result descends from point `i`
/// of the input; work is computed in `f64` and stored in `f32`. Points
/// may be processed in parallel; results are bitwise identical to a
/// sequential pass.
pub fn deform_shape(canonical: &PointCloud, pose: &PoseParams) -> Result<PointCloud> {
    pose.validate()?;
    if canonical.is_empty() {
        return Err(Error::EmptyCloud("deform_shape"));
    }
    let src = canonical.points_f64();
    let warped = exec::map_slice(&src, |&p| {
        let q = warp_point(p, pose);
        [q[0] as f32, q[1] as f32, q[2] as f32]
    });
    PointCloud::new(warped)
}

/// Generate `count` index-aligned samples of `points_per_shape` points.
///
/// Poses are drawn sequentially from a counter-seeded generator (so the
/// sequence depends only on `seed`), then the warps run in parallel.
pub fn generate_dataset(
    count: usize,
    points_per_shape: usize,
    seed: u64,
) -> Result<Vec<SyntheticShape>> {
    use rand::SeedableRng;
    if count == 0 {
        return Err(Error::Contract("dataset needs at least one shape".into()));
    }
    let canonical = canonical_shape(points_per_shape)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let poses: Vec<PoseParams> = (0..count).map(|_| PoseParams::sample(&mut rng)).collect();
    let shapes = exec::map_slice(&poses, |pose| {
        deform_shape(&canonical, pose).map(|cloud| SyntheticShape { cloud, pose: *pose })
    });
    shapes.into_iter().collect()
}
