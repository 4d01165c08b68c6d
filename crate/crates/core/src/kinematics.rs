//! Forward and inverse kinematics over a [`Skeleton`].
//!
//! IK is solved frame by frame. A joint's global orientation is chosen so
//! that its rest child bones point along the observed child bones:
//!
//! * two or more children: orthogonal Procrustes (Kabsch) fit over unit
//!   child directions, so bone-length noise does not bias the orientation;
//! * one child: shortest arc in the parent's frame, which leaves the twist
//!   about the bone at zero relative to the parent;
//! * leaf: the parent's orientation (identity local rotation).

use std::fmt;

use nalgebra::Matrix3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{make_sign_continuous, MotionSequence, PoseTrajectory, Quat, Skeleton, Vec3};

/// Relative bone-length deviation above which IK reports a diagnostic.
pub const BONE_LENGTH_TOLERANCE: f64 = 0.25;

/// Cross-product magnitude below which unit child directions count as collinear.
const COLLINEAR_EPS: f64 = 1e-6;

/// Global joint positions and orientations for every frame.
#[derive(Debug, Clone)]
pub struct GlobalPose {
    pub frame_rate: f64,
    /// `positions[t][j]`
    pub positions: Vec<Vec<Vec3>>,
    /// `orientations[t][j]`: joint frame relative to the world.
    pub orientations: Vec<Vec<Quat>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IkDiagnostic {
    BoneLength { frame: usize, joint: usize, ratio: f64 },
    CollinearChildren { frame: usize, joint: usize },
    ZeroLengthBone { frame: usize, joint: usize },
}

impl fmt::Display for IkDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IkDiagnostic::BoneLength { frame, joint, ratio } => write!(
                f,
                "frame {frame}: bone ending at joint {joint} is {ratio:.3}x its rest length"
            ),
            IkDiagnostic::CollinearChildren { frame, joint } => write!(
                f,
                "frame {frame}: child directions of joint {joint} are collinear; used single-bone alignment"
            ),
            IkDiagnostic::ZeroLengthBone { frame, joint } => {
                write!(f, "frame {frame}: bone ending at joint {joint} has zero length")
            }
        }
    }
}

pub fn global_pose(skeleton: &Skeleton, pose: &PoseTrajectory) -> Result<GlobalPose> {
    pose.check_skeleton(skeleton)?;
    let n = skeleton.len();
    let (positions, orientations) = pose
        .root_translation()
        .iter()
        .zip(pose.local_rotations())
        .map(|(root, locals)| {
            let mut pos = vec![Vec3::zeros(); n];
            let mut ori = vec![Quat::IDENTITY; n];
            pos[0] = *root;
            ori[0] = locals[0];
            for j in 1..n {
                let p = skeleton.parent(j).expect("non-root");
                pos[j] = pos[p] + ori[p].rotate(skeleton.joint(j).rest_offset);
                ori[j] = ori[p] * locals[j];
            }
            (pos, ori)
        })
        .unzip();
    Ok(GlobalPose {
        frame_rate: pose.frame_rate(),
        positions,
        orientations,
    })
}

/// Global joint positions of `pose`.
pub fn forward_kinematics(skeleton: &Skeleton, pose: &PoseTrajectory) -> Result<MotionSequence> {
    let g = global_pose(skeleton, pose)?;
    MotionSequence::new(g.frame_rate, g.positions)
}

/// Recovers root translation and local joint rotations from joint positions.
/// Diagnostics are logged; use [`inverse_kinematics_with_diagnostics`] to
/// inspect them.
pub fn inverse_kinematics(skeleton: &Skeleton, motion: &MotionSequence) -> Result<PoseTrajectory> {
    let (pose, diags) = inverse_kinematics_with_diagnostics(skeleton, motion)?;
    if let Some(first) = diags.first() {
        log::warn!("inverse kinematics: {} diagnostic(s), first: {first}", diags.len());
    }
    Ok(pose)
}

pub fn inverse_kinematics_with_diagnostics(
    skeleton: &Skeleton,
    motion: &MotionSequence,
) -> Result<(PoseTrajectory, Vec<IkDiagnostic>)> {
    motion.check_skeleton(skeleton)?;
    let solved: Vec<(Vec<Quat>, Vec<IkDiagnostic>)> = motion
        .frames()
        .par_iter()
        .enumerate()
        .map(|(t, frame)| solve_frame(skeleton, t, frame))
        .collect();

    let mut diagnostics = Vec::new();
    let mut rotations = Vec::with_capacity(solved.len());
    for (rots, diags) in solved {
        rotations.push(rots);
        diagnostics.extend(diags);
    }
    for j in 0..skeleton.len() {
        let mut seq: Vec<Quat> = rotations.iter().map(|r| r[j]).collect();
        make_sign_continuous(&mut seq);
        for (r, q) in rotations.iter_mut().zip(seq) {
            r[j] = q;
        }
    }
    let root = motion.frames().iter().map(|f| f[0]).collect();
    let pose = PoseTrajectory::new(motion.frame_rate(), root, rotations)?;
    Ok((pose, diagnostics))
}

fn solve_frame(skeleton: &Skeleton, t: usize, frame: &[Vec3]) -> (Vec<Quat>, Vec<IkDiagnostic>) {
    let n = skeleton.len();
    let mut global = vec![Quat::IDENTITY; n];
    let mut local = vec![Quat::IDENTITY; n];
    let mut diags = Vec::new();

    for j in 1..n {
        let rest = skeleton.joint(j).rest_offset.norm();
        let observed = (frame[j] - frame[skeleton.parent(j).expect("non-root")]).norm();
        if observed == 0.0 {
            diags.push(IkDiagnostic::ZeroLengthBone { frame: t, joint: j });
        } else if (observed / rest - 1.0).abs() > BONE_LENGTH_TOLERANCE {
            diags.push(IkDiagnostic::BoneLength {
                frame: t,
                joint: j,
                ratio: observed / rest,
            });
        }
    }

    for j in 0..n {
        let parent_global = skeleton.parent(j).map_or(Quat::IDENTITY, |p| global[p]);
        let children = skeleton.children(j);
        let observed_dir = |c: usize| frame[c] - frame[j];

        let aligned = match children.len() {
            0 => None,
            1 => Some(align_single(
                parent_global,
                skeleton.joint(children[0]).rest_offset,
                observed_dir(children[0]),
            )),
            _ => {
                let pairs: Vec<(Vec3, Vec3)> = children
                    .iter()
                    .filter(|&&c| observed_dir(c).norm() > 0.0)
                    .map(|&c| (skeleton.joint(c).rest_offset.normalize(), observed_dir(c).normalize()))
                    .collect();
                match kabsch(&pairs) {
                    Some(g) => Some(g),
                    None => {
                        diags.push(IkDiagnostic::CollinearChildren { frame: t, joint: j });
                        let c = children
                            .iter()
                            .copied()
                            .find(|&c| observed_dir(c).norm() > 0.0)
                            .unwrap_or(children[0]);
                        Some(align_single(
                            parent_global,
                            skeleton.joint(c).rest_offset,
                            observed_dir(c),
                        ))
                    }
                }
            }
        };
        match aligned {
            Some(g) => {
                global[j] = g;
                local[j] = parent_global.inverse() * g;
            }
            None => {
                global[j] = parent_global;
                local[j] = Quat::IDENTITY;
            }
        }
    }
    (local, diags)
}

/// Global orientation that takes `rest_child` onto `observed_child` with the
/// minimal rotation relative to the parent frame.
fn align_single(parent_global: Quat, rest_child: Vec3, observed_child: Vec3) -> Quat {
    let in_parent = parent_global.inverse().rotate(observed_child);
    parent_global * Quat::shortest_arc(rest_child, in_parent)
}

/// Rotation `R` minimizing `sum |R a - b|^2` over unit direction pairs
/// `(a, b)`. `None` when either side is collinear (rotation not unique).
pub fn kabsch(pairs: &[(Vec3, Vec3)]) -> Option<Quat> {
    if pairs.len() < 2 || collinear(pairs.iter().map(|p| p.0)) || collinear(pairs.iter().map(|p| p.1)) {
        return None;
    }
    let h: Matrix3<f64> = pairs.iter().map(|(a, b)| a * b.transpose()).sum();
    let svd = h.svd(true, true);
    let u = svd.u?;
    let v = svd.v_t?.transpose();
    let mut d = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        // flip the axis of the smallest singular value
        let smallest = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(2);
        d[(smallest, smallest)] = -1.0;
    }
    Some(Quat::from_matrix(&(v * d * u.transpose())))
}

fn collinear(dirs: impl Iterator<Item = Vec3> + Clone) -> bool {
    let all: Vec<Vec3> = dirs.collect();
    !all.iter()
        .enumerate()
        .any(|(i, a)| all[i + 1..].iter().any(|b| a.cross(b).norm() > COLLINEAR_EPS))
}

/// Root-mean-square distance between corresponding joints of two motions.
pub fn rms_position_error(a: &MotionSequence, b: &MotionSequence) -> Result<f64> {
    if a.n_frames() != b.n_frames() || a.n_joints() != b.n_joints() {
        return Err(Error::Shape("motions differ in shape".into()));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (fa, fb) in a.frames().iter().zip(b.frames()) {
        for (pa, pb) in fa.iter().zip(fb) {
            sum += (pa - pb).norm_squared();
            count += 1;
        }
    }
    Ok((sum / count as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random_pose(skeleton: &Skeleton, frames: usize, rng: &mut ChaCha8Rng) -> PoseTrajectory {
        let root = (0..frames)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-2.0..2.0),
                    rng.random_range(0.0..2.0),
                    rng.random_range(-2.0..2.0),
                )
            })
            .collect();
        let rots = (0..frames)
            .map(|_| {
                (0..skeleton.len())
                    .map(|_| {
                        let r = Vec3::new(
                            rng.random_range(-1.5..1.5),
                            rng.random_range(-1.5..1.5),
                            rng.random_range(-1.5..1.5),
                        );
                        Quat::from_rotation_vector(r)
                    })
                    .collect()
            })
            .collect();
        PoseTrajectory::new(20.0, root, rots).unwrap()
    }

    #[test]
    fn fk_identity_gives_rest_pose() {
        let s = Skeleton::default_22();
        let m = forward_kinematics(&s, &PoseTrajectory::rest(&s, 20.0, 3).unwrap()).unwrap();
        let rest = s.rest_positions();
        for f in m.frames() {
            assert_eq!(f, &rest);
        }
    }

    #[test]
    fn fk_root_ramp_translates_rigidly() {
        let s = Skeleton::default_22();
        let n = 5;
        let root: Vec<Vec3> = (0..n)
            .map(|t| Vec3::new(0.1 * t as f64, 0.0, -0.05 * t as f64))
            .collect();
        let pose = PoseTrajectory::new(20.0, root.clone(), vec![vec![Quat::IDENTITY; 22]; n]).unwrap();
        let m = forward_kinematics(&s, &pose).unwrap();
        let rest = s.rest_positions();
        for (t, f) in m.frames().iter().enumerate() {
            for (p, r) in f.iter().zip(&rest) {
                assert!((p - (r + root[t])).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn fk_root_quarter_turn_about_y_matches_matrix() {
        let s = Skeleton::default_22();
        let q = Quat::from_axis_angle(Vec3::y(), FRAC_PI_2);
        let mut rots = vec![vec![Quat::IDENTITY; 22]; 2];
        rots[0][0] = q;
        rots[1][0] = q;
        let pose = PoseTrajectory::new(20.0, vec![Vec3::zeros(); 2], rots).unwrap();
        let m = forward_kinematics(&s, &pose).unwrap();
        // R_y(90): (x, y, z) -> (z, y, -x)
        let ry = Matrix3::new(0.0, 0.0, 1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0);
        for (p, r) in m.frames()[0].iter().zip(s.rest_positions()) {
            assert!((p - ry * r).norm() < 1e-12);
        }
    }

    #[test]
    fn fk_preserves_bone_lengths() {
        let s = Skeleton::default_22();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = forward_kinematics(&s, &random_pose(&s, 10, &mut rng)).unwrap();
        for f in m.frames() {
            for j in 1..s.len() {
                let len = (f[j] - f[s.parent(j).unwrap()]).norm();
                assert!((len - s.joint(j).rest_offset.norm()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ik_of_translated_rest_pose_is_identity() {
        let s = Skeleton::default_22();
        let frames = vec![s.rest_positions().iter().map(|p| p + Vec3::x()).collect::<Vec<_>>(); 4];
        let m = MotionSequence::new(20.0, frames).unwrap();
        let pose = inverse_kinematics(&s, &m).unwrap();
        for (root, rots) in pose.root_translation().iter().zip(pose.local_rotations()) {
            assert_eq!(*root, Vec3::x());
            for q in rots {
                assert!(q.angle() < 1e-9, "{q:?}");
            }
        }
    }

    #[test]
    fn ik_fk_round_trip_random() {
        let s = Skeleton::default_22();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let target = forward_kinematics(&s, &random_pose(&s, 50, &mut rng)).unwrap();
        let (pose, diags) = inverse_kinematics_with_diagnostics(&s, &target).unwrap();
        assert!(diags.is_empty(), "{diags:?}");
        let again = forward_kinematics(&s, &pose).unwrap();
        assert!(rms_position_error(&target, &again).unwrap() < 1e-6);
    }

    #[test]
    fn ik_recovers_bent_elbow() {
        let s = Skeleton::default_22();
        let elbow = s.index_of("left_elbow").unwrap();
        let wrist = s.index_of("left_wrist").unwrap();
        let bend = Quat::from_axis_angle(Vec3::x(), -FRAC_PI_2);
        let mut rots = vec![vec![Quat::IDENTITY; 22]; 2];
        rots[0][elbow] = bend;
        rots[1][elbow] = bend;
        let pose = PoseTrajectory::new(20.0, vec![Vec3::zeros(); 2], rots).unwrap();
        let motion = forward_kinematics(&s, &pose).unwrap();
        let recovered = inverse_kinematics(&s, &motion).unwrap();
        let g = global_pose(&s, &recovered).unwrap();
        let shoulder = s.parent(elbow).unwrap();
        let f = &motion.frames()[0];
        let observed = g.orientations[0][shoulder]
            .inverse()
            .rotate((f[wrist] - f[elbow]).normalize());
        let rest_dir = s.joint(wrist).rest_offset.normalize();
        let got = recovered.local_rotations()[0][elbow].rotate(rest_dir);
        assert!((got - observed).norm() < 1e-9);
        assert!((recovered.local_rotations()[0][elbow].angle() - FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn ik_is_translation_equivariant() {
        let s = Skeleton::default_22();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = forward_kinematics(&s, &random_pose(&s, 8, &mut rng)).unwrap();
        let shift = Vec3::new(3.0, -1.0, 0.5);
        let a = inverse_kinematics(&s, &m).unwrap();
        let b = inverse_kinematics(&s, &m.translated(shift)).unwrap();
        for t in 0..m.n_frames() {
            assert!((b.root_translation()[t] - a.root_translation()[t] - shift).norm() < 1e-12);
            for j in 0..s.len() {
                let (qa, qb) = (a.local_rotations()[t][j], b.local_rotations()[t][j]);
                assert!((qa.inverse() * qb).angle() < 1e-7);
            }
        }
    }

    #[test]
    fn ik_is_rotation_equivariant_at_root() {
        let s = Skeleton::default_22();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = forward_kinematics(&s, &random_pose(&s, 8, &mut rng)).unwrap();
        let r = Quat::from_rotation_vector(Vec3::new(0.4, -1.1, 0.7));
        let a = inverse_kinematics(&s, &m).unwrap();
        let b = inverse_kinematics(&s, &m.rotated(r)).unwrap();
        for t in 0..m.n_frames() {
            let expected_root = r * a.local_rotations()[t][0];
            assert!((expected_root.inverse() * b.local_rotations()[t][0]).angle() < 1e-7);
            for j in 1..s.len() {
                let (qa, qb) = (a.local_rotations()[t][j], b.local_rotations()[t][j]);
                assert!((qa.inverse() * qb).angle() < 1e-7, "joint {j}");
            }
        }
    }

    #[test]
    fn collinear_children_fall_back_with_diagnostic() {
        let s = Skeleton::default_22();
        let mut frame = s.rest_positions();
        // Put both hips and spine1 on one vertical line through the pelvis.
        frame[1] = Vec3::new(0.0, -0.1, 0.0);
        frame[2] = Vec3::new(0.0, -0.12, 0.0);
        frame[3] = Vec3::new(0.0, 0.11, 0.0);
        let m = MotionSequence::new(20.0, vec![frame.clone(), frame]).unwrap();
        let (pose, diags) = inverse_kinematics_with_diagnostics(&s, &m).unwrap();
        assert!(diags
            .iter()
            .any(|d| matches!(d, IkDiagnostic::CollinearChildren { joint: 0, .. })));
        assert!(pose.local_rotations()[0].iter().all(|q| q.is_finite()));
    }

    #[test]
    fn ik_rejects_joint_count_mismatch() {
        let s = Skeleton::default_22();
        let m = MotionSequence::new(20.0, vec![vec![Vec3::zeros(); 21]; 2]).unwrap();
        assert!(inverse_kinematics(&s, &m).is_err());
    }

    #[test]
    fn stretched_bones_are_reported() {
        let s = Skeleton::default_22();
        let mut frame = s.rest_positions();
        frame[21] += Vec3::new(0.0, -0.5, 0.0);
        let m = MotionSequence::new(20.0, vec![frame.clone(), frame]).unwrap();
        let (_, diags) = inverse_kinematics_with_diagnostics(&s, &m).unwrap();
        assert!(diags
            .iter()
            .any(|d| matches!(d, IkDiagnostic::BoneLength { joint: 21, .. })));
    }

    #[test]
    fn kabsch_recovers_known_rotation() {
        let r = Quat::from_rotation_vector(Vec3::new(0.3, 2.0, -0.4));
        let dirs = [
            Vec3::new(1.0, 0.2, 0.0),
            Vec3::new(-0.3, 1.0, 0.1),
            Vec3::new(0.0, -0.2, 1.0),
        ];
        let pairs: Vec<_> = dirs.iter().map(|d| (d.normalize(), r.rotate(d.normalize()))).collect();
        let got = kabsch(&pairs).unwrap();
        assert!((got.inverse() * r).angle() < 1e-12);
        assert!(kabsch(&[(Vec3::x(), Vec3::y()), (-Vec3::x(), -Vec3::y())]).is_none());
    }
}
