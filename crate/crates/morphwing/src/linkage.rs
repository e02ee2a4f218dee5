//! Two-pose synthesis and forward kinematics of the wing-skeleton linkage.
//!
//! The wing skeleton is a planar multi-loop linkage driven by one slider.
//! Its geometry is described by five given lengths (humerus `l_h`, radius
//! `l_r`, manus `l_m`, and the two lever segments `b`, `f`) plus eight
//! derived link lengths `a..j`. Two of the derived lengths are fixed by
//! construction (`c + d = l_h`, `g = l_r`); the remaining six are determined
//! by requiring the mechanism to hit two prescribed poses (fully extended
//! and fully tucked), three loop-closure equations per pose.
//!
//! Synthesis solves that 6x6 system with a damped multi-start Newton
//! iteration. Forward kinematics inverts the three loops one at a time in
//! closed form, selecting quadratic-root branches by continuity from the
//! extended pose.
//!
//! Angle conventions: the shoulder angle `theta_s` is measured at the
//! shoulder pivot from the slider axis, the elbow angle satisfies
//! `theta_e = theta_s + theta_4` and the wrist angle
//! `theta_w = theta_4 + theta_6`, where `theta_4` and `theta_6` are the
//! internal angles of the second and third loop. I/O is in degrees and mm;
//! everything internal is radians and mm.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Default seed for the synthesis multi-start RNG. The CLI overrides it
/// from the `MORPHWING_SEED` environment variable.
pub const DEFAULT_SEED: u64 = 0x6d6f7270_77696e67;

/// One prescribed pose of the wing skeleton.
///
/// `theta_s` may be omitted: published pose tables do not always list the
/// shoulder angle of the tucked state. Synthesis treats a missing tucked
/// shoulder angle as an extra unknown, which leaves the two-pose system
/// underdetermined by one; see [`synthesize_linkage`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseConstraint {
    /// Shoulder angle in degrees, if prescribed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_s: Option<f64>,
    /// Elbow angle in degrees.
    pub theta_e: f64,
    /// Wrist angle in degrees.
    pub theta_w: f64,
    /// Output-slider displacement in mm.
    #[serde(rename = "x_A")]
    pub x_a: f64,
}

/// Given quantities of the synthesis problem: the three bone lengths, the
/// two lever segments, and the two pose constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkageGiven {
    /// Humerus length (mm).
    pub l_h: f64,
    /// Radius (forearm spar) length (mm).
    pub l_r: f64,
    /// Manus (hand-wing spar) length (mm).
    pub l_m: f64,
    /// Lever segment between slider pivot and shoulder crank (mm).
    pub b: f64,
    /// Lever segment on the forearm coupler (mm).
    pub f: f64,
    pub extended: PoseConstraint,
    pub tucked: PoseConstraint,
}

/// The eight derived link lengths, all in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkageDerived {
    pub a: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub g: f64,
    pub h: f64,
    pub i: f64,
    pub j: f64,
}

/// Joint angles (radians) and slider displacement (mm) at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointState {
    pub theta_s: f64,
    pub theta_e: f64,
    pub theta_w: f64,
    pub x_a: f64,
}

/// The six internal linkage angles (radians). `theta_2`, `theta_3` and
/// `theta_5` are eliminated from the loop equations during synthesis but
/// are recoverable from a [`JointState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopAngles {
    pub theta_1: f64,
    pub theta_2: f64,
    pub theta_3: f64,
    pub theta_4: f64,
    pub theta_5: f64,
    pub theta_6: f64,
}

/// 3D skeleton joint positions (mm, body frame: x forward, y outboard of
/// the left wing, z up, origin at the shoulder) plus the hand-wing pitch
/// angle out of the wing plane (radians, positive above the plane).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkeletonPose {
    pub shoulder: Vector3<f64>,
    pub elbow: Vector3<f64>,
    pub wrist: Vector3<f64>,
    pub wingtip: Vector3<f64>,
    pub hand_wing_pitch: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum LinkageError {
    #[error("synthesis did not converge: best normalized residual {best_residual:.3e} after {starts} starts")]
    NoConvergence { best_residual: f64, starts: usize },
    #[error("synthesized solution is non-physical: {name} = {value:.4} mm")]
    NonPhysical { name: &'static str, value: f64 },
    #[error("slider displacement {x_a:.4} mm is outside the reachable range [{min:.4}, {max:.4}] mm")]
    OutOfRange { x_a: f64, min: f64, max: f64 },
    #[error("no kinematic branch at x_A = {x_a:.4} mm is continuous with the extended pose")]
    BranchAmbiguity { x_a: f64 },
    #[error("invalid linkage description: {0}")]
    Invalid(String),
}

impl LinkageGiven {
    /// Checks the structural invariants: positive lengths, angles inside
    /// (0, 180) degrees, distinct poses, and a prescribed extended shoulder
    /// angle (the extended pose anchors branch selection, so it must be
    /// complete).
    pub fn validate(&self) -> Result<(), LinkageError> {
        let lengths = [
            ("l_h", self.l_h),
            ("l_r", self.l_r),
            ("l_m", self.l_m),
            ("b", self.b),
            ("f", self.f),
        ];
        for (name, v) in lengths {
            if !(v > 0.0) {
                return Err(LinkageError::Invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        for (pose_name, pose) in [("extended", &self.extended), ("tucked", &self.tucked)] {
            let mut angles = vec![("theta_e", pose.theta_e), ("theta_w", pose.theta_w)];
            if let Some(ts) = pose.theta_s {
                angles.push(("theta_s", ts));
            }
            for (name, deg) in angles {
                if !(deg > 0.0 && deg < 180.0) {
                    return Err(LinkageError::Invalid(format!(
                        "{pose_name}.{name} must lie in (0, 180) degrees, got {deg}"
                    )));
                }
            }
            if !(pose.x_a > 0.0) {
                return Err(LinkageError::Invalid(format!(
                    "{pose_name}.x_A must be > 0, got {}",
                    pose.x_a
                )));
            }
        }
        if self.extended.theta_s.is_none() {
            return Err(LinkageError::Invalid(
                "extended.theta_s is required (it anchors the assembly branch)".into(),
            ));
        }
        if self.extended.x_a == self.tucked.x_a {
            return Err(LinkageError::Invalid(
                "extended and tucked poses must differ in x_A".into(),
            ));
        }
        Ok(())
    }
}

/// A fully specified pose in radians: (theta_s, theta_e, theta_w, x_A).
type Pose = (f64, f64, f64, f64);

/// Evaluates the three eliminated loop-closure residuals at one pose for
/// link lengths `(a, d, e, h, i, j)` (with `c = l_h - d`, `g = l_r`).
///
/// Loop 1: (x_A - c cos ts)^2 + (c sin ts)^2 = (b + a)^2
/// Loop 2: P^2 + Q^2 = e^2 with (P, Q) the coupler vector
/// Loop 3: X^2 + Y^2 = j^2 after substituting the loop-2 direction
fn loop_residuals_raw(u: &[f64; 6], given: &LinkageGiven, pose: &Pose) -> [f64; 3] {
    let [a, d, e, h, i, j] = *u;
    let (ts, te, tw, x) = *pose;
    let c = given.l_h - d;
    let b = given.b;
    let ba = b + a;
    let r1 = (x - c * ts.cos()).powi(2) + (c * ts.sin()).powi(2) - ba * ba;
    let c2 = (x - c * ts.cos()) / ba;
    let s2 = c * ts.sin() / ba;
    let p = d * ts.cos() + i * (te - ts).cos() - b * c2;
    let q = d * ts.sin() - i * (te - ts).sin() + b * s2;
    let r2 = p * p + q * q - e * e;
    let fe = given.f / e;
    let x3 = fe * p - h * (tw - te + ts).cos() + (given.l_r + i) * (te - ts).cos();
    let y3 = fe * q - h * (tw - te + ts).sin() - (given.l_r + i) * (te - ts).sin();
    let r3 = x3 * x3 + y3 * y3 - j * j;
    [r1, r2, r3]
}

/// Normalizes raw mm^2 residuals by the magnitude of their right-hand
/// sides (floored at 1 mm^2) so the convergence test is scale-free.
fn normalized_residuals(u: &[f64; 6], given: &LinkageGiven, pose: &Pose) -> [f64; 3] {
    let [a, _, e, _, _, j] = *u;
    let raw = loop_residuals_raw(u, given, pose);
    let scales = [
        ((given.b + a) * (given.b + a)).abs().max(1.0),
        (e * e).abs().max(1.0),
        (j * j).abs().max(1.0),
    ];
    [raw[0] / scales[0], raw[1] / scales[1], raw[2] / scales[2]]
}

/// Evaluates the normalized closure residuals of a given design at a joint
/// state, for verification. Returns the three per-loop values.
pub fn closure_residuals(
    lengths: &LinkageDerived,
    given: &LinkageGiven,
    state: &JointState,
) -> [f64; 3] {
    let u = [lengths.a, lengths.d, lengths.e, lengths.h, lengths.i, lengths.j];
    let pose = (state.theta_s, state.theta_e, state.theta_w, state.x_a);
    normalized_residuals(&u, given, &pose)
}

fn poses_of(given: &LinkageGiven) -> Result<(Pose, Option<f64>, Pose), LinkageError> {
    let d = PI / 180.0;
    let ext = (
        given.extended.theta_s.unwrap() * d,
        given.extended.theta_e * d,
        given.extended.theta_w * d,
        given.extended.x_a,
    );
    let tucked_ts = given.tucked.theta_s.map(|t| t * d);
    let tuck = (
        tucked_ts.unwrap_or(0.0),
        given.tucked.theta_e * d,
        given.tucked.theta_w * d,
        given.tucked.x_a,
    );
    Ok((ext, tucked_ts, tuck))
}

/// Solves the two-pose synthesis problem for the six free link lengths.
///
/// Uses a damped Newton iteration with backtracking line search, restarted
/// from 16 random seeds scaled to `(0, l_h + l_r)`; the first converged,
/// physically valid solution wins. The returned design satisfies
/// `c + d = l_h` and `g = l_r` exactly by construction, and every loop
/// residual at both poses is below 1e-9 (normalized).
///
/// When `tucked.theta_s` is absent the system has 6 equations in 7
/// unknowns and admits a one-parameter family; the solver then takes
/// Gauss-Newton (least-norm) steps and returns one family member. Which
/// member is seed-dependent, so designs meant to be reproducible should
/// prescribe the tucked shoulder angle.
pub fn synthesize_linkage(given: &LinkageGiven) -> Result<LinkageDerived, LinkageError> {
    synthesize_linkage_seeded(given, DEFAULT_SEED)
}

/// [`synthesize_linkage`] with an explicit multi-start RNG seed.
pub fn synthesize_linkage_seeded(
    given: &LinkageGiven,
    seed: u64,
) -> Result<LinkageDerived, LinkageError> {
    given.validate()?;
    let (ext, tucked_ts, tuck_partial) = poses_of(given)?;
    let free_shoulder = tucked_ts.is_none();
    let n_unknowns = if free_shoulder { 7 } else { 6 };

    // residual vector over the full unknown vector; unknowns[6] (when
    // present) is the tucked shoulder angle in radians. The solver scales
    // raw mm^2 residuals by a constant so that no direction at infinity
    // looks like a root (normalizing by the iterate-dependent right-hand
    // sides would zero out along a -> inf); the scale-free per-loop check
    // is applied afterwards via closure_residuals.
    let scale = given.l_h + given.l_r;
    let sq = scale * scale;
    let eval = |v: &DVector<f64>| -> DVector<f64> {
        let u = [v[0], v[1], v[2], v[3], v[4], v[5]];
        let tuck = if free_shoulder {
            (v[6], tuck_partial.1, tuck_partial.2, tuck_partial.3)
        } else {
            tuck_partial
        };
        let re = loop_residuals_raw(&u, given, &ext);
        let rt = loop_residuals_raw(&u, given, &tuck);
        DVector::from_vec(vec![
            re[0] / sq,
            re[1] / sq,
            re[2] / sq,
            rt[0] / sq,
            rt[1] / sq,
            rt[2] / sq,
        ])
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_residual = f64::INFINITY;
    let mut nonphysical: Option<(&'static str, f64)> = None;
    const STARTS: usize = 16;
    const TOL: f64 = 1e-12;

    for _ in 0..STARTS {
        let mut v = DVector::zeros(n_unknowns);
        for k in 0..6 {
            v[k] = rng.random::<f64>() * scale * 0.98 + 0.01 * scale;
        }
        if free_shoulder {
            v[6] = rng.random::<f64>() * PI * 0.5 + 0.05;
        }

        let mut r = eval(&v);
        let mut converged = false;
        for _ in 0..120 {
            let rnorm = r.amax();
            if rnorm < TOL {
                converged = true;
                break;
            }
            // a wandering iterate far outside plausible scale never comes
            // back; abandon the start
            if v.amax() > 100.0 * scale {
                break;
            }
            // central-difference Jacobian; the system is tiny so the extra
            // evaluations are irrelevant next to robustness
            let mut jac = DMatrix::zeros(6, n_unknowns);
            for col in 0..n_unknowns {
                let step = 1e-7 * v[col].abs().max(1.0);
                let mut vp = v.clone();
                let mut vm = v.clone();
                vp[col] += step;
                vm[col] -= step;
                let rp = eval(&vp);
                let rm = eval(&vm);
                for row in 0..6 {
                    jac[(row, col)] = (rp[row] - rm[row]) / (2.0 * step);
                }
            }
            let delta = if n_unknowns == 6 {
                match jac.clone().lu().solve(&(-&r)) {
                    Some(dx) => dx,
                    None => break,
                }
            } else {
                // least-norm Gauss-Newton step for the underdetermined case
                match jac.clone().svd(true, true).solve(&(-&r), 1e-12) {
                    Ok(dx) => dx,
                    Err(_) => break,
                }
            };
            // backtracking line search, sufficient decrease on the norm
            let base = r.norm();
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let cand = &v + &delta * lambda;
                let rc = eval(&cand);
                if rc.norm() < base * (1.0 - 1e-4 * lambda) || rc.amax() < TOL {
                    v = cand;
                    r = rc;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
        }

        best_residual = best_residual.min(r.amax());
        if !converged {
            continue;
        }
        let candidate = LinkageDerived {
            a: v[0],
            c: given.l_h - v[1],
            d: v[1],
            e: v[2],
            g: given.l_r,
            h: v[3],
            i: v[4],
            j: v[5],
        };
        match physical_check(&candidate) {
            Ok(()) => return Ok(candidate),
            Err((name, value)) => {
                nonphysical.get_or_insert((name, value));
            }
        }
    }

    if let Some((name, value)) = nonphysical {
        return Err(LinkageError::NonPhysical { name, value });
    }
    Err(LinkageError::NoConvergence { best_residual, starts: STARTS })
}

fn physical_check(lengths: &LinkageDerived) -> Result<(), (&'static str, f64)> {
    let named = [
        ("a", lengths.a),
        ("c", lengths.c),
        ("d", lengths.d),
        ("e", lengths.e),
        ("g", lengths.g),
        ("h", lengths.h),
        ("i", lengths.i),
        ("j", lengths.j),
    ];
    for (name, v) in named {
        if !(v > 0.0) || !v.is_finite() {
            return Err((name, v));
        }
    }
    Ok(())
}

/// Internal closed-form solve of the three loops at one slider value,
/// branch-selected by proximity to `prev = (theta_s, theta_4, theta_6)`.
/// Returns None when a loop cannot close (slider out of reach).
fn solve_loops(
    lengths: &LinkageDerived,
    given: &LinkageGiven,
    x: f64,
    prev: (f64, f64, f64),
) -> Option<(f64, f64, f64)> {
    let (a, c, d, e, h, i, j) = (
        lengths.a, lengths.c, lengths.d, lengths.e, lengths.h, lengths.i, lengths.j,
    );
    let (b, f, g) = (given.b, given.f, given.g());
    let ba = b + a;

    // loop 1: two shoulder branches +/- acos
    let ct = (x * x + c * c - ba * ba) / (2.0 * x * c);
    if ct.abs() > 1.0 {
        return None;
    }
    let base1 = ct.acos();
    let ts = nearest_angle(&[base1, -base1], prev.0);

    let c2 = (x - c * ts.cos()) / ba;
    let s2 = c * ts.sin() / ba;

    // loop 2: u cos(t4) - v sin(t4) = K2, two branches
    let u = d * ts.cos() - b * c2;
    let v = d * ts.sin() + b * s2;
    let k2 = (e * e - u * u - v * v - i * i) / (2.0 * i);
    let r2 = (u * u + v * v).sqrt();
    if (k2 / r2).abs() > 1.0 {
        return None;
    }
    let ph2 = (-v).atan2(u);
    let base2 = (k2 / r2).clamp(-1.0, 1.0).acos();
    let t4 = nearest_angle(&[ph2 + base2, ph2 - base2], prev.1);

    // loop-2 coupler direction feeds loop 3
    let ec3 = i * t4.cos() + d * ts.cos() - b * c2;
    let es3 = d * ts.sin() + b * s2 - i * t4.sin();
    let t3 = es3.atan2(ec3);

    // loop 3: p cos(t6) - q sin(t6) = K3, two branches
    let p = f * t3.cos() + (g + i) * t4.cos();
    let q = -f * t3.sin() + (g + i) * t4.sin();
    let k3 = (p * p + q * q + h * h - j * j) / (2.0 * h);
    let r3 = (p * p + q * q).sqrt();
    if (k3 / r3).abs() > 1.0 {
        return None;
    }
    let ph3 = (-q).atan2(p);
    let base3 = (k3 / r3).clamp(-1.0, 1.0).acos();
    let t6 = nearest_angle(&[ph3 + base3, ph3 - base3], prev.2);

    Some((ts, t4, t6))
}

fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

fn nearest_angle(candidates: &[f64], prev: f64) -> f64 {
    let mut best = candidates[0];
    for &c in &candidates[1..] {
        if angle_distance(c, prev) < angle_distance(best, prev) {
            best = c;
        }
    }
    best
}

fn extended_anchor(given: &LinkageGiven) -> (f64, f64, f64) {
    let d = PI / 180.0;
    let ts = given.extended.theta_s.expect("validated") * d;
    let te = given.extended.theta_e * d;
    let tw = given.extended.theta_w * d;
    let t4 = te - ts;
    let t6 = tw - t4;
    (ts, t4, t6)
}

/// Step size of the homotopy march along the slider axis, in mm. Small
/// enough that the continuous branch never jumps between quadratic roots.
const MARCH_STEP: f64 = 0.02;
/// Largest branch jump accepted for a single march step, radians.
const MAX_BRANCH_JUMP: f64 = PI / 4.0;

/// Marches the closed-form solution from the extended pose to `x` and
/// reports the internal angles, or None where the mechanism cannot reach.
fn march_to(
    lengths: &LinkageDerived,
    given: &LinkageGiven,
    x: f64,
) -> Option<(f64, f64, f64)> {
    given.validate().ok()?;
    let x0 = given.extended.x_a;
    let mut prev = extended_anchor(given);
    let span = x - x0;
    let steps = ((span.abs() / MARCH_STEP).ceil() as usize).max(1);
    for k in 1..=steps {
        let xk = x0 + span * (k as f64) / (steps as f64);
        let got = solve_loops(lengths, given, xk, prev)?;
        if angle_distance(got.0, prev.0) > MAX_BRANCH_JUMP
            || angle_distance(got.1, prev.1) > MAX_BRANCH_JUMP
            || angle_distance(got.2, prev.2) > MAX_BRANCH_JUMP
        {
            return None;
        }
        prev = got;
    }
    Some(prev)
}

/// Computes the reachable slider interval by marching outward from the
/// extended pose in both directions until a loop fails to close. The
/// interval always contains both prescribed poses for a design produced by
/// [`synthesize_linkage`] on the same givens.
pub fn reachable_range(lengths: &LinkageDerived, given: &LinkageGiven) -> (f64, f64) {
    let x0 = given.extended.x_a;
    let mut lo = x0;
    while lo - MARCH_STEP > 0.0 && march_to(lengths, given, lo - MARCH_STEP).is_some() {
        lo -= MARCH_STEP;
    }
    let limit = x0 + 4.0 * (given.l_h + given.l_r);
    let mut hi = x0;
    while hi + MARCH_STEP < limit && march_to(lengths, given, hi + MARCH_STEP).is_some() {
        hi += MARCH_STEP;
    }
    (lo, hi)
}

/// Forward kinematics: slider displacement to joint angles, on the
/// assembly branch continuous with the extended pose.
pub fn forward_kinematics(
    lengths: &LinkageDerived,
    given: &LinkageGiven,
    x_a: f64,
) -> Result<JointState, LinkageError> {
    given.validate()?;
    match march_to(lengths, given, x_a) {
        Some((ts, t4, t6)) => Ok(JointState {
            theta_s: ts,
            theta_e: ts + t4,
            theta_w: t4 + t6,
            x_a,
        }),
        None => {
            let (min, max) = reachable_range(lengths, given);
            if x_a < min || x_a > max {
                Err(LinkageError::OutOfRange { x_a, min, max })
            } else {
                Err(LinkageError::BranchAmbiguity { x_a })
            }
        }
    }
}

/// Recovers all six internal angles from a joint state.
pub fn loop_angles(
    lengths: &LinkageDerived,
    given: &LinkageGiven,
    state: &JointState,
) -> LoopAngles {
    let t4 = state.theta_e - state.theta_s;
    let t6 = state.theta_w - t4;
    let ba = given.b + lengths.a;
    let c2 = (state.x_a - lengths.c * state.theta_s.cos()) / ba;
    let s2 = lengths.c * state.theta_s.sin() / ba;
    let t2 = s2.atan2(c2);
    let ec3 = lengths.i * t4.cos() + lengths.d * state.theta_s.cos() - given.b * c2;
    let es3 = lengths.d * state.theta_s.sin() + given.b * s2 - lengths.i * t4.sin();
    let t3 = es3.atan2(ec3);
    let p5 = given.f * t3.cos() - lengths.h * t6.cos() + (lengths.g + lengths.i) * t4.cos();
    let q5 = -given.f * t3.sin() + lengths.h * t6.sin() + (lengths.g + lengths.i) * t4.sin();
    let t5 = q5.atan2(p5);
    LoopAngles {
        theta_1: state.theta_s,
        theta_2: t2,
        theta_3: t3,
        theta_4: t4,
        theta_5: t5,
        theta_6: t6,
    }
}

impl LinkageGiven {
    /// `g` equals the radius length by construction.
    pub fn g(&self) -> f64 {
        self.l_r
    }
}

fn rodrigues(v: Vector3<f64>, axis: Vector3<f64>, angle: f64) -> Vector3<f64> {
    let (s, c) = angle.sin_cos();
    v * c + axis.cross(&v) * s + axis * (axis.dot(&v)) * (1.0 - c)
}

/// Places the planar skeleton in 3D.
///
/// The planar linkage lives in the wing plane (x posterior, y outboard of
/// the left wing). The whole plane is rotated about the body-longitudinal
/// axis through the shoulder by `flap_angle` (positive raises the tip).
/// The hand wing additionally rotates about the wrist hinge, whose axis is
/// tilted by `wrist_mount` about the radial spar away from the wing-plane
/// normal; with a nonzero mount the manus leaves the wing plane as the
/// wrist folds, which is reported as `hand_wing_pitch` (negative = below
/// the plane). At `wrist_mount = 0` the pose reduces exactly to the planar
/// figure for every fold angle.
pub fn skeleton_pose(
    state: &JointState,
    flap_angle: f64,
    wrist_mount: f64,
    given: &LinkageGiven,
) -> SkeletonPose {
    let t4 = state.theta_e - state.theta_s;

    // geometry is first built in the planar linkage frame (x along the
    // slider axis, y toward the leading edge, z the wing-plane normal)
    let elbow_p = Vector3::new(
        given.l_h * state.theta_s.cos(),
        given.l_h * state.theta_s.sin(),
        0.0,
    );
    let wrist_p = elbow_p + Vector3::new(-given.l_r * t4.cos(), given.l_r * t4.sin(), 0.0);

    // wrist-local frame: e1 points up the radial spar (wrist to elbow),
    // e2 completes it in the wing plane; the rest direction of the manus
    // makes the extended wrist angle with e1
    let normal = Vector3::new(0.0, 0.0, 1.0);
    let e1 = (elbow_p - wrist_p).normalize();
    let e2 = normal.cross(&e1);
    let theta_we = given.extended.theta_w * PI / 180.0;
    let manus_rest = e1 * theta_we.cos() + e2 * theta_we.sin();
    // hinge axis: plane normal tilted by the mount angle about the spar;
    // zero mount keeps the manus in the wing plane for every fold angle
    let axis = normal * wrist_mount.cos() + e2 * wrist_mount.sin();
    let fold = state.theta_w - theta_we;
    let manus = rodrigues(manus_rest, axis, fold);
    let hand_wing_pitch = manus.dot(&normal).clamp(-1.0, 1.0).asin();
    let tip_p = wrist_p + manus * given.l_m;

    // planar frame to left-wing body frame: planar +x (posterior along the
    // slider) maps to body -x, planar +y to body +y (outboard), planar +z
    // to body +z; then the whole wing plane flaps about the body x axis
    let to_body = |p: Vector3<f64>| Vector3::new(-p.x, p.y, p.z);
    let flap_axis = Vector3::new(1.0, 0.0, 0.0);
    let place = |p: Vector3<f64>| rodrigues(to_body(p), flap_axis, flap_angle);
    SkeletonPose {
        shoulder: place(Vector3::zeros()),
        elbow: place(elbow_p),
        wrist: place(wrist_p),
        wingtip: place(tip_p),
        hand_wing_pitch,
    }
}

/// Serialized form of a linkage design: the givens plus, once synthesized,
/// the derived lengths. This is the JSON document the CLI reads and writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkageDocument {
    #[serde(flatten)]
    pub given: LinkageGiven,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived: Option<LinkageDerived>,
}
