//! Crank-rocker drive model: gear angle to flap angle and morphing-slider
//! displacement, the three-slider decoupler gate, and wingbeat trajectory
//! generation.
//!
//! The drive converts continuous gear rotation into a conical rocker sway
//! (the flap) and, through a 90 degree phase offset, a reciprocating
//! morphing command (the motor input slider, MIS). A servo input slider
//! (SIS) can hold the wing at any tuck level; the output slider (OS)
//! follows whichever of the two is more posterior. Slider convention:
//! larger displacement = more posterior = more tucked.
//!
//! Sign convention: positive flap angle sweeps the wing downward, so the
//! downstroke is the half-cycle where the flap angle increases. Skeleton
//! elevation is the negative of the flap angle.

use crate::linkage::{
    forward_kinematics, skeleton_pose, LinkageDerived, LinkageError, LinkageGiven, SkeletonPose,
};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Wing side, also used by the controller for morphing commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }

    pub fn parse(s: &str) -> Option<Side> {
        match s {
            "left" => Some(Side::Left),
            "right" => Some(Side::Right),
            _ => None,
        }
    }
}

/// Geometry and rate of the crank-rocker drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrmConfig {
    /// Crank radius (mm).
    #[serde(rename = "R")]
    pub r: f64,
    /// Cone height: crank plane to cross-shaft center (mm).
    #[serde(rename = "H")]
    pub h: f64,
    /// Gear revolutions per second (each revolution is one wingbeat), Hz.
    pub gear_rate: f64,
    /// Morphing-slider travel [x_min, x_max] in the decoupler frame (mm).
    pub mis_travel: [f64; 2],
}

#[derive(Debug, thiserror::Error)]
pub enum CrmError {
    #[error("invalid drive configuration: {0}")]
    Invalid(String),
}

impl CrmConfig {
    /// `R >= 0`, `H > 0`, `R < H` (keeps the flap amplitude below 90
    /// degrees), `x_min < x_max`.
    pub fn validate(&self) -> Result<(), CrmError> {
        if !(self.r >= 0.0) {
            return Err(CrmError::Invalid(format!("R must be >= 0, got {}", self.r)));
        }
        if !(self.h > 0.0) {
            return Err(CrmError::Invalid(format!("H must be > 0, got {}", self.h)));
        }
        if !(self.r < self.h) {
            return Err(CrmError::Invalid(format!(
                "R must be < H for a sub-90-degree amplitude, got R={} H={}",
                self.r, self.h
            )));
        }
        if !(self.mis_travel[0] < self.mis_travel[1]) {
            return Err(CrmError::Invalid(format!(
                "mis_travel must satisfy x_min < x_max, got [{}, {}]",
                self.mis_travel[0], self.mis_travel[1]
            )));
        }
        Ok(())
    }
}

/// Flap angle (rad, positive = downward sweep) at a gear angle. Periodic
/// with period 2 pi, peak magnitude `arctan(R/H)`.
pub fn flap_angle(cfg: &CrmConfig, gear_angle: f64) -> f64 {
    (cfg.r * gear_angle.sin() / cfg.h).atan()
}

/// Total flap sweep `2 arctan(R/H)` (rad).
pub fn flap_amplitude(cfg: &CrmConfig) -> f64 {
    2.0 * (cfg.r / cfg.h).atan()
}

/// Motor-input-slider position (mm) at a gear angle: an affine map of
/// `cos(gear_angle)` onto the travel range, so the slider extrema land
/// exactly on the flap-angle zero crossings (90 degree phase offset).
/// Gear angle 0 commands full extension at mid-downstroke.
pub fn mis_position(cfg: &CrmConfig, gear_angle: f64) -> f64 {
    let [x_min, x_max] = cfg.mis_travel;
    x_min + (x_max - x_min) * (1.0 - gear_angle.cos()) / 2.0
}

/// Decoupler gate: the output slider follows the more posterior of the
/// motor and servo inputs. Commutative, associative, idempotent, and
/// monotone in both arguments.
pub fn decoupler_gate(x_mis: f64, x_sis: f64) -> f64 {
    x_mis.max(x_sis)
}

/// Servo position that leaves the gate fully transparent below it: the
/// wing stays at full extension for the whole downstroke because the MIS
/// never travels posterior of the midpoint during that half-cycle.
pub fn extended_lock(cfg: &CrmConfig) -> f64 {
    (cfg.mis_travel[0] + cfg.mis_travel[1]) / 2.0
}

/// Positions of the three decoupler sliders at one instant. `x_os` is the
/// gate of the two inputs by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecouplerState {
    pub x_mis: f64,
    pub x_sis: f64,
    pub x_os: f64,
}

impl DecouplerState {
    pub fn new(x_mis: f64, x_sis: f64) -> DecouplerState {
        DecouplerState { x_mis, x_sis, x_os: decoupler_gate(x_mis, x_sis) }
    }
}

/// Maps an output-slider position (decoupler frame) to the linkage slider
/// displacement `x_A`. Calibrated so the travel endpoints map to the two
/// prescribed poses: `x_min -> x_Ae`, `x_max -> x_At`. Travel between
/// `x_min` and the extended lock is dead (the wing is already at the
/// extension stop), then the map is affine up to `x_max`.
pub fn slider_to_linkage(cfg: &CrmConfig, given: &LinkageGiven, x_os: f64) -> f64 {
    let lock = extended_lock(cfg);
    let x_ae = given.extended.x_a;
    let x_at = given.tucked.x_a;
    x_ae + (x_os.max(lock) - lock) * (x_at - x_ae) / (cfg.mis_travel[1] - lock)
}

/// One trajectory sample of one wing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WingbeatSample {
    pub t: f64,
    pub side: Side,
    /// Gear angle (rad).
    pub gear_angle: f64,
    /// Flap angle (rad, positive = downward).
    pub flap_angle: f64,
    pub x_mis: f64,
    pub x_sis: f64,
    pub x_os: f64,
    pub pose: SkeletonPose,
}

/// Generates both wings' trajectories over `[0, duration)` with
/// `samples_per_cycle` samples per gear revolution, left then right at
/// every instant. `sis` gives each side's servo-slider position as a
/// function of time; `sis == x_min` everywhere reproduces the symmetric
/// flight gait (wing fully extended for the whole downstroke).
pub fn wingbeat_trajectory(
    cfg: &CrmConfig,
    given: &LinkageGiven,
    derived: &LinkageDerived,
    wrist_mount: f64,
    sis: impl Fn(Side, f64) -> f64,
    duration: f64,
    samples_per_cycle: usize,
) -> Result<Vec<WingbeatSample>, CrmTrajectoryError> {
    cfg.validate()?;
    if !(duration > 0.0) {
        return Err(CrmError::Invalid(format!("duration must be > 0, got {duration}")).into());
    }
    if samples_per_cycle < 16 {
        return Err(CrmError::Invalid(format!(
            "samples_per_cycle must be >= 16, got {samples_per_cycle}"
        ))
        .into());
    }
    let dt = 1.0 / (cfg.gear_rate * samples_per_cycle as f64);
    let n = (duration / dt).round().max(1.0) as usize;
    let mut out = Vec::with_capacity(2 * n);
    for k in 0..n {
        let t = k as f64 * dt;
        let gear_angle = 2.0 * PI * cfg.gear_rate * t;
        let flap = flap_angle(cfg, gear_angle);
        let x_mis = mis_position(cfg, gear_angle);
        for side in [Side::Left, Side::Right] {
            let x_sis = sis(side, t);
            let x_os = decoupler_gate(x_mis, x_sis);
            let x_a = slider_to_linkage(cfg, given, x_os);
            let state = forward_kinematics(derived, given, x_a)?;
            // elevation is the negative of the (down-positive) flap angle
            let mut pose = skeleton_pose(&state, -flap, wrist_mount, given);
            if side == Side::Right {
                pose = mirror_to_right(pose);
            }
            out.push(WingbeatSample {
                t,
                side,
                gear_angle,
                flap_angle: flap,
                x_mis,
                x_sis,
                x_os,
                pose,
            });
        }
    }
    Ok(out)
}

fn mirror_to_right(pose: SkeletonPose) -> SkeletonPose {
    let m = |v: nalgebra::Vector3<f64>| nalgebra::Vector3::new(v.x, -v.y, v.z);
    SkeletonPose {
        shoulder: m(pose.shoulder),
        elbow: m(pose.elbow),
        wrist: m(pose.wrist),
        wingtip: m(pose.wingtip),
        hand_wing_pitch: pose.hand_wing_pitch,
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CrmTrajectoryError {
    #[error(transparent)]
    Config(#[from] CrmError),
    #[error(transparent)]
    Kinematics(#[from] LinkageError),
}

/// Serializes trajectory samples to CSV, one row per sample per side.
pub fn trajectory_to_csv(samples: &[WingbeatSample]) -> String {
    use crate::util::g9;
    let mut out = String::from(
        "t,side,gear_angle_rad,flap_angle_rad,x_mis_mm,x_sis_mm,x_os_mm,wrist_x,wrist_y,wrist_z,tip_x,tip_y,tip_z\n",
    );
    for s in samples {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            g9(s.t),
            s.side.as_str(),
            g9(s.gear_angle),
            g9(s.flap_angle),
            g9(s.x_mis),
            g9(s.x_sis),
            g9(s.x_os),
            g9(s.pose.wrist.x),
            g9(s.pose.wrist.y),
            g9(s.pose.wrist.z),
            g9(s.pose.wingtip.x),
            g9(s.pose.wingtip.y),
            g9(s.pose.wingtip.z),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linkage::synthesize_linkage;
    use approx::assert_abs_diff_eq;
    use std::sync::OnceLock;

    fn test_cfg() -> CrmConfig {
        CrmConfig { r: 47.0, h: 120.0, gear_rate: 3.0, mis_travel: [0.0, 16.0] }
    }

    fn design() -> &'static (LinkageGiven, LinkageDerived) {
        static D: OnceLock<(LinkageGiven, LinkageDerived)> = OnceLock::new();
        D.get_or_init(|| {
            let given = LinkageGiven {
                l_h: 110.0,
                l_r: 180.0,
                l_m: 370.0,
                b: 20.0,
                f: 30.0,
                extended: crate::linkage::PoseConstraint {
                    theta_s: Some(51.0),
                    theta_e: 110.0,
                    theta_w: 147.0,
                    x_a: 45.0,
                },
                tucked: crate::linkage::PoseConstraint {
                    theta_s: Some(20.0),
                    theta_e: 41.0,
                    theta_w: 35.0,
                    x_a: 65.0,
                },
            };
            let derived = synthesize_linkage(&given).unwrap();
            (given, derived)
        })
    }

    #[test]
    fn zero_crank_radius_never_flaps() {
        let cfg = CrmConfig { r: 0.0, ..test_cfg() };
        for k in 0..64 {
            let g = 2.0 * PI * (k as f64) / 64.0;
            assert_eq!(flap_angle(&cfg, g), 0.0, "flap must vanish at gear angle {g}");
        }
    }

    #[test]
    fn symmetric_crank_sweeps_ninety_degrees() {
        let cfg = CrmConfig { r: 20.0, h: 20.0000001, ..test_cfg() };
        // R = H up to the validity margin: quarter-turn flap at the peak
        assert_abs_diff_eq!(flap_angle(&cfg, PI / 2.0), PI / 4.0, epsilon = 1e-7);
        assert_abs_diff_eq!(flap_amplitude(&cfg), PI / 2.0, epsilon = 1e-7);
    }

    #[test]
    fn amplitude_matches_half_ratio_example() {
        let cfg = CrmConfig { r: 10.0, h: 20.0, ..test_cfg() };
        assert_abs_diff_eq!(
            flap_amplitude(&cfg).to_degrees(),
            53.13010235415598,
            epsilon = 1e-9
        );
    }

    #[test]
    fn amplitude_law_holds_over_a_sampled_revolution() {
        let cfg = test_cfg();
        let n = 1024;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..n {
            let f = flap_angle(&cfg, 2.0 * PI * (k as f64) / (n as f64));
            lo = lo.min(f);
            hi = hi.max(f);
        }
        assert_abs_diff_eq!(hi - lo, flap_amplitude(&cfg), epsilon = 1e-9);
    }

    #[test]
    fn slider_hits_range_endpoints_at_cos_extrema() {
        let cfg = test_cfg();
        assert_eq!(mis_position(&cfg, 0.0), 0.0, "gear angle 0 is full extension");
        assert_abs_diff_eq!(mis_position(&cfg, PI), 16.0, epsilon = 1e-12);
    }

    #[test]
    fn slider_rate_peaks_where_flap_peaks() {
        // argmax |flap| and argmax |d(mis)/d(gear)| both sit at pi/2
        let cfg = test_cfg();
        let n = 100_000;
        let mut best_flap = (0.0, 0.0f64);
        let mut best_rate = (0.0, 0.0f64);
        for k in 0..n {
            let g = PI * (k as f64) / (n as f64);
            let f = flap_angle(&cfg, g).abs();
            let eps = 1e-7;
            let rate = ((mis_position(&cfg, g + eps) - mis_position(&cfg, g - eps))
                / (2.0 * eps))
                .abs();
            if f > best_flap.1 {
                best_flap = (g, f);
            }
            if rate > best_rate.1 {
                best_rate = (g, rate);
            }
        }
        assert_abs_diff_eq!(best_flap.0, best_rate.0, epsilon = 1e-4);
        assert_abs_diff_eq!(best_flap.0, PI / 2.0, epsilon = 1e-4);
    }

    #[test]
    fn gate_follows_posterior_input() {
        assert_eq!(decoupler_gate(45.0, 55.0), 55.0, "servo lock wins below it");
        assert_eq!(decoupler_gate(65.0, 55.0), 65.0, "motor wins posterior of lock");
        let cfg = test_cfg();
        for k in 0..=32 {
            let x = 16.0 * (k as f64) / 32.0;
            assert_eq!(
                decoupler_gate(x, cfg.mis_travel[0]),
                x,
                "gate must be transparent with the servo at x_min"
            );
        }
    }

    proptest::proptest! {
        #[test]
        fn gate_algebra_is_a_semilattice(
            a in 0.0f64..16.0,
            b in 0.0f64..16.0,
            c in 0.0f64..16.0,
            d in 0.0f64..1.0,
        ) {
            proptest::prop_assert_eq!(decoupler_gate(a, b), decoupler_gate(b, a));
            proptest::prop_assert_eq!(
                decoupler_gate(a, decoupler_gate(b, c)),
                decoupler_gate(decoupler_gate(a, b), c)
            );
            proptest::prop_assert_eq!(decoupler_gate(a, a), a);
            // monotone in each argument, output bracketed by the inputs
            proptest::prop_assert!(decoupler_gate(a + d, b) >= decoupler_gate(a, b));
            proptest::prop_assert!(decoupler_gate(a, b) <= a.max(b));
            proptest::prop_assert!(decoupler_gate(a, b) >= a.min(b));
        }
    }

    #[test]
    fn decoupler_state_carries_gate_invariant() {
        let s = DecouplerState::new(7.0, 11.0);
        assert_eq!(s.x_os, 11.0);
        assert_eq!(s.x_os, decoupler_gate(s.x_mis, s.x_sis));
    }

    #[test]
    fn slider_map_calibrates_travel_endpoints_to_poses() {
        let cfg = test_cfg();
        let (given, _) = design();
        assert_eq!(slider_to_linkage(&cfg, given, 0.0), 45.0);
        assert_eq!(slider_to_linkage(&cfg, given, extended_lock(&cfg)), 45.0);
        assert_eq!(slider_to_linkage(&cfg, given, 16.0), 65.0);
        // affine above the lock, flat below it
        assert_abs_diff_eq!(slider_to_linkage(&cfg, given, 12.0), 55.0, epsilon = 1e-12);
        assert_eq!(slider_to_linkage(&cfg, given, 3.0), 45.0);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=64 {
            let os = 16.0 * (k as f64) / 64.0;
            let x = slider_to_linkage(&cfg, given, os);
            assert!(x >= prev, "map must be monotone");
            prev = x;
        }
    }

    #[test]
    fn downstroke_stays_at_full_extension_with_servo_released() {
        let cfg = test_cfg();
        let (given, derived) = design();
        let traj = wingbeat_trajectory(
            &cfg,
            given,
            derived,
            0.0,
            |_, _| cfg.mis_travel[0],
            1.0 / cfg.gear_rate,
            64,
        )
        .unwrap();
        for s in &traj {
            // downstroke: flap angle increasing, i.e. cos(gear angle) > 0
            if s.gear_angle.cos() > 0.0 {
                assert_eq!(
                    slider_to_linkage(&cfg, given, s.x_os),
                    given.extended.x_a,
                    "wing must hold the extension stop during the downstroke, t={}",
                    s.t
                );
            }
        }
    }

    #[test]
    fn wingspan_larger_at_mid_downstroke_than_mid_upstroke() {
        let cfg = test_cfg();
        let (given, derived) = design();
        let traj = wingbeat_trajectory(
            &cfg,
            given,
            derived,
            0.0,
            |_, _| cfg.mis_travel[0],
            1.0 / cfg.gear_rate,
            64,
        )
        .unwrap();
        let left: Vec<_> = traj.iter().filter(|s| s.side == Side::Left).collect();
        let down = &left[0]; // gear angle 0: mid-downstroke
        let up = &left[32]; // gear angle pi: mid-upstroke
        assert!(
            down.pose.wingtip.y > up.pose.wingtip.y + 50.0,
            "extended downstroke span {} must clearly exceed tucked upstroke span {}",
            down.pose.wingtip.y,
            up.pose.wingtip.y
        );
    }

    #[test]
    fn zero_crank_degenerates_to_pure_morphing() {
        let cfg = CrmConfig { r: 0.0, ..test_cfg() };
        let (given, derived) = design();
        let traj =
            wingbeat_trajectory(&cfg, given, derived, 0.0, |_, _| 0.0, 1.0 / 3.0, 32).unwrap();
        for s in &traj {
            assert_eq!(s.flap_angle, 0.0);
            assert_eq!(s.pose.wingtip.z, 0.0, "tip must stay in plane with zero crank");
        }
    }

    #[test]
    fn one_downstroke_servo_offset_tucks_only_that_wing_and_stroke() {
        let cfg = test_cfg();
        let (given, derived) = design();
        let period = 1.0 / cfg.gear_rate;
        // raise the left lock past the midpoint for downstroke k=1 only;
        // the downstroke spans gear angles (-pi/2, pi/2) around each
        // trigger, i.e. t in [3T/4, 5T/4] for k=1
        let lo = 0.75 * period;
        let hi = 1.25 * period;
        let offset = extended_lock(&cfg) + 4.0;
        let sis = move |side: Side, t: f64| {
            if side == Side::Left && t >= lo && t <= hi {
                offset
            } else {
                cfg.mis_travel[0]
            }
        };
        let traj = wingbeat_trajectory(&cfg, given, derived, 0.0, sis, 2.0 * period, 64).unwrap();
        let mut saw_offset_window = false;
        for pair in traj.chunks(2) {
            let (l, r) = (&pair[0], &pair[1]);
            assert_eq!(l.side, Side::Left);
            assert_eq!(r.side, Side::Right);
            let in_window = l.t >= lo && l.t <= hi;
            assert_eq!(
                l.x_os != r.x_os,
                in_window,
                "gate asymmetry must coincide with the commanded window at t={}",
                l.t
            );
            if in_window {
                // held partially tucked while the right wing extends
                assert!(
                    l.pose.wingtip.y < -r.pose.wingtip.y - 10.0,
                    "left tip {} must sit inboard of right {} at t={}",
                    l.pose.wingtip.y,
                    -r.pose.wingtip.y,
                    l.t
                );
                saw_offset_window = true;
            } else {
                assert_eq!(
                    l.pose.wingtip.y, -r.pose.wingtip.y,
                    "wings must match bit-exactly outside the window, t={}",
                    l.t
                );
            }
        }
        assert!(saw_offset_window, "trajectory must cover the offset downstroke");
    }

    #[test]
    fn trajectories_are_deterministic() {
        let cfg = test_cfg();
        let (given, derived) = design();
        let make = || {
            wingbeat_trajectory(&cfg, given, derived, 0.3, |_, _| 0.0, 1.0 / 3.0, 32).unwrap()
        };
        let a = make();
        let b = make();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x, y, "samples must be bit-identical across runs");
        }
    }

    #[test]
    fn csv_has_contracted_header_and_row_count() {
        let cfg = test_cfg();
        let (given, derived) = design();
        let traj =
            wingbeat_trajectory(&cfg, given, derived, 0.0, |_, _| 0.0, 1.0 / 3.0, 32).unwrap();
        let csv = trajectory_to_csv(&traj);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,side,gear_angle_rad,flap_angle_rad,x_mis_mm,x_sis_mm,x_os_mm,wrist_x,wrist_y,wrist_z,tip_x,tip_y,tip_z"
        );
        assert_eq!(lines.count(), traj.len());
        assert!(csv.contains(",left,") && csv.contains(",right,"));
    }
}
