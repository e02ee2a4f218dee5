//! Event-sequential simulation of the onboard wingbeat controller.
//!
//! The vehicle's gear carries a magnet that closes a Hall switch once per
//! revolution, when the wing passes the level position moving downward.
//! The controller measures the spacing of adjacent triggers to estimate
//! the wingbeat period T, and schedules all actions on trigger timestamps:
//!
//! * a roll command arms a one-shot morphing pulse; on the next trigger at
//!   t0 (with T known) the servo is commanded over [t0 + T/2, t0 + 1.25 T]
//!   so that exactly one downstroke is spanned;
//! * throttle falling below the glide threshold arms a glide lock; the
//!   motor is stopped exactly at the next trigger, leaving the wings at
//!   the level position.
//!
//! The simulation is a pure fold over a time-ordered event sequence, so
//! replays are bit-identical.

use crate::crm::Side;
use crate::util::{g9, split_csv};
use serde::{Deserialize, Serialize};

/// Input event kinds. Events must be fed in nondecreasing time order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    HallTrigger,
    RollCommand(Side),
    ThrottleSet(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerEvent {
    pub t: f64,
    pub kind: EventKind,
}

/// Output kinds. Warnings are ordinary outputs, not errors: the simulated
/// firmware keeps running.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutputKind {
    /// One-shot asymmetric-downstroke command for one wing.
    ServoPulse { side: Side, start: f64, duration: f64 },
    /// Motor halted at a trigger timestamp (level wing position).
    MotorStop,
    /// Roll command queued before any period estimate existed.
    RollWithoutPeriod { side: Side },
    /// Roll command discarded because the pending slot was occupied or a
    /// pulse was still active with queueing disabled.
    RollDropped { side: Side },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerOutput {
    pub t: f64,
    pub kind: OutputKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// Throttle fraction strictly below which the glide lock arms.
    pub glide_threshold: f64,
    /// When false, roll commands arriving while a pulse is still active
    /// are dropped instead of queued.
    pub queue_roll_commands: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig { glide_threshold: 0.05, queue_roll_commands: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerState {
    pub last_trigger: Option<f64>,
    pub period_estimate: Option<f64>,
    pub pending_roll: Option<Side>,
    pub throttle: f64,
    pub glide_armed: bool,
    /// End time of the most recently scheduled pulse.
    active_pulse_until: Option<f64>,
    last_event_t: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum ControllerError {
    #[error("event at t = {t} arrived after an event at t = {previous}")]
    EventOutOfOrder { t: f64, previous: f64 },
    #[error("malformed event row {line}: {reason}")]
    BadEvent { line: usize, reason: String },
}

/// Advances the state machine by one event, returning the new state and
/// any outputs it produced. Outputs produced on the same trigger are
/// ordered pulse-before-stop; both carry the trigger timestamp.
pub fn step(
    cfg: &ControllerConfig,
    mut state: ControllerState,
    event: ControllerEvent,
) -> Result<(ControllerState, Vec<ControllerOutput>), ControllerError> {
    if let Some(prev) = state.last_event_t {
        if event.t < prev {
            return Err(ControllerError::EventOutOfOrder { t: event.t, previous: prev });
        }
    }
    state.last_event_t = Some(event.t);
    let mut out = Vec::new();
    match event.kind {
        EventKind::HallTrigger => {
            let t0 = event.t;
            // the period updates first, so a pulse scheduled on this same
            // trigger already uses the freshest estimate
            if let Some(prev) = state.last_trigger {
                state.period_estimate = Some(t0 - prev);
            }
            if let (Some(side), Some(period)) = (state.pending_roll, state.period_estimate) {
                let start = t0 + 0.5 * period;
                let duration = 0.75 * period;
                out.push(ControllerOutput {
                    t: t0,
                    kind: OutputKind::ServoPulse { side, start, duration },
                });
                state.pending_roll = None;
                state.active_pulse_until = Some(start + duration);
            }
            if state.glide_armed {
                out.push(ControllerOutput { t: t0, kind: OutputKind::MotorStop });
                state.glide_armed = false;
            }
            state.last_trigger = Some(t0);
        }
        EventKind::RollCommand(side) => {
            let busy = !cfg.queue_roll_commands
                && state.active_pulse_until.is_some_and(|end| event.t < end);
            if state.pending_roll.is_some() || busy {
                out.push(ControllerOutput { t: event.t, kind: OutputKind::RollDropped { side } });
            } else {
                if state.period_estimate.is_none() {
                    out.push(ControllerOutput {
                        t: event.t,
                        kind: OutputKind::RollWithoutPeriod { side },
                    });
                }
                state.pending_roll = Some(side);
            }
        }
        EventKind::ThrottleSet(value) => {
            state.throttle = value;
            state.glide_armed = value < cfg.glide_threshold;
        }
    }
    Ok((state, out))
}

/// Folds a whole event sequence from the default state.
pub fn simulate(
    cfg: &ControllerConfig,
    events: &[ControllerEvent],
) -> Result<Vec<ControllerOutput>, ControllerError> {
    let mut state = ControllerState::default();
    let mut out = Vec::new();
    for &ev in events {
        let (next, mut produced) = step(cfg, state, ev)?;
        state = next;
        out.append(&mut produced);
    }
    Ok(out)
}

/// How a servo pulse lands on the downstroke timeline. Downstroke k spans
/// `[kT - T/4, kT + T/4]` after the scheduling trigger (triggers fire at
/// the level position mid-downstroke).
#[derive(Debug, Clone, PartialEq)]
pub struct DownstrokeWindow {
    /// Pulse interval relative to the scheduling trigger.
    pub covered: (f64, f64),
    /// Downstroke indices the pulse overlaps with positive measure.
    pub downstrokes: Vec<i64>,
    /// Index of the single covered downstroke, when there is exactly one.
    pub cycle_index: Option<i64>,
    /// Whether the pulse honors the one-downstroke contract.
    pub one_shot_ok: bool,
}

/// Classifies a pulse against the wingbeat phase timeline, taking the
/// scheduling trigger as phase origin (`start - period/2` for pulses
/// produced by [`step`]). Overlap is counted with positive measure, so a
/// zero-duration pulse covers nothing and interval endpoints that only
/// touch do not count.
pub fn asymmetric_downstroke_window(
    start: f64,
    duration: f64,
    trigger: f64,
    period: f64,
) -> DownstrokeWindow {
    let lo = start - trigger;
    let hi = lo + duration;
    let mut downstrokes = Vec::new();
    // downstroke k spans [kT - T/4, kT + T/4]; only indices near the
    // pulse interval can overlap
    let k_min = ((lo - 0.25 * period) / period).floor() as i64;
    let k_max = ((hi + 0.25 * period) / period).ceil() as i64;
    for k in k_min..=k_max {
        let d_lo = k as f64 * period - 0.25 * period;
        let d_hi = k as f64 * period + 0.25 * period;
        if lo.max(d_lo) < hi.min(d_hi) {
            downstrokes.push(k);
        }
    }
    let cycle_index = if downstrokes.len() == 1 { Some(downstrokes[0]) } else { None };
    let one_shot_ok = downstrokes.len() == 1;
    DownstrokeWindow { covered: (lo, hi), downstrokes, cycle_index, one_shot_ok }
}

/// Parses the event CSV (`t,kind,arg`; kinds `hall`, `roll`, `throttle`).
pub fn events_from_csv(text: &str) -> Result<Vec<ControllerEvent>, ControllerError> {
    let mut events = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 && line.trim() == "t,kind,arg" {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| ControllerError::BadEvent {
            line: idx + 1,
            reason: reason.to_string(),
        };
        let fields = split_csv(line);
        if fields.len() < 2 {
            return Err(bad("expected t,kind,arg"));
        }
        let t: f64 = fields[0].parse().map_err(|_| bad("unparsable time"))?;
        let arg = fields.get(2).copied().unwrap_or("");
        let kind = match fields[1] {
            "hall" => EventKind::HallTrigger,
            "roll" => EventKind::RollCommand(
                Side::parse(arg).ok_or_else(|| bad("roll side must be left or right"))?,
            ),
            "throttle" => EventKind::ThrottleSet(
                arg.parse().map_err(|_| bad("unparsable throttle value"))?,
            ),
            other => return Err(bad(&format!("unknown kind {other}"))),
        };
        events.push(ControllerEvent { t, kind });
    }
    Ok(events)
}

/// Serializes outputs to CSV (`t,kind,side,start,duration`); fields that
/// do not apply to a kind are left empty.
pub fn outputs_to_csv(outputs: &[ControllerOutput]) -> String {
    let mut out = String::from("t,kind,side,start,duration\n");
    for o in outputs {
        let row = match o.kind {
            OutputKind::ServoPulse { side, start, duration } => format!(
                "{},servo_pulse,{},{},{}\n",
                g9(o.t),
                side.as_str(),
                g9(start),
                g9(duration)
            ),
            OutputKind::MotorStop => format!("{},motor_stop,,,\n", g9(o.t)),
            OutputKind::RollWithoutPeriod { side } => {
                format!("{},warn_roll_without_period,{},,\n", g9(o.t), side.as_str())
            }
            OutputKind::RollDropped { side } => {
                format!("{},warn_roll_dropped,{},,\n", g9(o.t), side.as_str())
            }
        };
        out.push_str(&row);
    }
    out
}
