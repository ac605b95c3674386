//! Special-relativity kernel: events, inertial frames, boosts, interval
//! classification and frame-dependent time ordering.
//!
//! All quantities are SI (seconds, meters) and the speed of light is the exact
//! [`SPEED_OF_LIGHT`].

use std::ops::Sub;

use serde::{Deserialize, Serialize};

use crate::error::check_finite;
use crate::{Error, Result, SPEED_OF_LIGHT};

/// Isotropy guard band for interval classification, m².
pub const INTERVAL_TOLERANCE: f64 = 1e-12;

/// Simultaneity guard band for frame ordering, s.
pub const SIMULTANEITY_TOLERANCE: f64 = 1e-18;

/// Fastest admissible frame speed, as a fraction of c.
pub const MAX_BETA: f64 = 0.999_999;

/// Fastest admissible frame speed, m/s.
pub const MAX_FRAME_SPEED: f64 = MAX_BETA * SPEED_OF_LIGHT;

const C2: f64 = SPEED_OF_LIGHT * SPEED_OF_LIGHT;

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// A point in Minkowski space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacetimeEvent {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl SpacetimeEvent {
    pub fn new(t: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        check_finite("event.t", t)?;
        check_finite("event.x", x)?;
        check_finite("event.y", y)?;
        check_finite("event.z", z)?;
        Ok(SpacetimeEvent { t, x, y, z })
    }

    /// Event at time `t` on the x axis.
    pub fn on_axis(t: f64, x: f64) -> Result<Self> {
        Self::new(t, x, 0.0, 0.0)
    }

    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl Sub for SpacetimeEvent {
    type Output = SpacetimeEvent;

    fn sub(self, rhs: Self) -> Self::Output {
        SpacetimeEvent {
            t: self.t - rhs.t,
            x: self.x - rhs.x,
            y: self.y - rhs.y,
            z: self.z - rhs.z,
        }
    }
}

/// An inertial frame, given by its velocity relative to the lab.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InertialFrame {
    velocity: [f64; 3],
}

impl InertialFrame {
    /// The lab frame.
    pub const REST: InertialFrame = InertialFrame {
        velocity: [0.0; 3],
    };

    /// Fails unless every component is finite and `|v| ≤ MAX_FRAME_SPEED`.
    pub fn new(velocity: [f64; 3]) -> Result<Self> {
        for v in velocity {
            check_finite("frame velocity", v)?;
        }
        let speed = dot(velocity, velocity).sqrt();
        if speed > MAX_FRAME_SPEED {
            return Err(Error::Superluminal {
                speed,
                limit: MAX_FRAME_SPEED,
            });
        }
        Ok(InertialFrame { velocity })
    }

    pub fn along_x(vx: f64) -> Result<Self> {
        Self::new([vx, 0.0, 0.0])
    }

    pub fn velocity(&self) -> [f64; 3] {
        self.velocity
    }

    pub fn speed(&self) -> f64 {
        dot(self.velocity, self.velocity).sqrt()
    }

    pub fn gamma(&self) -> f64 {
        let beta2 = dot(self.velocity, self.velocity) / C2;
        1.0 / (1.0 - beta2).sqrt()
    }
}

/// Causal character of the separation between two events.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntervalClass {
    SpaceLike,
    TimeLike,
    LightLike,
}

/// Frame-dependent order of a first event relative to a second one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum TimeOrder {
    Before,
    After,
    Simultaneous,
}

/// Signed interval `c²Δt² − |Δx|²`, m².
pub fn interval_squared(e1: &SpacetimeEvent, e2: &SpacetimeEvent) -> f64 {
    let d = *e2 - *e1;
    C2 * d.t * d.t - (d.x * d.x + d.y * d.y + d.z * d.z)
}

pub fn classify_interval(e1: &SpacetimeEvent, e2: &SpacetimeEvent) -> IntervalClass {
    classify_squared(interval_squared(e1, e2))
}

fn classify_squared(s2: f64) -> IntervalClass {
    if s2 < -INTERVAL_TOLERANCE {
        IntervalClass::SpaceLike
    } else if s2 > INTERVAL_TOLERANCE {
        IntervalClass::TimeLike
    } else {
        IntervalClass::LightLike
    }
}

/// Coordinates of `e` as seen from a frame moving with `f.velocity()`.
pub fn boost(e: &SpacetimeEvent, f: &InertialFrame) -> SpacetimeEvent {
    let v = f.velocity;
    let v2 = dot(v, v);
    if v2 == 0.0 {
        return *e;
    }
    let gamma = f.gamma();
    let r = e.position();
    let vr = dot(v, r);
    let t = gamma * (e.t - vr / C2);
    let k = (gamma - 1.0) * vr / v2 - gamma * e.t;
    SpacetimeEvent {
        t,
        x: r[0] + k * v[0],
        y: r[1] + k * v[1],
        z: r[2] + k * v[2],
    }
}

/// Order of `e1` relative to `e2` in frame `f`.
///
/// Only the boosted time difference is needed, so the difference vector is
/// boosted rather than each event; this keeps the result exact for events far
/// from the origin.
pub fn time_order_in_frame(e1: &SpacetimeEvent, e2: &SpacetimeEvent, f: &InertialFrame) -> TimeOrder {
    let d = *e1 - *e2;
    let dt = f.gamma() * (d.t - dot(f.velocity, d.position()) / C2);
    if dt < -SIMULTANEITY_TOLERANCE {
        TimeOrder::Before
    } else if dt > SIMULTANEITY_TOLERANCE {
        TimeOrder::After
    } else {
        TimeOrder::Simultaneous
    }
}

/// Detector frames realizing before-before timing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BeforeBefore {
    /// Frame of detector A, receding along −(B − A).
    pub frame_a: InertialFrame,
    /// Frame of detector B, receding along +(B − A).
    pub frame_b: InertialFrame,
    /// Recession speed of each detector in the lab, m/s.
    pub speed: f64,
    /// Smallest recession speed that reaches before-before timing, m/s.
    pub required_speed: f64,
}

/// `true` when `ea` precedes `eb` in `frame_a` and `eb` precedes `ea` in `frame_b`.
pub fn is_before_before(
    ea: &SpacetimeEvent,
    eb: &SpacetimeEvent,
    frame_a: &InertialFrame,
    frame_b: &InertialFrame,
) -> bool {
    time_order_in_frame(ea, eb, frame_a) == TimeOrder::Before
        && time_order_in_frame(eb, ea, frame_b) == TimeOrder::Before
}

/// Builds frames for detectors A and B moving apart along the A→B axis such
/// that each detector's decision comes first in its own frame.
///
/// Both orderings hold iff `|t_A − t_B| < u·d/c²`. When the requested `speed`
/// falls short of that bound the speed is raised, deterministically, to the
/// midpoint between the bound and [`MAX_FRAME_SPEED`]; the speed actually used
/// is returned alongside the frames.
pub fn find_before_before(ea: &SpacetimeEvent, eb: &SpacetimeEvent, speed: f64) -> Result<BeforeBefore> {
    if !(speed > 0.0 && speed < SPEED_OF_LIGHT) {
        return Err(Error::invalid(
            "recession speed",
            format!("{speed} m/s is outside (0, c)"),
        ));
    }
    let class = classify_interval(ea, eb);
    if class != IntervalClass::SpaceLike {
        return Err(Error::NotSpaceLike(class));
    }
    let sep = *eb - *ea;
    let axis = sep.position();
    let d = dot(axis, axis).sqrt();
    let n = [axis[0] / d, axis[1] / d, axis[2] / d];

    let required_speed = (sep.t.abs() + SIMULTANEITY_TOLERANCE) * C2 / d;
    if required_speed >= MAX_FRAME_SPEED {
        return Err(Error::BeforeBeforeUnreachable {
            required: required_speed,
            limit: MAX_FRAME_SPEED,
        });
    }
    let u = if speed > required_speed {
        speed
    } else {
        required_speed + 0.5 * (MAX_FRAME_SPEED - required_speed)
    };

    let frame_a = InertialFrame::new([-u * n[0], -u * n[1], -u * n[2]])?;
    let frame_b = InertialFrame::new([u * n[0], u * n[1], u * n[2]])?;
    if !is_before_before(ea, eb, &frame_a, &frame_b) {
        return Err(Error::BeforeBeforeUnreachable {
            required: required_speed,
            limit: MAX_FRAME_SPEED,
        });
    }
    Ok(BeforeBefore {
        frame_a,
        frame_b,
        speed: u,
        required_speed,
    })
}
