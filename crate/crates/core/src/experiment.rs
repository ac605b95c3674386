//! Heralded single-photon Monte Carlo: imperfect detectors, coincidence
//! tallies, count-ratio estimators, and the rotation and sidereal protocols.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::collapse::{self, Clicks, CollapseModel, PhotonSampler};
use crate::error::check_probability;
use crate::ether::{self, DriftConfig, Interferometer};
use crate::rng::{SeedSequence, StreamRng};
use crate::{Constants, Error, Result};

/// Heralds per random stream. Streams are the unit of parallel work, so a run
/// is reproducible for any thread count.
pub const HERALDS_PER_STREAM: u64 = 1 << 16;

pub const DEFAULT_EFFICIENCY: f64 = 0.8;
pub const DEFAULT_DARK_COUNT_PROB: f64 = 1e-4;

// seed-tree tags
const TAG_JOINT: u64 = 0;
const TAG_ACQ_A: u64 = 1;
const TAG_ACQ_B: u64 = 2;
const TAG_ROTATE_BEFORE: u64 = 10;
const TAG_ROTATE_AFTER: u64 = 11;
const TAG_SIDEREAL: u64 = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub n_heralds: u64,
    pub seed: u64,
    /// Detection efficiency η; each click survives with this probability.
    pub efficiency: f64,
    /// Probability that a silent detector fires spuriously within a gate.
    pub dark_count_prob: f64,
    pub interferometer: Interferometer,
    pub drift: DriftConfig,
    pub model: CollapseModel,
    /// Measure A and B in two separate acquisitions of `n_heralds` each
    /// instead of reading both detectors in every gate.
    pub separate_runs: bool,
    /// Time of the run, seconds after the sidereal epoch.
    pub time: f64,
    pub constants: Constants,
}

impl RunConfig {
    pub fn new(model: CollapseModel, interferometer: Interferometer, drift: DriftConfig) -> Self {
        RunConfig {
            n_heralds: 1_000_000,
            seed: 0,
            efficiency: DEFAULT_EFFICIENCY,
            dark_count_prob: DEFAULT_DARK_COUNT_PROB,
            interferometer,
            drift,
            model,
            separate_runs: false,
            time: 0.0,
            constants: Constants::exact(),
        }
    }

    /// Perfect detectors: η = 1, no dark counts.
    pub fn ideal(mut self) -> Self {
        self.efficiency = 1.0;
        self.dark_count_prob = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_heralds == 0 {
            return Err(Error::invalid("n_heralds", "at least one herald is required"));
        }
        check_probability("efficiency", self.efficiency)?;
        check_probability("dark_count_prob", self.dark_count_prob)?;
        check_probability("visibility", self.model.visibility())?;
        if !self.time.is_finite() {
            return Err(Error::invalid("time", "must be finite"));
        }
        if self.drift.speed >= self.constants.c {
            return Err(Error::invalid("drift speed", "must be below c"));
        }
        Ok(())
    }

    pub fn phase(&self) -> Result<f64> {
        collapse::effective_phase(
            &self.model,
            &self.interferometer,
            &self.drift,
            self.time,
            self.constants,
        )
    }

    /// Re-tunes the device phase so the model's effective phase equals
    /// `target` at the current orientation and time. This is how the
    /// pre-rotation operating point is set: Φ₀ absorbs the drift term.
    pub fn calibrated(&self, target: f64) -> Result<Self> {
        let mut cfg = *self;
        cfg.interferometer = cfg.interferometer.with_device_phase(0.0);
        let offset = cfg.phase()?;
        cfg.interferometer = cfg.interferometer.with_device_phase(target - offset);
        Ok(cfg)
    }

    /// Expected `(P_A, P_B)` including efficiency and dark counts.
    pub fn predicted_probabilities(&self) -> Result<(f64, f64)> {
        let s = PhotonSampler::new(&self.model, self.phase()?);
        let detect = |p: f64| {
            let seen = p * self.efficiency;
            seen + (1.0 - seen) * self.dark_count_prob
        };
        Ok((detect(s.p_a()), detect(s.p_b())))
    }
}

/// One heralded gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DetectionRecord {
    pub herald_index: u64,
    pub fired_a: bool,
    pub fired_b: bool,
}

/// Aggregated counts.
///
/// `heralds_a` is R_H(A), the heralds during the A acquisition, and
/// `coincidences_a` is R_HA, the herald–A coincidences; likewise for B.
/// Doubles and nulls are only observable when both detectors are read in the
/// same gate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CountTally {
    pub heralds_a: u64,
    pub coincidences_a: u64,
    pub heralds_b: u64,
    pub coincidences_b: u64,
    pub doubles: u64,
    pub nulls: u64,
}

impl CountTally {
    /// Joint-mode tally of a stream of records.
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a DetectionRecord>) -> Self {
        records.into_iter().fold(CountTally::default(), |mut t, r| {
            t.record(r.fired_a, r.fired_b);
            t
        })
    }

    fn record(&mut self, a: bool, b: bool) {
        self.heralds_a += 1;
        self.heralds_b += 1;
        self.coincidences_a += u64::from(a);
        self.coincidences_b += u64::from(b);
        self.doubles += u64::from(a && b);
        self.nulls += u64::from(!a && !b);
    }
}

impl Add for CountTally {
    type Output = CountTally;

    fn add(self, o: Self) -> Self {
        CountTally {
            heralds_a: self.heralds_a + o.heralds_a,
            coincidences_a: self.coincidences_a + o.coincidences_a,
            heralds_b: self.heralds_b + o.heralds_b,
            coincidences_b: self.coincidences_b + o.coincidences_b,
            doubles: self.doubles + o.doubles,
            nulls: self.nulls + o.nulls,
        }
    }
}

impl AddAssign for CountTally {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

/// Click thinning and dark counts.
#[derive(Clone, Copy, Debug)]
struct Detectors {
    efficiency: f64,
    dark: f64,
}

impl Detectors {
    #[inline]
    fn apply<R: Rng + ?Sized>(&self, fired: bool, rng: &mut R) -> bool {
        let survived = fired && (self.efficiency >= 1.0 || rng.random::<f64>() < self.efficiency);
        survived || (self.dark > 0.0 && rng.random::<f64>() < self.dark)
    }

    #[inline]
    fn observe<R: Rng + ?Sized>(&self, c: Clicks, rng: &mut R) -> Clicks {
        let a = self.apply(c.a, rng);
        let b = self.apply(c.b, rng);
        Clicks { a, b }
    }
}

fn gate<R: Rng + ?Sized>(sampler: &PhotonSampler, det: &Detectors, rng: &mut R) -> Clicks {
    det.observe(sampler.sample(rng), rng)
}

fn stream_len(n: u64, stream: u64) -> u64 {
    (n - stream * HERALDS_PER_STREAM).min(HERALDS_PER_STREAM)
}

/// Joint-mode tally of `n` gates drawn from the streams under `seeds`.
fn acquire(sampler: &PhotonSampler, det: &Detectors, seeds: SeedSequence, n: u64) -> CountTally {
    let streams = n.div_ceil(HERALDS_PER_STREAM);
    (0..streams)
        .into_par_iter()
        .map(|s| {
            let mut rng: StreamRng = seeds.stream(s);
            let mut t = CountTally::default();
            for _ in 0..stream_len(n, s) {
                let c = gate(sampler, det, &mut rng);
                t.record(c.a, c.b);
            }
            t
        })
        .reduce(CountTally::default, Add::add)
}

fn parts(cfg: &RunConfig) -> Result<(PhotonSampler, Detectors)> {
    cfg.validate()?;
    let sampler = PhotonSampler::new(&cfg.model, cfg.phase()?);
    let det = Detectors {
        efficiency: cfg.efficiency,
        dark: cfg.dark_count_prob,
    };
    Ok((sampler, det))
}

/// Runs `cfg.n_heralds` heralded gates and tallies the counts.
///
/// Heralds are split into fixed-size random streams that may run on any
/// number of rayon workers; the tally depends only on `cfg`.
pub fn simulate_run(cfg: &RunConfig) -> Result<CountTally> {
    let (sampler, det) = parts(cfg)?;
    let root = SeedSequence::new(cfg.seed);
    if !cfg.separate_runs {
        return Ok(acquire(&sampler, &det, root.child(TAG_JOINT), cfg.n_heralds));
    }
    let a = acquire(&sampler, &det, root.child(TAG_ACQ_A), cfg.n_heralds);
    let b = acquire(&sampler, &det, root.child(TAG_ACQ_B), cfg.n_heralds);
    Ok(CountTally {
        heralds_a: a.heralds_a,
        coincidences_a: a.coincidences_a,
        heralds_b: b.heralds_b,
        coincidences_b: b.coincidences_b,
        doubles: 0,
        nulls: 0,
    })
}

/// Per-gate records of a joint-mode run, in herald order. Uses the same
/// streams as [`simulate_run`], so the records tally to the same counts.
pub fn simulate_records(cfg: &RunConfig) -> Result<Vec<DetectionRecord>> {
    let (sampler, det) = parts(cfg)?;
    let seeds = SeedSequence::new(cfg.seed).child(TAG_JOINT);
    let n = cfg.n_heralds;
    let mut out = Vec::with_capacity(n as usize);
    for s in 0..n.div_ceil(HERALDS_PER_STREAM) {
        let mut rng = seeds.stream(s);
        for i in 0..stream_len(n, s) {
            let c = gate(&sampler, &det, &mut rng);
            out.push(DetectionRecord {
                herald_index: s * HERALDS_PER_STREAM + i,
                fired_a: c.a,
                fired_b: c.b,
            });
        }
    }
    Ok(out)
}

/// Count-ratio estimates `P_A = R_HA / R_H(A)` and `P_B = R_HB / R_H(B)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Probabilities {
    pub p_a: f64,
    pub p_b: f64,
}

impl Probabilities {
    /// `P_B − P_A`.
    pub fn imbalance(&self) -> f64 {
        self.p_b - self.p_a
    }
}

pub fn tally_to_probabilities(t: &CountTally) -> Result<Probabilities> {
    if t.heralds_a == 0 {
        return Err(Error::EmptyDenominator("R_H(A)"));
    }
    if t.heralds_b == 0 {
        return Err(Error::EmptyDenominator("R_H(B)"));
    }
    Ok(Probabilities {
        p_a: t.coincidences_a as f64 / t.heralds_a as f64,
        p_b: t.coincidences_b as f64 / t.heralds_b as f64,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RotationResult {
    pub before: Probabilities,
    pub after: Probabilities,
    /// `(P_B − P_A)_after − (P_B − P_A)_before`.
    pub delta_p: f64,
    pub tally_before: CountTally,
    pub tally_after: CountTally,
}

/// Runs the experiment at the configured orientation and again after a 90°
/// turn, each with its own seed stream.
pub fn rotation_protocol(cfg: &RunConfig) -> Result<RotationResult> {
    let root = SeedSequence::new(cfg.seed);
    let before_cfg = RunConfig {
        seed: root.child(TAG_ROTATE_BEFORE).key(),
        ..*cfg
    };
    let after_cfg = RunConfig {
        seed: root.child(TAG_ROTATE_AFTER).key(),
        interferometer: cfg.interferometer.rotated(PI / 2.0),
        ..*cfg
    };
    let tally_before = simulate_run(&before_cfg)?;
    let tally_after = simulate_run(&after_cfg)?;
    let before = tally_to_probabilities(&tally_before)?;
    let after = tally_to_probabilities(&tally_after)?;
    Ok(RotationResult {
        before,
        after,
        delta_p: after.imbalance() - before.imbalance(),
        tally_before,
        tally_after,
    })
}

/// One step of a sidereal scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SiderealPoint {
    /// Seconds after the sidereal epoch.
    pub t: f64,
    pub theta_eff: f64,
    pub v_eff: f64,
    pub p_a: f64,
    pub p_b: f64,
    /// R_H(A) behind `p_a`; `None` for analytic (noise-free) points.
    pub heralds_a: Option<u64>,
}

fn scan_times(cfg: &RunConfig, duration: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid("step", format!("{step} s must be positive")));
    }
    if !(duration >= step && duration.is_finite()) {
        return Err(Error::invalid("duration", format!("{duration} s must be at least the step {step} s")));
    }
    let n = (duration / step * (1.0 + 1e-12)).floor() as u64 + 1;
    Ok((0..n).map(|k| cfg.time + k as f64 * step).collect())
}

/// Runs one simulation every `step` seconds over `duration`, following the
/// drift direction as the Earth turns. Yields `floor(duration/step) + 1`
/// points.
pub fn sidereal_scan(cfg: &RunConfig, duration: f64, step: f64) -> Result<Vec<SiderealPoint>> {
    cfg.validate()?;
    let seeds = SeedSequence::new(cfg.seed).child(TAG_SIDEREAL);
    scan_times(cfg, duration, step)?
        .into_iter()
        .enumerate()
        .map(|(k, t)| {
            let run = RunConfig {
                time: t,
                seed: seeds.child(k as u64).key(),
                ..*cfg
            };
            let o = ether::sidereal_orientation(&cfg.drift, cfg.interferometer.orientation, t);
            let tally = simulate_run(&run)?;
            let p = tally_to_probabilities(&tally)?;
            Ok(SiderealPoint {
                t,
                theta_eff: o.theta_eff,
                v_eff: o.v_eff,
                p_a: p.p_a,
                p_b: p.p_b,
                heralds_a: Some(tally.heralds_a),
            })
        })
        .collect()
}

/// Noise-free counterpart of [`sidereal_scan`]: the expected probabilities at
/// each step.
pub fn sidereal_prediction(cfg: &RunConfig, duration: f64, step: f64) -> Result<Vec<SiderealPoint>> {
    cfg.validate()?;
    scan_times(cfg, duration, step)?
        .into_iter()
        .map(|t| {
            let run = RunConfig { time: t, ..*cfg };
            let o = ether::sidereal_orientation(&cfg.drift, cfg.interferometer.orientation, t);
            let (p_a, p_b) = run.predicted_probabilities()?;
            Ok(SiderealPoint {
                t,
                theta_eff: o.theta_eff,
                v_eff: o.v_eff,
                p_a,
                p_b,
                heralds_a: None,
            })
        })
        .collect()
}
