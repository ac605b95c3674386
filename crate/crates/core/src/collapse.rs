//! Collapse models: detection probabilities, per-model effective phases,
//! single-photon samplers, and two-party joint models with a no-signaling
//! audit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_probability};
use crate::ether::{self, DriftConfig, Interferometer};
use crate::spacetime::{self, InertialFrame, SpacetimeEvent};
use crate::{Constants, Error, Result};

/// Which detector clicks: `A` is the `+1` outcome, `B` the `−1` outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeLabel {
    A,
    B,
}

impl OutcomeLabel {
    pub fn sign(self) -> f64 {
        match self {
            OutcomeLabel::A => 1.0,
            OutcomeLabel::B => -1.0,
        }
    }
}

/// `½(1 + a·V·cos Φ)`.
pub fn detection_probability(phase: f64, a: OutcomeLabel, visibility: f64) -> Result<f64> {
    check_probability("visibility", visibility)?;
    check_finite("phase", phase)?;
    Ok(prob(phase, a, visibility))
}

fn prob(phase: f64, a: OutcomeLabel, visibility: f64) -> f64 {
    (0.5 * (1.0 + a.sign() * visibility * phase.cos())).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Timeless collapse; no frame enters the prediction.
    Covariant,
    /// One detector decides first in an absolute frame; the light-speed
    /// anisotropy of that frame enters the interferometer phase.
    PreferredFrame,
    /// Each detector decides first in its own rest frame. Under before-before
    /// timing the detectors decorrelate; otherwise the model coincides with
    /// [`ModelKind::Covariant`].
    MsDetectors { before_before: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CollapseModel {
    pub kind: ModelKind,
    visibility: f64,
}

impl CollapseModel {
    pub fn new(kind: ModelKind, visibility: f64) -> Result<Self> {
        check_probability("visibility", visibility)?;
        Ok(CollapseModel { kind, visibility })
    }

    pub fn covariant(visibility: f64) -> Result<Self> {
        Self::new(ModelKind::Covariant, visibility)
    }

    pub fn preferred_frame(visibility: f64) -> Result<Self> {
        Self::new(ModelKind::PreferredFrame, visibility)
    }

    pub fn ms_detectors(visibility: f64, before_before: bool) -> Result<Self> {
        Self::new(ModelKind::MsDetectors { before_before }, visibility)
    }

    /// Multisimultaneity for detectors at events `ea`, `eb` moving with
    /// `frame_a`, `frame_b`; the timing is read off the two frames.
    pub fn ms_detectors_for(
        visibility: f64,
        ea: &SpacetimeEvent,
        eb: &SpacetimeEvent,
        frame_a: &InertialFrame,
        frame_b: &InertialFrame,
    ) -> Result<Self> {
        let before_before = spacetime::is_before_before(ea, eb, frame_a, frame_b);
        Self::ms_detectors(visibility, before_before)
    }

    pub fn visibility(&self) -> f64 {
        self.visibility
    }

    /// `true` when the two detectors fire independently.
    pub fn decorrelated(&self) -> bool {
        matches!(self.kind, ModelKind::MsDetectors { before_before: true })
    }
}

/// Interferometer phase predicted by `model` at time `t`.
///
/// For the preferred-frame model the drift seen in the lab plane at `t` adds
/// `ω·Δτ(L, v_eff, θ_eff)` to the device phase. The other models are blind to
/// orientation and return the device phase.
pub fn effective_phase(
    model: &CollapseModel,
    ifo: &Interferometer,
    drift: &DriftConfig,
    t: f64,
    k: Constants,
) -> Result<f64> {
    match model.kind {
        ModelKind::Covariant | ModelKind::MsDetectors { .. } => Ok(ifo.device_phase),
        ModelKind::PreferredFrame => {
            let o = ether::sidereal_orientation(drift, ifo.orientation, t);
            let dtau = ether::drift_time_difference(k, ifo.arm_length, o.v_eff, o.theta_eff)?;
            Ok(ifo.device_phase + ifo.angular_frequency(k) * dtau)
        }
    }
}

/// Which of the two output detectors fired for one photon.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Clicks {
    pub a: bool,
    pub b: bool,
}

impl Clicks {
    pub fn is_double(self) -> bool {
        self.a && self.b
    }

    pub fn is_null(self) -> bool {
        !self.a && !self.b
    }
}

/// Single-photon sampler for a model at a fixed phase.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhotonSampler {
    p_a: f64,
    p_b: f64,
    independent: bool,
}

impl PhotonSampler {
    pub fn new(model: &CollapseModel, phase: f64) -> Self {
        PhotonSampler {
            p_a: prob(phase, OutcomeLabel::A, model.visibility),
            p_b: prob(phase, OutcomeLabel::B, model.visibility),
            independent: model.decorrelated(),
        }
    }

    /// Marginal firing probability of detector A.
    pub fn p_a(&self) -> f64 {
        self.p_a
    }

    pub fn p_b(&self) -> f64 {
        self.p_b
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Clicks {
        if self.independent {
            Clicks {
                a: rng.random::<f64>() < self.p_a,
                b: rng.random::<f64>() < self.p_b,
            }
        } else {
            let a = rng.random::<f64>() < self.p_a;
            Clicks { a, b: !a }
        }
    }
}

/// Draws the detector response for one heralded photon.
///
/// Correlated models fire exactly one detector. Decorrelated
/// multisimultaneity fires each detector independently with its own marginal,
/// so double clicks and empty gates both occur.
pub fn sample_single_photon<R: Rng + ?Sized>(model: &CollapseModel, phase: f64, rng: &mut R) -> Clicks {
    PhotonSampler::new(model, phase).sample(rng)
}

/// Joint outcome order used by [`JointModel`] tables.
pub const OUTCOMES: [(i8, i8); 4] = [(1, 1), (1, -1), (-1, 1), (-1, -1)];

fn outcome_index(a: i8, b: i8) -> usize {
    match (a > 0, b > 0) {
        (true, true) => 0,
        (true, false) => 1,
        (false, true) => 2,
        (false, false) => 3,
    }
}

/// `P(a, b | α, β)` over finite setting grids, entries ordered as [`OUTCOMES`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct JointModel {
    pub alice_settings: Vec<f64>,
    pub bob_settings: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alice_labels: Vec<String>,
    /// `tables[i][j]` belongs to Alice setting `i` and Bob setting `j`.
    pub tables: Vec<Vec<[f64; 4]>>,
}

const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Shifts at or below this are rounding noise from summing table entries and
/// are reported as exactly zero.
pub const SHIFT_RESOLUTION: f64 = 8.0 * f64::EPSILON;

impl JointModel {
    pub fn from_fn(alice: &[f64], bob: &[f64], p: impl Fn(i8, i8, f64, f64) -> f64) -> Self {
        let tables = alice
            .iter()
            .map(|&al| {
                bob.iter()
                    .map(|&be| OUTCOMES.map(|(a, b)| p(a, b, al, be)))
                    .collect()
            })
            .collect();
        JointModel {
            alice_settings: alice.to_vec(),
            bob_settings: bob.to_vec(),
            alice_labels: Vec::new(),
            tables,
        }
    }

    /// Two-outcome entangled correlations `¼(1 + ab·V·cos(α + β))`.
    pub fn correlated(alice: &[f64], bob: &[f64], visibility: f64) -> Self {
        Self::from_fn(alice, bob, |a, b, al, be| {
            0.25 * (1.0 + f64::from(a * b) * visibility * (al + be).cos())
        })
    }

    /// `P(a|α)·P(b|β)` from `P(a = +1 | α)` and `P(b = +1 | β)`.
    pub fn product(alice: &[f64], bob: &[f64], pa: impl Fn(f64) -> f64, pb: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(alice, bob, |a, b, al, be| {
            let x = if a > 0 { pa(al) } else { 1.0 - pa(al) };
            let y = if b > 0 { pb(be) } else { 1.0 - pb(be) };
            x * y
        })
    }

    /// Two-setting instance where Alice chooses the state of motion of her
    /// first detector: at rest the pair stays correlated, under before-before
    /// timing the correlation is removed. Bob, who watches both remaining
    /// outcomes, sees the coincidence rate move with Alice's choice.
    pub fn ms_broken(visibility: f64, bob_setting: f64) -> Self {
        let rest = Self::correlated(&[0.0], &[bob_setting], visibility);
        let broken = ms_beamsplitter_prediction(&rest, true);
        JointModel {
            alice_settings: vec![0.0, 0.0],
            bob_settings: vec![bob_setting],
            alice_labels: vec!["rest".into(), "before-before".into()],
            tables: vec![rest.tables[0].clone(), broken.tables[0].clone()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alice_settings.is_empty() || self.bob_settings.is_empty() {
            return Err(Error::invalid("joint model", "setting lists must be non-empty"));
        }
        if !self.alice_labels.is_empty() && self.alice_labels.len() != self.alice_settings.len() {
            return Err(Error::invalid("joint model", "one label per Alice setting"));
        }
        if self.tables.len() != self.alice_settings.len()
            || self.tables.iter().any(|row| row.len() != self.bob_settings.len())
        {
            return Err(Error::invalid(
                "joint model",
                "tables must be indexed [alice setting][bob setting]",
            ));
        }
        for (i, row) in self.tables.iter().enumerate() {
            for (j, t) in row.iter().enumerate() {
                let sum: f64 = t.iter().sum();
                let valid = t.iter().all(|p| p.is_finite() && *p >= 0.0);
                if !valid || (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                    return Err(Error::Unnormalized { alice: i, bob: j, sum });
                }
            }
        }
        Ok(())
    }

    /// `(P(a = +1), P(b = +1))` for one table.
    pub fn marginals(table: &[f64; 4]) -> (f64, f64) {
        (table[0] + table[1], table[0] + table[2])
    }
}

/// What Bob can see locally.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum BobObservable {
    /// Bob's own outcome `b`.
    #[default]
    Marginal,
    /// The full joint outcome `(a, b)`, when Bob watches both detectors.
    Joint,
    /// Rate of the single joint outcome `(a, b)`.
    Coincidence([i8; 2]),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditArgmax {
    pub alice_indices: [usize; 2],
    pub alice_settings: [f64; 2],
    pub bob_index: usize,
    pub bob_setting: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditReport {
    /// Largest total-variation distance between Bob-side distributions.
    pub max_shift: f64,
    /// `None` when Alice has a single setting.
    pub argmax: Option<AuditArgmax>,
}

/// Largest change Alice's setting can make to Bob's marginal outcome
/// distribution. Zero certifies no signaling over the declared grids.
pub fn no_signaling_audit(m: &JointModel) -> Result<AuditReport> {
    audit_observable(m, BobObservable::Marginal)
}

/// [`no_signaling_audit`] for an arbitrary Bob-side observable.
pub fn audit_observable(m: &JointModel, observable: BobObservable) -> Result<AuditReport> {
    m.validate()?;
    if let BobObservable::Coincidence([a, b]) = observable {
        if a.abs() != 1 || b.abs() != 1 {
            return Err(Error::invalid("observable", "coincidence outcomes must be ±1"));
        }
    }
    let distance = |p: &[f64; 4], q: &[f64; 4]| -> f64 {
        match observable {
            BobObservable::Marginal => (JointModel::marginals(p).1 - JointModel::marginals(q).1).abs(),
            BobObservable::Joint => 0.5 * p.iter().zip(q).map(|(x, y)| (x - y).abs()).sum::<f64>(),
            BobObservable::Coincidence([a, b]) => {
                let k = outcome_index(a, b);
                (p[k] - q[k]).abs()
            }
        }
    };

    let mut report = AuditReport {
        max_shift: 0.0,
        argmax: None,
    };
    let n_alice = m.alice_settings.len();
    for (j, &beta) in m.bob_settings.iter().enumerate() {
        for i in 0..n_alice {
            for k in i + 1..n_alice {
                let mut d = distance(&m.tables[i][j], &m.tables[k][j]);
                if d <= SHIFT_RESOLUTION {
                    d = 0.0;
                }
                if report.argmax.is_none() || d > report.max_shift {
                    report = AuditReport {
                        max_shift: d,
                        argmax: Some(AuditArgmax {
                            alice_indices: [i, k],
                            alice_settings: [m.alice_settings[i], m.alice_settings[k]],
                            bob_index: j,
                            bob_setting: beta,
                        }),
                    };
                }
            }
        }
    }
    Ok(report)
}

/// Multisimultaneity at the beam splitters: under before-before timing every
/// table is replaced by the product of its marginals.
pub fn ms_beamsplitter_prediction(correlated: &JointModel, before_before: bool) -> JointModel {
    if !before_before {
        return correlated.clone();
    }
    let tables = correlated
        .tables
        .iter()
        .map(|row| {
            row.iter()
                .map(|t| {
                    let (pa, pb) = JointModel::marginals(t);
                    [pa * pb, pa * (1.0 - pb), (1.0 - pa) * pb, (1.0 - pa) * (1.0 - pb)]
                })
                .collect()
        })
        .collect();
    JointModel {
        tables,
        ..correlated.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedSequence;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn probability_examples() {
        assert_eq!(detection_probability(0.0, OutcomeLabel::A, 1.0).unwrap(), 1.0);
        for a in [OutcomeLabel::A, OutcomeLabel::B] {
            assert!((detection_probability(PI / 2.0, a, 1.0).unwrap() - 0.5).abs() < 1e-15);
        }
        let p = detection_probability(2.0 * PI / 3.0, OutcomeLabel::A, 1.0).unwrap();
        assert!((p - 0.25).abs() < 1e-15);
        assert!(detection_probability(0.0, OutcomeLabel::A, 1.1).is_err());
        assert!(detection_probability(0.0, OutcomeLabel::A, -0.1).is_err());
    }

    #[test]
    fn effective_phase_examples() {
        let k = Constants::rounded();
        let drift = DriftConfig::in_plane(3e4).unwrap();
        let ifo = Interferometer::new(6.25, 1500e-9, PI / 2.0, 0.0).unwrap();

        let cov = CollapseModel::covariant(1.0).unwrap();
        for th in [0.0, 0.4, PI / 2.0, 2.0] {
            let p = effective_phase(&cov, &ifo.rotated(th), &drift, 0.0, k).unwrap();
            assert_eq!(p, PI / 2.0);
        }

        let pf = CollapseModel::preferred_frame(1.0).unwrap();
        let before = effective_phase(&pf, &ifo, &drift, 0.0, k).unwrap();
        let after = effective_phase(&pf, &ifo.rotated(PI / 2.0), &drift, 0.0, k).unwrap();
        assert!((before - (PI / 2.0 + PI / 12.0)).abs() < 1e-12);
        assert!((after - (PI / 2.0 - PI / 12.0)).abs() < 1e-12);

        let still = DriftConfig::in_plane(0.0).unwrap();
        assert_eq!(effective_phase(&pf, &ifo, &still, 0.0, k).unwrap(), PI / 2.0);
    }

    #[test]
    fn covariant_at_zero_phase_always_fires_a() {
        let m = CollapseModel::covariant(1.0).unwrap();
        let mut rng = SeedSequence::new(1).stream(0);
        for _ in 0..1_000_000 {
            let c = sample_single_photon(&m, 0.0, &mut rng);
            assert!(c.a && !c.b);
        }
    }

    #[test]
    fn correlated_models_fire_exactly_once() {
        let mut rng = SeedSequence::new(2).stream(0);
        for m in [
            CollapseModel::covariant(0.7).unwrap(),
            CollapseModel::preferred_frame(1.0).unwrap(),
            CollapseModel::ms_detectors(1.0, false).unwrap(),
        ] {
            for i in 0..100_000 {
                let c = sample_single_photon(&m, 0.37 * f64::from(i % 17), &mut rng);
                assert!(c.a ^ c.b);
            }
        }
    }

    #[test]
    fn decorrelated_detectors_violate_energy_conservation() {
        let m = CollapseModel::ms_detectors(1.0, true).unwrap();
        let mut rng = SeedSequence::new(3).stream(0);
        let n = 1_000_000u32;
        let (mut doubles, mut nulls) = (0u32, 0u32);
        for _ in 0..n {
            let c = sample_single_photon(&m, PI / 2.0, &mut rng);
            doubles += u32::from(c.is_double());
            nulls += u32::from(c.is_null());
        }
        let n = f64::from(n);
        let quarter = 3.0 * (0.25f64 * 0.75 / n).sqrt();
        assert!((f64::from(doubles) / n - 0.25).abs() < quarter);
        assert!((f64::from(nulls) / n - 0.25).abs() < quarter);
        let frac = f64::from(doubles + nulls) / n;
        assert!((frac - 0.5).abs() < 3.0 * (0.25 / n).sqrt(), "{frac}");
    }

    #[test]
    fn ms_model_from_detector_geometry() {
        let ea = SpacetimeEvent::on_axis(0.0, 0.0).unwrap();
        let eb = SpacetimeEvent::on_axis(0.0, 0.3).unwrap();
        let bb = spacetime::find_before_before(&ea, &eb, 100.0).unwrap();
        let m = CollapseModel::ms_detectors_for(1.0, &ea, &eb, &bb.frame_a, &bb.frame_b).unwrap();
        assert!(m.decorrelated());
        // both detectors at rest: lab-simultaneous, no before-before
        let r = InertialFrame::REST;
        let m = CollapseModel::ms_detectors_for(1.0, &ea, &eb, &r, &r).unwrap();
        assert!(!m.decorrelated());
    }

    #[test]
    fn sampler_is_deterministic() {
        let m = CollapseModel::ms_detectors(0.9, true).unwrap();
        let draw = || {
            let mut rng = SeedSequence::new(99).stream(4);
            (0..1000).map(|_| sample_single_photon(&m, 1.0, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn audit_correlated_model_is_silent() {
        let settings = [0.0, PI / 4.0, PI / 2.0, 1.1];
        let m = JointModel::correlated(&settings, &settings, 1.0);
        let r = no_signaling_audit(&m).unwrap();
        assert_eq!(r.max_shift, 0.0);
    }

    #[test]
    fn audit_product_model_is_silent() {
        let m = JointModel::product(&[0.0, 1.0, 2.0], &[0.5, 1.5], |a| 0.5 * (1.0 + a.cos()), |b| b / 3.0);
        assert_eq!(no_signaling_audit(&m).unwrap().max_shift, 0.0);
    }

    #[test]
    fn audit_ms_broken_instance() {
        let m = JointModel::ms_broken(1.0, 0.0);
        // brute force: rest table (½, 0, 0, ½), before-before table uniform
        let rest = [0.5, 0.0, 0.0, 0.5];
        let bb = [0.25; 4];
        for k in 0..4 {
            assert!((m.tables[0][0][k] - rest[k]).abs() < 1e-15);
            assert!((m.tables[1][0][k] - bb[k]).abs() < 1e-15);
        }
        let r = audit_observable(&m, BobObservable::Coincidence([1, 1])).unwrap();
        assert!((r.max_shift - 0.25).abs() < 1e-12);
        let arg = r.argmax.unwrap();
        assert_eq!(arg.alice_indices, [0, 1]);
        assert_eq!(arg.bob_index, 0);
        // the decorrelation keeps Bob's own marginal, so only the joint rate signals
        assert_eq!(no_signaling_audit(&m).unwrap().max_shift, 0.0);
        let joint = audit_observable(&m, BobObservable::Joint).unwrap();
        assert!((joint.max_shift - 0.5).abs() < 1e-12);
    }

    #[test]
    fn audit_rejects_bad_tables() {
        let mut m = JointModel::correlated(&[0.0], &[0.0], 1.0);
        m.tables[0][0][0] += 0.1;
        assert!(matches!(no_signaling_audit(&m), Err(Error::Unnormalized { .. })));
        let mut m = JointModel::correlated(&[0.0], &[0.0], 1.0);
        m.tables[0][0] = [1.5, -0.5, 0.0, 0.0];
        assert!(no_signaling_audit(&m).is_err());
        let mut m = JointModel::correlated(&[0.0, 1.0], &[0.0], 1.0);
        m.tables.pop();
        assert!(no_signaling_audit(&m).is_err());
        let m = JointModel::correlated(&[0.0], &[0.0], 1.0);
        assert!(audit_observable(&m, BobObservable::Coincidence([2, 1])).is_err());
    }

    #[test]
    fn audit_single_alice_setting() {
        let m = JointModel::correlated(&[0.0], &[0.0, 1.0], 1.0);
        let r = no_signaling_audit(&m).unwrap();
        assert_eq!(r.max_shift, 0.0);
        assert!(r.argmax.is_none());
    }

    #[test]
    fn beamsplitter_prediction_examples() {
        let m = JointModel::correlated(&[0.0, 0.7], &[0.3, 1.9], 1.0);
        let p = ms_beamsplitter_prediction(&m, true);
        for row in &p.tables {
            for t in row {
                for x in t {
                    assert!((x - 0.25).abs() < 1e-15);
                }
            }
        }
        assert_eq!(ms_beamsplitter_prediction(&m, false), m);

        let prod = JointModel::product(&[0.0, 1.0], &[0.2], |a| 0.3 + 0.1 * a, |b| 0.9 - b);
        let again = ms_beamsplitter_prediction(&prod, true);
        for (r1, r2) in prod.tables.iter().zip(&again.tables) {
            for (t1, t2) in r1.iter().zip(r2) {
                for k in 0..4 {
                    assert!((t1[k] - t2[k]).abs() < 1e-15);
                }
            }
        }

        let m = JointModel::correlated(&[PI / 3.0], &[0.0], 1.0);
        let expected = [0.375, 0.125, 0.125, 0.375];
        for k in 0..4 {
            assert!((m.tables[0][0][k] - expected[k]).abs() < 1e-15);
            assert!((ms_beamsplitter_prediction(&m, true).tables[0][0][k] - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn joint_model_json_shape() {
        let m = JointModel::ms_broken(1.0, 0.0);
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"aliceSettings\""));
        let back: JointModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<JointModel>(r#"{"aliceSettings":[0],"bobSettings":[0],"tables":[[[1,0,0,0]]],"extra":1}"#).is_err());
    }

    fn table() -> impl Strategy<Value = [f64; 4]> {
        proptest::array::uniform4(0.0..1.0f64).prop_filter_map("nonzero", |w| {
            let s: f64 = w.iter().sum();
            (s > 1e-3).then(|| w.map(|x| x / s))
        })
    }

    proptest! {
        #[test]
        fn probabilities_normalized(phase in -10.0..10.0f64, v in 0.0..=1.0f64) {
            let pa = detection_probability(phase, OutcomeLabel::A, v).unwrap();
            let pb = detection_probability(phase, OutcomeLabel::B, v).unwrap();
            prop_assert!((0.0..=1.0).contains(&pa) && (0.0..=1.0).contains(&pb));
            prop_assert!((pa + pb - 1.0).abs() < 1e-15);
        }

        #[test]
        fn beamsplitter_preserves_marginals(tables in proptest::collection::vec(table(), 1..6)) {
            let n = tables.len();
            let m = JointModel {
                alice_settings: (0..n).map(|i| i as f64).collect(),
                bob_settings: vec![0.0],
                alice_labels: vec![],
                tables: tables.into_iter().map(|t| vec![t]).collect(),
            };
            let p = ms_beamsplitter_prediction(&m, true);
            p.validate().unwrap();
            for (r1, r2) in m.tables.iter().zip(&p.tables) {
                let (a1, b1) = JointModel::marginals(&r1[0]);
                let (a2, b2) = JointModel::marginals(&r2[0]);
                prop_assert!((a1 - a2).abs() < 1e-12 && (b1 - b2).abs() < 1e-12);
            }
        }

        #[test]
        fn product_models_never_signal(
            pa in proptest::collection::vec(0.0..=1.0f64, 1..5),
            pb in proptest::collection::vec(0.0..=1.0f64, 1..5),
        ) {
            let alice: Vec<f64> = (0..pa.len()).map(|i| i as f64).collect();
            let bob: Vec<f64> = (0..pb.len()).map(|i| i as f64).collect();
            let m = JointModel::product(&alice, &bob, |a| pa[a as usize], |b| pb[b as usize]);
            prop_assert_eq!(no_signaling_audit(&m).unwrap().max_shift, 0.0);
        }
    }
}
