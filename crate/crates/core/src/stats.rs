//! Statistical decision layer: proportion intervals, the rotation trial, sample
//! sizing, and the sidereal modulation fit with its bootstrap interval.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::check_probability;
use crate::ether::SIDEREAL_DAY;
use crate::experiment::{CountTally, SiderealPoint};
use crate::rng::SeedSequence;
use crate::{Error, Result};

/// Minimum number of points for [`fit_sidereal`].
pub const MIN_FIT_POINTS: usize = 8;

/// Minimum number of resamples for [`bootstrap_ci`].
pub const MIN_RESAMPLES: usize = 100;

fn std_normal() -> Normal {
    Normal::standard()
}

/// Upper quantile `z` with `P(|Z| ≤ z) = confidence`.
fn two_sided_z(confidence: f64) -> f64 {
    std_normal().inverse_cdf(0.5 + 0.5 * confidence)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ProportionEstimate {
    pub p_hat: f64,
    pub n: u64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Wilson score interval for `successes` out of `n`.
pub fn wilson_interval(successes: u64, n: u64, confidence: f64) -> Result<ProportionEstimate> {
    if n == 0 {
        return Err(Error::EmptyDenominator("n"));
    }
    if successes > n {
        return Err(Error::invalid("successes", format!("{successes} exceeds n = {n}")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::invalid("confidence", format!("{confidence} is outside (0, 1)")));
    }
    let z = two_sided_z(confidence);
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2n = z * z / nf;
    let center = (p + z2n / 2.0) / (1.0 + z2n);
    let half = z / (1.0 + z2n) * (p * (1.0 - p) / nf + z2n / (4.0 * nf)).sqrt();
    let ci_low = if successes == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let ci_high = if successes == n { 1.0 } else { (center + half).clamp(p, 1.0) };
    Ok(ProportionEstimate {
        p_hat: p,
        n,
        ci_low,
        ci_high,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ZTest {
    pub z: f64,
    pub p_value: f64,
}

/// Two-sided p-value of a standard normal statistic.
pub fn two_sided_p_value(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Pooled two-proportion z-test of `P_A` before vs. after rotation.
///
/// `z > 0` when `P_A` dropped after rotation.
pub fn two_proportion_test(before: &CountTally, after: &CountTally) -> Result<ZTest> {
    if before.heralds_a == 0 || after.heralds_a == 0 {
        return Err(Error::EmptyDenominator("R_H(A)"));
    }
    let (x1, n1) = (before.coincidences_a as f64, before.heralds_a as f64);
    let (x2, n2) = (after.coincidences_a as f64, after.heralds_a as f64);
    let (p1, p2) = (x1 / n1, x2 / n2);
    let pooled = (x1 + x2) / (n1 + n2);
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2)).sqrt();
    let z = if p1 == p2 || se == 0.0 { 0.0 } else { (p1 - p2) / se };
    Ok(ZTest {
        z,
        p_value: two_sided_p_value(z),
    })
}

/// Heralds per arm for the pooled two-proportion test to detect `p0` vs `p1`
/// at `significance_sigmas` (two-sided) with the given power, in the normal
/// approximation.
pub fn required_heralds(p0: f64, p1: f64, significance_sigmas: f64, power: f64) -> Result<u64> {
    for (name, p) in [("p0", p0), ("p1", p1)] {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid(name, format!("{p} is outside (0, 1)")));
        }
    }
    if p0 == p1 {
        return Err(Error::invalid("p1", "must differ from p0"));
    }
    if !(significance_sigmas > 0.0 && significance_sigmas.is_finite()) {
        return Err(Error::invalid("significance", "must be a positive number of sigmas"));
    }
    if !(power > 0.0 && power < 1.0) {
        return Err(Error::invalid("power", format!("{power} is outside (0, 1)")));
    }
    let z_beta = std_normal().inverse_cdf(power);
    let mean = 0.5 * (p0 + p1);
    let null_sd = (2.0 * mean * (1.0 - mean)).sqrt();
    let alt_sd = (p0 * (1.0 - p0) + p1 * (1.0 - p1)).sqrt();
    let n = ((significance_sigmas * null_sd + z_beta * alt_sd) / (p1 - p0)).powi(2);
    // guard against n landing a hair above an integer through rounding
    Ok((n * (1.0 - 1e-12)).ceil().max(1.0) as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FitResult {
    /// Modulation amplitude A ≥ 0 of `P_A − ½ = A cos(2θ + φ)`.
    pub amplitude: f64,
    pub amplitude_sigma: f64,
    /// φ, rad in `[0, 2π)`.
    pub phase_offset: f64,
    /// Period of the θ_eff pattern, s.
    pub period: f64,
    pub chi2: f64,
    pub dof: usize,
    /// `A cos φ`.
    pub cos_coef: f64,
    /// `A sin φ`.
    pub sin_coef: f64,
}

fn point_variance(p: &SiderealPoint) -> f64 {
    match p.heralds_a {
        Some(n) if n > 0 => {
            let n = n as f64;
            (p.p_a * (1.0 - p.p_a)).max(1.0 / n) / n
        }
        // analytic points carry no sampling noise; weight them equally
        _ => 1.0,
    }
}

struct Normal2 {
    s11: f64,
    s12: f64,
    s22: f64,
    r1: f64,
    r2: f64,
}

fn accumulate<'a>(points: impl Iterator<Item = &'a SiderealPoint>) -> Normal2 {
    let mut m = Normal2 {
        s11: 0.0,
        s12: 0.0,
        s22: 0.0,
        r1: 0.0,
        r2: 0.0,
    };
    for p in points {
        let w = 1.0 / point_variance(p);
        let (s, c) = (2.0 * p.theta_eff).sin_cos();
        let (x1, x2) = (c, -s);
        let y = p.p_a - 0.5;
        m.s11 += w * x1 * x1;
        m.s12 += w * x1 * x2;
        m.s22 += w * x2 * x2;
        m.r1 += w * x1 * y;
        m.r2 += w * x2 * y;
    }
    m
}

/// Solves for `(A cos φ, A sin φ)` and their covariance.
fn solve(m: &Normal2) -> Result<([f64; 2], [f64; 3])> {
    let det = m.s11 * m.s22 - m.s12 * m.s12;
    if !(det > 1e-10 * m.s11 * m.s22) {
        return Err(Error::SingularFit);
    }
    let a = (m.s22 * m.r1 - m.s12 * m.r2) / det;
    let b = (m.s11 * m.r2 - m.s12 * m.r1) / det;
    Ok(([a, b], [m.s22 / det, -m.s12 / det, m.s11 / det]))
}

/// Weighted least-squares fit of `P_A(t) = ½ + A cos(2θ_eff(t) + φ)`.
///
/// The model is linear in `(A cos φ, A sin φ)`, so the fit is closed form.
/// Sampled points are weighted by their binomial variance; analytic points
/// are weighted equally.
pub fn fit_sidereal(series: &[SiderealPoint]) -> Result<FitResult> {
    if series.len() < MIN_FIT_POINTS {
        return Err(Error::UnderDetermined {
            points: series.len(),
            required: MIN_FIT_POINTS,
        });
    }
    let ([a, b], [vaa, vab, vbb]) = solve(&accumulate(series.iter()))?;
    let amplitude = a.hypot(b);
    let amplitude_sigma = if amplitude > 0.0 {
        ((a * a * vaa + 2.0 * a * b * vab + b * b * vbb) / (amplitude * amplitude)).sqrt()
    } else {
        (0.5 * (vaa + vbb)).sqrt()
    };
    let chi2 = series
        .iter()
        .map(|p| {
            let fit = a * (2.0 * p.theta_eff).cos() - b * (2.0 * p.theta_eff).sin();
            (p.p_a - 0.5 - fit).powi(2) / point_variance(p)
        })
        .sum();
    Ok(FitResult {
        amplitude,
        amplitude_sigma,
        phase_offset: crate::ether::normalize_angle(b.atan2(a)),
        period: SIDEREAL_DAY,
        chi2,
        dof: series.len() - 2,
        cos_coef: a,
        sin_coef: b,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BootstrapInterval {
    pub amplitude_low: f64,
    pub amplitude_high: f64,
    pub confidence: f64,
    pub n_resamples: usize,
}

impl BootstrapInterval {
    pub fn contains(&self, amplitude: f64) -> bool {
        (self.amplitude_low..=self.amplitude_high).contains(&amplitude)
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap interval for the fitted amplitude at 95% confidence.
/// See [`bootstrap_ci_at`].
pub fn bootstrap_ci(series: &[SiderealPoint], n_resamples: usize, seed: u64) -> Result<BootstrapInterval> {
    bootstrap_ci_at(series, n_resamples, seed, 0.95)
}

/// Percentile bootstrap interval for the fitted amplitude, resampling time
/// points with replacement.
///
/// The amplitude is the norm of the coefficient pair `(A cos φ, A sin φ)`, so
/// its replicates are never negative. Zero is put inside the interval when
/// the origin of the coefficient plane lies within the central `confidence`
/// fraction of the replicates, ranked by Mahalanobis distance from their mean;
/// otherwise the lower bound is the lower percentile of the amplitude
/// replicates. The upper bound is always the upper percentile.
pub fn bootstrap_ci_at(
    series: &[SiderealPoint],
    n_resamples: usize,
    seed: u64,
    confidence: f64,
) -> Result<BootstrapInterval> {
    if n_resamples < MIN_RESAMPLES {
        return Err(Error::invalid(
            "n_resamples",
            format!("{n_resamples} is below {MIN_RESAMPLES}"),
        ));
    }
    check_probability("confidence", confidence)?;
    fit_sidereal(series)?;

    let seeds = SeedSequence::new(seed);
    let n = series.len();
    let coefs: Vec<[f64; 2]> = (0..n_resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = seeds.stream(r as u64);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            solve(&accumulate(idx.iter().map(|&i| &series[i]))).map(|(c, _)| c)
        })
        .collect::<Result<_>>()?;

    let alpha = 1.0 - confidence;
    let mut amps: Vec<f64> = coefs.iter().map(|c| c[0].hypot(c[1])).collect();
    amps.sort_by(f64::total_cmp);
    let high = quantile(&amps, 1.0 - alpha / 2.0);
    let low = if origin_inside(&coefs, confidence) {
        0.0
    } else {
        quantile(&amps, alpha / 2.0)
    };
    Ok(BootstrapInterval {
        amplitude_low: low,
        amplitude_high: high,
        confidence,
        n_resamples,
    })
}

fn origin_inside(coefs: &[[f64; 2]], confidence: f64) -> bool {
    let k = coefs.len() as f64;
    let mean = coefs
        .iter()
        .fold([0.0, 0.0], |m, c| [m[0] + c[0] / k, m[1] + c[1] / k]);
    let (mut saa, mut sab, mut sbb) = (0.0, 0.0, 0.0);
    for c in coefs {
        let (da, db) = (c[0] - mean[0], c[1] - mean[1]);
        saa += da * da / k;
        sab += da * db / k;
        sbb += db * db / k;
    }
    let det = saa * sbb - sab * sab;
    let scale = mean[0].hypot(mean[1]).max(f64::MIN_POSITIVE);
    if !(det > 1e-24 * scale.powi(4)) {
        // replicates collapse to (nearly) a point
        return mean[0].hypot(mean[1]) <= 1e-12;
    }
    let dist = |a: f64, b: f64| {
        let (da, db) = (a - mean[0], b - mean[1]);
        (sbb * da * da - 2.0 * sab * da * db + saa * db * db) / det
    };
    let d0 = dist(0.0, 0.0);
    let farther = coefs.iter().filter(|c| dist(c[0], c[1]) >= d0).count();
    farther as f64 / k > 1.0 - confidence
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tally(x: u64, n: u64) -> CountTally {
        CountTally {
            heralds_a: n,
            coincidences_a: x,
            heralds_b: n,
            coincidences_b: n - x,
            ..Default::default()
        }
    }

    #[test]
    fn wilson_examples() {
        let e = wilson_interval(0, 100, 0.95).unwrap();
        assert_eq!((e.p_hat, e.ci_low), (0.0, 0.0));
        // k = 0: z²/n / (1 + z²/n)
        assert!((e.ci_high - 0.036_993_498_207).abs() < 1e-10, "{}", e.ci_high);
        let e = wilson_interval(50, 100, 0.95).unwrap();
        assert!(((e.ci_low + e.ci_high) / 2.0 - 0.5).abs() < 1e-15);
        assert!(e.ci_low < 0.5 && e.ci_high > 0.5);
        assert_eq!(wilson_interval(100, 100, 0.95).unwrap().ci_high, 1.0);
        assert!(wilson_interval(0, 0, 0.95).is_err());
        assert!(wilson_interval(5, 4, 0.95).is_err());
    }

    #[test]
    fn wilson_contains_estimate() {
        for n in [1u64, 2, 7, 30, 1000] {
            for k in 0..=n.min(40) {
                let e = wilson_interval(k, n, 0.95).unwrap();
                assert!(e.ci_low <= e.p_hat && e.p_hat <= e.ci_high);
                assert!(e.ci_low >= 0.0 && e.ci_high <= 1.0);
            }
        }
    }

    #[test]
    fn z_test_examples() {
        let t = two_proportion_test(&tally(500, 1000), &tally(500, 1000)).unwrap();
        assert_eq!((t.z, t.p_value), (0.0, 1.0));
        let t = two_proportion_test(&tally(5000, 10_000), &tally(2500, 10_000)).unwrap();
        // 0.25 / √(0.375·0.625·2e-4)
        assert!((t.z - 36.514_837_167_011_07).abs() < 1e-9, "{}", t.z);
        assert!(t.p_value < 1e-100);
        let s = two_proportion_test(&tally(2500, 10_000), &tally(5000, 10_000)).unwrap();
        assert_eq!(s.z, -t.z);
        assert_eq!(s.p_value, t.p_value);
        assert!(two_proportion_test(&CountTally::default(), &tally(1, 2)).is_err());
        // degenerate pooled variance
        let t = two_proportion_test(&tally(10, 10), &tally(20, 20)).unwrap();
        assert_eq!((t.z, t.p_value), (0.0, 1.0));
    }

    #[test]
    fn p_value_reference_points() {
        // erfc here is good to ~1e-11 relative
        assert!((two_sided_p_value(1.959_963_984_540_054) / 0.05 - 1.0).abs() < 1e-10);
        assert!((two_sided_p_value(5.0) / 5.733_031_437_583_892e-7 - 1.0).abs() < 1e-10);
    }

    /// Power of the pooled test at `n` per arm, far tail neglected.
    fn power_at(n: u64, p0: f64, p1: f64, sigmas: f64) -> f64 {
        let n = n as f64;
        let m = 0.5 * (p0 + p1);
        let se0 = (2.0 * m * (1.0 - m) / n).sqrt();
        let se1 = ((p0 * (1.0 - p0) + p1 * (1.0 - p1)) / n).sqrt();
        std_normal().cdf(((p1 - p0).abs() - sigmas * se0) / se1)
    }

    fn smallest_n(p0: f64, p1: f64, sigmas: f64, power: f64) -> u64 {
        (1..).find(|&n| power_at(n, p0, p1, sigmas) >= power).unwrap()
    }

    #[test]
    fn required_heralds_matches_search() {
        let n = required_heralds(0.5, 0.25, 5.0, 0.99).unwrap();
        assert_eq!(n, smallest_n(0.5, 0.25, 5.0, 0.99));
        assert_eq!(n, 394);
        for (p0, p1, s, pw) in [(0.5, 0.45, 3.0, 0.9), (0.2, 0.3, 5.0, 0.8), (0.6, 0.5, 2.0, 0.7)] {
            assert_eq!(required_heralds(p0, p1, s, pw).unwrap(), smallest_n(p0, p1, s, pw));
        }
    }

    #[test]
    fn required_heralds_shape() {
        assert_eq!(
            required_heralds(0.5, 0.25, 5.0, 0.99).unwrap(),
            required_heralds(0.25, 0.5, 5.0, 0.99).unwrap()
        );
        let mut prev = 0;
        for gap in [0.3, 0.1, 0.03, 0.01, 0.003] {
            let n = required_heralds(0.5, 0.5 - gap, 5.0, 0.99).unwrap();
            assert!(n > prev);
            prev = n;
        }
        let base = required_heralds(0.5, 0.4, 3.0, 0.9).unwrap();
        assert!(required_heralds(0.5, 0.4, 5.0, 0.9).unwrap() > base);
        assert!(required_heralds(0.5, 0.4, 3.0, 0.99).unwrap() > base);
        assert!(required_heralds(0.5, 0.5, 5.0, 0.99).is_err());
        assert!(required_heralds(0.0, 0.5, 5.0, 0.99).is_err());
        assert!(required_heralds(0.5, 0.4, 5.0, 1.0).is_err());
    }

    fn analytic(amplitude: f64, phase: f64, n: usize) -> Vec<SiderealPoint> {
        (0..n)
            .map(|k| {
                let theta = k as f64 * 0.37;
                SiderealPoint {
                    t: k as f64,
                    theta_eff: theta,
                    v_eff: 1.0,
                    p_a: 0.5 + amplitude * (2.0 * theta + phase).cos(),
                    p_b: 0.0,
                    heralds_a: None,
                }
            })
            .collect()
    }

    #[test]
    fn fit_recovers_noise_free_signal() {
        let f = fit_sidereal(&analytic(0.12, 1.0, 40)).unwrap();
        assert!((f.amplitude - 0.12).abs() < 1e-12);
        assert!((f.phase_offset - 1.0).abs() < 1e-10);
        assert!(f.chi2 < 1e-20);
        assert_eq!(f.dof, 38);
        assert_eq!(f.period, SIDEREAL_DAY);
    }

    #[test]
    fn fit_rejects_short_or_degenerate_series() {
        assert!(matches!(
            fit_sidereal(&analytic(0.1, 0.0, 7)),
            Err(Error::UnderDetermined { points: 7, required: 8 })
        ));
        let mut flat = analytic(0.1, 0.0, 10);
        for p in &mut flat {
            p.theta_eff = 0.3;
        }
        assert_eq!(fit_sidereal(&flat), Err(Error::SingularFit));
    }

    #[test]
    fn bootstrap_noise_free_is_degenerate() {
        let s = analytic(0.08, 2.0, 60);
        let ci = bootstrap_ci(&s, 200, 1).unwrap();
        assert!((ci.amplitude_low - 0.08).abs() < 1e-10);
        assert!((ci.amplitude_high - 0.08).abs() < 1e-10);
        assert!(bootstrap_ci(&s, 99, 1).is_err());
    }

    #[test]
    fn bootstrap_is_deterministic_and_stable() {
        let mut s = analytic(0.01, 0.4, 145);
        let mut rng = SeedSequence::new(3).stream(0);
        for p in &mut s {
            p.p_a += 0.003 * (rng.random::<f64>() - 0.5);
            p.heralds_a = Some(100_000);
        }
        let a = bootstrap_ci(&s, 1000, 9).unwrap();
        assert_eq!(a, bootstrap_ci(&s, 1000, 9).unwrap());
        let b = bootstrap_ci(&s, 2000, 9).unwrap();
        assert!((a.amplitude_low - b.amplitude_low).abs() < 1e-2);
        assert!((a.amplitude_high - b.amplitude_high).abs() < 1e-2);
        assert!(a.amplitude_low > 0.0);
        let _ = PI;
    }
}
