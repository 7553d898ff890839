//! Physical primitives shared by the analytic model, the state oracle and the
//! Monte Carlo simulator: fiber transmittance, coherent fields at a 50:50
//! beamsplitter, threshold detection and binary entropy.

use std::f64::consts::TAU;

use crate::error::{ensure, ensure_probability, Error, Result};

/// Fiber link between Alice and Bob with Charlie at the midpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    /// Total Alice-to-Bob distance in km.
    pub distance_km: f64,
    /// Fiber attenuation in dB/km.
    pub gamma_db_per_km: f64,
    /// Detector efficiency at Charlie.
    pub eta_det: f64,
}

impl ChannelSpec {
    pub fn new(distance_km: f64, gamma_db_per_km: f64, eta_det: f64) -> Result<Self> {
        let spec = Self {
            distance_km,
            gamma_db_per_km,
            eta_det,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            self.distance_km >= 0.0 && self.distance_km.is_finite(),
            "distance_km",
            self.distance_km,
            "must be a finite non-negative length",
        )?;
        ensure(
            self.gamma_db_per_km >= 0.0 && self.gamma_db_per_km.is_finite(),
            "gamma_db_per_km",
            self.gamma_db_per_km,
            "must be a finite non-negative attenuation",
        )?;
        ensure(
            self.eta_det > 0.0 && self.eta_det <= 1.0,
            "eta_det",
            self.eta_det,
            "must lie in (0, 1]",
        )
    }

    pub fn with_distance(mut self, distance_km: f64) -> Self {
        self.distance_km = distance_km;
        self
    }

    pub fn transmittance(&self) -> f64 {
        channel_transmittance(self)
    }
}

/// Transmittance from either party to Charlie, detector efficiency included.
///
/// Each party sits `distance_km / 2` from Charlie, hence the `/20` in the
/// exponent rather than `/10`.
pub fn channel_transmittance(spec: &ChannelSpec) -> f64 {
    spec.eta_det * 10f64.powf(-spec.gamma_db_per_km * spec.distance_km / 20.0)
}

/// Complex amplitude of a coherent state in polar form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentAmplitude {
    magnitude: f64,
    phase: f64,
}

impl CoherentAmplitude {
    pub fn new(magnitude: f64, phase: f64) -> Result<Self> {
        ensure(
            magnitude >= 0.0 && magnitude.is_finite(),
            "magnitude",
            magnitude,
            "must be finite and non-negative",
        )?;
        Ok(Self {
            magnitude,
            phase: phase.rem_euclid(TAU),
        })
    }

    pub fn from_mean_photons(mean_photons: f64, phase: f64) -> Result<Self> {
        ensure(
            mean_photons >= 0.0,
            "mean_photons",
            mean_photons,
            "must be non-negative",
        )?;
        Self::new(mean_photons.sqrt(), phase)
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    /// Phase in `[0, 2π)`.
    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn mean_photons(&self) -> f64 {
        self.magnitude * self.magnitude
    }
}

/// Relative linear-polarization angle between Alice's and Bob's pulses.
///
/// Alice's field is taken along `ê_h`; Bob's is rotated by the mismatch angle,
/// so `ê_a · ê_b = cos Φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationFrame {
    mismatch_deg: f64,
}

impl Default for PolarizationFrame {
    fn default() -> Self {
        Self { mismatch_deg: 0.0 }
    }
}

impl PolarizationFrame {
    pub fn new(mismatch_deg: f64) -> Result<Self> {
        ensure(
            (0.0..=90.0).contains(&mismatch_deg),
            "mismatch_deg",
            mismatch_deg,
            "must lie in [0, 90] degrees",
        )?;
        Ok(Self { mismatch_deg })
    }

    pub fn aligned() -> Self {
        Self::default()
    }

    pub fn mismatch_deg(&self) -> f64 {
        self.mismatch_deg
    }

    pub fn mismatch_rad(&self) -> f64 {
        self.mismatch_deg.to_radians()
    }

    /// `ê_a · ê_b`. Exact at 0° and 90°.
    pub fn overlap(&self) -> f64 {
        if self.mismatch_deg == 90.0 {
            0.0
        } else {
            self.mismatch_rad().cos()
        }
    }

    /// `(ê·ê_h, ê·ê_v)` for Alice.
    pub fn alice_axis(&self) -> [f64; 2] {
        [1.0, 0.0]
    }

    /// `(ê·ê_h, ê·ê_v)` for Bob.
    pub fn bob_axis(&self) -> [f64; 2] {
        if self.mismatch_deg == 90.0 {
            [0.0, 1.0]
        } else {
            let phi = self.mismatch_rad();
            [phi.cos(), phi.sin()]
        }
    }
}

/// Mean photon numbers at the two beamsplitter output ports for one time bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortMeans {
    pub mu_c: f64,
    pub mu_d: f64,
}

impl PortMeans {
    pub fn total(&self) -> f64 {
        self.mu_c + self.mu_d
    }
}

/// Output means when coherent states `alpha` (port a) and `beta` (port b)
/// meet at a 50:50 beamsplitter with `a† → (c†+d†)/√2`, `b† → (c†−d†)/√2`.
///
/// `diff_phase` is the full relative phase `δ = θ_a − θ_b + φ_ai − φ_bi`; the
/// phases stored in the amplitudes are not used, so callers control `δ`.
pub fn bs_output_means(
    alpha: CoherentAmplitude,
    beta: CoherentAmplitude,
    frame: PolarizationFrame,
    diff_phase: f64,
) -> PortMeans {
    let sum = alpha.mean_photons() + beta.mean_photons();
    let cross = alpha.magnitude * beta.magnitude * diff_phase.cos() * frame.overlap();
    // Clamp the sub-ulp negatives that show up at perfect destructive interference.
    PortMeans {
        mu_c: (0.5 * sum + cross).max(0.0),
        mu_d: (0.5 * sum - cross).max(0.0),
    }
}

/// Click probability of a threshold detector seeing a Poissonian field of
/// the given mean, with an independent dark count.
pub fn click_probability(mean_photons: f64, p_dark: f64) -> f64 {
    if p_dark >= 1.0 {
        return 1.0;
    }
    -((-p_dark).ln_1p() - mean_photons).exp_m1()
}

/// Probability that a threshold detector stays silent.
pub fn no_click_probability(mean_photons: f64, p_dark: f64) -> f64 {
    (1.0 - p_dark) * (-mean_photons).exp()
}

/// Shannon binary entropy in bits, with `0·log 0 = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    ensure_probability("x", x)?;
    Ok(binary_entropy_unchecked(x))
}

pub(crate) fn binary_entropy_unchecked(x: f64) -> f64 {
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.log2() };
    term(x) + term(1.0 - x)
}

/// Entropy charged by the key-rate formulas. Error figures above 1/2 are
/// charged the full bit (`H(1/2) = 1`) rather than the falling branch of `H`;
/// anything outside [0, 1] is an error.
pub(crate) fn entropy_of_rate(x: f64, name: &'static str) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter {
            name,
            value: x,
            reason: "error rate outside [0, 1]",
        });
    }
    Ok(binary_entropy_unchecked(x.min(0.5)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn amp(mag: f64) -> CoherentAmplitude {
        CoherentAmplitude::new(mag, 0.0).unwrap()
    }

    #[test]
    fn transmittance_examples() {
        let zero = ChannelSpec::new(0.0, 0.2, 1.0).unwrap();
        assert_eq!(channel_transmittance(&zero), 1.0);
        let hundred = ChannelSpec::new(100.0, 0.2, 1.0).unwrap();
        assert!((channel_transmittance(&hundred) - 0.1).abs() < 1e-15);
        let half = ChannelSpec::new(100.0, 0.2, 0.5).unwrap();
        assert!((channel_transmittance(&half) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn channel_rejects_bad_values() {
        assert!(ChannelSpec::new(-1.0, 0.2, 0.5).is_err());
        assert!(ChannelSpec::new(1.0, -0.2, 0.5).is_err());
        assert!(ChannelSpec::new(1.0, 0.2, 1.5).is_err());
        assert!(ChannelSpec::new(1.0, 0.2, 0.0).is_err());
    }

    #[test]
    fn beamsplitter_examples() {
        let m = bs_output_means(amp(1.0), amp(1.0), PolarizationFrame::aligned(), 0.0);
        assert_eq!((m.mu_c, m.mu_d), (2.0, 0.0));

        let orth = PolarizationFrame::new(90.0).unwrap();
        let m = bs_output_means(amp(1.0), amp(1.0), orth, 0.0);
        assert_eq!((m.mu_c, m.mu_d), (1.0, 1.0));

        let sixty = PolarizationFrame::new(60.0).unwrap();
        let m = bs_output_means(amp(1.0), amp(1.0), sixty, 0.0);
        assert!((m.mu_c - 1.5).abs() < 1e-15);
        assert!((m.mu_d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn frame_axes_have_overlap_cos_phi() {
        for deg in [0.0, 11.0, 45.0, 60.0, 90.0] {
            let f = PolarizationFrame::new(deg).unwrap();
            let [ah, av] = f.alice_axis();
            let [bh, bv] = f.bob_axis();
            assert!((ah * bh + av * bv - f.overlap()).abs() < 1e-15);
        }
        assert!(PolarizationFrame::new(91.0).is_err());
        assert!(PolarizationFrame::new(-0.5).is_err());
    }

    #[test]
    fn click_examples() {
        assert_eq!(click_probability(0.0, 0.0), 0.0);
        assert!((click_probability(0.0, 1e-6) / 1e-6 - 1.0).abs() < 1e-12);
        assert!((click_probability(1e-9, 0.0) / (1e-9 - 5e-19) - 1.0).abs() < 1e-14);
        assert!((click_probability(2f64.ln(), 0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rate_entropy_charges_a_full_bit_past_one_half() {
        assert_eq!(entropy_of_rate(0.5, "e").unwrap(), 1.0);
        assert_eq!(entropy_of_rate(0.8, "e").unwrap(), 1.0);
        assert_eq!(entropy_of_rate(1.0, "e").unwrap(), 1.0);
        assert_eq!(entropy_of_rate(0.11, "e").unwrap(), binary_entropy(0.11).unwrap());
        assert!(entropy_of_rate(1.5, "e").is_err());
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        // -0.11 log2 0.11 - 0.89 log2 0.89
        assert!((binary_entropy(0.11).unwrap() - 0.499_915_958_164_528).abs() < 1e-14);
        assert!(binary_entropy(1.2).is_err());
        assert!(binary_entropy(-0.1).is_err());
    }

    #[test]
    fn entropy_concave_on_grid() {
        let h: Vec<f64> = (0..=200)
            .map(|i| binary_entropy(i as f64 / 200.0).unwrap())
            .collect();
        for w in h.windows(3) {
            assert!(w[1] >= 0.5 * (w[0] + w[2]) - 1e-15);
        }
        let max = h.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(max, h[100]);
    }

    proptest! {
        #[test]
        fn energy_is_conserved(a in 0.0f64..10.0, b in 0.0f64..10.0,
                               deg in 0.0f64..=90.0, delta in -10.0f64..10.0) {
            let frame = PolarizationFrame::new(deg).unwrap();
            let m = bs_output_means(amp(a), amp(b), frame, delta);
            let total = a * a + b * b;
            prop_assert!((m.total() - total).abs() <= 1e-12 * total.max(1e-300));
            // δ → δ+π swaps the ports
            let s = bs_output_means(amp(a), amp(b), frame, delta + std::f64::consts::PI);
            prop_assert!((s.mu_c - m.mu_d).abs() <= 1e-12 * total.max(1.0));
        }

        #[test]
        fn constructive_port_shrinks_with_mismatch(a in 0.0f64..5.0, b in 0.0f64..5.0,
                                                   d1 in 0.0f64..=90.0, d2 in 0.0f64..=90.0) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let m_lo = bs_output_means(amp(a), amp(b), PolarizationFrame::new(lo).unwrap(), 0.0);
            let m_hi = bs_output_means(amp(a), amp(b), PolarizationFrame::new(hi).unwrap(), 0.0);
            prop_assert!(m_hi.mu_c <= m_lo.mu_c + 1e-12);
        }

        #[test]
        fn doubling_distance_squares_loss(l in 0.0f64..300.0, gamma in 0.0f64..1.0, eta in 0.01f64..=1.0) {
            let t1 = channel_transmittance(&ChannelSpec::new(l, gamma, eta).unwrap());
            let t2 = channel_transmittance(&ChannelSpec::new(2.0 * l, gamma, eta).unwrap());
            prop_assert!((t2 - t1 * t1 / eta).abs() <= 1e-12 * t2.max(1e-300));
        }

        #[test]
        fn click_probability_monotone(mu in 0.0f64..5.0, dmu in 0.0f64..1.0,
                                      p in 0.0f64..0.5, dp in 0.0f64..0.4) {
            prop_assert!(click_probability(mu + dmu, p) >= click_probability(mu, p));
            prop_assert!(click_probability(mu, p + dp) >= click_probability(mu, p));
        }

        #[test]
        fn entropy_symmetric(x in 0.0f64..=1.0) {
            let a = binary_entropy(x).unwrap();
            let b = binary_entropy(1.0 - x).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
