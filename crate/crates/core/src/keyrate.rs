//! Closed-form yields, error rates, sliced gains and secure key rates.
//!
//! Two settings are covered. The single-photon model compares the original
//! eight-outcome sifting with the twelve-outcome one. The weak-coherent model
//! adds a polarization mismatch Φ between Alice and Bob and restricts sifting to
//! rounds whose random global phases fall in matching slices.

use std::f64::consts::PI;

use crate::error::{ensure, Error, Result};
use crate::integrate::{GaussLegendre, Quadrature2d};
use crate::optics::{entropy_of_rate, ChannelSpec, PolarizationFrame};
use crate::sifting::SiftScheme;

/// Width of the phase slices used in the sliced gain integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SliceWidth {
    /// Integrate over `[0, π/N]`, prefactor `N/π²`.
    #[default]
    Printed,
    /// Integrate over the full slice `[0, 2π/N]`. This matches uniform
    /// phases in `[0, 2π)` binned into `N` slices.
    Full,
}

impl SliceWidth {
    pub fn radians(&self, n_slices: u32) -> f64 {
        match self {
            SliceWidth::Printed => PI / f64::from(n_slices),
            SliceWidth::Full => 2.0 * PI / f64::from(n_slices),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SliceWidth::Printed => "printed",
            SliceWidth::Full => "full",
        }
    }
}

/// Coefficient of the signal term in the mismatch single-photon QBER.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MismatchQberCoefficient {
    /// Detector efficiency `eta_det`.
    #[default]
    DetectorEfficiency,
    /// Phase-misalignment probability `e_d`.
    Misalignment,
}

impl MismatchQberCoefficient {
    pub fn name(&self) -> &'static str {
        match self {
            MismatchQberCoefficient::DetectorEfficiency => "detector-efficiency",
            MismatchQberCoefficient::Misalignment => "misalignment",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    /// Mean photon number of Alice's three-bin pulse.
    pub mu_a: f64,
    pub mu_b: f64,
    /// Dark-count probability per detector per time bin.
    pub p_dark: f64,
    pub channel: ChannelSpec,
    /// Error-correction inefficiency.
    pub f_ec: f64,
    /// Phase-misalignment error probability.
    pub e_d: f64,
    pub n_slices: u32,
    /// Slice offset `m` used by the key rate; 0 means same-slice sifting.
    pub slice_index: u32,
    pub frame: PolarizationFrame,
    pub slice_width: SliceWidth,
    pub qber_coefficient: MismatchQberCoefficient,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            mu_a: 0.1,
            mu_b: 0.1,
            p_dark: 1e-6,
            channel: ChannelSpec {
                distance_km: 0.0,
                gamma_db_per_km: 0.2,
                eta_det: 0.145,
            },
            f_ec: 1.16,
            e_d: 0.03,
            n_slices: 16,
            slice_index: 0,
            frame: PolarizationFrame::aligned(),
            slice_width: SliceWidth::Printed,
            qber_coefficient: MismatchQberCoefficient::DetectorEfficiency,
        }
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        ensure(self.mu_a > 0.0 && self.mu_a.is_finite(), "mu_a", self.mu_a, "must be positive")?;
        ensure(self.mu_b > 0.0 && self.mu_b.is_finite(), "mu_b", self.mu_b, "must be positive")?;
        ensure(
            (0.0..1.0).contains(&self.p_dark),
            "p_dark",
            self.p_dark,
            "must lie in [0, 1)",
        )?;
        self.channel.validate()?;
        ensure(self.f_ec >= 1.0 && self.f_ec.is_finite(), "f_ec", self.f_ec, "must be at least 1")?;
        ensure((0.0..=1.0).contains(&self.e_d), "e_d", self.e_d, "must lie in [0, 1]")?;
        ensure(self.n_slices >= 1, "n_slices", f64::from(self.n_slices), "must be at least 1")?;
        ensure(
            self.slice_index < self.n_slices,
            "slice_index",
            f64::from(self.slice_index),
            "must be below n_slices",
        )
    }

    pub fn with_distance(mut self, distance_km: f64) -> Self {
        self.channel.distance_km = distance_km;
        self
    }

    pub fn with_mismatch(mut self, frame: PolarizationFrame) -> Self {
        self.frame = frame;
        self
    }

    pub fn eta_a(&self) -> f64 {
        self.channel.transmittance()
    }

    pub fn eta_b(&self) -> f64 {
        self.channel.transmittance()
    }

    fn mismatch_coefficient(&self) -> f64 {
        match self.qber_coefficient {
            MismatchQberCoefficient::DetectorEfficiency => self.channel.eta_det,
            MismatchQberCoefficient::Misalignment => self.e_d,
        }
    }
}

/// Key rate with the raw (possibly negative) value kept next to the clamped one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRate {
    pub raw: f64,
    pub clamped: f64,
}

impl KeyRate {
    fn new(raw: f64) -> Self {
        Self {
            raw,
            clamped: raw.max(0.0),
        }
    }
}

// ---------------------------------------------------------------------------
// Single-photon inputs, no polarization mismatch.

/// Per-outcome pieces shared by the single-photon yield and error formulas:
/// `(1−p)⁴`, the dark-count bracket, and the signal term `η_aη_b/18`.
struct SinglePhotonTerms {
    prefactor: f64,
    signal: f64,
    dark: f64,
}

impl SinglePhotonTerms {
    fn new(params: &ProtocolParams) -> Self {
        let (ea, eb, p) = (params.eta_a(), params.eta_b(), params.p_dark);
        Self {
            prefactor: (1.0 - p).powi(4),
            signal: ea * eb / 18.0,
            dark: p * ((ea + eb) / 3.0 - 5.0 * ea * eb / 9.0) + p * p * (1.0 - ea) * (1.0 - eb),
        }
    }
}

/// Single-photon yield summed over the outcomes a scheme keeps.
pub fn single_photon_yield(params: &ProtocolParams, scheme: SiftScheme) -> f64 {
    let t = SinglePhotonTerms::new(params);
    scheme.row_count() as f64 * t.prefactor * (t.signal + t.dark)
}

pub fn yield_single_photon_improved(params: &ProtocolParams) -> f64 {
    single_photon_yield(params, SiftScheme::Improved)
}

/// Bit error rate: every dark-count contribution is booked as an error and
/// the signal contributes `e_d`. The ratio does not depend on the scheme.
pub fn qber_single_photon_improved(params: &ProtocolParams) -> Result<f64> {
    let t = SinglePhotonTerms::new(params);
    let total = t.signal + t.dark;
    if total <= 0.0 || t.prefactor == 0.0 {
        return Err(Error::UndefinedQber);
    }
    Ok((params.e_d * t.signal + t.dark) / total)
}

/// `R = Y₁₁[1 − f·H(e_b) − H(e_p)]` with the phase error taken at its bound `e_p = e_b`.
pub fn key_rate_single_photon(params: &ProtocolParams, scheme: SiftScheme) -> Result<KeyRate> {
    let y11 = single_photon_yield(params, scheme);
    let h = entropy_of_rate(qber_single_photon_improved(params)?, "e_b")?;
    Ok(KeyRate::new(y11 * (1.0 - params.f_ec * h - h)))
}

// ---------------------------------------------------------------------------
// Weak coherent inputs with polarization mismatch.

/// Shape parameters of the sliced gain and error integrands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceIntegrand {
    /// `√(η_aμ_aη_bμ_b)/3`
    pub x: f64,
    /// `ln y` with `y = (1−p)e^{−μ′/6}`.
    pub ln_y: f64,
    pub cos_phi: f64,
}

impl SliceIntegrand {
    pub fn new(params: &ProtocolParams) -> Self {
        let (ma, mb) = (params.eta_a() * params.mu_a, params.eta_b() * params.mu_b);
        Self {
            x: (ma * mb).sqrt() / 3.0,
            ln_y: (-params.p_dark).ln_1p() - (ma + mb) / 6.0,
            cos_phi: params.frame.overlap(),
        }
    }

    pub fn y(&self) -> f64 {
        self.ln_y.exp()
    }

    /// `4y⁴[(ζ−y)² + (ζ⁻¹−y)²]`, which expands to the printed
    /// `4y⁴[ζ²+ζ⁻²−2yζ−2yζ⁻¹+2y²]`.
    pub fn gain(&self, delta_theta: f64) -> f64 {
        let xc = self.x * delta_theta.cos() * self.cos_phi;
        let one_minus_y = -self.ln_y.exp_m1();
        let up = xc.exp_m1() + one_minus_y;
        let down = (-xc).exp_m1() + one_minus_y;
        4.0 * (4.0 * self.ln_y).exp() * (up * up + down * down)
    }

    /// `8y⁴(1−yζ)(1−yζ⁻¹)`, the printed `8y⁴[1−yζ−yζ⁻¹+y²]`.
    pub fn error(&self, delta_theta: f64) -> f64 {
        let xc = self.x * delta_theta.cos() * self.cos_phi;
        let a = -(self.ln_y + xc).exp_m1();
        let b = -(self.ln_y - xc).exp_m1();
        8.0 * (4.0 * self.ln_y).exp() * a * b
    }
}

/// `Q_m` and `E_mQ_m` for one slice offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceIntegrals {
    pub gain: f64,
    pub error_gain: f64,
}

impl SliceIntegrals {
    pub fn qber(&self) -> Result<f64> {
        if self.gain <= 0.0 {
            return Err(Error::UndefinedQber);
        }
        Ok(self.error_gain / self.gain)
    }
}

/// Normalization and the θ_a, θ_b integration intervals.
type SliceDomain = (f64, (f64, f64), (f64, f64));

fn slice_domain(params: &ProtocolParams, m: u32) -> Result<SliceDomain> {
    params.validate()?;
    ensure(m < params.n_slices, "m", f64::from(m), "slice index must be below n_slices")?;
    let w = params.slice_width.radians(params.n_slices);
    let norm = 1.0 / (f64::from(params.n_slices) * w * w);
    let mf = f64::from(m);
    Ok((norm, (mf * w, (mf + 1.0) * w), (0.0, w)))
}

/// `(1/N)(1/w²)∫∫ dθ_b dθ_a` over `θ_b ∈ [0,w]`, `θ_a ∈ [mw,(m+1)w]`, adaptive
/// to relative tolerance 1e-9.
pub fn slice_integrals(params: &ProtocolParams, m: u32) -> Result<SliceIntegrals> {
    let (norm, ta, tb) = slice_domain(params, m)?;
    let f = SliceIntegrand::new(params);
    let quad = Quadrature2d::default();
    let gain = quad.integrate(|a, b| f.gain(a - b), ta, tb)?.value;
    let error_gain = quad.integrate(|a, b| f.error(a - b), ta, tb)?.value;
    Ok(SliceIntegrals {
        gain: norm * gain,
        error_gain: norm * error_gain,
    })
}

/// Same integrals on a fixed grid of `panels × panels` Gauss–Legendre cells.
pub fn slice_integrals_with_panels(
    params: &ProtocolParams,
    m: u32,
    order: usize,
    panels: usize,
) -> Result<SliceIntegrals> {
    let (norm, ta, tb) = slice_domain(params, m)?;
    let f = SliceIntegrand::new(params);
    let rule = GaussLegendre::new(order);
    Ok(SliceIntegrals {
        gain: norm * rule.integrate_2d(|a, b| f.gain(a - b), ta, tb, panels),
        error_gain: norm * rule.integrate_2d(|a, b| f.error(a - b), ta, tb, panels),
    })
}

pub fn gain_sliced(params: &ProtocolParams, m: u32) -> Result<f64> {
    Ok(slice_integrals(params, m)?.gain)
}

pub fn qber_sliced(params: &ProtocolParams, m: u32) -> Result<f64> {
    slice_integrals(params, m)?.qber()
}

/// Single-photon yield under mismatch: `8·Y₁₁^{(c,c,0)}` with the `(1+cos²Φ)` factor.
pub fn yield_single_photon_mismatch(params: &ProtocolParams) -> f64 {
    let t = MismatchTerms::new(params);
    8.0 * t.prefactor * (t.signal + t.dark)
}

pub fn qber_single_photon_mismatch(params: &ProtocolParams) -> Result<f64> {
    let t = MismatchTerms::new(params);
    let total = t.signal + t.dark;
    if total <= 0.0 || t.prefactor == 0.0 {
        return Err(Error::UndefinedQber);
    }
    Ok((params.mismatch_coefficient() * t.signal + t.dark) / total)
}

struct MismatchTerms {
    prefactor: f64,
    signal: f64,
    dark: f64,
}

impl MismatchTerms {
    fn new(params: &ProtocolParams) -> Self {
        let (ea, eb, p) = (params.eta_a(), params.eta_b(), params.p_dark);
        let c2 = params.frame.overlap().powi(2);
        Self {
            prefactor: (1.0 - p).powi(4),
            signal: ea * eb / 18.0 * (1.0 + c2),
            dark: p * ((ea + eb) / 3.0 + ea * eb / 9.0 * (c2 - 6.0))
                + (1.0 - ea) * (1.0 - eb) * p * p,
        }
    }
}

/// Every intermediate of the weak-coherent key rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateReport {
    /// Mismatch single-photon yield (eight outcomes).
    pub y11: f64,
    /// Twelve-outcome single-photon yield, no mismatch term.
    pub y11_improved: f64,
    pub e11: f64,
    pub q11: f64,
    pub q_m: f64,
    pub e_m: f64,
    pub r_sec_raw: f64,
    pub r_sec: f64,
}

impl KeyRateReport {
    /// Probability of a kept round. `Q_m` counts correct outcomes twice over
    /// and `E_mQ_m` counts wrong ones twice over, so the total is their mean.
    pub fn conclusive_gain(&self) -> f64 {
        0.5 * (self.q_m + self.e_m * self.q_m)
    }

    /// Fraction of kept rounds with disagreeing bits.
    pub fn conclusive_qber(&self) -> f64 {
        let eq = self.e_m * self.q_m;
        if self.q_m + eq > 0.0 {
            eq / (self.q_m + eq)
        } else {
            f64::NAN
        }
    }
}

/// `R_sec = (1/N)Q₁₁(1−H(e₁₁)) − Q_m·f·H(E_m)` at the configured slice offset.
pub fn secure_key_rate_wcs(params: &ProtocolParams) -> Result<KeyRateReport> {
    params.validate()?;
    let y11 = yield_single_photon_mismatch(params);
    let e11 = qber_single_photon_mismatch(params)?;
    let q11 = params.mu_a * params.mu_b * (-params.mu_a - params.mu_b).exp() * y11;
    let s = slice_integrals(params, params.slice_index)?;
    let e_m = s.qber()?;
    let raw = q11 * (1.0 - entropy_of_rate(e11, "e11")?) / f64::from(params.n_slices)
        - s.gain * params.f_ec * entropy_of_rate(e_m, "E_m")?;
    Ok(KeyRateReport {
        y11,
        y11_improved: yield_single_photon_improved(params),
        e11,
        q11,
        q_m: s.gain,
        e_m,
        r_sec_raw: raw,
        r_sec: raw.max(0.0),
    })
}

/// Smallest mismatch angle in `[lo, hi]` degrees where the raw weak-coherent
/// rate reaches zero, by bisection to `tol` degrees. `None` when the rate is
/// not positive at `lo` or still positive at `hi`.
pub fn mismatch_threshold_deg(
    params: &ProtocolParams,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<Option<f64>> {
    let rate = |deg: f64| -> Result<f64> {
        let p = params.with_mismatch(PolarizationFrame::new(deg)?);
        Ok(secure_key_rate_wcs(&p)?.r_sec_raw)
    };
    if rate(lo)? <= 0.0 || rate(hi)? > 0.0 {
        return Ok(None);
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if rate(mid)? > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(Some(0.5 * (a + b)))
}
