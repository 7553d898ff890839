//! Hong–Ou–Mandel interference of phase-randomized weak coherent Gaussian
//! pulses with unequal widths, and the fiber-dispersion link between channel
//! length asymmetry and pulse-width mismatch.

use crate::bessel::bessel_i0_minus_one;
use crate::error::{ensure, Error, Result};
use crate::optics::PortMeans;

/// `FWHM = 2σ√(2 ln 2)`.
pub fn fwhm_from_sigma(sigma: f64) -> f64 {
    2.0 * sigma * (2.0 * std::f64::consts::LN_2).sqrt()
}

pub fn sigma_from_fwhm(fwhm: f64) -> f64 {
    fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt())
}

/// Sign of the detuning exponent in the overlap factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DetuningSign {
    /// `exp(+Δω²σ_a²σ_b²/(σ_a²+σ_b²))`, which grows with detuning.
    #[default]
    Printed,
    /// `exp(−Δω²σ_a²σ_b²/(σ_a²+σ_b²))`, the decaying Gaussian overlap.
    Physical,
}

impl DetuningSign {
    pub fn name(&self) -> &'static str {
        match self {
            DetuningSign::Printed => "printed",
            DetuningSign::Physical => "physical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPulsePair {
    /// Mean photon number of each pulse.
    pub mu: f64,
    pub sigma_a_ps: f64,
    pub sigma_b_ps: f64,
    /// `ω_a − ω_b` in rad/ps.
    pub delta_omega: f64,
    pub detuning_sign: DetuningSign,
}

impl GaussianPulsePair {
    pub fn new(mu: f64, sigma_a_ps: f64, sigma_b_ps: f64, delta_omega: f64) -> Result<Self> {
        let pair = Self {
            mu,
            sigma_a_ps,
            sigma_b_ps,
            delta_omega,
            detuning_sign: DetuningSign::default(),
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn from_fwhm(mu: f64, fwhm_a_ps: f64, fwhm_b_ps: f64, delta_omega: f64) -> Result<Self> {
        Self::new(mu, sigma_from_fwhm(fwhm_a_ps), sigma_from_fwhm(fwhm_b_ps), delta_omega)
    }

    pub fn with_detuning_sign(mut self, sign: DetuningSign) -> Self {
        self.detuning_sign = sign;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.mu > 0.0 && self.mu.is_finite(), "mu", self.mu, "must be positive")?;
        ensure(
            self.sigma_a_ps > 0.0 && self.sigma_a_ps.is_finite(),
            "sigma_a_ps",
            self.sigma_a_ps,
            "must be positive",
        )?;
        ensure(
            self.sigma_b_ps > 0.0 && self.sigma_b_ps.is_finite(),
            "sigma_b_ps",
            self.sigma_b_ps,
            "must be positive",
        )?;
        ensure(self.delta_omega.is_finite(), "delta_omega", self.delta_omega, "must be finite")
    }
}

/// Temporal mode overlap `√(2σ_aσ_b/(σ_a²+σ_b²))·exp(±Δω²σ_a²σ_b²/(σ_a²+σ_b²))`.
pub fn overlap_factor(pair: &GaussianPulsePair) -> f64 {
    let (a, b) = (pair.sigma_a_ps, pair.sigma_b_ps);
    let s2 = a * a + b * b;
    let width = (2.0 * a * b / s2).sqrt();
    let exponent = pair.delta_omega.powi(2) * a * a * b * b / s2;
    match pair.detuning_sign {
        DetuningSign::Printed => width * exponent.exp(),
        DetuningSign::Physical => width * (-exponent).exp(),
    }
}

/// `μ_{c,d} = μ ± μk cos Δφ` for equal input intensities.
pub fn output_means(pair: &GaussianPulsePair, delta_phi: f64) -> PortMeans {
    let cross = pair.mu * overlap_factor(pair) * delta_phi.cos();
    PortMeans {
        mu_c: pair.mu + cross,
        mu_d: pair.mu - cross,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityReport {
    pub overlap_k: f64,
    pub p_c: f64,
    pub p_d: f64,
    pub p_cd: f64,
    pub v_hom: f64,
}

/// Phase-averaged click and coincidence probabilities and the visibility
/// `V = 1 − p_cd/(p_c p_d)`.
pub fn click_and_coincidence(pair: &GaussianPulsePair) -> Result<VisibilityReport> {
    pair.validate()?;
    let k = overlap_factor(pair);
    let mu = pair.mu;
    let e = (-mu).exp();
    let i0m1 = bessel_i0_minus_one(mu * k)?;
    let one_minus_e = -(-mu).exp_m1();
    // 1 − e^{−μ}I₀(μk)
    let p_c = one_minus_e - e * i0m1;
    // 1 − 2e^{−μ}I₀(μk) + e^{−2μ}
    let p_cd = one_minus_e * one_minus_e - 2.0 * e * i0m1;
    if p_c * p_c <= 0.0 {
        return Err(Error::UndefinedVisibility);
    }
    Ok(VisibilityReport {
        overlap_k: k,
        p_c,
        p_d: p_c,
        p_cd,
        v_hom: 1.0 - p_cd / (p_c * p_c),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionSpec {
    /// Dispersion parameter D in ps/(nm·km).
    pub d_ps_per_nm_km: f64,
    pub delta_l_km: f64,
    /// Source spectral width in nm.
    pub delta_lambda_nm: f64,
}

impl DispersionSpec {
    /// Standard single-mode fiber with a 10 pm source.
    pub fn standard(delta_l_km: f64) -> Self {
        Self {
            d_ps_per_nm_km: 17.0,
            delta_l_km,
            delta_lambda_nm: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d_ps_per_nm_km", self.d_ps_per_nm_km),
            ("delta_l_km", self.delta_l_km),
            ("delta_lambda_nm", self.delta_lambda_nm),
        ] {
            ensure(v >= 0.0 && v.is_finite(), name, v, "must be finite and non-negative")?;
        }
        Ok(())
    }
}

/// `Δ_FWHM = D·ΔL·Δλ` in ps.
pub fn fwhm_mismatch_from_dispersion(spec: &DispersionSpec) -> Result<f64> {
    spec.validate()?;
    Ok(spec.d_ps_per_nm_km * spec.delta_l_km * spec.delta_lambda_nm)
}

/// Inverse of [`fwhm_mismatch_from_dispersion`]: the length asymmetry that
/// produces a given width mismatch.
pub fn length_mismatch_for_fwhm(d_ps_per_nm_km: f64, delta_lambda_nm: f64, delta_fwhm_ps: f64) -> Result<f64> {
    let per_km = d_ps_per_nm_km * delta_lambda_nm;
    ensure(per_km > 0.0 && per_km.is_finite(), "d_ps_per_nm_km*delta_lambda_nm", per_km, "must be positive")?;
    Ok(delta_fwhm_ps / per_km)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityPoint {
    pub delta_fwhm_ps: f64,
    pub report: VisibilityReport,
}

fn pair_for_mismatch(mu: f64, base_fwhm_ps: f64, delta_fwhm_ps: f64) -> Result<GaussianPulsePair> {
    ensure(base_fwhm_ps > 0.0 && base_fwhm_ps.is_finite(), "base_fwhm_ps", base_fwhm_ps, "must be positive")?;
    GaussianPulsePair::from_fwhm(mu, base_fwhm_ps, base_fwhm_ps + delta_fwhm_ps, 0.0)
}

/// Visibility with pulse A at `base_fwhm_ps` and pulse B widened by each Δ.
pub fn visibility_vs_fwhm_curve(
    mu: f64,
    base_fwhm_ps: f64,
    delta_fwhm_grid: &[f64],
) -> Result<Vec<VisibilityPoint>> {
    delta_fwhm_grid
        .iter()
        .map(|&d| {
            Ok(VisibilityPoint {
                delta_fwhm_ps: d,
                report: click_and_coincidence(&pair_for_mismatch(mu, base_fwhm_ps, d)?)?,
            })
        })
        .collect()
}

/// Width mismatch Δ ≥ 0 at which the visibility falls to `v_target`.
/// `None` when the target is above the matched-width visibility.
pub fn delta_fwhm_for_visibility(mu: f64, base_fwhm_ps: f64, v_target: f64) -> Result<Option<f64>> {
    let v = |d: f64| -> Result<f64> { Ok(click_and_coincidence(&pair_for_mismatch(mu, base_fwhm_ps, d)?)?.v_hom) };
    let v0 = v(0.0)?;
    if v_target > v0 {
        return Ok(None);
    }
    if v_target == v0 {
        return Ok(Some(0.0));
    }
    let mut hi = base_fwhm_ps;
    while v(hi)? > v_target {
        hi *= 2.0;
        if hi > 1e9 * base_fwhm_ps {
            return Ok(None);
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-10 * base_fwhm_ps.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if v(mid)? > v_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}
