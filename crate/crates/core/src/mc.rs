//! Round-by-round Monte Carlo of the protocol.
//!
//! Each round draws Alice's and Bob's bits and global phases, produces a
//! six-slot click record at Charlie, and sifts it under both schemes. Rounds
//! are grouped into fixed-size chunks, each with its own ChaCha stream, so the
//! result depends only on the seed and never on thread count or scheduling.

use std::f64::consts::TAU;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{ensure, Error, Result};
use crate::keyrate::{
    secure_key_rate_wcs, single_photon_yield, yield_single_photon_mismatch, ProtocolParams, SliceWidth,
};
use crate::optics::{bs_output_means, click_probability, CoherentAmplitude};
use crate::oracle::{outcome_distribution, sift_statistics, OracleParams};
use crate::sifting::{sift, DetectionPattern, EncodingBits, SiftScheme, SiftVerdict};

/// Rounds per independently seeded chunk.
pub const CHUNK_ROUNDS: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceModel {
    /// One photon per party per round.
    SinglePhoton,
    /// Phase-randomized weak coherent pulses.
    WeakCoherent,
}

impl SourceModel {
    pub fn name(&self) -> &'static str {
        match self {
            SourceModel::SinglePhoton => "single-photon",
            SourceModel::WeakCoherent => "weak-coherent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub params: ProtocolParams,
    pub source_model: SourceModel,
    pub n_rounds: u64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        ensure(self.n_rounds >= 1, "n_rounds", self.n_rounds as f64, "must be at least 1")
    }
}

/// Everything that happened in one round.
///
/// Single-photon rounds carry no global phase: phases are left at zero and
/// both slices at 0, since a Fock state is insensitive to them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRecord {
    pub alice_bits: EncodingBits,
    pub bob_bits: EncodingBits,
    pub theta_a: f64,
    pub theta_b: f64,
    pub slice_a: u32,
    pub slice_b: u32,
    pub pattern: DetectionPattern,
    /// Twelve-outcome sifting, with rounds from different slices discarded.
    pub verdict: SiftVerdict,
}

impl RoundRecord {
    pub fn same_slice(&self) -> bool {
        self.slice_a == self.slice_b
    }

    /// Verdict under either scheme, honoring the slice condition.
    pub fn verdict_under(&self, scheme: SiftScheme) -> SiftVerdict {
        if self.same_slice() {
            sift(&self.pattern, self.alice_bits, self.bob_bits, scheme)
        } else {
            SiftVerdict::discarded(scheme)
        }
    }
}

pub fn slice_of(theta: f64, n_slices: u32) -> u32 {
    ((theta / TAU * f64::from(n_slices)) as u32).min(n_slices - 1)
}

/// Per-encoding cumulative outcome tables for single-photon sampling.
struct PhotonTables {
    cdf: Vec<[f64; DetectionPattern::COUNT]>,
}

impl PhotonTables {
    fn new(params: &ProtocolParams) -> Result<Self> {
        let oracle = OracleParams::new(params.frame, params.eta_a(), params.eta_b(), params.p_dark)?;
        let mut cdf = Vec::with_capacity(16);
        for a in EncodingBits::all() {
            for b in EncodingBits::all() {
                let d = outcome_distribution(a, b, &oracle);
                let mut acc = 0.0;
                let mut row = [0.0; DetectionPattern::COUNT];
                for (slot, p) in row.iter_mut().zip(d.0) {
                    acc += p;
                    *slot = acc;
                }
                cdf.push(row);
            }
        }
        Ok(Self { cdf })
    }

    fn sample(&self, alice: EncodingBits, bob: EncodingBits, u: f64) -> DetectionPattern {
        let row = &self.cdf[encoding_index(alice) * 4 + encoding_index(bob)];
        let total = row[DetectionPattern::COUNT - 1];
        let i = row.partition_point(|&c| c <= u * total);
        DetectionPattern::from_index(i.min(DetectionPattern::COUNT - 1))
    }
}

fn encoding_index(bits: EncodingBits) -> usize {
    usize::from(bits.b1) * 2 + usize::from(bits.b2)
}

enum Engine {
    Photon(PhotonTables),
    Coherent {
        alpha: CoherentAmplitude,
        beta: CoherentAmplitude,
    },
}

struct Simulator {
    params: ProtocolParams,
    engine: Engine,
}

impl Simulator {
    fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let p = config.params;
        let engine = match config.source_model {
            SourceModel::SinglePhoton => Engine::Photon(PhotonTables::new(&p)?),
            SourceModel::WeakCoherent => Engine::Coherent {
                alpha: CoherentAmplitude::from_mean_photons(p.eta_a() * p.mu_a / 3.0, 0.0)?,
                beta: CoherentAmplitude::from_mean_photons(p.eta_b() * p.mu_b / 3.0, 0.0)?,
            },
        };
        Ok(Self { params: p, engine })
    }

    fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chunk);
        rng
    }

    fn round(&self, rng: &mut ChaCha8Rng) -> RoundRecord {
        let bits: u8 = rng.random();
        let alice = EncodingBits::new(bits & 1 != 0, bits & 2 != 0);
        let bob = EncodingBits::new(bits & 4 != 0, bits & 8 != 0);
        let n = self.params.n_slices;
        let (theta_a, theta_b, pattern) = match &self.engine {
            Engine::Photon(tables) => (0.0, 0.0, tables.sample(alice, bob, rng.random())),
            Engine::Coherent { alpha, beta } => {
                let theta_a = rng.random::<f64>() * TAU;
                let theta_b = rng.random::<f64>() * TAU;
                let mut pattern = DetectionPattern::default();
                for bin in 0..3 {
                    let delta = theta_a - theta_b + alice.phase(bin) - bob.phase(bin);
                    let m = bs_output_means(*alpha, *beta, self.params.frame, delta);
                    pattern.c[bin] = rng.random::<f64>() < click_probability(m.mu_c, self.params.p_dark);
                    pattern.d[bin] = rng.random::<f64>() < click_probability(m.mu_d, self.params.p_dark);
                }
                (theta_a, theta_b, pattern)
            }
        };
        let (slice_a, slice_b) = match self.engine {
            Engine::Photon(_) => (0, 0),
            Engine::Coherent { .. } => (slice_of(theta_a, n), slice_of(theta_b, n)),
        };
        let verdict = if slice_a == slice_b {
            sift(&pattern, alice, bob, SiftScheme::Improved)
        } else {
            SiftVerdict::discarded(SiftScheme::Improved)
        };
        RoundRecord {
            alice_bits: alice,
            bob_bits: bob,
            theta_a,
            theta_b,
            slice_a,
            slice_b,
            pattern,
            verdict,
        }
    }

    fn chunk(&self, seed: u64, chunk: u64, rounds: u64) -> impl Iterator<Item = RoundRecord> + '_ {
        let mut rng = Self::chunk_rng(seed, chunk);
        (0..rounds).map(move |_| self.round(&mut rng))
    }
}

fn chunk_plan(n_rounds: u64) -> impl Iterator<Item = (u64, u64)> {
    let chunks = n_rounds.div_ceil(CHUNK_ROUNDS);
    (0..chunks).map(move |k| (k, CHUNK_ROUNDS.min(n_rounds - k * CHUNK_ROUNDS)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SchemeCounts {
    pub kept: u64,
    pub errors: u64,
    /// Kept rounds per table row, rows 1..=12 at indices 0..12.
    pub rows: [u64; 12],
}

impl SchemeCounts {
    pub fn correct(&self) -> u64 {
        self.kept - self.errors
    }

    fn add(&mut self, v: &SiftVerdict) {
        if let crate::sifting::SiftStatus::Conclusive(row) = v.status {
            self.kept += 1;
            self.rows[usize::from(row.number()) - 1] += 1;
            if v.is_error() == Some(true) {
                self.errors += 1;
            }
        }
    }

    fn merge(mut self, o: Self) -> Self {
        self.kept += o.kept;
        self.errors += o.errors;
        for (a, b) in self.rows.iter_mut().zip(o.rows) {
            *a += b;
        }
        self
    }
}

/// Integer tallies; merging is addition, so any chunk order gives the same sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RoundCounts {
    pub total: u64,
    pub same_slice: u64,
    pub original: SchemeCounts,
    pub improved: SchemeCounts,
}

impl RoundCounts {
    pub fn add(&mut self, r: &RoundRecord) {
        self.total += 1;
        if r.same_slice() {
            self.same_slice += 1;
        }
        self.original.add(&r.verdict_under(SiftScheme::Original));
        self.improved.add(&r.verdict);
    }

    fn merge(self, o: Self) -> Self {
        Self {
            total: self.total + o.total,
            same_slice: self.same_slice + o.same_slice,
            original: self.original.merge(o.original),
            improved: self.improved.merge(o.improved),
        }
    }

    pub fn scheme(&self, scheme: SiftScheme) -> &SchemeCounts {
        match scheme {
            SiftScheme::Original => &self.original,
            SiftScheme::Improved => &self.improved,
        }
    }
}

/// Point estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

impl Estimate {
    /// `k/n` scaled by `scale`, standard error from the observed fraction.
    pub fn binomial(successes: u64, trials: u64, scale: f64) -> Option<Self> {
        (trials > 0).then(|| {
            let p = successes as f64 / trials as f64;
            Self {
                value: scale * p,
                std_err: scale * (p * (1.0 - p) / trials as f64).sqrt(),
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeStats {
    /// Kept rounds per round sent.
    pub gain_hat: Estimate,
    /// Twice the rate of kept rounds with agreeing bits.
    pub correct_gain_hat: Estimate,
    /// Disagreeing fraction of kept rounds; `None` when nothing was kept.
    pub qber_hat: Option<Estimate>,
    /// Kept rounds per same-slice round.
    pub yield_hat: Option<Estimate>,
}

impl SchemeStats {
    fn from_counts(c: &SchemeCounts, rounds: &RoundCounts) -> Self {
        Self {
            gain_hat: Estimate::binomial(c.kept, rounds.total, 1.0).expect("at least one round"),
            correct_gain_hat: Estimate::binomial(c.correct(), rounds.total, 2.0).expect("at least one round"),
            qber_hat: Estimate::binomial(c.errors, c.kept, 1.0),
            yield_hat: Estimate::binomial(c.kept, rounds.same_slice, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalReport {
    pub config: SimConfig,
    pub rounds_used: RoundCounts,
    pub original: SchemeStats,
    pub improved: SchemeStats,
}

impl EmpiricalReport {
    fn new(config: SimConfig, counts: RoundCounts) -> Self {
        Self {
            config,
            original: SchemeStats::from_counts(&counts.original, &counts),
            improved: SchemeStats::from_counts(&counts.improved, &counts),
            rounds_used: counts,
        }
    }

    pub fn scheme(&self, scheme: SiftScheme) -> &SchemeStats {
        match scheme {
            SiftScheme::Original => &self.original,
            SiftScheme::Improved => &self.improved,
        }
    }
}

/// Run the configured number of rounds, chunks in parallel.
pub fn simulate(config: &SimConfig) -> Result<EmpiricalReport> {
    let sim = Simulator::new(config)?;
    let chunks: Vec<_> = chunk_plan(config.n_rounds).collect();
    let counts = chunks
        .into_par_iter()
        .map(|(k, n)| {
            let mut c = RoundCounts::default();
            for r in sim.chunk(config.seed, k, n) {
                c.add(&r);
            }
            c
        })
        .reduce(RoundCounts::default, RoundCounts::merge);
    Ok(EmpiricalReport::new(*config, counts))
}

/// Same rounds as [`simulate`], returned individually and in order.
pub fn simulate_records(config: &SimConfig) -> Result<Vec<RoundRecord>> {
    let sim = Simulator::new(config)?;
    let mut out = Vec::with_capacity(config.n_rounds as usize);
    for (k, n) in chunk_plan(config.n_rounds) {
        out.extend(sim.chunk(config.seed, k, n));
    }
    Ok(out)
}

/// Sifted error rate with a Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QberEstimate {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub kept: u64,
    pub errors: u64,
}

pub fn estimate_qber(records: &[RoundRecord], scheme: SiftScheme) -> Result<QberEstimate> {
    let mut c = SchemeCounts::default();
    for r in records {
        c.add(&r.verdict_under(scheme));
    }
    wilson(c.errors, c.kept)
}

fn wilson(errors: u64, kept: u64) -> Result<QberEstimate> {
    if kept == 0 {
        return Err(Error::NoConclusiveRounds);
    }
    const Z: f64 = 1.959_963_984_540_054;
    let n = kept as f64;
    let p = errors as f64 / n;
    let denom = 1.0 + Z * Z / n;
    let centre = (p + Z * Z / (2.0 * n)) / denom;
    let half = Z * (p * (1.0 - p) / n + Z * Z / (4.0 * n * n)).sqrt() / denom;
    Ok(QberEstimate {
        value: p,
        lower: (centre - half).max(0.0),
        upper: (centre + half).min(1.0),
        kept,
        errors,
    })
}

/// What the Monte Carlo is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    /// `2·P(kept ∧ bits agree)`, eight outcomes; the sliced gain `Q_0` or
    /// the mismatch single-photon yield.
    RelationWeightedGain,
    /// `P(kept)`, eight outcomes.
    ConclusiveGainOriginal,
    /// `P(kept)`, twelve outcomes.
    ConclusiveGainImproved,
    /// `P(bits disagree | kept)`, eight outcomes.
    QberOriginal,
    /// `P(bits disagree | kept)`, twelve outcomes.
    QberImproved,
}

impl Quantity {
    pub fn name(&self) -> &'static str {
        match self {
            Quantity::RelationWeightedGain => "relation_weighted_gain",
            Quantity::ConclusiveGainOriginal => "conclusive_gain_original",
            Quantity::ConclusiveGainImproved => "conclusive_gain_improved",
            Quantity::QberOriginal => "qber_original",
            Quantity::QberImproved => "qber_improved",
        }
    }

    /// `(successes, trials, scale)` behind the empirical value.
    fn observation(&self, c: &RoundCounts) -> (u64, u64, f64) {
        match self {
            Quantity::RelationWeightedGain => (c.original.correct(), c.total, 2.0),
            Quantity::ConclusiveGainOriginal => (c.original.kept, c.total, 1.0),
            Quantity::ConclusiveGainImproved => (c.improved.kept, c.total, 1.0),
            Quantity::QberOriginal => (c.original.errors, c.original.kept, 1.0),
            Quantity::QberImproved => (c.improved.errors, c.improved.kept, 1.0),
        }
    }
}

/// Analytic values for a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticTargets {
    pub values: Vec<(Quantity, f64)>,
}

impl AnalyticTargets {
    /// Weak-coherent rounds are compared with the sliced integrals at
    /// full slice width, which is what uniform phases binned into `N` slices
    /// produce. Single-photon rounds are compared with the closed-form yields
    /// and with the oracle's exact sifted error rate.
    pub fn for_config(config: &SimConfig) -> Result<Self> {
        let p = config.params;
        let values = match config.source_model {
            SourceModel::WeakCoherent => {
                let full = ProtocolParams {
                    slice_width: SliceWidth::Full,
                    slice_index: 0,
                    ..p
                };
                let r = secure_key_rate_wcs(&full)?;
                vec![
                    (Quantity::RelationWeightedGain, r.q_m),
                    (Quantity::ConclusiveGainOriginal, r.conclusive_gain()),
                    (Quantity::QberOriginal, r.conclusive_qber()),
                ]
            }
            SourceModel::SinglePhoton => {
                let oracle = OracleParams::new(p.frame, p.eta_a(), p.eta_b(), p.p_dark)?;
                let stats = sift_statistics(&oracle, SiftScheme::Improved);
                vec![
                    (Quantity::RelationWeightedGain, yield_single_photon_mismatch(&p)),
                    (Quantity::ConclusiveGainOriginal, single_photon_yield(&p, SiftScheme::Original)),
                    (Quantity::ConclusiveGainImproved, single_photon_yield(&p, SiftScheme::Improved)),
                    (Quantity::QberImproved, stats.qber().unwrap_or(f64::NAN)),
                ]
            }
        };
        Ok(Self { values })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Nothing observed and nothing expected; the comparison carries no information.
    NoEvents,
}

impl CheckStatus {
    pub fn label(&self) -> &'static str {
        match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "FAIL",
            CheckStatus::NoEvents => "no events",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerRow {
    pub quantity: Quantity,
    pub analytic: f64,
    pub empirical: f64,
    /// Binomial standard error at the analytic probability.
    pub std_err: f64,
    pub z: Option<f64>,
    pub status: CheckStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationLedger {
    pub label: String,
    pub rows: Vec<LedgerRow>,
}

impl ValidationLedger {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.status != CheckStatus::Fail)
    }

    pub fn row(&self, q: Quantity) -> Option<&LedgerRow> {
        self.rows.iter().find(|r| r.quantity == q)
    }
}

impl fmt::Display for ValidationLedger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.label)?;
        writeln!(
            f,
            "  {:<26} {:>14} {:>14} {:>11} {:>8}  status",
            "quantity", "analytic", "empirical", "std_err", "z"
        )?;
        for r in &self.rows {
            let z = r.z.map_or("-".to_string(), |z| format!("{z:.3}"));
            writeln!(
                f,
                "  {:<26} {:>14.6e} {:>14.6e} {:>11.3e} {:>8}  {}",
                r.quantity.name(),
                r.analytic,
                r.empirical,
                r.std_err,
                z,
                r.status.label()
            )?;
        }
        Ok(())
    }
}

/// Compare a report against analytic targets; a row fails when `|z| ≥ 3`.
pub fn validate_against_analytic(
    label: impl Into<String>,
    report: &EmpiricalReport,
    analytic: &AnalyticTargets,
) -> ValidationLedger {
    let rows = analytic
        .values
        .iter()
        .map(|&(quantity, target)| {
            let (k, n, scale) = quantity.observation(&report.rounds_used);
            let empirical = if n > 0 { scale * k as f64 / n as f64 } else { f64::NAN };
            let p = target / scale;
            let expected = n as f64 * p;
            if k == 0 && expected < 1.0 {
                return LedgerRow {
                    quantity,
                    analytic: target,
                    empirical,
                    std_err: f64::NAN,
                    z: None,
                    status: CheckStatus::NoEvents,
                };
            }
            let std_err = scale * (p * (1.0 - p) / n as f64).sqrt();
            let z = (empirical - target) / std_err;
            LedgerRow {
                quantity,
                analytic: target,
                empirical,
                std_err,
                z: Some(z),
                status: if z.abs() < 3.0 {
                    CheckStatus::Pass
                } else {
                    CheckStatus::Fail
                },
            }
        })
        .collect();
    ValidationLedger {
        label: label.into(),
        rows,
    }
}

/// Simulate and compare in one step, analytic side from the same config.
pub fn validate_config(label: impl Into<String>, config: &SimConfig) -> Result<ValidationLedger> {
    let report = simulate(config)?;
    let targets = AnalyticTargets::for_config(config)?;
    Ok(validate_against_analytic(label, &report, &targets))
}

/// Parameter points used for the analytic-versus-simulation check.
pub fn validation_points(base: &ProtocolParams, n_rounds: u64, seed: u64) -> Result<Vec<(String, SimConfig)>> {
    use crate::optics::PolarizationFrame;
    let wcs = |dist: f64, deg: f64, mu: f64| -> Result<ProtocolParams> {
        Ok(ProtocolParams {
            mu_a: mu,
            mu_b: mu,
            ..base.with_distance(dist).with_mismatch(PolarizationFrame::new(deg)?)
        })
    };
    let points = [
        ("wcs 0km phi0 mu0.5", SourceModel::WeakCoherent, wcs(0.0, 0.0, 0.5)?),
        ("wcs 25km phi0 mu0.5", SourceModel::WeakCoherent, wcs(25.0, 0.0, 0.5)?),
        ("wcs 0km phi20 mu0.5", SourceModel::WeakCoherent, wcs(0.0, 20.0, 0.5)?),
        ("wcs 0km phi0 mu0.2", SourceModel::WeakCoherent, wcs(0.0, 0.0, 0.2)?),
        ("wcs 50km phi10 mu0.1", SourceModel::WeakCoherent, wcs(50.0, 10.0, 0.1)?),
        ("single-photon 0km phi0", SourceModel::SinglePhoton, wcs(0.0, 0.0, base.mu_a)?),
        ("single-photon 50km phi30", SourceModel::SinglePhoton, wcs(50.0, 30.0, base.mu_a)?),
    ];
    Ok(points
        .into_iter()
        .enumerate()
        .map(|(i, (label, source_model, params))| {
            (
                label.to_string(),
                SimConfig {
                    params,
                    source_model,
                    n_rounds,
                    seed: seed.wrapping_add(i as u64),
                },
            )
        })
        .collect())
}
