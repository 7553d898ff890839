//! Brute-force two-photon calculator.
//!
//! Builds the exact Fock-space output of Charlie's beamsplitter when Alice and
//! Bob each send one photon spread over three time bins, mixes in channel loss
//! as a four-branch arrival mixture, and applies threshold detection with dark
//! counts at the click-record level. Everything here is exhaustive
//! enumeration over at most 12 modes, so it serves as ground truth for the
//! closed-form yields and for the sifting tables.

use num_complex::Complex64;

use crate::error::{ensure_probability, Result};
use crate::optics::PolarizationFrame;
use crate::sifting::{DetectionPattern, EncodingBits, Row, RowMass, SiftScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Port {
    C,
    D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pol {
    H,
    V,
}

/// An output mode of the beamsplitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mode(u8);

impl Mode {
    pub const COUNT: usize = 12;

    pub fn new(port: Port, bin: usize, pol: Pol) -> Self {
        assert!(bin < 3, "time bin {bin} out of range");
        let p = match port {
            Port::C => 0,
            Port::D => 1,
        };
        let s = match pol {
            Pol::H => 0,
            Pol::V => 1,
        };
        Mode((p * 6 + bin * 2 + s) as u8)
    }

    pub fn all() -> impl Iterator<Item = Mode> {
        (0..Self::COUNT as u8).map(Mode)
    }

    pub fn index(&self) -> usize {
        usize::from(self.0)
    }

    pub fn port(&self) -> Port {
        if self.0 < 6 {
            Port::C
        } else {
            Port::D
        }
    }

    pub fn bin(&self) -> usize {
        usize::from(self.0 % 6) / 2
    }

    pub fn pol(&self) -> Pol {
        if self.0.is_multiple_of(2) {
            Pol::H
        } else {
            Pol::V
        }
    }

    /// Bit of the detector/bin slot this mode lights up, in
    /// [`DetectionPattern::index`] layout.
    fn click_bit(&self) -> usize {
        let port = match self.port() {
            Port::C => 0,
            Port::D => 1,
        };
        1 << (2 * self.bin() + port)
    }
}

/// Single-photon creation operator expanded on the output modes.
pub type ModeVector = [Complex64; Mode::COUNT];

#[derive(Debug, Clone, PartialEq)]
pub struct FockTerm {
    /// Occupied modes with multiplicity, sorted.
    pub modes: Vec<Mode>,
    pub amplitude: Complex64,
}

impl FockTerm {
    fn click_mask(&self) -> usize {
        self.modes.iter().fold(0, |m, mode| m | mode.click_bit())
    }
}

/// A pure state with a fixed photon number (0, 1 or 2) over the output modes.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPhotonState {
    pub photon_count: usize,
    pub terms: Vec<FockTerm>,
}

impl JointPhotonState {
    pub fn vacuum() -> Self {
        Self {
            photon_count: 0,
            terms: vec![FockTerm {
                modes: Vec::new(),
                amplitude: Complex64::new(1.0, 0.0),
            }],
        }
    }

    /// Product of single-photon creators acting on vacuum. Bosonic
    /// normalization: `(a†)²|0⟩ = √2|2⟩`.
    pub fn from_creators(creators: &[ModeVector]) -> Self {
        match creators {
            [] => Self::vacuum(),
            [a] => Self {
                photon_count: 1,
                terms: Mode::all()
                    .filter(|m| a[m.index()] != Complex64::default())
                    .map(|m| FockTerm {
                        modes: vec![m],
                        amplitude: a[m.index()],
                    })
                    .collect(),
            },
            [a, b] => {
                let mut terms = Vec::with_capacity(78);
                for m in Mode::all() {
                    for n in Mode::all().filter(|n| *n >= m) {
                        let (i, j) = (m.index(), n.index());
                        let amplitude = if i == j {
                            a[i] * b[i] * std::f64::consts::SQRT_2
                        } else {
                            a[i] * b[j] + a[j] * b[i]
                        };
                        if amplitude != Complex64::default() {
                            terms.push(FockTerm {
                                modes: vec![m, n],
                                amplitude,
                            });
                        }
                    }
                }
                Self {
                    photon_count: 2,
                    terms,
                }
            }
            _ => panic!("state space is capped at two photons"),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.iter().map(|t| t.amplitude.norm_sqr()).sum()
    }

    pub fn amplitude(&self, modes: &[Mode]) -> Complex64 {
        let mut key = modes.to_vec();
        key.sort();
        self.terms
            .iter()
            .find(|t| t.modes == key)
            .map_or(Complex64::default(), |t| t.amplitude)
    }

    /// Probability of each photon-induced click set, ignoring dark counts.
    fn click_masses(&self) -> [f64; DetectionPattern::COUNT] {
        let mut out = [0.0; DetectionPattern::COUNT];
        for t in &self.terms {
            out[t.click_mask()] += t.amplitude.norm_sqr();
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Party {
    Alice,
    Bob,
}

/// One party's photon after the beamsplitter: `(1/√3) Σᵢ e^{iφᵢ} ê·(c†ᵢ ± d†ᵢ)/√2`.
fn output_creator(party: Party, bits: EncodingBits, frame: &PolarizationFrame) -> ModeVector {
    let axis = match party {
        Party::Alice => frame.alice_axis(),
        Party::Bob => frame.bob_axis(),
    };
    let d_sign = match party {
        Party::Alice => 1.0,
        Party::Bob => -1.0,
    };
    let norm = 1.0 / 6f64.sqrt();
    let mut v = [Complex64::default(); Mode::COUNT];
    for m in Mode::all() {
        let pol = match m.pol() {
            Pol::H => axis[0],
            Pol::V => axis[1],
        };
        let port = match m.port() {
            Port::C => 1.0,
            Port::D => d_sign,
        };
        v[m.index()] = Complex64::new(norm * bits.sign(m.bin()) * pol * port, 0.0);
    }
    v
}

/// Two-photon output state when both photons reach Charlie.
pub fn build_joint_state(
    alice: EncodingBits,
    bob: EncodingBits,
    frame: PolarizationFrame,
) -> JointPhotonState {
    JointPhotonState::from_creators(&[
        output_creator(Party::Alice, alice, &frame),
        output_creator(Party::Bob, bob, &frame),
    ])
}

/// Loss turns the two-photon input into a mixture of four arrival branches.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalMixture {
    pub both: (f64, JointPhotonState),
    pub alice_only: (f64, JointPhotonState),
    pub bob_only: (f64, JointPhotonState),
    pub neither: (f64, JointPhotonState),
}

impl ArrivalMixture {
    pub fn new(
        alice: EncodingBits,
        bob: EncodingBits,
        frame: PolarizationFrame,
        eta_a: f64,
        eta_b: f64,
    ) -> Self {
        let a = output_creator(Party::Alice, alice, &frame);
        let b = output_creator(Party::Bob, bob, &frame);
        Self {
            both: (eta_a * eta_b, JointPhotonState::from_creators(&[a, b])),
            alice_only: (eta_a * (1.0 - eta_b), JointPhotonState::from_creators(&[a])),
            bob_only: ((1.0 - eta_a) * eta_b, JointPhotonState::from_creators(&[b])),
            neither: ((1.0 - eta_a) * (1.0 - eta_b), JointPhotonState::vacuum()),
        }
    }

    pub fn branches(&self) -> [&(f64, JointPhotonState); 4] {
        [&self.both, &self.alice_only, &self.bob_only, &self.neither]
    }

    pub fn total_weight(&self) -> f64 {
        self.branches().iter().map(|(w, _)| w).sum()
    }
}

/// Link and detector settings seen by the oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleParams {
    pub frame: PolarizationFrame,
    pub eta_a: f64,
    pub eta_b: f64,
    pub p_dark: f64,
}

impl OracleParams {
    pub fn new(frame: PolarizationFrame, eta_a: f64, eta_b: f64, p_dark: f64) -> Result<Self> {
        ensure_probability("eta_a", eta_a)?;
        ensure_probability("eta_b", eta_b)?;
        crate::error::ensure(
            (0.0..1.0).contains(&p_dark),
            "p_dark",
            p_dark,
            "must lie in [0, 1)",
        )?;
        Ok(Self {
            frame,
            eta_a,
            eta_b,
            p_dark,
        })
    }

    /// Lossless link, noiseless detectors.
    pub fn ideal(frame: PolarizationFrame) -> Self {
        Self {
            frame,
            eta_a: 1.0,
            eta_b: 1.0,
            p_dark: 0.0,
        }
    }
}

/// Probability of every one of the 64 click records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeDistribution(pub [f64; DetectionPattern::COUNT]);

impl OutcomeDistribution {
    pub fn prob(&self, pattern: &DetectionPattern) -> f64 {
        self.0[pattern.index()]
    }

    pub fn row(&self, row: Row) -> f64 {
        self.prob(&row.pattern())
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn rows(&self) -> RowMass {
        Row::all().map(|r| (r, self.row(r))).collect()
    }
}

/// OR each photon-induced click set with independent per-slot dark counts.
fn with_dark_counts(photon: &[f64; DetectionPattern::COUNT], p_dark: f64) -> OutcomeDistribution {
    let mut out = [0.0; DetectionPattern::COUNT];
    if p_dark == 0.0 {
        return OutcomeDistribution(*photon);
    }
    for (lit, &mass) in photon.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        for (pattern, slot) in out.iter_mut().enumerate() {
            if pattern & lit != lit {
                continue;
            }
            let darks = (pattern & !lit).count_ones() as i32;
            let silent = 6 - pattern.count_ones() as i32;
            *slot += mass * p_dark.powi(darks) * (1.0 - p_dark).powi(silent);
        }
    }
    OutcomeDistribution(out)
}

pub fn outcome_distribution(
    alice: EncodingBits,
    bob: EncodingBits,
    params: &OracleParams,
) -> OutcomeDistribution {
    let mixture = ArrivalMixture::new(alice, bob, params.frame, params.eta_a, params.eta_b);
    let mut photon = [0.0; DetectionPattern::COUNT];
    for (weight, state) in mixture.branches() {
        if *weight == 0.0 {
            continue;
        }
        for (acc, m) in photon.iter_mut().zip(state.click_masses()) {
            *acc += weight * m;
        }
    }
    with_dark_counts(&photon, params.p_dark)
}

/// All sixteen `(alice, bob)` encodings, Alice-major.
pub fn encoding_pairs() -> impl Iterator<Item = (EncodingBits, EncodingBits)> {
    EncodingBits::all()
        .into_iter()
        .flat_map(|a| EncodingBits::all().into_iter().map(move |b| (a, b)))
}

/// Which encodings a yield is averaged over, relative to each row's own
/// announced phase relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationCondition {
    /// Uniform over all 16 encodings.
    Any,
    /// Only encodings for which the row's relation holds.
    Holds,
    /// Only encodings for which it fails.
    Violated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct YieldQuery {
    pub rows: Vec<Row>,
    pub condition: RelationCondition,
}

impl YieldQuery {
    pub fn scheme(scheme: SiftScheme) -> Self {
        Self {
            rows: scheme.rows().collect(),
            condition: RelationCondition::Any,
        }
    }

    pub fn row(row: Row, condition: RelationCondition) -> Self {
        Self {
            rows: vec![row],
            condition,
        }
    }
}

/// Sum over the requested rows of the row probability, each averaged
/// uniformly over the encodings admitted by the condition.
pub fn oracle_yield(query: &YieldQuery, params: &OracleParams) -> f64 {
    let dists: Vec<_> = encoding_pairs()
        .map(|(a, b)| (a, b, outcome_distribution(a, b, params)))
        .collect();
    query
        .rows
        .iter()
        .map(|&row| {
            let admitted: Vec<f64> = dists
                .iter()
                .filter(|(a, b, _)| match query.condition {
                    RelationCondition::Any => true,
                    RelationCondition::Holds => row.relation_holds(*a, *b),
                    RelationCondition::Violated => !row.relation_holds(*a, *b),
                })
                .map(|(_, _, d)| d.row(row))
                .collect();
            admitted.iter().sum::<f64>() / admitted.len() as f64
        })
        .sum()
}

/// Encoding-averaged sifting statistics for one scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiftStatistics {
    /// P(round kept).
    pub conclusive: f64,
    /// P(round kept with agreeing key bits).
    pub correct: f64,
    /// P(round kept with disagreeing key bits).
    pub errors: f64,
}

impl SiftStatistics {
    pub fn qber(&self) -> Option<f64> {
        (self.conclusive > 0.0).then(|| self.errors / self.conclusive)
    }
}

pub fn sift_statistics(params: &OracleParams, scheme: SiftScheme) -> SiftStatistics {
    let mut correct = 0.0;
    let mut errors = 0.0;
    for (a, b) in encoding_pairs() {
        let dist = outcome_distribution(a, b, params);
        for row in scheme.rows() {
            let p = dist.row(row) / 16.0;
            if row.relation_holds(a, b) {
                correct += p;
            } else {
                errors += p;
            }
        }
    }
    SiftStatistics {
        conclusive: correct + errors,
        correct,
        errors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sifting::{BinReading, SiftScheme};
    use proptest::prelude::*;

    const TOL: f64 = 1e-12;

    fn frame(deg: f64) -> PolarizationFrame {
        PolarizationFrame::new(deg).unwrap()
    }

    fn zero() -> EncodingBits {
        EncodingBits::default()
    }

    #[test]
    fn joint_state_is_normalized() {
        for deg in [0.0, 11.0, 45.0, 90.0] {
            for (a, b) in encoding_pairs() {
                let s = build_joint_state(a, b, frame(deg));
                assert_eq!(s.photon_count, 2);
                assert!((s.norm_sqr() - 1.0).abs() < TOL);
            }
        }
    }

    #[test]
    fn aligned_equal_phases_forbid_split_ports_across_bins() {
        let s = build_joint_state(zero(), zero(), PolarizationFrame::aligned());
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let cd = s.amplitude(&[Mode::new(Port::C, i, Pol::H), Mode::new(Port::D, j, Pol::H)]);
            assert!(cd.norm() < TOL, "c{i} d{j}");
        }
        // both photons in d, distinct bins: (−1/6) + (−1/6)
        let dd = s.amplitude(&[Mode::new(Port::D, 0, Pol::H), Mode::new(Port::D, 1, Pol::H)]);
        assert!((dd - Complex64::new(-1.0 / 3.0, 0.0)).norm() < TOL);
    }

    #[test]
    fn matching_first_difference_gives_one_ninth_for_cc0() {
        let p = outcome_distribution(zero(), zero(), &OracleParams::ideal(PolarizationFrame::aligned()));
        let cc0 = DetectionPattern::from_readings([BinReading::C, BinReading::C, BinReading::Silent]);
        assert!((p.prob(&cc0) - 1.0 / 9.0).abs() < TOL);
        let cd0 = DetectionPattern::from_readings([BinReading::C, BinReading::D, BinReading::Silent]);
        assert!(p.prob(&cd0).abs() < TOL);
    }

    #[test]
    fn orthogonal_polarizations_spread_evenly_over_rows() {
        let params = OracleParams::ideal(frame(90.0));
        for (a, b) in encoding_pairs() {
            let d = outcome_distribution(a, b, &params);
            for row in Row::all() {
                assert!((d.row(row) - 1.0 / 18.0).abs() < TOL, "row {row}");
            }
        }
    }

    #[test]
    fn nothing_arrives() {
        let params = OracleParams::new(frame(0.0), 0.0, 0.0, 0.0).unwrap();
        let d = outcome_distribution(zero(), zero(), &params);
        assert_eq!(d.prob(&DetectionPattern::default()), 1.0);
        for row in Row::all() {
            assert_eq!(oracle_yield(&YieldQuery::row(row, RelationCondition::Any), &params), 0.0);
        }
    }

    #[test]
    fn ideal_conclusive_mass_split() {
        let params = OracleParams::ideal(PolarizationFrame::aligned());
        for (a, b) in encoding_pairs() {
            let rows = outcome_distribution(a, b, &params).rows();
            let first_eight: f64 = (0..8).map(|i| rows.0[i]).sum();
            let last_four: f64 = (8..12).map(|i| rows.0[i]).sum();
            assert!((first_eight - 4.0 / 9.0).abs() < TOL);
            assert!((last_four - 2.0 / 9.0).abs() < TOL);
        }
    }

    #[test]
    fn oracle_yield_examples() {
        let params = OracleParams::ideal(PolarizationFrame::aligned());
        let y = oracle_yield(&YieldQuery::scheme(SiftScheme::Original), &params);
        assert!((y - 4.0 / 9.0).abs() < TOL);
        let y = oracle_yield(&YieldQuery::scheme(SiftScheme::Improved), &params);
        assert!((y - 2.0 / 3.0).abs() < TOL);
        let row1 = Row::new(1).unwrap();
        let y = oracle_yield(&YieldQuery::row(row1, RelationCondition::Holds), &params);
        assert!((y - 1.0 / 9.0).abs() < TOL);
        let y = oracle_yield(&YieldQuery::row(row1, RelationCondition::Violated), &params);
        assert!(y.abs() < TOL);
    }

    #[test]
    fn ideal_sifting_has_no_errors() {
        let stats = sift_statistics(&OracleParams::ideal(PolarizationFrame::aligned()), SiftScheme::Improved);
        assert!(stats.errors.abs() < TOL);
        assert_eq!(stats.qber().map(|q| q < TOL), Some(true));
    }

    #[test]
    fn orthogonal_polarizations_give_half_errors() {
        let stats = sift_statistics(&OracleParams::ideal(frame(90.0)), SiftScheme::Improved);
        assert!((stats.qber().unwrap() - 0.5).abs() < TOL);
    }

    #[test]
    fn detector_relabeling_symmetry() {
        // c↔d relabeling negates Bob's creator and leaves Alice's alone. On
        // records with bin 0 silent that is the same as flipping both of Bob's
        // bits.
        let params = OracleParams::new(frame(23.0), 0.7, 0.4, 1e-3).unwrap();
        for (a, b) in encoding_pairs() {
            let base = outcome_distribution(a, b, &params);
            let flipped = outcome_distribution(a, EncodingBits::new(!b.b1, !b.b2), &params);
            for p in DetectionPattern::all() {
                let swapped = DetectionPattern { c: p.d, d: p.c };
                if !p.c[0] && !p.d[0] {
                    assert!((base.prob(&p) - flipped.prob(&swapped)).abs() < TOL);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn distributions_are_normalized(eta_a in 0.0f64..=1.0, eta_b in 0.0f64..=1.0,
                                        p in 0.0f64..0.5, deg in 0.0f64..=90.0,
                                        enc in 0usize..16) {
            let params = OracleParams::new(frame(deg), eta_a, eta_b, p).unwrap();
            let (a, b) = encoding_pairs().nth(enc).unwrap();
            let mix = ArrivalMixture::new(a, b, params.frame, eta_a, eta_b);
            prop_assert!((mix.total_weight() - 1.0).abs() < TOL);
            prop_assert!(mix.branches().iter().all(|(w, _)| *w >= 0.0));
            let d = outcome_distribution(a, b, &params);
            prop_assert!((d.total() - 1.0).abs() < TOL);
            prop_assert!(d.0.iter().all(|&x| x >= -TOL));
        }

        #[test]
        fn click_mass_is_linear_in_branch_weights(eta_a in 0.0f64..=1.0, eta_b in 0.0f64..=1.0,
                                                  deg in 0.0f64..=90.0) {
            // without dark counts, P(no click) is exactly the vacuum branch weight
            let params = OracleParams::new(frame(deg), eta_a, eta_b, 0.0).unwrap();
            let d = outcome_distribution(zero(), zero(), &params);
            let silent = d.prob(&DetectionPattern::default());
            prop_assert!((silent - (1.0 - eta_a) * (1.0 - eta_b)).abs() < TOL);
            // single clicks come only from the one-photon branches and from
            // bunched two-photon terms; total single-slot mass is at least the
            // one-photon weight
            let single: f64 = DetectionPattern::all()
                .filter(|p| p.click_count() == 1)
                .map(|p| d.prob(&p))
                .sum();
            prop_assert!(single + TOL >= eta_a * (1.0 - eta_b) + (1.0 - eta_a) * eta_b);
        }
    }
}
