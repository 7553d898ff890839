//! Charlie's announcements and the two sifting tables.
//!
//! A round produces a click record for detectors `c` and `d` in three time
//! bins. Exactly twelve records, two clicks in two different bins on any
//! detectors, are conclusive. Rows 1–8 reveal `Δφ₁` or `Δφ₂`; rows 9–12 reveal
//! only whether the two differences agree, so the improved scheme keys them
//! on the XOR of both bits.

use std::fmt;
use std::ops::Index;

/// Which detector, if any, fired in one time bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinReading {
    C,
    D,
    Silent,
    /// Both detectors fired in the same bin.
    Both,
}

impl BinReading {
    fn symbol(self) -> &'static str {
        match self {
            BinReading::C => "c",
            BinReading::D => "d",
            BinReading::Silent => "0",
            BinReading::Both => "cd",
        }
    }
}

/// Raw click record: detector `c` and `d` in each of the three time bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct DetectionPattern {
    pub c: [bool; 3],
    pub d: [bool; 3],
}

impl DetectionPattern {
    pub const COUNT: usize = 64;

    pub fn from_readings(readings: [BinReading; 3]) -> Self {
        let mut p = Self::default();
        for (bin, r) in readings.into_iter().enumerate() {
            match r {
                BinReading::C => p.c[bin] = true,
                BinReading::D => p.d[bin] = true,
                BinReading::Both => {
                    p.c[bin] = true;
                    p.d[bin] = true;
                }
                BinReading::Silent => {}
            }
        }
        p
    }

    /// Bit `2·bin` is detector c, bit `2·bin + 1` is detector d.
    pub fn index(&self) -> usize {
        (0..3).fold(0, |acc, bin| {
            acc | (usize::from(self.c[bin]) << (2 * bin))
                | (usize::from(self.d[bin]) << (2 * bin + 1))
        })
    }

    pub fn from_index(index: usize) -> Self {
        debug_assert!(index < Self::COUNT);
        let mut p = Self::default();
        for bin in 0..3 {
            p.c[bin] = index & (1 << (2 * bin)) != 0;
            p.d[bin] = index & (1 << (2 * bin + 1)) != 0;
        }
        p
    }

    pub fn all() -> impl Iterator<Item = DetectionPattern> {
        (0..Self::COUNT).map(Self::from_index)
    }

    pub fn reading(&self, bin: usize) -> BinReading {
        match (self.c[bin], self.d[bin]) {
            (true, true) => BinReading::Both,
            (true, false) => BinReading::C,
            (false, true) => BinReading::D,
            (false, false) => BinReading::Silent,
        }
    }

    pub fn readings(&self) -> [BinReading; 3] {
        [self.reading(0), self.reading(1), self.reading(2)]
    }

    pub fn click_count(&self) -> usize {
        self.c.iter().chain(&self.d).filter(|&&x| x).count()
    }

    /// Exactly two clicks, in two different bins.
    pub fn is_conclusive(&self) -> bool {
        classify(self).is_some()
    }
}

impl fmt::Display for DetectionPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.readings();
        write!(f, "({},{},{})", a.symbol(), b.symbol(), c.symbol())
    }
}

/// The pair of bits a conclusive row lets Alice and Bob compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KeyBasis {
    /// `a₁` vs `b₁` (bins 0 and 1).
    First,
    /// `a₂` vs `b₂` (bins 0 and 2).
    Second,
    /// `a₁⊕a₂` vs `b₁⊕b₂` (bins 1 and 2).
    Xor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Correlated,
    AntiCorrelated,
}

/// One of the twelve conclusive rows, numbered as in the sifting tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Row(u8);

use BinReading::{Silent as O, C, D};

const ROW_READINGS: [[BinReading; 3]; 12] = [
    [C, C, O],
    [D, D, O],
    [C, D, O],
    [D, C, O],
    [C, O, C],
    [D, O, D],
    [C, O, D],
    [D, O, C],
    [O, C, C],
    [O, D, D],
    [O, C, D],
    [O, D, C],
];

impl Row {
    pub const COUNT: usize = 12;

    /// Row from its 1-based table number.
    pub fn new(number: u8) -> Option<Self> {
        (1..=12).contains(&number).then_some(Self(number))
    }

    pub fn all() -> impl Iterator<Item = Row> {
        (1..=12).map(Row)
    }

    pub fn number(&self) -> u8 {
        self.0
    }

    fn slot(&self) -> usize {
        usize::from(self.0 - 1)
    }

    pub fn readings(&self) -> [BinReading; 3] {
        ROW_READINGS[self.slot()]
    }

    pub fn pattern(&self) -> DetectionPattern {
        DetectionPattern::from_readings(self.readings())
    }

    pub fn key_basis(&self) -> KeyBasis {
        match self.0 {
            1..=4 => KeyBasis::First,
            5..=8 => KeyBasis::Second,
            _ => KeyBasis::Xor,
        }
    }

    /// Same detector in both clicked bins means correlated key bits.
    pub fn relation(&self) -> Relation {
        let r = self.readings();
        let clicked: Vec<BinReading> = r.into_iter().filter(|&x| x != O).collect();
        if clicked[0] == clicked[1] {
            Relation::Correlated
        } else {
            Relation::AntiCorrelated
        }
    }

    /// Whether the row's announced phase relation agrees with the encodings.
    pub fn relation_holds(&self, alice: EncodingBits, bob: EncodingBits) -> bool {
        let differs = alice.key_bit(self.key_basis()) != bob.key_bit(self.key_basis());
        differs == (self.relation() == Relation::AntiCorrelated)
    }
}

impl fmt::Display for Row {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Two encoded bits; bit `i` sets the phase of time bin `i` to `π·bitᵢ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct EncodingBits {
    pub b1: bool,
    pub b2: bool,
}

impl EncodingBits {
    pub fn new(b1: bool, b2: bool) -> Self {
        Self { b1, b2 }
    }

    /// All four encodings, ordered `(0,0), (0,1), (1,0), (1,1)` as `(b1, b2)`.
    pub fn all() -> [EncodingBits; 4] {
        [
            Self::new(false, false),
            Self::new(false, true),
            Self::new(true, false),
            Self::new(true, true),
        ]
    }

    /// Phase of time bin 0, 1 or 2 (bin 0 is the reference).
    pub fn phase(&self, bin: usize) -> f64 {
        let bit = match bin {
            0 => false,
            1 => self.b1,
            2 => self.b2,
            _ => panic!("time bin {bin} out of range"),
        };
        if bit {
            std::f64::consts::PI
        } else {
            0.0
        }
    }

    /// `(-1)^bit` for the bin, i.e. `e^{iφ}` restricted to `{0, π}`.
    pub fn sign(&self, bin: usize) -> f64 {
        match bin {
            0 => 1.0,
            1 if self.b1 => -1.0,
            2 if self.b2 => -1.0,
            1 | 2 => 1.0,
            _ => panic!("time bin {bin} out of range"),
        }
    }

    pub fn key_bit(&self, basis: KeyBasis) -> bool {
        match basis {
            KeyBasis::First => self.b1,
            KeyBasis::Second => self.b2,
            KeyBasis::Xor => self.b1 ^ self.b2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SiftScheme {
    /// Rows 1–8 only.
    Original,
    /// All twelve rows; rows 9–12 keyed on XORs.
    Improved,
}

impl SiftScheme {
    pub fn keeps(&self, row: Row) -> bool {
        match self {
            SiftScheme::Original => row.number() <= 8,
            SiftScheme::Improved => true,
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = Row> + '_ {
        Row::all().filter(move |r| self.keeps(*r))
    }

    pub fn row_count(&self) -> usize {
        self.rows().count()
    }

    pub fn name(&self) -> &'static str {
        match self {
            SiftScheme::Original => "original",
            SiftScheme::Improved => "improved",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiftStatus {
    Conclusive(Row),
    Discarded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiftVerdict {
    pub scheme: SiftScheme,
    pub status: SiftStatus,
    pub alice_key_bit: Option<bool>,
    pub bob_key_bit: Option<bool>,
    pub relation: Option<Relation>,
}

impl SiftVerdict {
    pub fn discarded(scheme: SiftScheme) -> Self {
        Self {
            scheme,
            status: SiftStatus::Discarded,
            alice_key_bit: None,
            bob_key_bit: None,
            relation: None,
        }
    }

    pub fn is_kept(&self) -> bool {
        matches!(self.status, SiftStatus::Conclusive(_))
    }

    /// `Some(true)` when the kept key bits disagree.
    pub fn is_error(&self) -> Option<bool> {
        Some(self.alice_key_bit? != self.bob_key_bit?)
    }
}

/// Table row for a click record, or `None` when inconclusive.
pub fn classify(pattern: &DetectionPattern) -> Option<Row> {
    let readings = pattern.readings();
    ROW_READINGS
        .iter()
        .position(|r| *r == readings)
        .map(|i| Row(i as u8 + 1))
}

pub fn sift(
    pattern: &DetectionPattern,
    alice: EncodingBits,
    bob: EncodingBits,
    scheme: SiftScheme,
) -> SiftVerdict {
    match classify(pattern) {
        Some(row) => sift_row(row, alice, bob, scheme),
        None => SiftVerdict::discarded(scheme),
    }
}

pub fn sift_row(row: Row, alice: EncodingBits, bob: EncodingBits, scheme: SiftScheme) -> SiftVerdict {
    if !scheme.keeps(row) {
        return SiftVerdict::discarded(scheme);
    }
    let basis = row.key_basis();
    let relation = row.relation();
    let bob_raw = bob.key_bit(basis);
    SiftVerdict {
        scheme,
        status: SiftStatus::Conclusive(row),
        alice_key_bit: Some(alice.key_bit(basis)),
        bob_key_bit: Some(match relation {
            Relation::Correlated => bob_raw,
            Relation::AntiCorrelated => !bob_raw,
        }),
        relation: Some(relation),
    }
}

/// Probability mass per conclusive row.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RowMass(pub [f64; 12]);

impl RowMass {
    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl Index<Row> for RowMass {
    type Output = f64;
    fn index(&self, row: Row) -> &f64 {
        &self.0[row.slot()]
    }
}

impl FromIterator<(Row, f64)> for RowMass {
    fn from_iter<I: IntoIterator<Item = (Row, f64)>>(iter: I) -> Self {
        let mut m = RowMass::default();
        for (row, p) in iter {
            m.0[row.slot()] += p;
        }
        m
    }
}

/// Fraction of rounds kept by `scheme` given the per-row outcome masses.
pub fn sifting_rate(scheme: SiftScheme, distribution: &RowMass) -> f64 {
    scheme.rows().map(|r| distribution[r]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pat(r: [BinReading; 3]) -> DetectionPattern {
        DetectionPattern::from_readings(r)
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&pat([C, C, O])), Row::new(1));
        assert_eq!(classify(&pat([O, D, C])), Row::new(12));
        assert_eq!(classify(&pat([C, O, O])), None);
        assert_eq!(classify(&pat([BinReading::Both, O, O])), None);
        assert_eq!(classify(&pat([BinReading::Both, C, O])), None);
        assert_eq!(classify(&pat([C, C, C])), None);
    }

    #[test]
    fn classification_is_a_bijection_on_conclusive_patterns() {
        let conclusive: Vec<_> = DetectionPattern::all().filter_map(|p| classify(&p)).collect();
        assert_eq!(conclusive.len(), 12);
        for row in Row::all() {
            assert_eq!(classify(&row.pattern()), Some(row));
            assert_eq!(row.pattern().click_count(), 2);
        }
        for p in DetectionPattern::all() {
            assert_eq!(DetectionPattern::from_index(p.index()), p);
            let two_bins = (0..3).filter(|&b| p.reading(b) != O).count() == 2;
            let single = (0..3).all(|b| p.reading(b) != BinReading::Both);
            assert_eq!(classify(&p).is_some(), two_bins && single);
        }
    }

    #[test]
    fn sift_examples() {
        let bits = |a, b| EncodingBits::new(a, b);

        let v = sift(&pat([D, C, O]), bits(false, false), bits(true, false), SiftScheme::Original);
        assert_eq!(v.alice_key_bit, Some(false));
        assert_eq!(v.bob_key_bit, Some(false));
        assert_eq!(v.relation, Some(Relation::AntiCorrelated));

        let v = sift(&pat([O, C, C]), bits(true, false), bits(false, true), SiftScheme::Improved);
        assert_eq!(v.alice_key_bit, Some(true));
        assert_eq!(v.bob_key_bit, Some(true));
        assert_eq!(v.relation, Some(Relation::Correlated));

        let v = sift(&pat([O, C, D]), bits(false, false), bits(true, false), SiftScheme::Improved);
        assert_eq!(v.alice_key_bit, Some(false));
        assert_eq!(v.bob_key_bit, Some(false));
        assert_eq!(v.relation, Some(Relation::AntiCorrelated));

        let v = sift(&pat([C, O, O]), bits(false, false), bits(false, false), SiftScheme::Improved);
        assert_eq!(v.status, SiftStatus::Discarded);
    }

    #[test]
    fn original_discards_xor_rows() {
        for n in 9..=12 {
            let row = Row::new(n).unwrap();
            let v = sift_row(row, EncodingBits::default(), EncodingBits::default(), SiftScheme::Original);
            assert_eq!(v.status, SiftStatus::Discarded);
        }
    }

    #[test]
    fn improved_extends_original() {
        for row in Row::all() {
            for a in EncodingBits::all() {
                for b in EncodingBits::all() {
                    let o = sift_row(row, a, b, SiftScheme::Original);
                    let i = sift_row(row, a, b, SiftScheme::Improved);
                    assert!(i.is_kept());
                    if o.is_kept() {
                        assert_eq!(o.alice_key_bit, i.alice_key_bit);
                        assert_eq!(o.bob_key_bit, i.bob_key_bit);
                    }
                }
            }
        }
    }

    #[test]
    fn key_agreement_matches_phase_relation() {
        for row in Row::all() {
            for a in EncodingBits::all() {
                for b in EncodingBits::all() {
                    let v = sift_row(row, a, b, SiftScheme::Improved);
                    assert_eq!(v.is_error(), Some(!row.relation_holds(a, b)));
                }
            }
        }
    }

    #[test]
    fn sifting_rate_examples() {
        let mut point = RowMass::default();
        point.0[0] = 1.0;
        assert_eq!(sifting_rate(SiftScheme::Improved, &point), 1.0);

        let uniform = RowMass([1.0 / 18.0; 12]);
        assert!((sifting_rate(SiftScheme::Original, &uniform) - 4.0 / 9.0).abs() < 1e-15);
        assert!((sifting_rate(SiftScheme::Improved, &uniform) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn display_uses_table_notation() {
        assert_eq!(Row::new(7).unwrap().pattern().to_string(), "(c,0,d)");
        assert_eq!(pat([BinReading::Both, O, O]).to_string(), "(cd,0,0)");
    }
}
