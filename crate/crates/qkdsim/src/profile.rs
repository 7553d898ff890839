//! Run profiles: flat `key = value` text with `[section]` headers.
//!
//! The same format is echoed at the top of every output file behind `# `, so
//! an output file can be fed back as `--profile` to regenerate itself.

use std::fmt;
use std::str::FromStr;

use dpsmdi::hom::DetuningSign;
use dpsmdi::keyrate::{MismatchQberCoefficient, ProtocolParams, SliceWidth};
use dpsmdi::optics::PolarizationFrame;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig3,
    Fig6,
    Fig8,
    Table3,
    McValidate,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Fig3,
        Preset::Fig6,
        Preset::Fig8,
        Preset::Table3,
        Preset::McValidate,
        Preset::Custom,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Fig3 => "fig3",
            Preset::Fig6 => "fig6",
            Preset::Fig8 => "fig8",
            Preset::Table3 => "table3",
            Preset::McValidate => "mc-validate",
            Preset::Custom => "custom",
        }
    }
}

impl FromStr for Preset {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| CliError::Usage(format!("unknown preset `{s}`")))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    DistanceKm,
    PolMismatchDeg,
    Mu,
    DeltaFwhmPs,
    DeltaLKm,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 5] = [
        SweepAxis::DistanceKm,
        SweepAxis::PolMismatchDeg,
        SweepAxis::Mu,
        SweepAxis::DeltaFwhmPs,
        SweepAxis::DeltaLKm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::DistanceKm => "distance_km",
            SweepAxis::PolMismatchDeg => "pol_mismatch_deg",
            SweepAxis::Mu => "mu",
            SweepAxis::DeltaFwhmPs => "delta_fwhm_ps",
            SweepAxis::DeltaLKm => "delta_l_km",
        }
    }

    /// Key-rate axes produce the key-rate table, the others the HOM table.
    pub fn is_key_rate(&self) -> bool {
        matches!(self, SweepAxis::DistanceKm | SweepAxis::PolMismatchDeg | SweepAxis::Mu)
    }
}

/// One axis swept from `start` to `stop` inclusive in steps of `step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

/// Upper bound on grid size, to catch a mistyped step.
pub const MAX_SWEEP_POINTS: usize = 1_000_000;

impl Sweep {
    /// Grid points `start + i·step`, the last within `1e-9·step` of `stop`.
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        let Sweep { start, stop, step, .. } = *self;
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
            return Err(CliError::Usage("sweep start, stop and step must be finite".into()));
        }
        if step <= 0.0 {
            return Err(CliError::Usage(format!("sweep step must be positive, got {step}")));
        }
        if stop < start {
            return Err(CliError::Usage(format!("empty sweep range: stop {stop} < start {start}")));
        }
        let span = (stop - start) / step;
        if span >= MAX_SWEEP_POINTS as f64 {
            return Err(CliError::Usage(format!("sweep has more than {MAX_SWEEP_POINTS} points")));
        }
        let n = (span + 1e-9).floor() as usize + 1;
        Ok((0..n).map(|i| start + i as f64 * step).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomSettings {
    /// One visibility column group per entry.
    pub mu_list: Vec<f64>,
    /// Mean photon number used for the model column of the table3 preset.
    pub table_mu: f64,
    pub base_fwhm_ps: f64,
    /// Carrier detuning in rad/ps.
    pub delta_omega: f64,
    pub detuning_sign: DetuningSign,
    pub d_ps_per_nm_km: f64,
    pub delta_lambda_nm: f64,
}

impl Default for HomSettings {
    fn default() -> Self {
        Self {
            mu_list: vec![0.01, 0.1, 0.5],
            table_mu: 0.1,
            base_fwhm_ps: 60.0,
            delta_omega: 0.0,
            detuning_sign: DetuningSign::Printed,
            d_ps_per_nm_km: 17.0,
            delta_lambda_nm: 0.01,
        }
    }
}

/// Bisection window for the mismatch threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSettings {
    pub lo_deg: f64,
    pub hi_deg: f64,
    pub tol_deg: f64,
}

impl Default for ThresholdSettings {
    fn default() -> Self {
        Self {
            lo_deg: 0.0,
            hi_deg: 45.0,
            tol_deg: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSettings {
    pub rounds: u64,
    pub seed: u64,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            rounds: 1_000_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunProfile {
    pub preset: Preset,
    /// Output file stem.
    pub name: String,
    pub params: ProtocolParams,
    pub hom: HomSettings,
    pub threshold: ThresholdSettings,
    pub sweep: Option<Sweep>,
    pub mc: McSettings,
}

/// Every key, in echo order.
const KEYS: &[(&str, &str)] = &[
    ("run", "preset"),
    ("run", "name"),
    ("protocol", "mu_a"),
    ("protocol", "mu_b"),
    ("protocol", "p_dark"),
    ("protocol", "eta_det"),
    ("protocol", "gamma_db_per_km"),
    ("protocol", "distance_km"),
    ("protocol", "f_ec"),
    ("protocol", "e_d"),
    ("protocol", "n_slices"),
    ("protocol", "slice_index"),
    ("protocol", "slice_width"),
    ("protocol", "qber_coefficient"),
    ("protocol", "pol_mismatch_deg"),
    ("hom", "mu_list"),
    ("hom", "table_mu"),
    ("hom", "base_fwhm_ps"),
    ("hom", "delta_omega"),
    ("hom", "detuning_sign"),
    ("hom", "d_ps_per_nm_km"),
    ("hom", "delta_lambda_nm"),
    ("threshold", "lo_deg"),
    ("threshold", "hi_deg"),
    ("threshold", "tol_deg"),
    ("sweep", "axis"),
    ("sweep", "start"),
    ("sweep", "stop"),
    ("sweep", "step"),
    ("mc", "rounds"),
    ("mc", "seed"),
];

/// Section whose keys are accepted and ignored on input.
pub const RESULT_SECTION: &str = "result";

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("cannot parse `{value}` for `{key}`")))
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunProfile {
    /// Built-in profile for a preset: default protocol parameters plus the
    /// preset's own sweep.
    pub fn builtin(preset: Preset) -> Self {
        let sweep = |axis, start, stop, step| Some(Sweep { axis, start, stop, step });
        Self {
            preset,
            name: preset.name().to_string(),
            params: ProtocolParams::default(),
            hom: HomSettings::default(),
            threshold: ThresholdSettings::default(),
            sweep: match preset {
                Preset::Fig3 | Preset::Custom => sweep(SweepAxis::DistanceKm, 0.0, 300.0, 10.0),
                Preset::Fig6 => sweep(SweepAxis::PolMismatchDeg, 0.0, 20.0, 0.5),
                Preset::Fig8 => sweep(SweepAxis::DeltaFwhmPs, 0.0, 60.0, 1.0),
                Preset::Table3 | Preset::McValidate => None,
            },
            mc: McSettings::default(),
        }
    }

    /// Resolve a bare or `section.key` name to its section and key.
    pub fn resolve_key(key: &str) -> Result<(&'static str, &'static str), CliError> {
        let found: Vec<_> = match key.split_once('.') {
            Some((s, k)) => KEYS.iter().filter(|(ss, kk)| *ss == s && *kk == k).collect(),
            None => KEYS.iter().filter(|(_, kk)| *kk == key).collect(),
        };
        match found.as_slice() {
            [one] => Ok(**one),
            [] => Err(CliError::Usage(format!("unknown profile key `{key}`"))),
            _ => Err(CliError::Usage(format!("ambiguous profile key `{key}`; qualify it with a section"))),
        }
    }

    /// Apply one setting. `run.preset` is checked but the preset chosen on
    /// the command line stays in force.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let (section, name) = Self::resolve_key(key)?;
        let value = value.trim();
        let p = &mut self.params;
        let f = |v: &str| parse::<f64>(name, v);
        match (section, name) {
            ("run", "preset") => {
                value.parse::<Preset>()?;
            }
            ("run", "name") => {
                if value.is_empty() || value.contains(['/', '\\']) {
                    return Err(CliError::Usage(format!("invalid run name `{value}`")));
                }
                self.name = value.to_string();
            }
            ("protocol", "mu_a") => p.mu_a = f(value)?,
            ("protocol", "mu_b") => p.mu_b = f(value)?,
            ("protocol", "p_dark") => p.p_dark = f(value)?,
            ("protocol", "eta_det") => p.channel.eta_det = f(value)?,
            ("protocol", "gamma_db_per_km") => p.channel.gamma_db_per_km = f(value)?,
            ("protocol", "distance_km") => p.channel.distance_km = f(value)?,
            ("protocol", "f_ec") => p.f_ec = f(value)?,
            ("protocol", "e_d") => p.e_d = f(value)?,
            ("protocol", "n_slices") => p.n_slices = parse(name, value)?,
            ("protocol", "slice_index") => p.slice_index = parse(name, value)?,
            ("protocol", "slice_width") => {
                p.slice_width = match value {
                    "printed" => SliceWidth::Printed,
                    "full" => SliceWidth::Full,
                    _ => return Err(CliError::Usage(format!("slice_width must be printed or full, got `{value}`"))),
                }
            }
            ("protocol", "qber_coefficient") => {
                p.qber_coefficient = match value {
                    "detector-efficiency" => MismatchQberCoefficient::DetectorEfficiency,
                    "misalignment" => MismatchQberCoefficient::Misalignment,
                    _ => {
                        return Err(CliError::Usage(format!(
                            "qber_coefficient must be detector-efficiency or misalignment, got `{value}`"
                        )))
                    }
                }
            }
            ("protocol", "pol_mismatch_deg") => p.frame = PolarizationFrame::new(f(value)?)?,
            ("hom", "mu_list") => {
                let list = value
                    .split(',')
                    .map(|s| parse::<f64>(name, s.trim()))
                    .collect::<Result<Vec<_>, _>>()?;
                self.hom.mu_list = list;
            }
            ("hom", "table_mu") => self.hom.table_mu = f(value)?,
            ("hom", "base_fwhm_ps") => self.hom.base_fwhm_ps = f(value)?,
            ("hom", "delta_omega") => self.hom.delta_omega = f(value)?,
            ("hom", "detuning_sign") => {
                self.hom.detuning_sign = match value {
                    "printed" => DetuningSign::Printed,
                    "physical" => DetuningSign::Physical,
                    _ => return Err(CliError::Usage(format!("detuning_sign must be printed or physical, got `{value}`"))),
                }
            }
            ("hom", "d_ps_per_nm_km") => self.hom.d_ps_per_nm_km = f(value)?,
            ("hom", "delta_lambda_nm") => self.hom.delta_lambda_nm = f(value)?,
            ("threshold", "lo_deg") => self.threshold.lo_deg = f(value)?,
            ("threshold", "hi_deg") => self.threshold.hi_deg = f(value)?,
            ("threshold", "tol_deg") => self.threshold.tol_deg = f(value)?,
            ("sweep", "axis") => {
                if value == "none" {
                    self.sweep = None;
                } else {
                    let axis = SweepAxis::ALL
                        .into_iter()
                        .find(|a| a.name() == value)
                        .ok_or_else(|| CliError::Usage(format!("unknown sweep axis `{value}`")))?;
                    let s = self.sweep.get_or_insert(Sweep {
                        axis,
                        start: 0.0,
                        stop: 0.0,
                        step: 1.0,
                    });
                    s.axis = axis;
                }
            }
            ("sweep", field) => {
                let v = f(value)?;
                let s = self
                    .sweep
                    .as_mut()
                    .ok_or_else(|| CliError::Usage(format!("`sweep.{field}` needs a sweep axis set first")))?;
                match field {
                    "start" => s.start = v,
                    "stop" => s.stop = v,
                    _ => s.step = v,
                }
            }
            ("mc", "rounds") => self.mc.rounds = parse(name, value)?,
            ("mc", "seed") => self.mc.seed = parse(name, value)?,
            _ => unreachable!("key table and setter disagree on {section}.{name}"),
        }
        Ok(())
    }

    /// Every setting as `(section, key, value)`, in echo order.
    pub fn entries(&self) -> Vec<(&'static str, &'static str, String)> {
        let p = &self.params;
        KEYS.iter()
            .filter_map(|&(section, key)| {
                let value = match (section, key) {
                    ("run", "preset") => self.preset.name().to_string(),
                    ("run", "name") => self.name.clone(),
                    ("protocol", "mu_a") => p.mu_a.to_string(),
                    ("protocol", "mu_b") => p.mu_b.to_string(),
                    ("protocol", "p_dark") => p.p_dark.to_string(),
                    ("protocol", "eta_det") => p.channel.eta_det.to_string(),
                    ("protocol", "gamma_db_per_km") => p.channel.gamma_db_per_km.to_string(),
                    ("protocol", "distance_km") => p.channel.distance_km.to_string(),
                    ("protocol", "f_ec") => p.f_ec.to_string(),
                    ("protocol", "e_d") => p.e_d.to_string(),
                    ("protocol", "n_slices") => p.n_slices.to_string(),
                    ("protocol", "slice_index") => p.slice_index.to_string(),
                    ("protocol", "slice_width") => p.slice_width.name().to_string(),
                    ("protocol", "qber_coefficient") => p.qber_coefficient.name().to_string(),
                    ("protocol", "pol_mismatch_deg") => p.frame.mismatch_deg().to_string(),
                    ("hom", "mu_list") => fmt_list(&self.hom.mu_list),
                    ("hom", "table_mu") => self.hom.table_mu.to_string(),
                    ("hom", "base_fwhm_ps") => self.hom.base_fwhm_ps.to_string(),
                    ("hom", "delta_omega") => self.hom.delta_omega.to_string(),
                    ("hom", "detuning_sign") => self.hom.detuning_sign.name().to_string(),
                    ("hom", "d_ps_per_nm_km") => self.hom.d_ps_per_nm_km.to_string(),
                    ("hom", "delta_lambda_nm") => self.hom.delta_lambda_nm.to_string(),
                    ("threshold", "lo_deg") => self.threshold.lo_deg.to_string(),
                    ("threshold", "hi_deg") => self.threshold.hi_deg.to_string(),
                    ("threshold", "tol_deg") => self.threshold.tol_deg.to_string(),
                    ("sweep", "axis") => self.sweep.map_or("none".to_string(), |s| s.axis.name().to_string()),
                    ("sweep", "start") => self.sweep?.start.to_string(),
                    ("sweep", "stop") => self.sweep?.stop.to_string(),
                    ("sweep", "step") => self.sweep?.step.to_string(),
                    ("mc", "rounds") => self.mc.rounds.to_string(),
                    ("mc", "seed") => self.mc.seed.to_string(),
                    _ => unreachable!("key table and getter disagree on {section}.{key}"),
                };
                Some((section, key, value))
            })
            .collect()
    }

    /// Apply a profile text on top of `self`.
    ///
    /// Plain profiles treat `#` lines as comments. Text whose first line
    /// starts with `# [` is an echoed output header: its `#` lines are read
    /// with the marker stripped, up to the first line without one.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        let echoed = text.starts_with("# [");
        let mut section: Option<String> = None;
        for (no, raw) in text.lines().enumerate() {
            let line = if echoed {
                match raw.strip_prefix('#') {
                    Some(rest) => rest.trim(),
                    None => break,
                }
            } else {
                raw.trim()
            };
            if line.is_empty() || (!echoed && line.starts_with('#')) {
                continue;
            }
            let at = |msg: String| CliError::Usage(format!("profile line {}: {msg}", no + 1));
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if name != RESULT_SECTION && !KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(at(format!("unknown section `[{name}]`")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            match section.as_deref() {
                Some(RESULT_SECTION) => {}
                Some(s) => self.set(&format!("{s}.{key}"), value).map_err(|e| at(e.to_string()))?,
                None => self.set(key, value).map_err(|e| at(e.to_string()))?,
            }
        }
        Ok(())
    }

    /// Header block: every setting, then any extra `[result]` entries, each
    /// line prefixed with `# `.
    pub fn header(&self, results: &[(&str, String)]) -> String {
        let mut out = String::new();
        let mut current = "";
        for (section, key, value) in self.entries() {
            if section != current {
                out.push_str(&format!("# [{section}]\n"));
                current = section;
            }
            out.push_str(&format!("# {key} = {value}\n"));
        }
        if !results.is_empty() {
            out.push_str(&format!("# [{RESULT_SECTION}]\n"));
            for (key, value) in results {
                out.push_str(&format!("# {key} = {value}\n"));
            }
        }
        out
    }

    /// Checks that do not depend on the sweep point.
    pub fn validate(&self) -> Result<(), CliError> {
        self.params.validate()?;
        let h = &self.hom;
        if h.mu_list.is_empty() {
            return Err(CliError::Usage("hom.mu_list must not be empty".into()));
        }
        for &mu in h.mu_list.iter().chain([&h.table_mu]) {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(CliError::Usage(format!("HOM mean photon number must be positive, got {mu}")));
            }
        }
        if !(h.base_fwhm_ps > 0.0 && h.base_fwhm_ps.is_finite()) {
            return Err(CliError::Usage(format!("hom.base_fwhm_ps must be positive, got {}", h.base_fwhm_ps)));
        }
        if !h.delta_omega.is_finite() {
            return Err(CliError::Usage("hom.delta_omega must be finite".into()));
        }
        if !(h.d_ps_per_nm_km > 0.0 && h.delta_lambda_nm > 0.0)
            || !(h.d_ps_per_nm_km.is_finite() && h.delta_lambda_nm.is_finite())
        {
            return Err(CliError::Usage("hom.d_ps_per_nm_km and hom.delta_lambda_nm must be positive".into()));
        }
        let t = &self.threshold;
        if !(0.0 <= t.lo_deg && t.lo_deg < t.hi_deg && t.hi_deg <= 90.0 && t.tol_deg > 0.0) {
            return Err(CliError::Usage("threshold window must satisfy 0 <= lo_deg < hi_deg <= 90, tol_deg > 0".into()));
        }
        if self.mc.rounds == 0 {
            return Err(CliError::Usage("mc.rounds must be at least 1".into()));
        }
        match (self.preset, self.sweep) {
            (Preset::Fig3 | Preset::Fig6 | Preset::Fig8 | Preset::Custom, None) => {
                Err(CliError::Usage(format!("preset {} needs a sweep axis", self.preset)))
            }
            (Preset::Fig3 | Preset::Fig6, Some(s)) if !s.axis.is_key_rate() => Err(CliError::Usage(format!(
                "preset {} sweeps a key-rate axis, not {}",
                self.preset,
                s.axis.name()
            ))),
            (Preset::Fig8, Some(s)) if s.axis.is_key_rate() => Err(CliError::Usage(format!(
                "preset fig8 sweeps a HOM axis, not {}",
                s.axis.name()
            ))),
            (_, Some(s)) => s.points().map(|_| ()),
            (_, None) => Ok(()),
        }
    }
}
