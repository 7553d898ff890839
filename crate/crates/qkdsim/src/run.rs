//! Executing a profile: sweep tables, the table3 summary and the Monte Carlo
//! validation ledger.

use std::path::Path;

use rayon::prelude::*;

use dpsmdi::hom::{
    click_and_coincidence, delta_fwhm_for_visibility, fwhm_mismatch_from_dispersion, length_mismatch_for_fwhm,
    overlap_factor, DispersionSpec, GaussianPulsePair,
};
use dpsmdi::keyrate::{
    key_rate_single_photon, mismatch_threshold_deg, qber_single_photon_improved, secure_key_rate_wcs,
    single_photon_yield, ProtocolParams,
};
use dpsmdi::mc::{validate_config, validation_points};
use dpsmdi::optics::PolarizationFrame;
use dpsmdi::sifting::SiftScheme;

use crate::profile::{Preset, RunProfile, SweepAxis};
use crate::CliError;

/// Columns of the key-rate table, in order.
pub const KEY_RATE_COLUMNS: [&str; 20] = [
    "distance_km",
    "loss_db",
    "eta",
    "pol_mismatch_deg",
    "mu_a",
    "mu_b",
    "y11_original",
    "y11_improved",
    "e11_improved",
    "r_single_original",
    "r_single_improved",
    "y11_mismatch",
    "e11_mismatch",
    "q11",
    "q_m",
    "e_m",
    "gain",
    "qber",
    "r_sec_raw",
    "r_sec",
];

/// Columns of the table3 summary.
pub const TABLE3_COLUMNS: [&str; 7] = [
    "v_hom",
    "key_rate_fraction",
    "delta_fwhm_ps",
    "delta_l_km",
    "dispersion_delta_fwhm_ps",
    "model_delta_fwhm_ps",
    "model_delta_l_km",
];

/// Published visibility thresholds with their width and length mismatches
/// and the quoted fraction of the maximum key rate.
pub const TABLE3_ROWS: [(f64, f64, f64, f64); 4] = [
    (0.5, 1.0, 0.0, 0.0),
    (0.45, 0.5, 12.0, 70.6),
    (0.4, 0.1, 24.0, 141.2),
    (0.37, 0.0, 30.0, 176.5),
];

/// Fixed HOM columns; each μ in `hom.mu_list` adds `p_c`, `p_cd` and `v_hom`
/// columns suffixed with `_mu<μ>`.
pub const HOM_COLUMNS: [&str; 5] = ["delta_fwhm_ps", "delta_l_km", "fwhm_a_ps", "fwhm_b_ps", "overlap_k"];

/// Result column name in the fig6 header.
pub const PHI_STAR_KEY: &str = "phi_star_deg";

/// `None` is written as `NA`, as is any non-finite value.
pub type Cell = Option<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub files: Vec<OutputFile>,
    /// Set by mc-validate only.
    pub ledger_passed: Option<bool>,
}

impl RunOutput {
    pub fn write_to(&self, dir: &Path) -> Result<(), CliError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CliError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        for f in &self.files {
            let path = dir.join(&f.name);
            std::fs::write(&path, &f.contents).map_err(io(&path))?;
        }
        Ok(())
    }
}

fn format_cell(c: Cell) -> String {
    match c {
        Some(v) if v.is_finite() => v.to_string(),
        _ => "NA".to_string(),
    }
}

fn csv_body(columns: &[String], rows: &[Vec<Cell>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns).expect("writing to memory");
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        w.write_record(row.iter().map(|&c| format_cell(c))).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("CSV of ASCII fields")
}

/// Sweep points in order, computed on `pool`.
fn par_rows<F>(pool: &rayon::ThreadPool, points: &[f64], f: F) -> Vec<Vec<Cell>>
where
    F: Fn(f64) -> Vec<Cell> + Sync,
{
    pool.install(|| points.par_iter().map(|&x| f(x)).collect())
}

fn build_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        b = b.num_threads(j);
    }
    b.build().map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
}

/// Protocol parameters at one point of a key-rate axis.
pub fn params_at(base: &ProtocolParams, axis: SweepAxis, x: f64) -> Result<ProtocolParams, CliError> {
    let p = match axis {
        SweepAxis::DistanceKm => base.with_distance(x),
        SweepAxis::PolMismatchDeg => base.with_mismatch(PolarizationFrame::new(x)?),
        SweepAxis::Mu => ProtocolParams {
            mu_a: x,
            mu_b: x,
            ..*base
        },
        SweepAxis::DeltaFwhmPs | SweepAxis::DeltaLKm => {
            return Err(CliError::Usage(format!("{} is not a key-rate axis", axis.name())))
        }
    };
    p.validate()?;
    Ok(p)
}

/// One key-rate table row. Quantities that cannot be evaluated are `None`.
pub fn key_rate_row(p: &ProtocolParams) -> Vec<Cell> {
    let wcs = secure_key_rate_wcs(p).ok();
    let sp = |s| key_rate_single_photon(p, s).ok().map(|r| r.clamped);
    vec![
        Some(p.channel.distance_km),
        Some(p.channel.gamma_db_per_km * p.channel.distance_km),
        Some(p.eta_a()),
        Some(p.frame.mismatch_deg()),
        Some(p.mu_a),
        Some(p.mu_b),
        Some(single_photon_yield(p, SiftScheme::Original)),
        Some(single_photon_yield(p, SiftScheme::Improved)),
        qber_single_photon_improved(p).ok(),
        sp(SiftScheme::Original),
        sp(SiftScheme::Improved),
        wcs.map(|r| r.y11),
        wcs.map(|r| r.e11),
        wcs.map(|r| r.q11),
        wcs.map(|r| r.q_m),
        wcs.map(|r| r.e_m),
        wcs.map(|r| r.conclusive_gain()),
        wcs.map(|r| r.conclusive_qber()),
        wcs.map(|r| r.r_sec_raw),
        wcs.map(|r| r.r_sec),
    ]
}

fn hom_columns(profile: &RunProfile) -> Vec<String> {
    let mut cols: Vec<String> = HOM_COLUMNS.iter().map(|s| s.to_string()).collect();
    for mu in &profile.hom.mu_list {
        for q in ["p_c", "p_cd", "v_hom"] {
            cols.push(format!("{q}_mu{mu}"));
        }
    }
    cols
}

/// One HOM table row at a width or length mismatch.
pub fn hom_row(profile: &RunProfile, axis: SweepAxis, x: f64) -> Vec<Cell> {
    let h = &profile.hom;
    let (delta_fwhm, delta_l) = match axis {
        SweepAxis::DeltaLKm => {
            let spec = DispersionSpec {
                d_ps_per_nm_km: h.d_ps_per_nm_km,
                delta_l_km: x,
                delta_lambda_nm: h.delta_lambda_nm,
            };
            (fwhm_mismatch_from_dispersion(&spec).ok(), Some(x))
        }
        _ => (Some(x), length_mismatch_for_fwhm(h.d_ps_per_nm_km, h.delta_lambda_nm, x).ok()),
    };
    let fwhm_b = delta_fwhm.map(|d| h.base_fwhm_ps + d);
    let pair = |mu: f64| {
        GaussianPulsePair::from_fwhm(mu, h.base_fwhm_ps, fwhm_b?, h.delta_omega)
            .ok()
            .map(|p| p.with_detuning_sign(h.detuning_sign))
    };
    let mut row = vec![
        delta_fwhm,
        delta_l,
        Some(h.base_fwhm_ps),
        fwhm_b,
        pair(h.mu_list[0]).map(|p| overlap_factor(&p)),
    ];
    for &mu in &h.mu_list {
        let r = pair(mu).and_then(|p| click_and_coincidence(&p).ok());
        row.extend([r.map(|r| r.p_c), r.map(|r| r.p_cd), r.map(|r| r.v_hom)]);
    }
    row
}

fn table3_rows(profile: &RunProfile) -> Result<Vec<Vec<Cell>>, CliError> {
    let h = &profile.hom;
    TABLE3_ROWS
        .iter()
        .map(|&(v, fraction, delta_fwhm, delta_l)| {
            let dispersion = fwhm_mismatch_from_dispersion(&DispersionSpec {
                d_ps_per_nm_km: h.d_ps_per_nm_km,
                delta_l_km: delta_l,
                delta_lambda_nm: h.delta_lambda_nm,
            })?;
            let model = delta_fwhm_for_visibility(h.table_mu, h.base_fwhm_ps, v)?;
            let model_l = model
                .map(|d| length_mismatch_for_fwhm(h.d_ps_per_nm_km, h.delta_lambda_nm, d))
                .transpose()?;
            Ok(vec![
                Some(v),
                Some(fraction),
                Some(delta_fwhm),
                Some(delta_l),
                Some(dispersion),
                model,
                model_l,
            ])
        })
        .collect()
}

fn csv_file(profile: &RunProfile, results: &[(&str, String)], columns: &[String], rows: &[Vec<Cell>]) -> OutputFile {
    OutputFile {
        name: format!("{}.csv", profile.name),
        contents: format!("{}{}", profile.header(results), csv_body(columns, rows)),
    }
}

fn strings(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

/// Run a validated profile. `jobs` sizes the worker pool; `None` uses one
/// worker per CPU. Output is identical for any pool size.
pub fn run(profile: &RunProfile, jobs: Option<usize>) -> Result<RunOutput, CliError> {
    profile.validate()?;
    let pool = build_pool(jobs)?;
    let single = |f: OutputFile| RunOutput {
        files: vec![f],
        ledger_passed: None,
    };
    match (profile.preset, profile.sweep) {
        (Preset::Table3, _) => Ok(single(csv_file(profile, &[], &strings(&TABLE3_COLUMNS), &table3_rows(profile)?))),
        (Preset::McValidate, _) => run_mc_validate(profile, &pool),
        (_, Some(sweep)) => {
            let points = sweep.points()?;
            if sweep.axis.is_key_rate() {
                // Reject a bad range up front rather than filling the table with NA.
                for x in [sweep.start, sweep.stop] {
                    params_at(&profile.params, sweep.axis, x)?;
                }
                let rows = par_rows(&pool, &points, |x| match params_at(&profile.params, sweep.axis, x) {
                    Ok(p) => key_rate_row(&p),
                    Err(_) => vec![None; KEY_RATE_COLUMNS.len()],
                });
                let mut results = Vec::new();
                if profile.preset == Preset::Fig6 {
                    let t = profile.threshold;
                    let phi = pool.install(|| mismatch_threshold_deg(&profile.params, t.lo_deg, t.hi_deg, t.tol_deg))?;
                    results.push((PHI_STAR_KEY, format_cell(phi)));
                }
                Ok(single(csv_file(profile, &results, &strings(&KEY_RATE_COLUMNS), &rows)))
            } else {
                let rows = par_rows(&pool, &points, |x| hom_row(profile, sweep.axis, x));
                Ok(single(csv_file(profile, &[], &hom_columns(profile), &rows)))
            }
        }
        (_, None) => Err(CliError::Usage(format!("preset {} needs a sweep axis", profile.preset))),
    }
}

fn run_mc_validate(profile: &RunProfile, pool: &rayon::ThreadPool) -> Result<RunOutput, CliError> {
    let points = validation_points(&profile.params, profile.mc.rounds, profile.mc.seed)?;
    let ledgers = pool.install(|| {
        points
            .iter()
            .map(|(label, config)| validate_config(label.as_str(), config))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let passed = ledgers.iter().all(|l| l.passed());
    let mut text = profile.header(&[("overall", if passed { "pass" } else { "FAIL" }.to_string())]);
    for l in &ledgers {
        text.push('\n');
        text.push_str(&l.to_string());
    }
    Ok(RunOutput {
        files: vec![OutputFile {
            name: format!("{}.txt", profile.name),
            contents: text,
        }],
        ledger_passed: Some(passed),
    })
}
