//! Regression values for the default protocol profile, generated once from
//! this implementation. A change here means the model changed.

use dpsmdi::keyrate::{key_rate_single_photon, mismatch_threshold_deg, secure_key_rate_wcs, ProtocolParams};
use dpsmdi::sifting::SiftScheme;

const REL: f64 = 1e-9;

fn close(got: f64, want: f64, what: &str) {
    assert!((got / want - 1.0).abs() < REL, "{what}: {got} vs pinned {want}");
}

#[test]
fn weak_coherent_rate_at_default_profile() {
    // (distance, Q_m, E_m, r_sec_raw)
    let pinned = [
        (0.0, 2.284501198131294e-5, 3.3969953916396537e-3, 2.9836129049358265e-6),
        (50.0, 2.315949406992282e-6, 3.8547051560056584e-3, 2.8704972485400765e-7),
        (100.0, 2.328960428487101e-7, 5.270792472405783e-3, 2.562715320895976e-8),
    ];
    for (d, q_m, e_m, r) in pinned {
        let rep = secure_key_rate_wcs(&ProtocolParams::default().with_distance(d)).unwrap();
        close(rep.q_m, q_m, "Q_m");
        close(rep.e_m, e_m, "E_m");
        close(rep.r_sec_raw, r, "r_sec");
    }
}

#[test]
fn single_photon_rates_at_default_profile() {
    let p = ProtocolParams::default().with_distance(50.0);
    close(
        key_rate_single_photon(&p, SiftScheme::Original).unwrap().raw,
        5.397497316825856e-4,
        "original",
    );
    close(
        key_rate_single_photon(&p, SiftScheme::Improved).unwrap().raw,
        8.096245975238784e-4,
        "improved",
    );
}

#[test]
fn mismatch_threshold_at_default_profile() {
    let at = |d: f64| {
        mismatch_threshold_deg(&ProtocolParams::default().with_distance(d), 0.0, 45.0, 1e-9)
            .unwrap()
            .unwrap()
    };
    assert!((at(0.0) - 10.653259791433811).abs() < 1e-6);
    assert!((at(50.0) - 10.381361581385136).abs() < 1e-6);
}
