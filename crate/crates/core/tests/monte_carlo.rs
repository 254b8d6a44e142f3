use bmcopula_core::bm_joint::{self, BmParams, CorrBmParams};
use bmcopula_core::oracle::{mc_agreement, simulate_joint, PathConfig, SimTarget};

#[test]
fn bridge_corrected_max_matches_closed_form() {
    let p = BmParams::drifted(0.0, 1.0).unwrap();
    let target = SimTarget::WtMt(p);
    let mut cfg = PathConfig::new(1_000_000, 1.0, 31).unwrap();
    cfg.dt = 1e-3;
    let queries: Vec<(f64, f64)> = (1..=10).map(|k| (f64::INFINITY, 0.25 * k as f64)).collect();
    let e = simulate_joint(&target, &cfg, &queries).unwrap();
    for (k, &(_, y)) in queries.iter().enumerate() {
        let z = (e.estimates[k] - bm_joint::cdf_mt(y, &p)) / e.std_errors[k];
        assert!(z.abs() <= 3.0, "y={y}: z={z}");
    }
}

#[test]
fn window_max_example_point() {
    let p = BmParams::new(0.0, 1.0, 0.25, 0.75, 1.0).unwrap();
    let cfg = PathConfig::new(1_000_000, 1.0, 12).unwrap();
    let rows = mc_agreement(&SimTarget::WTMst(p), &cfg, &[(0.5, 0.3)]).unwrap();
    assert!(rows[0].z_score.abs() <= 3.0, "{:?}", rows[0]);
}

#[test]
fn correlated_pair_agrees() {
    let p = CorrBmParams::new(0.3, -0.4, 1.3, 0.8, -0.7).unwrap();
    let target = SimTarget::B1TM2st { p, s: 0.3, t: 0.8, horizon: 1.2 };
    let cfg = PathConfig::new(200_000, 1.2, 6).unwrap();
    let rows = mc_agreement(&target, &cfg, &[(0.0, 0.2), (0.5, 0.6), (-0.8, 1.0)]).unwrap();
    for r in rows {
        assert!(r.z_score.abs() <= 3.5, "{r:?}");
    }
}
