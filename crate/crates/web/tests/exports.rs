use suolson_web::{compare, energy_growth, heatmap};

#[test]
fn plane_source_comparison_is_close_and_conservative() {
    let c = compare(120, 16, 1e-3, 1.0).unwrap();
    assert_eq!(c.x().len(), 120);
    assert_eq!(c.phi_full().len(), c.phi_dlra().len());
    assert!(c.flux_difference() < 2e-2, "{}", c.flux_difference());
    assert!(c.mass_drift_full() < 1e-12 && c.mass_drift_dlra() < 1e-12);
    assert_eq!(c.times().len(), c.ranks().len());
    assert!(c.ranks().iter().all(|&r| r >= 1.0));
}

#[test]
fn advection_grows_while_conservative_decays() {
    let h = energy_growth(4, 400).unwrap();
    assert_eq!(h.advection().len(), 401);
    assert!(h.advection().last().unwrap() > &2.0);
    assert!(h.conservative().windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
}

#[test]
fn heatmap_has_requested_shape() {
    let m = heatmap("dlra", 60, 10, 1e-2, 0.5, 32).unwrap();
    assert_eq!(m.values().len(), 60 * 32);
    assert!(m.rank() >= 1);
    assert!(m.values().iter().all(|v| v.is_finite()));
    assert!(heatmap("nonsense", 60, 10, 1e-2, 0.5, 32).is_err());
}
