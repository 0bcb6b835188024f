use slepian_core::oracle::empirical_bridge_noncross_multigrid;
use slepian_core::{
    bcp_montecarlo, bcp_nested, bcp_quadrature, noncross_affine, BoundaryFile, Bridge, Grid, Params,
    Partition, PiecewiseAffineBoundary, ProcessParams,
};

const UNIT_CONSTANT: f64 = 0.5542696475637581;

#[test]
fn single_precision_engine() {
    let p = ProcessParams::<f32>::new(1.0, 2.0).unwrap();
    let g = PiecewiseAffineBoundary::constant(p, 1.0f32).unwrap();
    let est = bcp_quadrature(&g, &Partition::equidistant(p, 2).unwrap(), 1e-4f32).unwrap();
    assert!((est.value as f64 - UNIT_CONSTANT).abs() < 2e-4, "{}", est.value);
}

#[test]
fn boundary_file_drives_all_estimators() {
    let text = r#"{"q": 0.5, "d": 0.9, "pieces": [
        {"t_start": 0.5, "t_end": 0.7, "intercept": 1.2, "slope": -1.0},
        {"t_start": 0.7, "t_end": 0.9, "intercept": 1.0, "slope": 2.0}]}"#;
    let g = BoundaryFile::parse(text).unwrap().into_boundary().unwrap();
    let part = Grid::from_boundary(&g);
    let quad = bcp_quadrature(&g, &part, 1e-7).unwrap();
    let nested = bcp_nested(&g, &part, 1e-7).unwrap();
    let mc = bcp_montecarlo(&g, &part, 200_000, 3).unwrap();
    assert!((quad.value - nested.value).abs() < 1e-6);
    assert!((quad.value - mc.value).abs() < 4.0 * mc.error);
    let again = BoundaryFile::parse(&BoundaryFile::from_boundary(&g).to_json()).unwrap().into_boundary().unwrap();
    assert_eq!(again, g);
}

#[test]
fn bridge_oracle_converges_to_closed_form() {
    let params = Params::new(1.0, 2.0).unwrap();
    let spec = Bridge::new(params, 1.1, 1.7, 0.2, -0.1).unwrap();
    let (b, a) = (0.9, 0.4);
    let exact = noncross_affine(&spec, b, a).unwrap();
    let est = empirical_bridge_noncross_multigrid(&spec, b, a, 40_000, 5e-4, 17, &[4, 2, 1]).unwrap();
    let values: Vec<f64> = est.iter().map(|e| e.value).collect();
    // Coarser monitoring can only miss crossings.
    assert!(values[0] >= values[1] && values[1] >= values[2]);
    // Grid bias shrinks like the square root of the step; extrapolate it away.
    let r = std::f64::consts::SQRT_2;
    let extrapolated = values[2] - (values[1] - values[2]) / (r - 1.0);
    assert!((extrapolated - exact).abs() < 0.01, "{values:?} -> {extrapolated} vs {exact}");
    assert!(values[2] - exact > -3.0 * est[2].error);
}
