mod support;

use chrono::NaiveDate;
use predbs::calibration::{
    build_surface, implied_excess_predictability, surface_diff, CalibrationPoint, Clamp, PredictabilitySurface,
};
use predbs::data_io::{parse_option_chain, parse_surface_points, read_surface, surface_points_to_csv, write_surface};
use predbs::pricing::{call_price, PricingInputs};
use predbs::volatility::{vix_to_sigma, VolMethod};
use proptest::prelude::*;

fn market() -> impl Strategy<Value = (PricingInputs, f64)> {
    (50.0..300.0f64, 0.8..1.25f64, 0.1..2.0f64, 0.0..0.08f64, 0.1..0.5f64, -0.999..0.999f64).prop_map(
        |(spot, m, tau, rate, sigma, p)| (PricingInputs::new(spot, spot / m, tau, rate, sigma, p).unwrap(), p),
    )
}

fn clamp_flag() -> impl Strategy<Value = Clamp> {
    prop_oneof![Just(Clamp::None), Just(Clamp::AtMinusOne), Just(Clamp::AtPlusOne)]
}

fn any_point() -> impl Strategy<Value = CalibrationPoint> {
    (
        any::<f64>().prop_filter("finite", |x| x.is_finite()),
        0.0..5.0f64,
        -1.0..=1.0f64,
        clamp_flag(),
        0.0..1e4f64,
        0.0..1e4f64,
        -1.0..1.0f64,
    )
        .prop_map(|(moneyness, tau, p, clamped, market_price, model_price, residual)| CalibrationPoint {
            moneyness,
            tau,
            p,
            clamped,
            market_price,
            model_price,
            residual,
        })
}

proptest! {
    #[test]
    fn round_trip_recovers_p((inputs, p) in market()) {
        let market = call_price(&inputs).unwrap().price;
        let pt = implied_excess_predictability(market, inputs.spot, inputs.strike, inputs.tau, inputs.rate, inputs.sigma).unwrap();
        prop_assert_eq!(pt.clamped, Clamp::None);
        prop_assert!((pt.p - p).abs() <= 1e-8, "{} vs {}", pt.p, p);
        prop_assert!(pt.residual.abs() <= 1e-9 * inputs.spot);
    }

    #[test]
    fn richer_quote_means_lower_p((inputs, _) in market(), bump in 1e-4..0.05f64) {
        let base = call_price(&inputs).unwrap().price;
        let cal = |m: f64| implied_excess_predictability(m, inputs.spot, inputs.strike, inputs.tau, inputs.rate, inputs.sigma).unwrap().p;
        prop_assert!(cal(base * (1.0 + bump)) <= cal(base));
    }

    #[test]
    fn surface_csv_round_trip(points in prop::collection::vec(any_point(), 0..40)) {
        let csv = surface_points_to_csv(&points);
        let (back, warnings) = parse_surface_points(csv.as_bytes()).unwrap();
        prop_assert!(warnings.is_empty());
        prop_assert_eq!(back.len(), points.len());
        for (a, b) in points.iter().zip(&back) {
            prop_assert_eq!(a.moneyness.to_bits(), b.moneyness.to_bits());
            prop_assert_eq!(a.tau.to_bits(), b.tau.to_bits());
            prop_assert_eq!(a.p.to_bits(), b.p.to_bits());
            prop_assert_eq!(a.clamped, b.clamped);
            prop_assert_eq!(a.market_price.to_bits(), b.market_price.to_bits());
            prop_assert_eq!(a.model_price.to_bits(), b.model_price.to_bits());
            prop_assert_eq!(a.residual.to_bits(), b.residual.to_bits());
        }
    }
}

fn synthetic_surface(sigma_vix: f64) -> PredictabilitySurface {
    let m = support::paper_like_market();
    let csv = m.chain_csv(&m.quotes(support::p_star));
    let chain = parse_option_chain(csv.as_bytes()).unwrap().single_chain("SPY", m.spot).unwrap();
    build_surface(&chain, m.spot, m.rate, &vix_to_sigma(sigma_vix).unwrap()).unwrap()
}

#[test]
fn synthetic_chain_recovers_generator() {
    let s = synthetic_surface(20.0);
    for pt in &s.points {
        assert!((pt.p - support::p_star(pt.moneyness)).abs() <= 1e-6);
    }
    assert!(s.count_clamped(Clamp::AtMinusOne) + s.count_clamped(Clamp::AtPlusOne) < s.points.len());
}

#[test]
fn surface_is_deterministic() {
    assert_eq!(synthetic_surface(20.0), synthetic_surface(20.0));
}

#[test]
fn surface_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("surface.csv");
    let s = synthetic_surface(20.0);
    write_surface(&path, &s).unwrap();
    let (back, warnings) = read_surface(&path).unwrap();
    assert!(warnings.is_empty());
    assert_eq!(back, s);
    let zero = surface_diff(&s, &back).unwrap();
    assert_eq!(zero.label(), "vix-vix");
    assert_eq!(zero.points.len(), s.points.len());
    assert!(zero.points.iter().all(|d| d.dp == 0.0));
}

#[test]
fn empty_surface_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    let s = PredictabilitySurface {
        method: VolMethod::Realized,
        sigma: 0.12,
        as_of: NaiveDate::from_ymd_opt(2015, 1, 2).unwrap(),
        spot: 206.38,
        rate: 0.0212,
        points: vec![],
        diagnostics: vec![],
    };
    write_surface(&path, &s).unwrap();
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        "moneyness,tau_years,p,clamped,market_price,model_price,residual\n"
    );
    assert_eq!(read_surface(&path).unwrap().0, s);
}

#[test]
fn diff_needs_matching_market_state() {
    let a = synthetic_surface(20.0);
    let mut b = a.clone();
    b.spot = 200.0;
    assert!(surface_diff(&a, &b).is_err());
}
