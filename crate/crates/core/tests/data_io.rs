use std::fmt::Write as _;

use chrono::{Days, NaiveDate};
use predbs::calibration::year_fraction;
use predbs::data_io::{
    parse_brownian_path, parse_option_chain, parse_return_series, parse_surface_points, parse_vix_series,
};
use predbs::error::Error;
use proptest::prelude::*;

#[test]
fn chain_spanning_first_half_of_2015() {
    // expiries from 2015-01-02 to 2015-06-20, strikes 80 to 250, quoted on 2015-01-02
    let quote = NaiveDate::from_ymd_opt(2015, 1, 2).unwrap();
    let expiries: Vec<NaiveDate> = [0u64, 14, 49, 77, 105, 169]
        .iter()
        .map(|d| quote.checked_add_days(Days::new(*d)).unwrap())
        .collect();
    assert_eq!(expiries.last().unwrap().to_string(), "2015-06-20");
    let mut csv = String::from("quote_date,expiry,strike,right,bid,ask\n");
    for e in &expiries {
        for k in (80..=250).step_by(10) {
            let _ = writeln!(csv, "{quote},{e},{k},call,1.00,1.10");
        }
    }
    let file = parse_option_chain(csv.as_bytes()).unwrap();
    assert!(file.diagnostics.is_empty());
    let chain = file.single_chain("SPY", 206.38).unwrap();
    assert_eq!(chain.quotes.len(), 6 * 18);
    let max_tau = chain
        .quotes
        .iter()
        .map(|q| year_fraction(q.quote_date, q.expiry))
        .fold(0.0, f64::max);
    assert_eq!(max_tau, 169.0 / 365.0);
    assert!((max_tau - 0.463).abs() < 1e-3);
}

#[test]
fn skipped_rows_keep_line_numbers() {
    let csv = "quote_date,expiry,strike,right,bid,ask\r\n\
        2015-01-02,2015-03-20,200,call,11.9,12.1\r\n\
        2015-01-02,2015-03-20,abc,call,1,2\r\n\
        2015-01-02,2015-03-20,210,straddle,1,2\r\n\
        2015-01-02,2015-03-20,220,call,1,2\r\n\
        2015-01-02,2015-03-20,230,call,1,2\r\n";
    let f = parse_option_chain(csv.as_bytes()).unwrap();
    assert_eq!(f.quotes.len(), 3);
    let lines: Vec<u64> = f.diagnostics.iter().map(|d| d.line).collect();
    assert_eq!(lines, vec![3, 4]);
}

#[test]
fn unreadable_file_is_an_io_error() {
    let err = predbs::data_io::read_option_chain(std::path::Path::new("/nonexistent/chain.csv")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
}

#[test]
fn shuffled_return_dates_are_fatal() {
    let err = parse_return_series(b"date,log_return\n2015-01-05,0.01\n2015-01-02,0.02\n2015-01-06,0.0\n").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
}

proptest! {
    #[test]
    fn parsers_are_total(bytes in prop::collection::vec(any::<u8>(), 0..512)) {
        let _ = parse_option_chain(&bytes);
        let _ = parse_return_series(&bytes);
        let _ = parse_vix_series(&bytes);
        let _ = parse_surface_points(&bytes);
        let _ = parse_brownian_path(&bytes);
    }

    #[test]
    fn chain_parser_total_after_header(tail in "[0-9a-z,.\\-\r\n ]{0,400}") {
        let text = format!("quote_date,expiry,strike,right,bid,ask\n{tail}");
        match parse_option_chain(text.as_bytes()) {
            Ok(f) => {
                for q in &f.quotes {
                    prop_assert!(q.ask >= q.bid && q.bid >= 0.0 && q.expiry >= q.quote_date);
                }
            }
            Err(e) => {
                let expected = matches!(e, Error::DataQuality(_) | Error::Parse { .. });
                prop_assert!(expected, "unexpected error {}", e);
            }
        }
    }

    #[test]
    fn close_series_round_trip(closes in prop::collection::vec(1.0..1000.0f64, 2..50)) {
        let mut csv = String::from("date,close\n");
        let start = NaiveDate::from_ymd_opt(2015, 1, 2).unwrap();
        for (i, c) in closes.iter().enumerate() {
            let d = start.checked_add_days(Days::new(i as u64)).unwrap();
            let _ = writeln!(csv, "{d},{c:.16e}");
        }
        let s = parse_return_series(csv.as_bytes()).unwrap();
        prop_assert_eq!(s.len(), closes.len() - 1);
        for (i, r) in s.returns().iter().enumerate() {
            prop_assert_eq!(*r, (closes[i + 1] / closes[i]).ln());
        }
    }
}
