use geognn::experiments::{linear_fit, loglog_fit, pearson};
use proptest::prelude::*;

proptest! {
    #[test]
    fn exact_power_laws_are_recovered(a in -3.0f64..3.0, c in 0.01f64..100.0, n in 3usize..20) {
        let pts: Vec<(f64, f64)> = (0..n).map(|i| {
            let x = 50.0 * 1.5f64.powi(i as i32);
            (x, c * x.powf(a))
        }).collect();
        let fit = loglog_fit(&pts).unwrap();
        prop_assert!((fit.slope - a).abs() < 1e-9);
        prop_assert!((fit.intercept - c.ln()).abs() < 1e-7 * (1.0 + c.ln().abs()));
        prop_assert_eq!(fit.n_points, n);
    }

    #[test]
    fn pearson_is_bounded_and_symmetric(xs in prop::collection::vec(-10.0f64..10.0, 3..30), shift in -5.0f64..5.0) {
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x * x + (i as f64).sin() + shift).collect();
        if let Some(r) = pearson(&xs, &ys).unwrap() {
            prop_assert!(r.abs() <= 1.0 + 1e-12);
            let back = pearson(&ys, &xs).unwrap().unwrap();
            prop_assert!((r - back).abs() < 1e-12);
            let scaled: Vec<f64> = ys.iter().map(|y| -2.0 * y + 1.0).collect();
            prop_assert!((pearson(&xs, &scaled).unwrap().unwrap() + r).abs() < 1e-9);
        }
    }

    #[test]
    fn least_squares_residual_is_orthogonal(xs in prop::collection::vec(-10.0f64..10.0, 3..30)) {
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| 0.3 * x + (i as f64 * 1.3).cos()).collect();
        let spread = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - xs.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-3);
        let fit = linear_fit(&xs, &ys).unwrap();
        let r: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - fit.slope * x - fit.intercept).collect();
        prop_assert!(r.iter().sum::<f64>().abs() < 1e-8);
        prop_assert!(r.iter().zip(&xs).map(|(r, x)| r * x).sum::<f64>().abs() < 1e-7);
    }
}
