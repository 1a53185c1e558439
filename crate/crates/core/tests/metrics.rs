use eqswarm_core::metrics::{abs_error_curve, mae, nmse, ood_trace, wmape, Incumbent, MetricError, MetricReport};
use eqswarm_core::{Dataset, Expression, Split};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn fixtures() {
    assert_eq!(wmape(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    assert_eq!(wmape(&[2.0, 2.0], &[1.0, 3.0]).unwrap(), 0.5);
    assert!((wmape(&[10.0], &[9.0]).unwrap() - 0.1).abs() < 1e-15);
    assert!(matches!(wmape(&[0.0, 0.0], &[1.0, 1.0]), Err(MetricError::DegenerateTarget(_))));
    assert!(matches!(wmape(&[1.0], &[1.0, 2.0]), Err(MetricError::LengthMismatch { .. })));

    let y = [1.0, 2.0, 3.0, 6.0];
    assert_eq!(nmse(&y, &y).unwrap(), 0.0);
    assert_eq!(nmse(&y, &[3.0; 4]).unwrap(), 1.0);
    assert!(matches!(nmse(&[2.0, 2.0], &[1.0, 1.0]), Err(MetricError::DegenerateTarget(_))));

    assert_eq!(mae(&[1.0, 3.0], &[2.0, 2.0]).unwrap(), 1.0);
    assert_eq!(mae(&y, &y).unwrap(), 0.0);
    assert!(matches!(mae(&[1.0], &[]), Err(MetricError::LengthMismatch { .. })));
}

fn random_pair(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let n = rng.random_range(2..60);
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
    let yhat: Vec<f64> = y.iter().map(|v| v + rng.random_range(-5.0..5.0)).collect();
    (y, yhat)
}

#[test]
fn wmape_is_scale_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..100 {
        let (y, yhat) = random_pair(&mut rng);
        let mut c: f64 = rng.random_range(-1e3..1e3);
        if c.abs() < 1e-3 {
            c = 1.0;
        }
        let ys: Vec<f64> = y.iter().map(|v| c * v).collect();
        let hs: Vec<f64> = yhat.iter().map(|v| c * v).collect();
        let a = wmape(&y, &yhat).unwrap();
        let b = wmape(&ys, &hs).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.max(1.0), "{a} vs {b}");
    }
}

#[test]
fn nmse_matches_two_pass_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let (y, yhat) = random_pair(&mut rng);
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let num: f64 = y.iter().zip(&yhat).map(|(a, b)| (a - b) * (a - b)).sum();
        let den: f64 = y.iter().map(|a| (a - mean) * (a - mean)).sum();
        let want = num / den;
        let got = nmse(&y, &yhat).unwrap();
        assert!((got - want).abs() <= 1e-12 * want.max(1.0));
    }
}

#[test]
fn mae_homogeneity_and_permutation_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let (y, yhat) = random_pair(&mut rng);
        let c: f64 = rng.random_range(-10.0..10.0);
        let ys: Vec<f64> = y.iter().map(|v| c * v).collect();
        let hs: Vec<f64> = yhat.iter().map(|v| c * v).collect();
        let m = mae(&y, &yhat).unwrap();
        assert!((mae(&ys, &hs).unwrap() - c.abs() * m).abs() < 1e-9 * m.max(1.0));

        let mut idx: Vec<usize> = (0..y.len()).collect();
        idx.shuffle(&mut rng);
        let py: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        let ph: Vec<f64> = idx.iter().map(|&i| yhat[i]).collect();
        for f in [wmape, nmse, mae] {
            let a = f(&y, &yhat).unwrap();
            let b = f(&py, &ph).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }
    }
}

#[test]
fn nonfinite_predictions_poison_metrics() {
    let y = [1.0, 2.0, 3.0];
    let yhat = [1.0, f64::NAN, 3.0];
    assert!(wmape(&y, &yhat).unwrap().is_nan());
    assert!(mae(&y, &yhat).unwrap().is_nan());
    let r = MetricReport::compute(&y, &yhat, Split::TestId, true).unwrap();
    assert_eq!(r.nonfinite_rows, 1);
    assert_eq!(r.n, 3);
    let json = serde_json::to_string(&r).unwrap();
    let back: MetricReport = serde_json::from_str(&json).unwrap();
    assert!(back.wmape.is_nan() && back.nonfinite_rows == 1);
}

fn fixture() -> Dataset {
    let rows = vec![vec![3.0], vec![1.0], vec![5.0], vec![2.0], vec![4.0]];
    let y = vec![7.0, 2.0, 11.0, 5.0, 9.0];
    Dataset::from_rows(vec!["x".into()], "y", &rows, y).unwrap()
}

#[test]
fn curve_on_five_rows() {
    let d = fixture();
    let e = Expression::parse("2 * x + 1", &["x".to_string()]).unwrap();
    let pts = abs_error_curve(&e, &[], &d, "x").unwrap();
    assert_eq!(pts.len(), 5);
    let xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
    assert_eq!(xs, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    // Hand-computed: at x=1 the target is 2 (prediction 3), at x=2 it is 5 (prediction 5).
    let errs: Vec<f64> = pts.iter().map(|p| p.abs_error).collect();
    assert_eq!(errs, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    assert!(pts.iter().all(|p| p.finite));
    assert!(matches!(abs_error_curve(&e, &[], &d, "nope"), Err(MetricError::UnknownVariable(_))));

    let bad = Expression::parse("log(x - 3)", &["x".to_string()]).unwrap();
    let pts = abs_error_curve(&bad, &[], &d, "x").unwrap();
    assert_eq!(pts.len(), 5);
    assert_eq!(pts.iter().filter(|p| !p.finite).count(), 3);
}

#[test]
fn trace_follows_incumbents() {
    let d = fixture();
    let params = [2.0, 1.0];
    let flat: Vec<Incumbent> = (1..=6)
        .map(|i| Incumbent {
            iteration: i,
            expr_text: "p0 * x + p1",
            params: &params,
        })
        .collect();
    let t = ood_trace(&flat, &d);
    assert_eq!(t.len(), 6);
    assert!(t.windows(2).all(|w| w[0].wmape == w[1].wmape));
    let e = Expression::parse("p0 * x + p1", &["x".to_string()]).unwrap();
    let direct = wmape(d.target(), &e.evaluate_batch(&d, &params).unwrap()).unwrap();
    assert_eq!(t.last().unwrap().wmape, direct);

    let broken = [Incumbent {
        iteration: 1,
        expr_text: "p0 * (",
        params: &[],
    }];
    assert!(ood_trace(&broken, &d)[0].wmape.is_nan());
}
