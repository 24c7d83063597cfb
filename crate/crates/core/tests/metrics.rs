use pqc_express::metrics::{average_ranks, evaluate, kendall, r2, rmse, spearman};
use proptest::prelude::*;

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Concordant minus discordant pairs over all pairs, counted directly.
fn kendall_pairs(p: &[f64], t: &[f64]) -> f64 {
    let n = p.len();
    let (mut con, mut dis) = (0i64, 0i64);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let s = (p[i] - p[j]) * (t[i] - t[j]);
            if s > 0.0 {
                con += 1;
            } else if s < 0.0 {
                dis += 1;
            }
        }
    }
    (con - dis) as f64 / (n * (n - 1)) as f64
}

fn distinct(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(-1_000_000i64..1_000_000, len)
        .prop_map(|s| s.into_iter().map(|x| x as f64 / 997.0).collect::<Vec<_>>())
        .prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn spearman_is_pearson_of_ranks((p, t) in (3usize..100).prop_flat_map(|n| (distinct(n..n + 1), distinct(n..n + 1)))) {
        let direct = spearman(&p, &t).unwrap();
        let oracle = pearson(&average_ranks(&p), &average_ranks(&t));
        prop_assert!((direct - oracle).abs() < 1e-12, "{} vs {}", direct, oracle);
    }

    #[test]
    fn kendall_matches_pair_count(
        (p, t) in (2usize..60).prop_flat_map(|n| (
            prop::collection::vec(-5i32..5, n).prop_map(|v| v.into_iter().map(f64::from).collect::<Vec<_>>()),
            prop::collection::vec(-5i32..5, n).prop_map(|v| v.into_iter().map(f64::from).collect::<Vec<_>>()),
        ))
    ) {
        prop_assert!((kendall(&p, &t).unwrap() - kendall_pairs(&p, &t)).abs() < 1e-12);
    }

    #[test]
    fn ranks_ignore_monotone_maps((p, t) in (3usize..50).prop_flat_map(|n| (distinct(n..n + 1), distinct(n..n + 1)))) {
        let warped: Vec<f64> = p.iter().map(|x| (x / 50.0).exp() + x.powi(3)).collect();
        let shifted: Vec<f64> = t.iter().map(|x| 3.0 * x - 7.0).collect();
        prop_assert_eq!(spearman(&p, &t).unwrap(), spearman(&warped, &shifted).unwrap());
        prop_assert_eq!(kendall(&p, &t).unwrap(), kendall(&warped, &shifted).unwrap());
        let rho = spearman(&p, &t).unwrap();
        let tau = kendall(&p, &t).unwrap();
        prop_assert!((-1.0..=1.0).contains(&rho) && (-1.0..=1.0).contains(&tau));
    }
}

/// Spearman with exactly tie-free random data at n = 100.
#[test]
fn spearman_cross_oracle_at_n_100() {
    use rand::seq::SliceRandom;
    let mut rng = pqc_express::seed::rng_from_seed(12);
    for _ in 0..20 {
        let mut p: Vec<f64> = (0..100).map(f64::from).collect();
        let mut t = p.clone();
        p.shuffle(&mut rng);
        t.shuffle(&mut rng);
        let d = spearman(&p, &t).unwrap() - pearson(&average_ranks(&p), &average_ranks(&t));
        assert!(d.abs() < 1e-12);
    }
}

#[test]
fn report_bundles_all_measures() {
    let pred = [0.0, 1.0, 1.0];
    let truth = [0.0, 1.0, 2.0];
    let r = evaluate(&pred, &truth).unwrap();
    assert_eq!(r.n, 3);
    assert_eq!(r.rmse, rmse(&pred, &truth).unwrap());
    assert_eq!(r.r2, 0.5);
    assert_eq!(r2(&pred, &truth).unwrap(), 0.5);
    assert!(evaluate(&[1.0, 2.0], &[3.0, 3.0]).unwrap().r2.is_nan());
}
