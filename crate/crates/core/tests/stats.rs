mod common;

use common::*;
use ergomon_core::stats::*;
use ergomon_core::Error;
use rand::Rng;

const F_SF: [(f64, f64, f64, f64); 20] = [
    (1.0, 1.0, 0.5, 0.6081734479693929),
    (1.0, 10.0, 4.96, 0.0500876505664682),
    (2.0, 8.0, 3.0, 0.10662224073302788),
    (2.0, 22.0, 5.72, 0.009993567095481385),
    (3.0, 12.0, 1.2, 0.3515126407239845),
    (4.0, 20.0, 2.87, 0.04978550855248682),
    (5.0, 5.0, 0.1, 0.9877580834689302),
    (2.0, 30.0, 0.01, 0.9900531324547679),
    (10.0, 10.0, 1.0, 0.5000000000000001),
    (1.0, 100.0, 10.0, 0.0020728725808666576),
    (6.0, 60.0, 3.5, 0.004924977304240494),
    (8.0, 3.0, 25.0, 0.011479496181442268),
    (2.0, 2.0, 19.0, 0.05),
    (3.0, 33.0, 8.0, 0.00038261820650853254),
    (1.0, 11.0, 0.0, 1.0),
    (12.0, 44.0, 1.7, 0.09972968217028458),
    (2.0, 4.0, 100.0, 0.00038446751249519417),
    (7.0, 14.0, 0.8, 0.6004215864713603),
    (20.0, 40.0, 2.2, 0.016711628076146692),
    (1.0, 3.0, 0.3, 0.6220024542142741),
];

const T_TWO: [(f64, f64, f64); 8] = [
    (1.0, 1.0, 0.49999999999999956),
    (2.0, 4.303, 0.04999252498521449),
    (5.0, 2.0, 0.10193947882985828),
    (11.0, -3.1, 0.01010413891244547),
    (30.0, 0.5, 0.6207230048851273),
    (4.0, 0.0, 1.0),
    (9.0, 12.0, 7.699886222985645e-07),
    (100.0, 1.984, 0.04999677379616732),
];

const BETA: [(f64, f64, f64, f64); 6] = [
    (0.5, 0.5, 0.3, 0.36901011956554536),
    (2.0, 3.0, 0.4, 0.5247999999999999),
    (10.0, 20.0, 0.3, 0.3640040810719437),
    (1.0, 1.0, 0.77, 0.77),
    (50.0, 60.0, 0.45, 0.46423529143060444),
    (0.1, 5.0, 0.01, 0.7690889207843462),
];

fn fixture() -> RepeatedMeasuresTable {
    RepeatedMeasuresTable::from_rows(&[
        vec![45.0, 50.0, 55.0],
        vec![42.0, 42.0, 45.0],
        vec![36.0, 41.0, 43.0],
        vec![39.0, 35.0, 40.0],
        vec![51.0, 55.0, 59.0],
    ])
    .unwrap()
}

#[test]
fn distribution_functions_match_reference_values() {
    for (d1, d2, x, p) in F_SF {
        assert_close(f_sf(x, d1, d2), p, 1e-6, &format!("F({d1},{d2}) at {x}"));
    }
    for (df, t, p) in T_TWO {
        assert_close(t_sf_two_sided(t, df), p, 1e-6, &format!("t({df}) at {t}"));
    }
    for (a, b, x, i) in BETA {
        assert_close(inc_beta(a, b, x), i, 1e-6, &format!("I({a},{b}) at {x}"));
    }
}

#[test]
fn rm_anova_matches_reference_table() {
    let t = fixture();
    let r = rm_anova(&t, &AnovaOptions::default()).unwrap();
    assert_close(r.statistic, 8.427184466019414, 1e-6, "F");
    assert_eq!(r.df1, 2.0);
    assert_eq!(r.df2, Some(8.0));
    assert_close(r.p_value, 0.01073368844985963, 1e-6, "p");
    assert!(r.significant);
    assert!(r.p_exact);

    assert_close(
        greenhouse_geisser_epsilon(&t),
        0.5857119196157452,
        1e-6,
        "epsilon",
    );
    let gg = rm_anova(
        &t,
        &AnovaOptions {
            sphericity_correction: true,
            ..Default::default()
        },
    )
    .unwrap();
    assert_close(gg.statistic, r.statistic, 1e-12, "corrected F");
    assert_close(gg.p_value, 0.034330780066282436, 1e-6, "corrected p");
}

#[test]
fn posthoc_matches_reference_pairs() {
    let want = [
        (0, 1, -1.1359236684941296, 0.31943021694266105),
        (0, 2, -3.5039081413150264, 0.024808233949156887),
        (1, 2, -6.516946235415336, 0.002862214865913692),
    ];
    let got = posthoc_matrix(&fixture(), Correction::None, DEFAULT_ALPHA).unwrap();
    assert_eq!(got.len(), 3);
    for (g, (a, b, t, p)) in got.iter().zip(want) {
        assert_eq!((g.first, g.second), (a, b));
        assert_close(g.result.statistic, t, 1e-6, "t");
        assert_close(g.result.p_value, p, 1e-6, "p");
        assert_eq!(g.adjusted_p, g.result.p_value);
    }
    let bonf = posthoc_matrix(&fixture(), Correction::Bonferroni, DEFAULT_ALPHA).unwrap();
    for (b, w) in bonf.iter().zip(want) {
        assert_close(b.adjusted_p, (w.3 * 3.0).min(1.0), 1e-6, "bonferroni");
    }
    assert!(!bonf[1].result.significant);
    let holm = posthoc_matrix(&fixture(), Correction::Holm, DEFAULT_ALPHA).unwrap();
    assert_close(holm[2].adjusted_p, 3.0 * want[2].3, 1e-6, "holm smallest");
    assert_close(holm[1].adjusted_p, 2.0 * want[1].3, 1e-6, "holm middle");
    assert_close(holm[0].adjusted_p, want[0].3, 1e-6, "holm largest");
    for (h, b) in holm.iter().zip(&bonf) {
        assert!(h.adjusted_p <= b.adjusted_p);
    }
}

#[test]
fn paired_t_matches_reference() {
    let x = [12.1, 14.3, 11.8, 15.2, 13.9, 12.7, 14.8, 13.1];
    let y = [11.4, 13.9, 12.2, 14.1, 12.8, 12.9, 13.5, 12.0];
    let r = paired_t(&x, &y, DEFAULT_ALPHA).unwrap();
    assert_close(r.statistic, 2.792387939891636, 1e-6, "t");
    assert_close(r.p_value, 0.026816085971370245, 1e-6, "p");
    assert_eq!(r.df1, 7.0);
    let s = paired_t(&y, &x, DEFAULT_ALPHA).unwrap();
    assert_close(s.statistic, -r.statistic, 1e-12, "swap t");
    assert_close(s.p_value, r.p_value, 1e-12, "swap p");
}

fn brute_paired_t(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let m = d.iter().sum::<f64>() / n;
    let s2 = d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    m / (s2 / n).sqrt()
}

#[test]
fn two_condition_anova_equals_squared_t() {
    let mut r = seeded();
    for _ in 0..100 {
        let n = r.random_range(3..20);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let base = r.random_range(20.0..60.0);
                vec![
                    base + r.random_range(-5.0..5.0),
                    base + r.random_range(-3.0..8.0),
                ]
            })
            .collect();
        let table = RepeatedMeasuresTable::from_rows(&rows).unwrap();
        let a = rm_anova(&table, &AnovaOptions::default()).unwrap();
        let t = brute_paired_t(&table.column(0), &table.column(1));
        assert_close(a.statistic, t * t, 1e-9 * (1.0 + t * t), "F = t^2");
        let p = paired_t(&table.column(0), &table.column(1), DEFAULT_ALPHA).unwrap();
        assert_close(a.p_value, p.p_value, 1e-9, "same p");
    }
}

#[test]
fn degenerate_tables() {
    let equal = RepeatedMeasuresTable::from_rows(&[
        vec![1.0, 2.0, 3.0],
        vec![3.0, 1.0, 2.0],
        vec![2.0, 3.0, 1.0],
    ])
    .unwrap();
    let r = rm_anova(&equal, &AnovaOptions::default()).unwrap();
    assert_eq!(r.statistic, 0.0);
    assert_eq!(r.p_value, 1.0);
    assert!(!r.significant);

    let shifted =
        RepeatedMeasuresTable::from_rows(&[vec![1.0, 2.0], vec![5.0, 6.0], vec![9.0, 10.0]])
            .unwrap();
    let r = rm_anova(&shifted, &AnovaOptions::default()).unwrap();
    assert!(r.statistic.is_infinite());
    assert_eq!(r.p_value, 0.0);
    assert!(!r.p_exact);
    assert!(r.significant);

    assert_eq!(
        RepeatedMeasuresTable::from_rows(&[vec![1.0, 2.0]]).unwrap_err(),
        Error::DegenerateDegreesOfFreedom
    );
    assert_eq!(
        paired_t(&[1.0, 2.0], &[0.0, 1.0], 0.05).unwrap_err(),
        Error::ZeroVariance
    );
    assert!(matches!(
        paired_t(&[1.0], &[0.0], 0.05),
        Err(Error::TooFewSamples { .. })
    ));
}

#[test]
fn column_permutation_leaves_the_test_unchanged() {
    let t = fixture();
    let a = rm_anova(&t, &AnovaOptions::default()).unwrap();
    let rows: Vec<Vec<f64>> = (0..5)
        .map(|i| vec![t.get(i, 2), t.get(i, 0), t.get(i, 1)])
        .collect();
    let b = rm_anova(
        &RepeatedMeasuresTable::from_rows(&rows).unwrap(),
        &AnovaOptions::default(),
    )
    .unwrap();
    assert_close(a.statistic, b.statistic, 1e-10, "F");
    assert_close(a.p_value, b.p_value, 1e-12, "p");
}
