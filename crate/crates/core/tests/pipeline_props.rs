use agglom_core::features::{fit_normalizer, RegionFeatures};
use agglom_core::ffnn::init_weights;
use agglom_core::pipeline::{
    area_topology, classification_metrics, measure_sample, number_topology, psd_stats,
    rational_fit, relative_errors, AuditStatus, BundleMeta, ModelBundle,
};
use agglom_core::raster::GrayImage;
use agglom_core::seed;
use agglom_core::synth::{synthesize_sample, RenderConfig};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psd_scales_with_area(areas in proptest::collection::vec(10.0f64..1e4, 1..50), k in 0.1f64..10.0) {
        let a = psd_stats(&areas).unwrap();
        let scaled: Vec<f64> = areas.iter().map(|v| v * k * k).collect();
        let b = psd_stats(&scaled).unwrap();
        prop_assert!((b.d_g / a.d_g - k).abs() <= 1e-12 * k);
        prop_assert!((b.sigma_g - a.sigma_g).abs() <= 1e-12);
        prop_assert!(a.sigma_g >= 1.0);
        let e = relative_errors(&a, &a).unwrap();
        prop_assert_eq!((e.e_dg, e.e_sigma_g), (0.0, 0.0));
    }

    #[test]
    fn psd_matches_direct_formula(areas in proptest::collection::vec(10.0f64..1e4, 2..30)) {
        let d: Vec<f64> = areas.iter().map(|a| (4.0 * a / std::f64::consts::PI).sqrt()).collect();
        let n = d.len() as f64;
        let gm = d.iter().product::<f64>().powf(1.0 / n);
        let s = (d.iter().map(|x| (x / gm).ln().powi(2)).sum::<f64>() / (n - 1.0)).sqrt().exp();
        let p = psd_stats(&areas).unwrap();
        prop_assert!((p.d_g - gm).abs() <= 1e-9 * gm);
        prop_assert!((p.sigma_g - s).abs() <= 1e-9);
    }

    #[test]
    fn rational_fit_recovers_generated_curves(a in 0.5f64..5.0, b in 0.01f64..0.5, d in 0.5f64..3.0, e in 5.0f64..50.0) {
        let c = -0.5 * b;
        let xs: Vec<f64> = (1..=40).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (a + b * x + c * x * x / 40.0) / (d + x + e)).collect();
        let f = rational_fit(&xs, &ys).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            prop_assert!((f.eval(*x) - y).abs() < 1e-6 * (1.0 + y.abs()));
        }
    }
}

#[test]
fn uniform_random_predictions_sit_near_chance() {
    let mut rng = seed::rng(77);
    let truth: Vec<usize> = (0..6000).map(|i| i % 6 + 1).collect();
    let pred: Vec<usize> = (0..6000).map(|_| rng.random_range(1..=6)).collect();
    let m = classification_metrics(&pred, &truth).unwrap();
    assert!(
        (0.14..=0.20).contains(&m.mean_accuracy),
        "{}",
        m.mean_accuracy
    );
    let perfect = classification_metrics(&truth, &truth).unwrap();
    assert_eq!(perfect.mean_accuracy, 1.0);
}

fn random_bundle(s: u64) -> ModelBundle {
    let ranges = fit_normalizer(&[
        RegionFeatures::from_array([0.0; 13]),
        RegionFeatures::from_array([5000.0; 13]),
    ])
    .unwrap();
    let mut b = ModelBundle::new(ranges, BundleMeta::new(6500.0));
    b.set_number_net(init_weights(&number_topology(), &mut seed::rng(s)).unwrap())
        .unwrap();
    for k in 1..=5 {
        b.set_area_net(
            k,
            init_weights(&area_topology(k).unwrap(), &mut seed::rng(s + k as u64)).unwrap(),
        )
        .unwrap();
    }
    b
}

#[test]
fn classification_ignores_uniform_logit_shift() {
    let b = random_bundle(3);
    let mut shifted = b.clone();
    let net = shifted.number_net.as_mut().unwrap();
    let mut p = net.params();
    // output biases are the last six parameters
    let n = p.len();
    for v in &mut p[n - 6..] {
        *v += 3.25;
    }
    net.set_params(&p).unwrap();
    let mut rng = seed::rng(4);
    for _ in 0..200 {
        let x: [f64; 13] = std::array::from_fn(|_| rng.random_range(-0.5..1.5));
        let (c0, p0) = b.classify_count(&x).unwrap();
        let (c1, p1) = shifted.classify_count(&x).unwrap();
        assert_eq!(c0, c1);
        for (u, v) in p0.iter().zip(&p1) {
            assert!((u - v).abs() < 1e-12);
        }
    }
}

#[test]
fn audits_cover_every_image() {
    let b = random_bundle(11);
    let cfg = RenderConfig {
        width: 128,
        height: 128,
        area_min: 300.0,
        area_max: 900.0,
        ..RenderConfig::default()
    };
    let mut images: Vec<GrayImage> = (0..12)
        .map(|i| {
            synthesize_sample(&cfg, i % 6 + 1, i as u64, &cfg.uniform_areas())
                .unwrap()
                .image
        })
        .collect();
    images.push(GrayImage::constant(64, 64, 1.0));
    images.push(GrayImage::constant(1, 1, 0.0));
    let m = measure_sample(&b, &images).unwrap();
    assert_eq!(m.audits.len(), images.len());
    let sum = m.count(AuditStatus::Included)
        + m.count(AuditStatus::Excluded)
        + m.count(AuditStatus::Error);
    assert_eq!(sum, images.len());
    assert_eq!(m.audits[12].status, AuditStatus::Excluded);
    let regressed: usize = m
        .audits
        .iter()
        .flat_map(|a| &a.regions)
        .map(|r| r.areas.len())
        .sum();
    assert_eq!(regressed, m.areas.len());
    assert!(m.areas.iter().all(|a| *a >= 1.0));
}
