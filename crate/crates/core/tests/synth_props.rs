use std::f64::consts::PI;

use agglom_core::distortion::IlluminationParams;
use agglom_core::raster::{connected_components, Connectivity};
use agglom_core::seed;
use agglom_core::synth::{
    build_agglomerate, class_of, deform_projection, fixed_distortions, synthesize_sample,
    transmission_ratio, Footprint, RenderConfig, Shape,
};
use proptest::prelude::*;

/// Pixel centres inside a deformed outline, evaluated with direct trig.
fn direct_pixel_area(center: [f64; 2], radius: f64, s: &Shape) -> usize {
    let ext = (radius * 2.0).ceil() as i64 + 2;
    let (cx, cy) = (center[0].round() as i64, center[1].round() as i64);
    let mut n = 0;
    for y in cy - ext..=cy + ext {
        for x in cx - ext..=cx + ext {
            let (dx, dy) = (x as f64 - center[0], y as f64 - center[1]);
            let t = dy.atan2(dx);
            let f = s.scale
                * (1.0
                    + s.degree
                        * (0..4)
                            .map(|k| s.amplitudes[k] * ((k as f64 + 2.0) * t + s.phases[k]).cos())
                            .sum::<f64>());
            if (dx * dx + dy * dy).sqrt() < radius * f {
                n += 1;
            }
        }
    }
    n
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transmission_center_and_monotonicity(r in 0.5f64..60.0, c in 0.0f64..0.3, dc in 0.001f64..0.1) {
        let t = transmission_ratio(r, 0.0, c).unwrap();
        prop_assert!((t - (-2.0 * c * r).exp()).abs() <= 1e-12);
        prop_assert!(transmission_ratio(r, 0.0, c + dc).unwrap() < t);
        prop_assert_eq!(transmission_ratio(r, r, c).unwrap(), 1.0);
    }

    #[test]
    fn packings_are_tangent_and_disjoint(s in any::<u64>(), n in 1usize..=10) {
        let mut rng = seed::rng(s);
        let radii: Vec<f64> = (0..n).map(|i| 12.0 + (i as f64 * 7.3) % 30.0).collect();
        let spec = build_agglomerate(&radii, 0.1, &mut rng).unwrap();
        prop_assert!(spec.overlapping_pairs().is_empty());
        prop_assert!(spec.contact_chain_holds());
        prop_assert_eq!(spec.spheres.len(), n);
    }

    #[test]
    fn deformation_preserves_pixel_area(s in any::<u64>(), r in 12.0f64..46.0, degree in 0.0f64..=1.0) {
        let fp = Footprint::disk([0.3, -0.2], r);
        let d = deform_projection(&fp, degree, &mut seed::rng(s)).unwrap();
        let before = direct_pixel_area(fp.center, r, &fp.shape) as f64;
        let after = direct_pixel_area(d.center, r, &d.shape) as f64;
        prop_assert!((after - before).abs() / before <= 0.02 + 1e-12, "{} vs {}", after, before);
    }
}

fn small() -> RenderConfig {
    RenderConfig {
        width: 160,
        height: 160,
        area_min: 300.0,
        area_max: 1200.0,
        distortions: fixed_distortions(1.0, 0.01, IlluminationParams::UNIFORM),
        ..RenderConfig::default()
    }
}

#[test]
fn samples_are_deterministic_single_component_and_consistent() {
    let cfg = small();
    let areas = cfg.uniform_areas();
    for class in 1..=6 {
        for s in 0..5u64 {
            let a = synthesize_sample(&cfg, class, s, &areas).unwrap();
            let b = synthesize_sample(&cfg, class, s, &areas).unwrap();
            assert_eq!(a.image, b.image);
            assert_eq!(a.label, b.label);
            assert_eq!(class_of(a.label.num_primaries()), class);
            assert_eq!(
                connected_components(&a.clean.foreground, Connectivity::Eight).count(),
                1
            );
            assert!(a
                .image
                .as_slice()
                .iter()
                .all(|v| (v * 255.0 - (v * 255.0).round()).abs() < 1e-9));
        }
    }
}

#[test]
fn isolated_single_primary_area_matches_disk() {
    let cfg = RenderConfig {
        distortions: fixed_distortions(0.0, 0.0, IlluminationParams::UNIFORM),
        ..small()
    };
    let mut worst: f64 = 0.0;
    for s in 0..40 {
        let smp = synthesize_sample(&cfg, 1, s, &cfg.uniform_areas()).unwrap();
        let truth = smp.label.areas_px2[0];
        let fg = smp.clean.foreground.count() as f64;
        worst = worst.max((truth - fg).abs() / fg);
        let r = (truth / PI).sqrt();
        assert!(r > 5.0);
    }
    assert!(worst <= 0.02, "worst relative difference {worst}");
}
