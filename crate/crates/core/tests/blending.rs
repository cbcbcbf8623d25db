use odis::blending::{blend_partial, blend_views, blend_weights, embed_nfov_center};
use odis::conditioning::CENTER_FOV_DEG;
use odis::metrics::{median_abs_error, seam_score};
use odis::projection::{extract_nfov, project_nfov_to_erp, ErpImage, NfovCamera, ProjectedView, ViewSet};
use odis::raster::Raster;
use odis::scene::panorama;
use proptest::prelude::*;

fn project_all(erp: &ErpImage, set: &ViewSet) -> Vec<ProjectedView> {
    set.iter()
        .enumerate()
        .map(|(k, c)| project_nfov_to_erp(&extract_nfov(erp, c), erp.width(), erp.height()).unwrap().with_view_id(k))
        .collect()
}

#[test]
fn twenty_six_view_round_trip() {
    let erp = panorama(512, 41);
    let out = blend_views(&project_all(&erp, &ViewSet::standard(60.0, 256).unwrap())).unwrap();
    let median = median_abs_error(erp.raster(), out.raster(), None).unwrap();
    assert!(median <= 3.0 / 255.0, "{}", median * 255.0);
    assert!(seam_score(&out) <= 1.5);
}

#[test]
fn centre_fov_is_a_four_by_three_plane() {
    let (w, h) = CENTER_FOV_DEG;
    assert!(((w / 2.0).to_radians().tan() - 2.0).abs() < 1e-3);
    assert!(((h / 2.0).to_radians().tan() - 1.5).abs() < 1e-3);
}

#[test]
fn tiny_fov_covers_almost_nothing() {
    let (_, mask) = embed_nfov_center(&Raster::filled(8, 8, [1.0; 3]), 1.0, 1.0, 2048, 1024).unwrap();
    assert!(mask.known_fraction() < 0.001);
    assert!(mask.known_count() > 0);
}

#[test]
fn two_equal_views_average() {
    let a = ProjectedView::from_parts(3, 2, 1, 50.0, vec![1], vec![[0.25, 0.5, 1.0]], vec![12.5]).unwrap();
    let b = ProjectedView::from_parts(8, 2, 1, 50.0, vec![1], vec![[0.75, 0.0, 0.5]], vec![12.5]).unwrap();
    let out = blend_partial(&[b, a]).unwrap();
    assert_eq!(out.pixel(1, 0), [0.5, 0.25, 0.75]);
    assert_eq!(out.coverage, vec![0, 2]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn weights_partition_unity(size in 8usize..40, fov in 40.0f64..90.0, h in 8usize..40) {
        let erp = ErpImage::from_fn(h, |x, y| [(x % 7) as f32 / 7.0, (y % 5) as f32 / 5.0, 0.5]);
        let views = project_all(&erp, &ViewSet::standard(fov, size).unwrap());
        let w = blend_weights(&views).unwrap();
        for s in w.sums(&views) {
            prop_assert!(s == 0.0 || (s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn blend_order_independent(seed in 0u64..1000) {
        let erp = ErpImage::from_fn(16, |x, y| [((x * 7 + y * 3) % 11) as f32 / 11.0, 0.2, 0.9]);
        let mut views = project_all(&erp, &ViewSet::standard(60.0, 16).unwrap());
        let reference = blend_partial(&views).unwrap().data;
        let n = views.len();
        for i in 0..n {
            views.swap(i, (seed as usize * 31 + i * 17) % n);
        }
        prop_assert_eq!(blend_partial(&views).unwrap().data, reference);
    }

    #[test]
    fn agreeing_views_reproduce_the_value(r in 0.0f32..1.0, g in 0.0f32..1.0, b in 0.0f32..1.0, yaw in -90.0f64..90.0) {
        let rgb = [r, g, b];
        let cams = [
            NfovCamera::looking_at(odis::geometry::direction_from_yaw_pitch(0.0, 0.0), 60.0, 60.0, 16, 16).unwrap(),
            NfovCamera::looking_at(odis::geometry::direction_from_yaw_pitch(yaw / 3.0, 10.0), 60.0, 60.0, 16, 16).unwrap(),
        ];
        let erp = ErpImage::from_fn(32, |_, _| rgb);
        let views: Vec<_> = cams.iter().enumerate()
            .map(|(k, c)| project_nfov_to_erp(&extract_nfov(&erp, c), 64, 32).unwrap().with_view_id(k))
            .collect();
        let out = blend_partial(&views).unwrap();
        for (i, c) in out.coverage.iter().enumerate() {
            if *c > 0 {
                for k in 0..3 {
                    let got = out.data[i * 3 + k] as f32;
                    prop_assert!((got - rgb[k]).abs() <= f32::EPSILON * rgb[k].abs().max(f32::MIN_POSITIVE));
                }
            }
        }
    }
}
