use odis::codebook::train_codebook;
use odis::conditioning::{make_condition, ConditionSpec};
use odis::metrics::median_abs_error;
use odis::pipeline::{oracle_low_codes, oracle_view_codes, reconstruct_direct, reconstruct_via_views, Pipeline, PipelineConfig};
use odis::projection::{extract_nfov, project_nfov_to_erp, ViewSet};
use odis::raster::Mask;
use odis::sampler::OraclePredictor;
use odis::scene::panorama;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config() -> PipelineConfig {
    PipelineConfig {
        low_height: 64,
        high_height: 256,
        nfov_size: 64,
        fov_deg: 60.0,
        views: ViewSet::standard(60.0, 64).unwrap(),
        steps: 8,
        temperature: 1.0,
        seed: 1,
    }
}

/// Views synthesized consistently (here by oracles) dominate their centres.
/// Independently sampled neighbours would not agree, and the three edge views
/// around a corner view keep roughly 30% of the weight at its centre.
#[test]
fn stage2_views_dominate_their_centres() {
    let erp = panorama(256, 60);
    let cfg = config();
    let mut images = vec![erp.resized(cfg.low_height).unwrap().into_raster()];
    images.extend(cfg.views.iter().map(|c| extract_nfov(&erp, c).into_raster()));
    let cb = train_codebook(&images, 96, 16, 2).unwrap();
    let o1 = OraclePredictor::new(oracle_low_codes(&erp, &cb, &cfg).unwrap()).unwrap();
    let o2 = OraclePredictor::per_view(oracle_view_codes(&erp, &cb, &cfg.views).unwrap()).unwrap();
    let p = Pipeline::new(cfg.clone(), &cb, &o1, &o2).unwrap();
    let (cond, mask) = make_condition(&erp, &ConditionSpec::center(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let s = p.synthesize(&cond, &mask).unwrap();
    assert_eq!((s.output.width(), s.output.height()), (512, 256));
    assert_eq!((s.stage1.width(), s.stage1.height()), (128, 64));
    for view in &s.views {
        let proj = project_nfov_to_erp(view, 512, 256).unwrap();
        let interior = Mask::from_fn(512, 256, |x, y| {
            proj.distance_at(x, y).is_some_and(|d| d < 0.3 * proj.half_diagonal())
        });
        let err = median_abs_error(proj.to_erp().raster(), s.output.raster(), Some((&interior, true))).unwrap();
        assert!(err <= 2.0 / 255.0, "{}", err * 255.0);
    }
    // Same seed, same output.
    assert_eq!(p.synthesize(&cond, &mask).unwrap().output, s.output);
}

#[test]
fn memorizing_codebook_reconstructs_exactly() {
    use odis::projection::ErpImage;
    // Every 16x16 patch of the halves image is one of two flat patches.
    let halves = ErpImage::from_fn(64, |x, _| if x < 64 { [0.2; 3] } else { [0.8; 3] });
    let cb = train_codebook(&[halves.raster().clone()], 2, 16, 0).unwrap();
    assert_eq!(reconstruct_direct(&halves, &cb).unwrap(), halves);
    // Resampling a flat image is exact, so every view patch is memorized too.
    let flat = ErpImage::from_fn(64, |_, _| [0.8; 3]);
    assert_eq!(reconstruct_via_views(&flat, &cb, &ViewSet::standard(60.0, 32).unwrap()).unwrap(), flat);
}

#[test]
fn oracle_pipeline_matches_via_views_reconstruction() {
    let erp = panorama(256, 61);
    let cfg = config();
    let mut images = vec![erp.resized(cfg.low_height).unwrap().into_raster()];
    images.extend(cfg.views.iter().map(|c| extract_nfov(&erp, c).into_raster()));
    let cb = train_codebook(&images, 64, 16, 4).unwrap();
    let o1 = OraclePredictor::new(oracle_low_codes(&erp, &cb, &cfg).unwrap()).unwrap();
    let o2 = OraclePredictor::per_view(oracle_view_codes(&erp, &cb, &cfg.views).unwrap()).unwrap();
    let p = Pipeline::new(cfg.clone(), &cb, &o1, &o2).unwrap();
    let s = p.synthesize(&odis::projection::ErpImage::black(256), &Mask::new(512, 256, false)).unwrap();
    assert_eq!(s.output, reconstruct_via_views(&erp, &cb, &cfg.views).unwrap());
}
