//! Two-stage synthesis and the reconstruction comparison.
//!
//! Stage 1 samples a coarse ERP code grid. Stage 2 extracts every view of
//! the coarse result, samples a full-resolution code grid per view, decodes,
//! and blends the views back onto the sphere. In both stages a patch whose
//! pixels are all known is fixed to the code of the conditional image.

use rayon::prelude::*;

use crate::blending::blend_views;
use crate::codebook::{CodeGrid, Codebook};
use crate::conditioning::extract_mask;
use crate::projection::{extract_nfov, project_nfov_to_erp, ErpImage, NfovImage, ViewSet, STANDARD_FOV_DEG};
use crate::raster::{Mask, Raster};
use crate::sampler::{sample_traced, Conditioning, Predictor, SampleConfig, DEFAULT_STEPS};
use crate::{Error, Result};

/// Stage 2 samples view `k` on RNG stream `k + 1`; stage 1 uses stream 0.
const STAGE1_STREAM: u64 = 0;

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    /// Rows of the stage-1 ERP (columns are twice this).
    pub low_height: usize,
    /// Rows of the final ERP.
    pub high_height: usize,
    pub nfov_size: usize,
    pub fov_deg: f64,
    pub views: ViewSet,
    pub steps: usize,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            low_height: 256,
            high_height: 1024,
            nfov_size: 256,
            fov_deg: STANDARD_FOV_DEG,
            views: ViewSet::standard(STANDARD_FOV_DEG, 256).expect("standard view set"),
            steps: DEFAULT_STEPS,
            temperature: 1.0,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Default geometry with a different view resolution and view set to
    /// match.
    pub fn with_nfov_size(mut self, size: usize) -> Result<Self> {
        self.nfov_size = size;
        self.views = ViewSet::standard(self.fov_deg, size)?;
        Ok(self)
    }

    fn sample_config(&self) -> SampleConfig {
        SampleConfig {
            steps: self.steps,
            temperature: self.temperature,
            seed: self.seed,
        }
    }

    /// Checks that both stages tile exactly into codebook patches.
    pub fn validate(&self, codebook: &Codebook) -> Result<()> {
        let (ph, pw) = codebook.patch_size();
        let tiles = |w: usize, h: usize| w > 0 && h > 0 && w % pw == 0 && h % ph == 0;
        if !tiles(2 * self.low_height, self.low_height) {
            return Err(Error::DimensionMismatch(format!(
                "stage-1 ERP {}x{} does not tile into {pw}x{ph} patches",
                2 * self.low_height,
                self.low_height
            )));
        }
        if self.high_height == 0 {
            return Err(Error::DimensionMismatch("final ERP height must be positive".into()));
        }
        if self.views.is_empty() {
            return Err(Error::InvalidCamera("pipeline needs at least one view".into()));
        }
        for cam in self.views.iter() {
            if !tiles(cam.width(), cam.height()) {
                return Err(Error::DimensionMismatch(format!(
                    "{}x{} view does not tile into {pw}x{ph} patches",
                    cam.width(),
                    cam.height()
                )));
            }
        }
        Ok(())
    }

    /// Code-grid shape of stage 1.
    pub fn low_grid(&self, codebook: &Codebook) -> (usize, usize) {
        let (ph, pw) = codebook.patch_size();
        (self.low_height / ph, 2 * self.low_height / pw)
    }
}

/// Intermediate and final results of one synthesis.
#[derive(Clone, Debug)]
pub struct Synthesis {
    pub stage1: ErpImage,
    pub views: Vec<NfovImage>,
    pub output: ErpImage,
}

/// Stage-2 output before blending.
#[derive(Clone, Debug)]
pub struct Stage2 {
    pub views: Vec<NfovImage>,
    pub output: ErpImage,
}

/// A codebook plus one predictor per stage.
pub struct Pipeline<'a> {
    pub config: PipelineConfig,
    pub codebook: &'a Codebook,
    pub stage1_predictor: &'a dyn Predictor,
    pub stage2_predictor: &'a dyn Predictor,
}

/// Resizes a known mask; a target pixel is known only if every source pixel
/// it overlaps is known.
pub fn resize_mask(mask: &Mask, width: usize, height: usize) -> Mask {
    if (mask.width(), mask.height()) == (width, height) {
        return mask.clone();
    }
    let (sx, sy) = (mask.width() as f64 / width as f64, mask.height() as f64 / height as f64);
    let span = |i: usize, s: f64, len: usize| {
        let lo = (i as f64 * s).floor() as usize;
        let hi = (((i + 1) as f64 * s).ceil() as usize).clamp(lo + 1, len);
        (lo.min(len - 1), hi)
    };
    Mask::from_fn(width, height, |x, y| {
        let (x0, x1) = span(x, sx, mask.width());
        let (y0, y1) = span(y, sy, mask.height());
        mask.block_known(x0, y0, x1 - x0, y1 - y0)
    })
}

/// Grid with fully known patches encoded from `image` and MASK elsewhere.
pub fn fixed_codes(codebook: &Codebook, image: &Raster, known: &Mask) -> Result<CodeGrid> {
    let (ph, pw) = codebook.patch_size();
    if known.width() != image.width() || known.height() != image.height() {
        return Err(Error::DimensionMismatch("mask and image differ in size".into()));
    }
    if image.width() % pw != 0 || image.height() % ph != 0 {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} image does not tile into {pw}x{ph} patches",
            image.width(),
            image.height()
        )));
    }
    let mut grid = CodeGrid::masked(image.height() / ph, image.width() / pw, codebook.num_codes());
    let mut patch = Vec::with_capacity(codebook.dim());
    for r in 0..grid.rows() {
        for c in 0..grid.cols() {
            if known.block_known(c * pw, r * ph, pw, ph) {
                image.block(c * pw, r * ph, pw, ph, &mut patch);
                grid.set(r, c, codebook.nearest(&patch));
            }
        }
    }
    Ok(grid)
}

impl<'a> Pipeline<'a> {
    pub fn new(
        config: PipelineConfig,
        codebook: &'a Codebook,
        stage1_predictor: &'a dyn Predictor,
        stage2_predictor: &'a dyn Predictor,
    ) -> Result<Self> {
        config.validate(codebook)?;
        Ok(Self {
            config,
            codebook,
            stage1_predictor,
            stage2_predictor,
        })
    }

    fn check_condition(cond: &ErpImage, mask: &Mask) -> Result<()> {
        if mask.width() != cond.width() || mask.height() != cond.height() {
            return Err(Error::DimensionMismatch(format!(
                "mask {}x{} does not match conditional image {}x{}",
                mask.width(),
                mask.height(),
                cond.width(),
                cond.height()
            )));
        }
        Ok(())
    }

    /// Coarse ERP synthesis at `low_height` rows.
    pub fn stage1(&self, cond: &ErpImage, mask: &Mask) -> Result<ErpImage> {
        Self::check_condition(cond, mask)?;
        let h = self.config.low_height;
        let low = cond.resized(h)?;
        let low_mask = resize_mask(mask, 2 * h, h);
        let initial = fixed_codes(self.codebook, low.raster(), &low_mask)?;
        let ctx = Conditioning {
            view: None,
            image: Some(low.raster()),
            known: Some(&low_mask),
            low_res: None,
        };
        let codes = sample_traced(
            self.stage1_predictor,
            &initial,
            &ctx,
            &self.config.sample_config(),
            Some(STAGE1_STREAM),
        )?
        .codes;
        ErpImage::new(self.codebook.decode(&codes)?)
    }

    /// Per-view refinement of a coarse ERP, blended at `high_height` rows.
    pub fn stage2(&self, low: &ErpImage, cond: &ErpImage, mask: &Mask) -> Result<Stage2> {
        Self::check_condition(cond, mask)?;
        if low.height() != self.config.low_height {
            return Err(Error::DimensionMismatch(format!(
                "stage-2 input has {} rows, expected {}",
                low.height(),
                self.config.low_height
            )));
        }
        let (w, h) = (2 * self.config.high_height, self.config.high_height);
        let cameras = self.config.views.cameras();
        let cfg = self.config.sample_config();
        let results: Vec<Result<(NfovImage, _)>> = cameras
            .par_iter()
            .enumerate()
            .map(|(k, cam)| {
                let low_view = extract_nfov(low, cam);
                let cond_view = extract_nfov(cond, cam);
                let known = extract_mask(mask, cam);
                let initial = fixed_codes(self.codebook, cond_view.raster(), &known)?;
                let ctx = Conditioning {
                    view: Some(k),
                    image: Some(cond_view.raster()),
                    known: Some(&known),
                    low_res: Some(low_view.raster()),
                };
                let codes = sample_traced(self.stage2_predictor, &initial, &ctx, &cfg, Some(k as u64 + 1))?.codes;
                let decoded = NfovImage::new(cam.clone(), self.codebook.decode(&codes)?)?;
                let projected = project_nfov_to_erp(&decoded, w, h)?.with_view_id(k);
                Ok((decoded, projected))
            })
            .collect();
        let mut views = Vec::with_capacity(results.len());
        let mut projected = Vec::with_capacity(results.len());
        for r in results {
            let (v, p) = r?;
            views.push(v);
            projected.push(p);
        }
        let output = blend_views(&projected)?;
        Ok(Stage2 { views, output })
    }

    pub fn synthesize(&self, cond: &ErpImage, mask: &Mask) -> Result<Synthesis> {
        let stage1 = self.stage1(cond, mask)?;
        let Stage2 { views, output } = self.stage2(&stage1, cond, mask)?;
        Ok(Synthesis { stage1, views, output })
    }
}

/// Stage-1 code grid of `erp`: what an oracle should reproduce.
pub fn oracle_low_codes(erp: &ErpImage, codebook: &Codebook, config: &PipelineConfig) -> Result<CodeGrid> {
    codebook.encode(erp.resized(config.low_height)?.raster())
}

/// Per-view code grids of `erp`, in view order.
pub fn oracle_view_codes(erp: &ErpImage, codebook: &Codebook, views: &ViewSet) -> Result<Vec<CodeGrid>> {
    views
        .cameras()
        .par_iter()
        .map(|cam| codebook.encode(extract_nfov(erp, cam).raster()))
        .collect()
}

/// Quantizes the ERP image directly: `decode(encode(erp))`.
pub fn reconstruct_direct(erp: &ErpImage, codebook: &Codebook) -> Result<ErpImage> {
    ErpImage::new(codebook.decode(&codebook.encode(erp.raster())?)?)
}

/// Quantizes every extracted view and blends the decoded views back at the
/// input resolution.
pub fn reconstruct_via_views(erp: &ErpImage, codebook: &Codebook, views: &ViewSet) -> Result<ErpImage> {
    let (w, h) = (erp.width(), erp.height());
    let projected = views
        .cameras()
        .par_iter()
        .enumerate()
        .map(|(k, cam)| {
            let view = extract_nfov(erp, cam);
            let decoded = codebook.decode(&codebook.encode(view.raster())?)?;
            Ok(project_nfov_to_erp(&NfovImage::new(cam.clone(), decoded)?, w, h)?.with_view_id(k))
        })
        .collect::<Result<Vec<_>>>()?;
    blend_views(&projected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::train_codebook;
    use crate::sampler::{MarginalPredictor, OraclePredictor};
    use crate::scene::panorama;

    fn small_config() -> PipelineConfig {
        PipelineConfig {
            low_height: 32,
            high_height: 64,
            nfov_size: 32,
            fov_deg: 60.0,
            views: ViewSet::standard(60.0, 32).unwrap(),
            steps: 8,
            temperature: 1.0,
            seed: 5,
        }
    }

    fn codebook_for(erp: &ErpImage) -> Codebook {
        let cfg = small_config();
        let mut images = vec![erp.resized(cfg.low_height).unwrap().into_raster()];
        images.extend(cfg.views.iter().map(|c| extract_nfov(erp, c).into_raster()));
        train_codebook(&images, 64, 8, 1).unwrap()
    }

    #[test]
    fn resize_mask_is_conservative() {
        let m = Mask::from_fn(8, 4, |x, _| x != 3);
        let small = resize_mask(&m, 4, 2);
        assert_eq!(small, Mask::from_fn(4, 2, |x, _| x != 1));
        let odd = resize_mask(&m, 6, 3);
        for y in 0..3 {
            assert!(!odd.get(2, y));
            assert!(odd.get(0, y));
        }
    }

    #[test]
    fn geometry_is_validated() {
        let cb = Codebook::new(2, 16, 16, [vec![0.0; 768], vec![1.0; 768]].concat()).unwrap();
        let m = MarginalPredictor::uniform(2);
        let mut cfg = small_config();
        cfg.low_height = 24;
        assert!(Pipeline::new(cfg, &cb, &m, &m).is_err());
        assert!(Pipeline::new(PipelineConfig::default(), &cb, &m, &m).is_ok());
    }

    #[test]
    fn all_known_stage1_is_pure_reconstruction() {
        let erp = panorama(64, 2);
        let cb = codebook_for(&erp);
        let m = MarginalPredictor::uniform(cb.num_codes());
        let p = Pipeline::new(small_config(), &cb, &m, &m).unwrap();
        let out = p.stage1(&erp, &Mask::new(128, 64, true)).unwrap();
        let low = erp.resized(32).unwrap();
        assert_eq!(out.raster(), &cb.decode(&cb.encode(low.raster()).unwrap()).unwrap());
    }

    #[test]
    fn oracle_reproduces_quantized_panorama() {
        let erp = panorama(64, 3);
        let cfg = small_config();
        let cb = codebook_for(&erp);
        let o1 = OraclePredictor::new(oracle_low_codes(&erp, &cb, &cfg).unwrap()).unwrap();
        let o2 = OraclePredictor::per_view(oracle_view_codes(&erp, &cb, &cfg.views).unwrap()).unwrap();
        let p = Pipeline::new(cfg.clone(), &cb, &o1, &o2).unwrap();
        let unknown = Mask::new(128, 64, false);
        let s = p.synthesize(&ErpImage::black(64), &unknown).unwrap();
        assert_eq!((s.stage1.width(), s.stage1.height()), (64, 32));
        assert_eq!((s.output.width(), s.output.height()), (128, 64));
        let low = erp.resized(32).unwrap();
        assert_eq!(s.stage1.raster(), &cb.decode(&cb.encode(low.raster()).unwrap()).unwrap());
        for (view, cam) in s.views.iter().zip(cfg.views.iter()) {
            let truth = cb.decode(&cb.encode(extract_nfov(&erp, cam).raster()).unwrap()).unwrap();
            assert_eq!(view.raster(), &truth);
        }
        // Identical to the via-views reconstruction.
        let via = reconstruct_via_views(&erp, &cb, &cfg.views).unwrap();
        assert_eq!(via, s.output);
    }

    #[test]
    fn deterministic_under_seed() {
        let erp = panorama(64, 4);
        let cb = codebook_for(&erp);
        let m = MarginalPredictor::uniform(cb.num_codes());
        let mask = Mask::from_fn(128, 64, |x, _| x < 40);
        let cond = ErpImage::new(erp.raster().masked(&mask).unwrap()).unwrap();
        let run = |seed| {
            let mut cfg = small_config();
            cfg.seed = seed;
            Pipeline::new(cfg, &cb, &m, &m).unwrap().synthesize(&cond, &mask).unwrap().output
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    #[test]
    fn mask_size_must_match() {
        let erp = panorama(64, 5);
        let cb = codebook_for(&erp);
        let m = MarginalPredictor::uniform(cb.num_codes());
        let p = Pipeline::new(small_config(), &cb, &m, &m).unwrap();
        assert!(p.stage1(&erp, &Mask::new(64, 32, true)).is_err());
        assert!(p.stage2(&erp, &erp, &Mask::new(128, 64, true)).is_err());
    }
}
