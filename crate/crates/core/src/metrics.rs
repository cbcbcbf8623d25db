//! Area-weighted reconstruction error, seam continuity and coverage.
//!
//! ERP rows near the poles cover far less of the sphere than rows at the
//! equator, so every mean here weights a row by `cos(latitude)`.

use serde::{Serialize, Serializer};

use crate::geometry::erp_row_latitude;
use crate::projection::{coverage_of_viewset, ErpImage, ViewSet};
use crate::raster::{Mask, Raster, CHANNELS};
use crate::{Error, Result};

pub const POLE_LATITUDE_DEG: f64 = 60.0;
pub const EQUATOR_LATITUDE_DEG: f64 = 30.0;

/// Weighted mean squared errors over latitude bands.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionMse {
    pub global: f64,
    /// |lat| > 60°
    pub pole: f64,
    /// |lat| < 30°
    pub equator: f64,
}

fn serialize_psnr<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

/// Summary of one reconstruction against its reference. `psnr` is infinite
/// for identical images and serializes as `null`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub global_mse: f64,
    pub pole_mse: f64,
    pub equator_mse: f64,
    pub seam_score: f64,
    #[serde(serialize_with = "serialize_psnr")]
    pub psnr: f64,
    pub coverage_min: f64,
    pub coverage_max: f64,
}

impl MetricReport {
    /// Compares `candidate` with `reference`; the seam score is the
    /// candidate's, coverage is that of `views` at the image size.
    pub fn compare(reference: &ErpImage, candidate: &ErpImage, views: &ViewSet) -> Result<Self> {
        let mse = mse_regions(reference, candidate)?;
        let coverage = coverage_of_viewset(views, candidate.width(), candidate.height())?;
        Ok(Self {
            global_mse: mse.global,
            pole_mse: mse.pole,
            equator_mse: mse.equator,
            seam_score: seam_score(candidate),
            psnr: psnr(mse.global),
            coverage_min: coverage.min() as f64,
            coverage_max: coverage.max() as f64,
        })
    }
}

/// Peak signal-to-noise ratio for unit-range samples.
pub fn psnr(mse: f64) -> f64 {
    if mse <= 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

pub fn mse_regions(a: &ErpImage, b: &ErpImage) -> Result<RegionMse> {
    if !a.raster().same_size(b.raster()) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let (w, h) = (a.width(), a.height());
    let pole = POLE_LATITUDE_DEG.to_radians();
    let equator = EQUATOR_LATITUDE_DEG.to_radians();
    let mut sums = [0.0f64; 3];
    let mut weights = [0.0f64; 3];
    let row_len = w * CHANNELS;
    for y in 0..h {
        let lat = erp_row_latitude(y, h);
        let weight = lat.cos().max(0.0);
        let ra = &a.raster().data()[y * row_len..(y + 1) * row_len];
        let rb = &b.raster().data()[y * row_len..(y + 1) * row_len];
        let row_sq: f64 = ra
            .iter()
            .zip(rb)
            .map(|(p, q)| {
                let d = *p as f64 - *q as f64;
                d * d
            })
            .sum::<f64>()
            / CHANNELS as f64;
        let bands = [true, lat.abs() > pole, lat.abs() < equator];
        for (k, inside) in bands.iter().enumerate() {
            if *inside {
                sums[k] += weight * row_sq;
                weights[k] += weight * w as f64;
            }
        }
    }
    let mean = |k: usize| if weights[k] > 0.0 { sums[k] / weights[k] } else { 0.0 };
    Ok(RegionMse {
        global: mean(0),
        pole: mean(1),
        equator: mean(2),
    })
}

/// Mean absolute difference across the `lon = ±π` seam relative to the mean
/// difference between adjacent interior columns; about 1 for a seamless
/// panorama. A horizontally constant image scores 1.
pub fn seam_score(erp: &ErpImage) -> f64 {
    let r = erp.raster();
    let (w, h) = (r.width(), r.height());
    if w < 2 {
        return 1.0;
    }
    let mut seam = 0.0f64;
    let mut interior = 0.0f64;
    for y in 0..h {
        let row = &r.data()[y * w * CHANNELS..(y + 1) * w * CHANNELS];
        for c in 0..CHANNELS {
            seam += (row[c] as f64 - row[(w - 1) * CHANNELS + c] as f64).abs();
        }
        for pair in row.windows(CHANNELS + 1).take((w - 1) * CHANNELS) {
            interior += (pair[0] as f64 - pair[CHANNELS] as f64).abs();
        }
    }
    let seam = seam / (h * CHANNELS) as f64;
    let interior = interior / (h * (w - 1) * CHANNELS) as f64;
    if interior == 0.0 {
        if seam == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        seam / interior
    }
}

/// Median over all samples of `|a - b|`, optionally restricted to pixels where
/// `mask` holds `select`.
pub fn median_abs_error(a: &Raster, b: &Raster, mask: Option<(&Mask, bool)>) -> Result<f64> {
    if !a.same_size(b) {
        return Err(Error::DimensionMismatch("median error of differently sized images".into()));
    }
    let mut diffs: Vec<f32> = Vec::with_capacity(a.data().len());
    for (i, (pa, pb)) in a.data().chunks_exact(CHANNELS).zip(b.data().chunks_exact(CHANNELS)).enumerate() {
        if let Some((m, select)) = mask {
            if m.data()[i] != select {
                continue;
            }
        }
        diffs.extend(pa.iter().zip(pb).map(|(x, y)| (x - y).abs()));
    }
    if diffs.is_empty() {
        return Ok(0.0);
    }
    let mid = diffs.len() / 2;
    let (_, m, _) = diffs.select_nth_unstable_by(mid, f32::total_cmp);
    Ok(*m as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(h: usize) -> ErpImage {
        ErpImage::from_fn(h, |x, y| {
            let t = x as f32 / (2 * h) as f32 * std::f32::consts::TAU;
            [0.5 + 0.3 * t.sin(), 0.4 + 0.2 * (y as f32 / h as f32), 0.5 + 0.25 * (2.0 * t).cos()]
        })
    }

    #[test]
    fn identical_images() {
        let a = pattern(32);
        let m = mse_regions(&a, &a).unwrap();
        assert_eq!((m.global, m.pole, m.equator), (0.0, 0.0, 0.0));
        assert_eq!(psnr(m.global), f64::INFINITY);
        let report = MetricReport::compare(&a, &a, &ViewSet::standard(60.0, 16).unwrap()).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"psnr\":null"), "{json}");
        assert!(json.contains("\"coverage_min\":1.0"), "{json}");
    }

    #[test]
    fn uniform_offset_gives_exact_mse() {
        // On a black base the stored f32 offset is the same everywhere, so
        // the weighting must cancel exactly.
        let off = 1.0f32 / 255.0;
        let m = mse_regions(&ErpImage::black(64), &ErpImage::from_fn(64, |_, _| [off; 3])).unwrap();
        let expected = (off as f64).powi(2);
        for v in [m.global, m.pole, m.equator] {
            assert!((v - expected).abs() < 1e-12, "{v}");
        }
        assert!((m.global - (1.0 / 255.0f64).powi(2)).abs() < 1e-11);
        assert!((psnr(m.global) - 48.130_803_608_679_1).abs() < 1e-5);
        // On a textured base f32 rounding of `a + off` varies per sample.
        let a = pattern(64);
        let b = ErpImage::from_fn(64, |x, y| a.raster().get(x, y).map(|v| v + off));
        let g = mse_regions(&a, &b).unwrap().global;
        assert!((g / expected - 1.0).abs() < 1e-4, "{g}");
    }

    #[test]
    fn top_row_error_weighs_like_its_cap() {
        for h in [64usize, 256] {
            let a = ErpImage::black(h);
            let mut b = ErpImage::black(h);
            for x in 0..2 * h {
                b.raster_mut().set(x, 0, [1.0; 3]);
            }
            let m = mse_regions(&a, &b).unwrap();
            // Area fraction of the cap above the first row boundary.
            let lat_edge = std::f64::consts::FRAC_PI_2 - std::f64::consts::PI / h as f64;
            let cap = (1.0 - lat_edge.sin()) / 2.0;
            assert!((m.global / cap - 1.0).abs() < 0.01, "h {h}: {} vs {cap}", m.global);
            assert_eq!(m.equator, 0.0);
        }
    }

    #[test]
    fn mse_is_symmetric() {
        let a = pattern(32);
        let b = ErpImage::from_fn(32, |x, _| [x as f32 / 64.0, 0.0, 1.0]);
        assert_eq!(mse_regions(&a, &b).unwrap(), mse_regions(&b, &a).unwrap());
        assert!(mse_regions(&a, &ErpImage::black(16)).is_err());
    }

    #[test]
    fn seam_scores() {
        let flat = ErpImage::from_fn(16, |_, y| [y as f32 / 16.0; 3]);
        assert_eq!(seam_score(&flat), 1.0);
        let split = ErpImage::from_fn(16, |x, _| if x < 16 { [0.0; 3] } else { [1.0; 3] });
        assert!(seam_score(&split) > 5.0);
        let smooth = pattern(64);
        let s = seam_score(&smooth);
        assert!((0.5..1.5).contains(&s), "{s}");
    }

    /// Rows of random-phase sinusoids: no column is special, so the seam
    /// looks like any other column pair.
    fn stationary_texture() -> ErpImage {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let h = 256;
        let phases: Vec<[f64; 3]> = (0..h).map(|_| [rng.random::<f64>(), rng.random(), rng.random()]).collect();
        ErpImage::from_fn(h, |x, y| {
            let t = x as f64 / (2 * h) as f64;
            let v = |k: usize, f: f64| 0.5 + 0.15 * ((t * f + phases[y][k]) * std::f64::consts::TAU).sin();
            [v(0, 3.0) as f32, v(1, 7.0) as f32, v(2, 13.0) as f32]
        })
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn seam_score_rotation_invariant(shift in 1usize..512) {
            let p = stationary_texture();
            let base = seam_score(&p);
            let rotated = ErpImage::from_fn(256, |x, y| p.raster().get((x + shift) % 512, y));
            let s = seam_score(&rotated);
            proptest::prop_assert!((s / base - 1.0).abs() < 0.1, "shift {}: {} vs {}", shift, s, base);
        }
    }

    #[test]
    fn median_error_with_mask() {
        let a = Raster::filled(4, 1, [0.0; 3]);
        let b = Raster::from_fn(4, 1, |x, _| [x as f32 * 0.1; 3]);
        assert!((median_abs_error(&a, &b, None).unwrap() - 0.2).abs() < 1e-7);
        let m = Mask::from_fn(4, 1, |x, _| x == 0);
        assert_eq!(median_abs_error(&a, &b, Some((&m, true))).unwrap(), 0.0);
    }
}
