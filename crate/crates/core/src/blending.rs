//! Distance-weighted merging of overlapping projected views.
//!
//! A view contributes `w = 1 - d / D` at each pixel it covers, where `d` is
//! the pixel's distance from the view centre and `D` the view's half-diagonal,
//! both in NFoV pixels. Weights are normalized per pixel before mixing, so for
//! two views the result is exactly `w_i/(w_i+w_j)·x_i + w_j/(w_i+w_j)·x_j`.
//! Contributions are summed in ascending view-id order, which makes the output
//! independent of the order the views are passed in.

use crate::projection::{project_nfov_to_erp, ErpImage, NfovCamera, NfovImage, ProjectedView};
use crate::raster::{Mask, Raster, CHANNELS};
use crate::{Error, Result};

/// Below this every covering view is treated as sitting on its corner and the
/// pixel falls back to a plain average.
pub const DEGENERATE_WEIGHT: f64 = 1e-12;

/// Raw weight of a sample at distance `d` in a view with half-diagonal `max_d`.
#[inline]
pub fn raw_weight(d: f64, max_d: f64) -> f64 {
    (1.0 - d / max_d).max(0.0)
}

/// Normalized weights per view, aligned with each view's pixel list, in the
/// order the views were supplied.
#[derive(Clone, Debug)]
pub struct BlendWeights {
    pub width: usize,
    pub height: usize,
    pub per_view: Vec<Vec<f64>>,
}

impl BlendWeights {
    /// Sum of normalized weights at every pixel (0 where uncovered).
    pub fn sums(&self, views: &[ProjectedView]) -> Vec<f64> {
        let mut sums = vec![0.0; self.width * self.height];
        for (view, weights) in views.iter().zip(&self.per_view) {
            for (&p, w) in view.pixels().iter().zip(weights) {
                sums[p as usize] += w;
            }
        }
        sums
    }
}

fn blend_order(views: &[ProjectedView]) -> Result<(usize, usize, Vec<usize>)> {
    let first = views
        .first()
        .ok_or_else(|| Error::DimensionMismatch("no views to blend".into()))?;
    let (width, height) = (first.width(), first.height());
    if views.iter().any(|v| v.width() != width || v.height() != height) {
        return Err(Error::DimensionMismatch("projected views target different ERP sizes".into()));
    }
    let mut order: Vec<usize> = (0..views.len()).collect();
    order.sort_by_key(|&i| views[i].view_id());
    Ok((width, height, order))
}

/// Normalized blending weights for every covered pixel of every view.
pub fn blend_weights(views: &[ProjectedView]) -> Result<BlendWeights> {
    let (width, height, order) = blend_order(views)?;
    let n = width * height;
    let mut sum_w = vec![0.0f64; n];
    let mut max_w = vec![0.0f64; n];
    let mut count = vec![0u32; n];
    for &vi in &order {
        let v = &views[vi];
        for (&p, &d) in v.pixels().iter().zip(v.distances()) {
            let p = p as usize;
            let w = raw_weight(d, v.half_diagonal());
            sum_w[p] += w;
            max_w[p] = max_w[p].max(w);
            count[p] += 1;
        }
    }
    let per_view = views
        .iter()
        .map(|v| {
            v.pixels()
                .iter()
                .zip(v.distances())
                .map(|(&p, &d)| {
                    let p = p as usize;
                    if max_w[p] < DEGENERATE_WEIGHT {
                        1.0 / count[p] as f64
                    } else {
                        raw_weight(d, v.half_diagonal()) / sum_w[p]
                    }
                })
                .collect()
        })
        .collect();
    Ok(BlendWeights {
        width,
        height,
        per_view,
    })
}

/// Blend result kept in double precision.
#[derive(Clone, Debug)]
pub struct BlendedErp {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
    pub coverage: Vec<u16>,
}

impl BlendedErp {
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn coverage_mask(&self) -> Mask {
        Mask::from_vec(self.width, self.height, self.coverage.iter().map(|c| *c > 0).collect()).expect("sized")
    }

    pub fn into_erp(self) -> Result<ErpImage> {
        ErpImage::new(Raster::from_vec(
            self.width,
            self.height,
            self.data.iter().map(|v| *v as f32).collect(),
        )?)
    }
}

/// Blends views without requiring full coverage; uncovered pixels stay zero.
pub fn blend_partial(views: &[ProjectedView]) -> Result<BlendedErp> {
    let weights = blend_weights(views)?;
    let (width, height, order) = blend_order(views)?;
    let mut data = vec![0.0f64; width * height * CHANNELS];
    let mut coverage = vec![0u16; width * height];
    for &vi in &order {
        let v = &views[vi];
        for ((&p, c), &w) in v.pixels().iter().zip(v.colors()).zip(&weights.per_view[vi]) {
            let p = p as usize;
            coverage[p] += 1;
            let out = &mut data[p * CHANNELS..(p + 1) * CHANNELS];
            for k in 0..CHANNELS {
                out[k] += w * c[k] as f64;
            }
        }
    }
    Ok(BlendedErp {
        width,
        height,
        data,
        coverage,
    })
}

/// Blends views covering the whole sphere into one ERP image.
pub fn blend_views(views: &[ProjectedView]) -> Result<ErpImage> {
    let blended = blend_partial(views)?;
    let uncovered = blended.coverage.iter().filter(|c| **c == 0).count();
    if uncovered > 0 {
        return Err(Error::Uncovered { count: uncovered });
    }
    blended.into_erp()
}

/// Projects a +z-facing image with the given field of view onto an otherwise
/// black ERP; returns the image and its coverage (known) mask.
pub fn embed_nfov_center(
    img: &Raster,
    fov_w_deg: f64,
    fov_h_deg: f64,
    width: usize,
    height: usize,
) -> Result<(ErpImage, Mask)> {
    let cam = NfovCamera::looking_at(
        crate::geometry::UnitVec3::FORWARD,
        fov_w_deg,
        fov_h_deg,
        img.width(),
        img.height(),
    )?;
    let view = project_nfov_to_erp(&NfovImage::new(cam, img.clone())?, width, height)?;
    Ok((view.to_erp(), view.coverage()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::{extract_nfov, ViewSet};

    fn single_pixel_view(id: usize, d: f64, max_d: f64, rgb: [f32; 3]) -> ProjectedView {
        ProjectedView::from_parts(id, 2, 1, max_d, vec![0], vec![rgb], vec![d]).unwrap()
    }

    #[test]
    fn view_at_its_corner_contributes_nothing() {
        let a = single_pixel_view(0, 0.0, 181.0, [0.2, 0.4, 0.6]);
        let b = single_pixel_view(1, 181.0, 181.0, [0.9, 0.9, 0.9]);
        let out = blend_partial(&[a, b]).unwrap();
        assert_eq!(out.pixel(0, 0), [0.2f32 as f64, 0.4f32 as f64, 0.6f32 as f64]);
    }

    #[test]
    fn all_corner_weights_fall_back_to_average() {
        let a = single_pixel_view(0, 10.0, 10.0, [0.0, 0.0, 0.0]);
        let b = single_pixel_view(1, 10.0, 10.0, [1.0, 0.5, 0.25]);
        let out = blend_partial(&[a, b]).unwrap();
        assert_eq!(out.pixel(0, 0), [0.5, 0.25, 0.125]);
    }

    #[test]
    fn uncovered_pixels_are_reported() {
        let a = single_pixel_view(0, 1.0, 10.0, [0.0; 3]);
        match blend_views(&[a]) {
            Err(Error::Uncovered { count }) => assert_eq!(count, 1),
            other => panic!("expected uncovered error, got {other:?}"),
        }
    }

    #[test]
    fn agreement_is_reproduced() {
        let views: Vec<_> = (0..4)
            .map(|i| single_pixel_view(i, i as f64 * 3.0 + 0.5, 20.0, [0.3, 0.7, 0.1]))
            .collect();
        let out = blend_partial(&views).unwrap();
        let p = out.pixel(0, 0);
        for (got, want) in p.iter().zip([0.3f32, 0.7, 0.1]) {
            assert!((*got as f32 - want).abs() <= f32::EPSILON * want.abs());
        }
    }

    #[test]
    fn permutation_invariant_bit_exact() {
        let erp = ErpImage::from_fn(32, |x, y| [(x as f32 * 0.37).sin().abs(), y as f32 / 32.0, 0.5]);
        let set = ViewSet::standard(60.0, 24).unwrap();
        let mut views: Vec<_> = set
            .iter()
            .enumerate()
            .map(|(k, cam)| project_nfov_to_erp(&extract_nfov(&erp, cam), 64, 32).unwrap().with_view_id(k))
            .collect();
        let a = blend_partial(&views).unwrap();
        views.reverse();
        views.swap(3, 17);
        let b = blend_partial(&views).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn embedded_footprint_spans_expected_longitudes() {
        let img = Raster::filled(400, 300, [1.0; 3]);
        let (erp, mask) = embed_nfov_center(&img, 126.87, 112.62, 2048, 1024).unwrap();
        // Equator row: find the extreme covered longitudes.
        let y = 511;
        let covered: Vec<usize> = (0..2048).filter(|&x| mask.get(x, y)).collect();
        let lon = |x: usize| (x as f64 + 0.5) / 2048.0 * 360.0 - 180.0;
        let (lo, hi) = (lon(covered[0]), lon(*covered.last().unwrap()));
        let px = 360.0 / 2048.0;
        assert!((lo + 63.435).abs() < px && (hi - 63.435).abs() < px, "{lo} {hi}");
        assert_eq!(erp.raster().get(1024, 511), [1.0; 3]);
        assert_eq!(erp.raster().get(10, 511), [0.0; 3]);
    }
}
