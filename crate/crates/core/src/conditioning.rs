//! Conditional images: which parts of the sphere are known, and their
//! per-view counterparts.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;

use crate::geometry::{direction_to_erp_pixel, erp_row_latitude, UnitVec3};
use crate::projection::{camera_footprint, extract_nfov, ErpImage, NfovCamera, NfovImage, ViewSet};
use crate::raster::Mask;
use crate::{Error, Result};

/// Field of view (width, height) of the NFoV image embedded at the centre of
/// the conditional ERP image at inference time, degrees.
pub const CENTER_FOV_DEG: (f64, f64) = (126.87, 112.62);

/// Resolution of the virtual camera used to rasterize footprints; only its
/// aspect matters for coverage.
const FOOTPRINT_RES: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub enum ConditionSpec {
    /// Footprint of a +z-facing camera is known.
    CenterNfov { fov_w_deg: f64, fov_h_deg: f64 },
    /// Union of axis-aligned ERP rectangles is unknown.
    RandomBoxes {
        count: (usize, usize),
        unknown_fraction: (f64, f64),
    },
    /// Everything below `lat_threshold` (radians) is unknown.
    GroundRegion { lat_threshold: f64 },
    /// Two camera footprints, `yaw_offset_deg` apart, are known.
    TwoView {
        fov_w_deg: f64,
        fov_h_deg: f64,
        yaw_offset_deg: f64,
    },
    ExplicitMask(Mask),
}

impl ConditionSpec {
    pub fn center() -> Self {
        ConditionSpec::CenterNfov {
            fov_w_deg: CENTER_FOV_DEG.0,
            fov_h_deg: CENTER_FOV_DEG.1,
        }
    }

    pub fn random_boxes() -> Self {
        ConditionSpec::RandomBoxes {
            count: (1, 8),
            unknown_fraction: (0.2, 0.8),
        }
    }

    pub fn ground() -> Self {
        ConditionSpec::GroundRegion {
            lat_threshold: -PI / 4.0,
        }
    }

    pub fn two_view() -> Self {
        ConditionSpec::TwoView {
            fov_w_deg: CENTER_FOV_DEG.0,
            fov_h_deg: CENTER_FOV_DEG.1,
            yaw_offset_deg: 180.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let fov_ok = |f: f64| f > 0.0 && f < 180.0;
        match self {
            ConditionSpec::CenterNfov { fov_w_deg, fov_h_deg } | ConditionSpec::TwoView { fov_w_deg, fov_h_deg, .. } => {
                if !fov_ok(*fov_w_deg) || !fov_ok(*fov_h_deg) {
                    return Err(Error::Condition(format!("field of view {fov_w_deg}x{fov_h_deg} outside (0, 180)")));
                }
            }
            ConditionSpec::RandomBoxes {
                count,
                unknown_fraction,
            } => {
                if count.0 == 0 || count.0 > count.1 {
                    return Err(Error::Condition(format!("box count range {count:?}")));
                }
                let (lo, hi) = *unknown_fraction;
                if !(0.0 < lo && lo <= hi && hi < 1.0) {
                    return Err(Error::Condition(format!("unknown fraction range {unknown_fraction:?}")));
                }
            }
            ConditionSpec::GroundRegion { lat_threshold } => {
                if !(lat_threshold.abs() < FRAC_PI_2) {
                    return Err(Error::Condition(format!("latitude threshold {lat_threshold} rad")));
                }
            }
            ConditionSpec::ExplicitMask(_) => {}
        }
        Ok(())
    }
}

fn footprint(forward: UnitVec3, fov_w: f64, fov_h: f64, width: usize, height: usize) -> Result<Mask> {
    let res_h = ((FOOTPRINT_RES as f64) * (fov_h / 2.0).to_radians().tan() / (fov_w / 2.0).to_radians().tan())
        .round()
        .max(1.0) as usize;
    let cam = NfovCamera::looking_at(forward, fov_w, fov_h, FOOTPRINT_RES, res_h)?;
    camera_footprint(&cam, width, height)
}

const MAX_BOX_ATTEMPTS: usize = 1000;

fn random_boxes<R: Rng + ?Sized>(
    width: usize,
    height: usize,
    count: (usize, usize),
    fraction: (f64, f64),
    rng: &mut R,
) -> Result<Mask> {
    for _ in 0..MAX_BOX_ATTEMPTS {
        let mut mask = Mask::new(width, height, true);
        let n = rng.random_range(count.0..=count.1);
        for _ in 0..n {
            let bw = rng.random_range(width / 8..=width / 2).max(1);
            let bh = rng.random_range(height / 8..=height / 2).max(1);
            let x0 = rng.random_range(0..width);
            let y0 = rng.random_range(0..=height - bh);
            for y in y0..y0 + bh {
                for dx in 0..bw {
                    // Boxes may straddle the seam.
                    mask.set((x0 + dx) % width, y, false);
                }
            }
        }
        let unknown = 1.0 - mask.known_fraction();
        if unknown >= fraction.0 && unknown <= fraction.1 {
            return Ok(mask);
        }
    }
    Err(Error::Condition(format!(
        "no box layout reached an unknown fraction in {fraction:?} after {MAX_BOX_ATTEMPTS} tries"
    )))
}

/// Builds the known mask for `spec` and zeroes the unknown part of `erp`.
pub fn make_condition<R: Rng + ?Sized>(erp: &ErpImage, spec: &ConditionSpec, rng: &mut R) -> Result<(ErpImage, Mask)> {
    spec.validate()?;
    let (w, h) = (erp.width(), erp.height());
    let mask = match spec {
        ConditionSpec::CenterNfov { fov_w_deg, fov_h_deg } => footprint(UnitVec3::FORWARD, *fov_w_deg, *fov_h_deg, w, h)?,
        ConditionSpec::RandomBoxes {
            count,
            unknown_fraction,
        } => random_boxes(w, h, *count, *unknown_fraction, rng)?,
        ConditionSpec::GroundRegion { lat_threshold } => {
            Mask::from_fn(w, h, |_, y| erp_row_latitude(y, h) >= *lat_threshold)
        }
        ConditionSpec::TwoView {
            fov_w_deg,
            fov_h_deg,
            yaw_offset_deg,
        } => {
            let a = footprint(UnitVec3::FORWARD, *fov_w_deg, *fov_h_deg, w, h)?;
            let back = UnitVec3::from_lat_lon(crate::geometry::LatLon::new(0.0, yaw_offset_deg.to_radians()));
            let b = footprint(back, *fov_w_deg, *fov_h_deg, w, h)?;
            Mask::from_vec(w, h, a.data().iter().zip(b.data()).map(|(x, y)| *x || *y).collect())?
        }
        ConditionSpec::ExplicitMask(m) => {
            if m.width() != w || m.height() != h {
                return Err(Error::DimensionMismatch(format!(
                    "{}x{} mask for a {w}x{h} image",
                    m.width(),
                    m.height()
                )));
            }
            m.clone()
        }
    };
    if mask.known_count() == 0 && !matches!(spec, ConditionSpec::ExplicitMask(_)) {
        return Err(Error::Condition("condition leaves nothing known".into()));
    }
    let cond = ErpImage::new(erp.raster().masked(&mask)?)?;
    Ok((cond, mask))
}

/// Nearest-neighbour lookup of an ERP mask through a camera.
pub fn extract_mask(mask: &Mask, cam: &NfovCamera) -> Mask {
    let (w, h) = (mask.width(), mask.height());
    Mask::from_fn(cam.width(), cam.height(), |c, r| {
        let d = cam.pixel_to_direction(c as f64 + 0.5, r as f64 + 0.5);
        let (u, v) = direction_to_erp_pixel(d, w, h);
        let x = (u.floor() as usize).min(w - 1);
        let y = (v.floor().max(0.0) as usize).min(h - 1);
        mask.get(x, y)
    })
}

/// Per-view conditional images and known masks.
pub fn condition_to_views(cond: &ErpImage, mask: &Mask, views: &ViewSet) -> Result<Vec<(NfovImage, Mask)>> {
    if mask.width() != cond.width() || mask.height() != cond.height() {
        return Err(Error::DimensionMismatch("mask and conditional image differ in size".into()));
    }
    Ok(views
        .iter()
        .map(|cam| (extract_nfov(cond, cam), extract_mask(mask, cam)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gradient(h: usize) -> ErpImage {
        ErpImage::from_fn(h, |x, y| [0.1 + x as f32 / (4 * h) as f32, 0.2 + y as f32 / (2 * h) as f32, 0.7])
    }

    #[test]
    fn explicit_all_known_is_identity() {
        let erp = gradient(32);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (cond, mask) = make_condition(&erp, &ConditionSpec::ExplicitMask(Mask::new(64, 32, true)), &mut rng).unwrap();
        assert_eq!(cond, erp);
        assert_eq!(mask.known_fraction(), 1.0);
    }

    #[test]
    fn ground_region_splits_at_threshold() {
        let erp = gradient(64);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (cond, mask) = make_condition(&erp, &ConditionSpec::ground(), &mut rng).unwrap();
        for y in 0..64 {
            let below = erp_row_latitude(y, 64) < -PI / 4.0;
            for x in 0..128 {
                assert_eq!(mask.get(x, y), !below);
                if below {
                    assert_eq!(cond.raster().get(x, y), [0.0; 3]);
                } else {
                    assert_eq!(cond.raster().get(x, y), erp.raster().get(x, y));
                }
            }
        }
    }

    #[test]
    fn two_view_footprints_are_disjoint_halves() {
        let erp = gradient(64);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (_, both) = make_condition(&erp, &ConditionSpec::two_view(), &mut rng).unwrap();
        let (_, front) = make_condition(&erp, &ConditionSpec::center(), &mut rng).unwrap();
        // Disjoint: the union has exactly twice the single-view area up to the
        // half-pixel asymmetry of the seam.
        let ratio = both.known_count() as f64 / front.known_count() as f64;
        assert!((ratio - 2.0).abs() < 0.02, "ratio {ratio}");
        assert!(front.get(64, 32) && both.get(0, 32) && !front.get(0, 32));
    }

    #[test]
    fn random_boxes_respect_fraction_and_seed() {
        let erp = gradient(64);
        let spec = ConditionSpec::random_boxes();
        let a = make_condition(&erp, &spec, &mut ChaCha8Rng::seed_from_u64(7)).unwrap().1;
        let b = make_condition(&erp, &spec, &mut ChaCha8Rng::seed_from_u64(7)).unwrap().1;
        assert_eq!(a, b);
        let unknown = 1.0 - a.known_fraction();
        assert!((0.2..=0.8).contains(&unknown));
    }

    #[test]
    fn invalid_specs_rejected() {
        let erp = gradient(16);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bad = [
            ConditionSpec::CenterNfov { fov_w_deg: 0.0, fov_h_deg: 10.0 },
            ConditionSpec::GroundRegion { lat_threshold: 2.0 },
            ConditionSpec::RandomBoxes { count: (0, 3), unknown_fraction: (0.2, 0.8) },
            ConditionSpec::RandomBoxes { count: (1, 3), unknown_fraction: (0.9, 0.2) },
            ConditionSpec::ExplicitMask(Mask::new(4, 2, true)),
        ];
        for spec in bad {
            assert!(make_condition(&erp, &spec, &mut rng).is_err(), "{spec:?}");
        }
    }

    #[test]
    fn tiny_fov_is_rejected_when_nothing_known() {
        // At 8 rows a 0.01° footprint misses every pixel centre.
        let erp = gradient(8);
        let spec = ConditionSpec::CenterNfov { fov_w_deg: 0.01, fov_h_deg: 0.01 };
        let err = make_condition(&erp, &spec, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, Error::Condition(_)));
    }

    #[test]
    fn all_known_mask_gives_all_known_views() {
        let erp = gradient(32);
        let views = ViewSet::standard(60.0, 16).unwrap();
        let per_view = condition_to_views(&erp, &Mask::new(64, 32, true), &views).unwrap();
        assert_eq!(per_view.len(), 26);
        assert!(per_view.iter().all(|(_, m)| m.known_fraction() == 1.0));
    }
}
