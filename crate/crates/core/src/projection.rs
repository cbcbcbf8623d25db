//! Gnomonic NFoV cameras, ERP images and the mapping between them.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::geometry::{
    camera_frame_for, direction_to_erp_pixel, erp_row_latitude, rhombicuboctahedron_directions, CameraFrame,
    UnitVec3, Vec3,
};
use crate::raster::{Mask, Raster};
use crate::{Error, Result};

/// Field of view of every view in the standard set, degrees.
pub const STANDARD_FOV_DEG: f64 = 60.0;
/// Side length of every view in the standard set, pixels.
pub const STANDARD_VIEW_SIZE: usize = 256;

/// Perspective camera with a square-pixel image plane at unit distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NfovCamera {
    frame: CameraFrame,
    fov_w_deg: f64,
    fov_h_deg: f64,
    width: usize,
    height: usize,
    tan_half_w: f64,
    tan_half_h: f64,
}

impl NfovCamera {
    pub fn new(frame: CameraFrame, fov_w_deg: f64, fov_h_deg: f64, width: usize, height: usize) -> Result<Self> {
        for fov in [fov_w_deg, fov_h_deg] {
            if !(fov > 0.0 && fov < 180.0) {
                return Err(Error::InvalidCamera(format!("field of view {fov}° outside (0, 180)")));
            }
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidCamera(format!("resolution {width}x{height}")));
        }
        Ok(Self {
            frame,
            fov_w_deg,
            fov_h_deg,
            width,
            height,
            tan_half_w: (fov_w_deg.to_radians() / 2.0).tan(),
            tan_half_h: (fov_h_deg.to_radians() / 2.0).tan(),
        })
    }

    /// North-up camera looking along `forward`.
    pub fn looking_at(forward: UnitVec3, fov_w_deg: f64, fov_h_deg: f64, width: usize, height: usize) -> Result<Self> {
        Self::new(camera_frame_for(forward), fov_w_deg, fov_h_deg, width, height)
    }

    pub fn frame(&self) -> &CameraFrame {
        &self.frame
    }

    pub fn forward(&self) -> UnitVec3 {
        self.frame.forward
    }

    pub fn fov_deg(&self) -> (f64, f64) {
        (self.fov_w_deg, self.fov_h_deg)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Same orientation and field of view, different resolution.
    pub fn with_resolution(&self, width: usize, height: usize) -> Result<Self> {
        Self::new(self.frame, self.fov_w_deg, self.fov_h_deg, width, height)
    }

    /// Distance in pixels from the image centre to a corner.
    pub fn half_diagonal(&self) -> f64 {
        (self.width as f64 / 2.0).hypot(self.height as f64 / 2.0)
    }

    /// Angle between `forward` and the ray through an image corner.
    pub fn corner_angle(&self) -> f64 {
        self.tan_half_w.hypot(self.tan_half_h).atan()
    }

    /// Ray through continuous image coordinates `(i, j)`; `(0, 0)` is the
    /// top-left corner of the image.
    pub fn pixel_to_direction(&self, i: f64, j: f64) -> UnitVec3 {
        let a = (2.0 * i / self.width as f64 - 1.0) * self.tan_half_w;
        let b = (1.0 - 2.0 * j / self.height as f64) * self.tan_half_h;
        let f = &self.frame;
        let ray = f.forward.vec() + f.right.vec() * a + f.up.vec() * b;
        UnitVec3::normalize(ray).expect("forward component keeps the ray non-zero")
    }

    /// Image-plane hit of `d`: continuous pixel coordinates plus the distance
    /// in pixels from the image centre. `None` outside the frustum.
    #[inline]
    pub fn direction_to_pixel(&self, d: Vec3) -> Option<(f64, f64, f64)> {
        let f = &self.frame;
        let depth = d.dot(f.forward.vec());
        if depth <= 0.0 {
            return None;
        }
        let a = d.dot(f.right.vec()) / depth;
        let b = d.dot(f.up.vec()) / depth;
        if a.abs() > self.tan_half_w || b.abs() > self.tan_half_h {
            return None;
        }
        let half_w = self.width as f64 / 2.0;
        let half_h = self.height as f64 / 2.0;
        let di = a / self.tan_half_w * half_w;
        let dj = b / self.tan_half_h * half_h;
        let dist = di.hypot(dj).min(self.half_diagonal());
        Some((half_w + di, half_h - dj, dist))
    }
}

/// Ray for NFoV pixel coordinates; free-function form of
/// [`NfovCamera::pixel_to_direction`].
pub fn nfov_pixel_to_direction(cam: &NfovCamera, i: f64, j: f64) -> UnitVec3 {
    cam.pixel_to_direction(i, j)
}

/// Equirectangular image; width is always twice the height.
#[derive(Clone, Debug, PartialEq)]
pub struct ErpImage(Raster);

impl ErpImage {
    pub fn new(raster: Raster) -> Result<Self> {
        if raster.height() == 0 || raster.width() != 2 * raster.height() {
            return Err(Error::NotTwoToOne {
                width: raster.width(),
                height: raster.height(),
            });
        }
        Ok(Self(raster))
    }

    pub fn black(height: usize) -> Self {
        Self(Raster::new(2 * height, height))
    }

    pub fn from_fn(height: usize, f: impl FnMut(usize, usize) -> [f32; 3]) -> Self {
        Self(Raster::from_fn(2 * height, height, f))
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn raster(&self) -> &Raster {
        &self.0
    }

    pub fn raster_mut(&mut self) -> &mut Raster {
        &mut self.0
    }

    pub fn into_raster(self) -> Raster {
        self.0
    }

    /// Bilinear sample at continuous ERP coordinates with horizontal wrap.
    pub fn sample(&self, u: f64, v: f64) -> [f32; 3] {
        self.0.sample_wrapped(u, v)
    }

    pub fn sample_direction(&self, d: UnitVec3) -> [f32; 3] {
        let (u, v) = direction_to_erp_pixel(d, self.width(), self.height());
        self.sample(u, v)
    }

    /// Resizes to `height` rows: box filter for integer reductions, bilinear
    /// resampling on the sphere otherwise.
    pub fn resized(&self, height: usize) -> Result<ErpImage> {
        if height == 0 {
            return Err(Error::NotTwoToOne { width: 0, height: 0 });
        }
        if height == self.height() {
            return Ok(self.clone());
        }
        if self.height() % height == 0 {
            return ErpImage::new(self.0.downsample_area(self.height() / height)?);
        }
        let (sx, sy) = (self.width() as f64 / (2 * height) as f64, self.height() as f64 / height as f64);
        Ok(ErpImage::from_fn(height, |x, y| {
            self.sample((x as f64 + 0.5) * sx, (y as f64 + 0.5) * sy)
        }))
    }
}

/// A perspective image together with the camera that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct NfovImage {
    camera: NfovCamera,
    raster: Raster,
}

impl NfovImage {
    pub fn new(camera: NfovCamera, raster: Raster) -> Result<Self> {
        if raster.width() != camera.width() || raster.height() != camera.height() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} image for a {}x{} camera",
                raster.width(),
                raster.height(),
                camera.width(),
                camera.height()
            )));
        }
        Ok(Self { camera, raster })
    }

    pub fn camera(&self) -> &NfovCamera {
        &self.camera
    }

    pub fn raster(&self) -> &Raster {
        &self.raster
    }

    pub fn into_raster(self) -> Raster {
        self.raster
    }
}

/// Ordered list of cameras; the index of a camera is its view id.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewSet {
    cameras: Vec<NfovCamera>,
}

impl ViewSet {
    pub fn new(cameras: Vec<NfovCamera>) -> Self {
        Self { cameras }
    }

    /// The 26 rhombicuboctahedron views.
    pub fn standard(fov_deg: f64, size: usize) -> Result<Self> {
        Self::from_directions(&rhombicuboctahedron_directions(), fov_deg, size)
    }

    /// Square north-up views along user-supplied directions.
    pub fn from_directions(dirs: &[UnitVec3], fov_deg: f64, size: usize) -> Result<Self> {
        let cameras = dirs
            .iter()
            .map(|d| NfovCamera::looking_at(*d, fov_deg, fov_deg, size, size))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { cameras })
    }

    pub fn cameras(&self) -> &[NfovCamera] {
        &self.cameras
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &NfovCamera> {
        self.cameras.iter()
    }
}

/// Per-column sin/cos of longitude and per-row sin/cos of latitude for one
/// ERP size.
struct ErpTables {
    width: usize,
    height: usize,
    sin_lon: Vec<f64>,
    cos_lon: Vec<f64>,
}

impl ErpTables {
    fn new(width: usize, height: usize) -> Self {
        let (sin_lon, cos_lon) = (0..width)
            .map(|x| (2.0 * PI * (x as f64 + 0.5) / width as f64 - PI).sin_cos())
            .unzip();
        Self {
            width,
            height,
            sin_lon,
            cos_lon,
        }
    }

    /// Calls `visit(pixel_index, i, j, dist)` for every ERP pixel centre that
    /// falls inside the camera frustum, in ascending pixel order.
    fn for_each_covered(&self, cam: &NfovCamera, mut visit: impl FnMut(usize, f64, f64, f64)) {
        let fwd_lat = cam.forward().y().clamp(-1.0, 1.0).asin();
        let reach = cam.corner_angle() + PI / self.height as f64;
        let lat_hi = (fwd_lat + reach).min(FRAC_PI_2);
        let lat_lo = (fwd_lat - reach).max(-FRAC_PI_2);
        let h = self.height as f64;
        let row_lo = (((FRAC_PI_2 - lat_hi) / PI * h - 0.5).floor().max(0.0)) as usize;
        let row_hi = ((((FRAC_PI_2 - lat_lo) / PI * h - 0.5).ceil()) as usize).min(self.height - 1);
        for y in row_lo..=row_hi {
            let (sin_lat, cos_lat) = erp_row_latitude(y, self.height).sin_cos();
            let base = y * self.width;
            for x in 0..self.width {
                let d = Vec3::new(cos_lat * self.sin_lon[x], sin_lat, cos_lat * self.cos_lon[x]);
                if let Some((i, j, dist)) = cam.direction_to_pixel(d) {
                    visit(base + x, i, j, dist);
                }
            }
        }
    }
}

/// Samples the ERP image through every pixel of `cam`.
pub fn extract_nfov(erp: &ErpImage, cam: &NfovCamera) -> NfovImage {
    let raster = Raster::from_fn(cam.width(), cam.height(), |c, r| {
        let d = cam.pixel_to_direction(c as f64 + 0.5, r as f64 + 0.5);
        erp.sample_direction(d)
    });
    NfovImage {
        camera: *cam,
        raster,
    }
}

/// One view re-projected onto an ERP grid. Only covered pixels are stored,
/// in ascending pixel-index order.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedView {
    view_id: usize,
    width: usize,
    height: usize,
    half_diagonal: f64,
    pixels: Vec<u32>,
    colors: Vec<[f32; 3]>,
    distances: Vec<f64>,
}

impl ProjectedView {
    /// Assembles a view from raw parts; pixels must be strictly increasing
    /// and every distance within `[0, half_diagonal]`.
    pub fn from_parts(
        view_id: usize,
        width: usize,
        height: usize,
        half_diagonal: f64,
        pixels: Vec<u32>,
        colors: Vec<[f32; 3]>,
        distances: Vec<f64>,
    ) -> Result<Self> {
        if pixels.len() != colors.len() || pixels.len() != distances.len() {
            return Err(Error::DimensionMismatch("projected view parts differ in length".into()));
        }
        if pixels.windows(2).any(|w| w[0] >= w[1]) || pixels.last().is_some_and(|p| *p as usize >= width * height) {
            return Err(Error::DimensionMismatch("projected view pixels not increasing or out of range".into()));
        }
        if !(half_diagonal > 0.0) || distances.iter().any(|d| !(*d >= 0.0 && *d <= half_diagonal)) {
            return Err(Error::OutOfRange("distances must lie in [0, half_diagonal]".into()));
        }
        Ok(Self {
            view_id,
            width,
            height,
            half_diagonal,
            pixels,
            colors,
            distances,
        })
    }

    pub fn with_view_id(mut self, id: usize) -> Self {
        self.view_id = id;
        self
    }

    pub fn view_id(&self) -> usize {
        self.view_id
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn half_diagonal(&self) -> f64 {
        self.half_diagonal
    }

    pub fn pixels(&self) -> &[u32] {
        &self.pixels
    }

    pub fn colors(&self) -> &[[f32; 3]] {
        &self.colors
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn covered_count(&self) -> usize {
        self.pixels.len()
    }

    /// Distance to the view centre at ERP pixel `(x, y)`, if covered.
    pub fn distance_at(&self, x: usize, y: usize) -> Option<f64> {
        let idx = (y * self.width + x) as u32;
        self.pixels.binary_search(&idx).ok().map(|k| self.distances[k])
    }

    pub fn coverage(&self) -> Mask {
        let mut data = vec![false; self.width * self.height];
        for &p in &self.pixels {
            data[p as usize] = true;
        }
        Mask::from_vec(self.width, self.height, data).expect("sized from view")
    }

    /// Colours on a full ERP grid, zero where uncovered.
    pub fn to_erp(&self) -> ErpImage {
        let mut r = Raster::new(self.width, self.height);
        for (&p, c) in self.pixels.iter().zip(&self.colors) {
            let p = p as usize;
            r.set(p % self.width, p / self.width, *c);
        }
        ErpImage(r)
    }
}

/// Re-projects an NFoV image onto a `width`×`height` ERP grid.
pub fn project_nfov_to_erp(img: &NfovImage, width: usize, height: usize) -> Result<ProjectedView> {
    if height == 0 || width != 2 * height {
        return Err(Error::NotTwoToOne { width, height });
    }
    let cam = img.camera();
    let mut pixels = Vec::new();
    let mut colors = Vec::new();
    let mut distances = Vec::new();
    ErpTables::new(width, height).for_each_covered(cam, |idx, i, j, dist| {
        pixels.push(idx as u32);
        colors.push(img.raster().sample_clamped(i, j));
        distances.push(dist);
    });
    Ok(ProjectedView {
        view_id: 0,
        width,
        height,
        half_diagonal: cam.half_diagonal(),
        pixels,
        colors,
        distances,
    })
}

/// Number of views covering each ERP pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageGrid {
    pub width: usize,
    pub height: usize,
    pub counts: Vec<u16>,
}

impl CoverageGrid {
    pub fn min(&self) -> u16 {
        self.counts.iter().copied().min().unwrap_or(0)
    }

    pub fn max(&self) -> u16 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    pub fn uncovered(&self) -> usize {
        self.counts.iter().filter(|c| **c == 0).count()
    }

    pub fn to_mask(&self) -> Mask {
        Mask::from_vec(self.width, self.height, self.counts.iter().map(|c| *c > 0).collect()).expect("sized")
    }
}

pub fn coverage_of_viewset(views: &ViewSet, width: usize, height: usize) -> Result<CoverageGrid> {
    if height == 0 || width != 2 * height {
        return Err(Error::NotTwoToOne { width, height });
    }
    let mut counts = vec![0u16; width * height];
    let tables = ErpTables::new(width, height);
    for cam in views.iter() {
        tables.for_each_covered(cam, |idx, _, _, _| counts[idx] += 1);
    }
    Ok(CoverageGrid { width, height, counts })
}

/// Coverage mask of a single camera on an ERP grid.
pub fn camera_footprint(cam: &NfovCamera, width: usize, height: usize) -> Result<Mask> {
    Ok(coverage_of_viewset(&ViewSet::new(vec![*cam]), width, height)?.to_mask())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::erp_pixel_to_direction;

    fn cam60(forward: UnitVec3, size: usize) -> NfovCamera {
        NfovCamera::looking_at(forward, 60.0, 60.0, size, size).unwrap()
    }

    #[test]
    fn camera_validation() {
        let f = camera_frame_for(UnitVec3::FORWARD);
        assert!(NfovCamera::new(f, 0.0, 60.0, 8, 8).is_err());
        assert!(NfovCamera::new(f, 60.0, 180.0, 8, 8).is_err());
        assert!(NfovCamera::new(f, 60.0, 60.0, 0, 8).is_err());
        assert!(ErpImage::new(Raster::new(10, 4)).is_err());
    }

    #[test]
    fn centre_pixel_is_forward() {
        let cam = cam60(UnitVec3::new(0.3, -0.4, 0.5).unwrap(), 256);
        let d = nfov_pixel_to_direction(&cam, 128.0, 128.0);
        assert!(d.angle_to(cam.forward()) < 1e-15);
    }

    #[test]
    fn corner_angle_matches_closed_form() {
        let cam = cam60(UnitVec3::FORWARD, 256);
        let d = nfov_pixel_to_direction(&cam, 0.0, 0.0);
        let expected = ((30f64).to_radians().tan() * 2f64.sqrt()).atan();
        assert!((d.angle_to(cam.forward()) - expected).abs() < 1e-12);
        assert!((expected.to_degrees() - 39.231_520_483_539_5).abs() < 1e-9);
        // The corner ray points up-left.
        assert!(d.x() < 0.0 && d.y() > 0.0);
    }

    #[test]
    fn direction_to_pixel_inverts_pixel_to_direction() {
        let cam = NfovCamera::looking_at(UnitVec3::new(1.0, 1.0, 0.0).unwrap(), 70.0, 50.0, 200, 120).unwrap();
        for &(i, j) in &[(0.5, 0.5), (100.0, 60.0), (199.5, 3.25), (17.0, 119.0)] {
            let d = cam.pixel_to_direction(i, j);
            let (i2, j2, _) = cam.direction_to_pixel(d.vec()).unwrap();
            assert!((i - i2).abs() < 1e-9 && (j - j2).abs() < 1e-9);
        }
        assert!(cam.direction_to_pixel((-cam.forward()).vec()).is_none());
    }

    #[test]
    fn constant_erp_gives_constant_view() {
        let erp = ErpImage::new(Raster::filled(128, 64, [0.25, 0.5, 0.75])).unwrap();
        for d in rhombicuboctahedron_directions() {
            let v = extract_nfov(&erp, &cam60(d, 32));
            assert!(v.raster().data().chunks(3).all(|p| p == [0.25, 0.5, 0.75]));
        }
    }

    #[test]
    fn uniquely_coloured_centre_reaches_view_centre() {
        let mut erp = ErpImage::black(64);
        // The ERP centre (u = 64, v = 32) is the corner shared by four pixels;
        // paint all four so the ray through it sees the colour.
        for (x, y) in [(63, 31), (64, 31), (63, 32), (64, 32)] {
            erp.raster_mut().set(x, y, [1.0, 0.0, 0.5]);
        }
        // Odd size so the central NFoV pixel centre is exactly on-axis.
        let v = extract_nfov(&erp, &cam60(UnitVec3::FORWARD, 65));
        let centre = v.raster().get(32, 32);
        assert_eq!(centre, [1.0, 0.0, 0.5]);
    }

    #[test]
    fn projection_distances_and_antipode() {
        let erp = ErpImage::from_fn(64, |x, _| [x as f32 / 128.0, 0.5, 0.5]);
        let cam = cam60(UnitVec3::FORWARD, 64);
        let view = extract_nfov(&erp, &cam);
        let proj = project_nfov_to_erp(&view, 128, 64).unwrap();
        assert!(proj.covered_count() > 0);
        // Antipode of +z is the seam at the equator.
        assert!(proj.distance_at(0, 32).is_none());
        assert!(proj.distance_at(127, 31).is_none());
        // The nearest ERP pixel centre is half an ERP pixel (1.4°) off in
        // both directions, about 1.36 view pixels each.
        let d = proj.distance_at(64, 32).unwrap();
        let f = 32.0 / 30f64.to_radians().tan();
        let off = f * (180.0f64 / 128.0).to_radians().tan();
        assert!((d - off * 2f64.sqrt()).abs() < 0.02, "centre distance {d}");
        assert!(proj.distances().iter().all(|d| *d <= proj.half_diagonal()));
    }

    #[test]
    fn projection_rejects_bad_erp_size() {
        let erp = ErpImage::black(8);
        let view = extract_nfov(&erp, &cam60(UnitVec3::FORWARD, 8));
        assert!(matches!(project_nfov_to_erp(&view, 30, 16), Err(Error::NotTwoToOne { .. })));
    }

    #[test]
    fn projected_coverage_matches_frustum_test() {
        // Every covered pixel must satisfy the plane-coordinate frustum test.
        let cam = cam60(UnitVec3::new(0.2, 0.9, -0.3).unwrap(), 32);
        let (w, h) = (256, 128);
        let proj = project_nfov_to_erp(&extract_nfov(&ErpImage::black(h), &cam), w, h).unwrap();
        let cov = proj.coverage();
        let t = 30f64.to_radians().tan();
        for y in 0..h {
            for x in 0..w {
                let d = erp_pixel_to_direction(x as f64 + 0.5, y as f64 + 0.5, w, h).unwrap();
                let depth = d.dot(cam.forward());
                let inside = depth > 0.0
                    && (d.dot(cam.frame().right) / depth).abs() <= t
                    && (d.dot(cam.frame().up) / depth).abs() <= t;
                assert_eq!(inside, cov.get(x, y), "pixel {x},{y}");
            }
        }
    }

    #[test]
    fn empty_viewset_has_zero_coverage() {
        let grid = coverage_of_viewset(&ViewSet::new(vec![]), 64, 32).unwrap();
        assert!(grid.counts.iter().all(|c| *c == 0));
    }

    #[test]
    fn resize_by_integer_factor_uses_area_average() {
        let erp = ErpImage::from_fn(8, |x, y| [(x + y) as f32 / 24.0, 0.0, 1.0]);
        let small = erp.resized(4).unwrap();
        let expected = (0..2).flat_map(|y| (0..2).map(move |x| (x + y) as f32 / 24.0)).sum::<f32>() / 4.0;
        assert!((small.raster().get(0, 0)[0] - expected).abs() < 1e-6);
        let big = erp.resized(12).unwrap();
        assert_eq!(big.height(), 12);
    }
}
