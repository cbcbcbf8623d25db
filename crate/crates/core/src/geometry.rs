//! Coordinate conventions shared by every module.
//!
//! World axes: `+z` looks at the centre of the equirectangular image, `+y` is
//! the north pole and `+x` is 90° east. Longitude grows to the right of the ERP
//! image, latitude grows upwards. Continuous pixel coordinates put pixel
//! centres at `integer + 0.5`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use crate::{Error, Result};

/// Plain 3-vector used for intermediate arithmetic.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// A direction on the unit sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitVec3(Vec3);

impl UnitVec3 {
    pub const NORTH: UnitVec3 = UnitVec3(Vec3::new(0.0, 1.0, 0.0));
    pub const SOUTH: UnitVec3 = UnitVec3(Vec3::new(0.0, -1.0, 0.0));
    pub const FORWARD: UnitVec3 = UnitVec3(Vec3::new(0.0, 0.0, 1.0));

    /// Normalizes `(x, y, z)`; `None` for zero or non-finite input.
    pub fn new(x: f64, y: f64, z: f64) -> Option<Self> {
        Self::normalize(Vec3::new(x, y, z))
    }

    pub fn normalize(v: Vec3) -> Option<Self> {
        let n = v.norm();
        if n.is_finite() && n > 0.0 {
            Some(UnitVec3(v * (1.0 / n)))
        } else {
            None
        }
    }

    pub fn x(self) -> f64 {
        self.0.x
    }

    pub fn y(self) -> f64 {
        self.0.y
    }

    pub fn z(self) -> f64 {
        self.0.z
    }

    pub fn vec(self) -> Vec3 {
        self.0
    }

    pub fn dot(self, o: UnitVec3) -> f64 {
        self.0.dot(o.0)
    }

    /// Angle in radians, computed with `atan2` so it stays accurate for tiny angles.
    pub fn angle_to(self, o: UnitVec3) -> f64 {
        self.0.cross(o.0).norm().atan2(self.0.dot(o.0))
    }

    pub fn to_lat_lon(self) -> LatLon {
        let Vec3 { x, y, z } = self.0;
        let horizontal = x.hypot(z);
        // Longitude is undefined at the poles; pin it to 0.
        let lon = if horizontal <= 1e-15 { 0.0 } else { x.atan2(z) };
        LatLon::new(y.atan2(horizontal), lon)
    }

    pub fn from_lat_lon(ll: LatLon) -> UnitVec3 {
        let (sin_lat, cos_lat) = ll.lat.sin_cos();
        let (sin_lon, cos_lon) = ll.lon.sin_cos();
        UnitVec3(Vec3::new(cos_lat * sin_lon, sin_lat, cos_lat * cos_lon))
    }
}

impl Neg for UnitVec3 {
    type Output = UnitVec3;
    fn neg(self) -> UnitVec3 {
        UnitVec3(-self.0)
    }
}

/// Latitude in `[-π/2, π/2]`, longitude in `[-π, π)`, radians.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    /// Clamps latitude and wraps longitude into range.
    pub fn new(lat: f64, lon: f64) -> Self {
        let mut lon = (lon + PI).rem_euclid(TAU) - PI;
        if lon >= PI {
            lon -= TAU;
        }
        Self {
            lat: lat.clamp(-FRAC_PI_2, FRAC_PI_2),
            lon,
        }
    }

    pub fn from_degrees(lat_deg: f64, lon_deg: f64) -> Self {
        Self::new(lat_deg.to_radians(), lon_deg.to_radians())
    }
}

/// Orthonormal, right-handed camera basis: `right × up = forward`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraFrame {
    pub forward: UnitVec3,
    pub right: UnitVec3,
    pub up: UnitVec3,
}

impl CameraFrame {
    /// Largest deviation from orthonormality over the Gram matrix of the basis.
    pub fn orthonormality_error(&self) -> f64 {
        let basis = [self.right.vec(), self.up.vec(), self.forward.vec()];
        let mut worst: f64 = 0.0;
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((a.dot(*b) - expected).abs());
            }
        }
        let handed = self.right.vec().cross(self.up.vec()) - self.forward.vec();
        worst.max(handed.norm())
    }
}

fn check_erp_dims(width: usize, height: usize) -> Result<()> {
    if height == 0 || width != 2 * height {
        return Err(Error::NotTwoToOne { width, height });
    }
    Ok(())
}

/// Maps a continuous ERP pixel position to its direction on the sphere.
pub fn erp_pixel_to_direction(u: f64, v: f64, width: usize, height: usize) -> Result<UnitVec3> {
    check_erp_dims(width, height)?;
    Ok(erp_direction_unchecked(u, v, width, height))
}

pub(crate) fn erp_direction_unchecked(u: f64, v: f64, width: usize, height: usize) -> UnitVec3 {
    let lon = TAU * u / width as f64 - PI;
    let lat = FRAC_PI_2 - PI * v / height as f64;
    let (sin_lat, cos_lat) = lat.sin_cos();
    let (sin_lon, cos_lon) = lon.sin_cos();
    UnitVec3(Vec3::new(cos_lat * sin_lon, sin_lat, cos_lat * cos_lon))
}

/// Inverse of [`erp_pixel_to_direction`]. `u` is wrapped into `[0, width)`;
/// at the poles the longitude is taken as 0 so `u = width / 2`.
pub fn direction_to_erp_pixel(d: UnitVec3, width: usize, height: usize) -> (f64, f64) {
    let ll = d.to_lat_lon();
    let w = width as f64;
    let mut u = (ll.lon + PI) / TAU * w;
    if u >= w {
        u -= w;
    }
    if u < 0.0 {
        u += w;
    }
    let v = (FRAC_PI_2 - ll.lat) / PI * height as f64;
    (u, v)
}

/// Latitude of the centre of ERP row `row`.
pub fn erp_row_latitude(row: usize, height: usize) -> f64 {
    FRAC_PI_2 - PI * (row as f64 + 0.5) / height as f64
}

/// Face normals of a rhombicuboctahedron: 6 axis faces, 12 edge faces and
/// 8 corner faces, each group in ascending lexicographic order of the
/// integer prototype vector.
pub fn rhombicuboctahedron_directions() -> Vec<UnitVec3> {
    let mut prototypes: Vec<[i32; 3]> = Vec::with_capacity(26);
    for x in -1..=1 {
        for y in -1..=1 {
            for z in -1..=1 {
                if (x, y, z) != (0, 0, 0) {
                    prototypes.push([x, y, z]);
                }
            }
        }
    }
    // The triple loop already yields lexicographic order; a stable sort on the
    // number of non-zero components groups axes, edges, corners.
    prototypes.sort_by_key(|p| p.iter().filter(|c| **c != 0).count());
    prototypes
        .into_iter()
        .map(|[x, y, z]| UnitVec3::new(x as f64, y as f64, z as f64).expect("non-zero prototype"))
        .collect()
}

/// North-up camera frame. Views looking straight at a pole fall back to `-z`
/// (north-facing) or `+z` (south-facing) as the up reference.
pub fn camera_frame_for(forward: UnitVec3) -> CameraFrame {
    let f = forward.vec();
    let north = UnitVec3::NORTH.vec();
    let reference = if f.dot(north).abs() < 1.0 - 1e-6 {
        north
    } else if f.y > 0.0 {
        Vec3::new(0.0, 0.0, -1.0)
    } else {
        Vec3::new(0.0, 0.0, 1.0)
    };
    let up = UnitVec3::normalize(reference - f * reference.dot(f)).expect("reference not parallel to forward");
    let right = UnitVec3::normalize(up.vec().cross(f)).expect("up orthogonal to forward");
    // Re-derive up from the exact right/forward pair to squeeze out rounding.
    let up = UnitVec3::normalize(f.cross(right.vec())).expect("orthogonal pair");
    CameraFrame { forward, right, up }
}

/// Forward direction for a yaw (longitude) / pitch (latitude) pair in degrees.
pub fn direction_from_yaw_pitch(yaw_deg: f64, pitch_deg: f64) -> UnitVec3 {
    UnitVec3::from_lat_lon(LatLon {
        lat: pitch_deg.to_radians().clamp(-FRAC_PI_2, FRAC_PI_2),
        lon: yaw_deg.to_radians(),
    })
}
