//! Seeded procedural panoramas: sky with sun and clouds, a skyline, and a
//! tiled ground plane receding into haze.
//!
//! Every sample is a function of the view direction only, so the images are
//! seamless at `lon = ±π` and undistorted on the sphere — the ERP rendering
//! shows the usual stretching towards the poles, exactly like a photograph.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::geometry::{erp_direction_unchecked, LatLon, UnitVec3, Vec3};
use crate::projection::ErpImage;
use crate::raster::{Raster, CHANNELS};

/// Randomized scene description; [`Scene::random`] draws one from a seed.
#[derive(Clone, Debug)]
pub struct Scene {
    seed: u32,
    sun: UnitVec3,
    zenith: [f32; 3],
    horizon: [f32; 3],
    cloud_cover: f32,
    tile_a: [f32; 3],
    tile_b: [f32; 3],
    tile_size: f64,
    tile_yaw: f64,
    haze: f64,
    skyline: Vec<(f64, f64, f64, [f32; 3])>,
}

fn jitter<R: Rng>(rng: &mut R, base: [f32; 3], amount: f32) -> [f32; 3] {
    base.map(|c| (c + rng.random_range(-amount..=amount)).clamp(0.0, 1.0))
}

impl Scene {
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sun = UnitVec3::from_lat_lon(LatLon::new(
            rng.random_range(0.15..1.2),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        ));
        let buildings = rng.random_range(4..14);
        let skyline = (0..buildings)
            .map(|_| {
                let centre = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                let half_width = rng.random_range(0.03..0.25);
                let height = rng.random_range(0.03..0.3);
                let grey = rng.random_range(0.15..0.55f32);
                (centre, half_width, height, jitter(&mut rng, [grey, grey, grey * 1.1], 0.06))
            })
            .collect();
        Self {
            seed: rng.random(),
            sun,
            zenith: jitter(&mut rng, [0.18, 0.35, 0.75], 0.1),
            horizon: jitter(&mut rng, [0.75, 0.82, 0.92], 0.08),
            cloud_cover: rng.random_range(0.2..0.7),
            tile_a: jitter(&mut rng, [0.55, 0.45, 0.35], 0.2),
            tile_b: jitter(&mut rng, [0.25, 0.22, 0.2], 0.12),
            tile_size: rng.random_range(0.25..0.8),
            tile_yaw: rng.random_range(0.0..std::f64::consts::FRAC_PI_2),
            haze: rng.random_range(0.04..0.12),
            skyline,
        }
    }

    /// Colour seen along `d`.
    pub fn shade(&self, d: UnitVec3) -> [f32; 3] {
        let LatLon { lat, lon } = d.to_lat_lon();
        if lat < 0.0 {
            return self.ground(d);
        }
        for &(centre, half_width, height, colour) in &self.skyline {
            let mut dl = (lon - centre).abs();
            if dl > std::f64::consts::PI {
                dl = std::f64::consts::TAU - dl;
            }
            if dl < half_width && lat < height {
                // Rows of windows.
                let band = ((lat / 0.012).floor() as i64 + (dl / 0.01).floor() as i64) % 5 == 0;
                let shade = if band { 0.75 } else { 1.0 };
                return colour.map(|c| c * shade);
            }
        }
        self.sky(d)
    }

    fn sky(&self, d: UnitVec3) -> [f32; 3] {
        let elevation = d.y().max(0.0) as f32;
        let t = elevation.powf(0.6);
        let mut c = [0.0f32; 3];
        for k in 0..CHANNELS {
            c[k] = self.horizon[k] * (1.0 - t) + self.zenith[k] * t;
        }
        let cos_sun = d.dot(self.sun) as f32;
        let glow = cos_sun.max(0.0).powi(16) * 0.35;
        let disc = if cos_sun > 0.9993 { 1.0 } else { 0.0 };
        let p = d.vec() * 3.0;
        let n = fbm(self.seed, p, 5);
        let cloud = ((n - (1.0 - self.cloud_cover)) * 3.0).clamp(0.0, 1.0) * (0.3 + 0.7 * elevation.sqrt());
        for k in 0..CHANNELS {
            let clear = (c[k] + glow).min(1.0).max(disc);
            let cloud_colour = 0.92 - 0.25 * n;
            c[k] = clear * (1.0 - cloud) + cloud_colour * cloud;
        }
        c
    }

    fn ground(&self, d: UnitVec3) -> [f32; 3] {
        // Intersect with the plane one unit below the camera.
        let depth = -d.y();
        let (gx, gz) = (d.x() / depth.max(1e-9), d.z() / depth.max(1e-9));
        let (s, c) = self.tile_yaw.sin_cos();
        let (u, v) = ((gx * c - gz * s) / self.tile_size, (gx * s + gz * c) / self.tile_size);
        let checker = (u.floor() as i64 + v.floor() as i64).rem_euclid(2) == 0;
        let base = if checker { self.tile_a } else { self.tile_b };
        let grain = fbm(self.seed ^ 0x9e37_79b9, Vec3::new(gx * 4.0, 0.0, gz * 4.0), 3);
        // Grout lines between tiles.
        let edge = u - u.floor();
        let edge = edge.min(1.0 - edge).min((v - v.floor()).min(1.0 - (v - v.floor())));
        let grout = if edge < 0.03 { 0.6 } else { 1.0 };
        let distance = (gx * gx + gz * gz).sqrt();
        let fog = (1.0 - (-self.haze * distance).exp()) as f32;
        let mut out = [0.0f32; 3];
        for k in 0..CHANNELS {
            let surface = base[k] * (0.8 + 0.4 * grain) * grout;
            out[k] = (surface * (1.0 - fog) + self.horizon[k] * fog).clamp(0.0, 1.0);
        }
        out
    }

    /// Renders an ERP image of `height` rows with `ss`×`ss` supersampling.
    pub fn render(&self, height: usize, ss: usize) -> ErpImage {
        let width = 2 * height;
        let ss = ss.max(1);
        let mut data = vec![0.0f32; width * height * CHANNELS];
        data.par_chunks_mut(width * CHANNELS).enumerate().for_each(|(y, row)| {
            for x in 0..width {
                let mut acc = [0.0f32; 3];
                for sy in 0..ss {
                    for sx in 0..ss {
                        let u = x as f64 + (sx as f64 + 0.5) / ss as f64;
                        let v = y as f64 + (sy as f64 + 0.5) / ss as f64;
                        let c = self.shade(erp_direction_unchecked(u, v, width, height));
                        for k in 0..CHANNELS {
                            acc[k] += c[k];
                        }
                    }
                }
                let n = (ss * ss) as f32;
                for k in 0..CHANNELS {
                    row[x * CHANNELS + k] = acc[k] / n;
                }
            }
        });
        ErpImage::new(Raster::from_vec(width, height, data).expect("sized")).expect("2:1")
    }
}

/// Convenience: `Scene::random(seed).render(height, 2)`.
pub fn panorama(height: usize, seed: u64) -> ErpImage {
    Scene::random(seed).render(height, 2)
}

#[inline]
fn lattice(seed: u32, x: i64, y: i64, z: i64) -> f32 {
    // Integer hash of the lattice point (a variant of the "lowbias32" mixer).
    let mut h = seed
        ^ (x as u32).wrapping_mul(0x8da6_b343)
        ^ (y as u32).wrapping_mul(0xd816_3841)
        ^ (z as u32).wrapping_mul(0xcb1a_b31f);
    h ^= h >> 16;
    h = h.wrapping_mul(0x7feb_352d);
    h ^= h >> 15;
    h = h.wrapping_mul(0x846c_a68b);
    h ^= h >> 16;
    h as f32 / u32::MAX as f32
}

fn value_noise(seed: u32, p: Vec3) -> f32 {
    let (fx, fy, fz) = (p.x.floor(), p.y.floor(), p.z.floor());
    let (ix, iy, iz) = (fx as i64, fy as i64, fz as i64);
    let smooth = |t: f64| (t * t * (3.0 - 2.0 * t)) as f32;
    let (tx, ty, tz) = (smooth(p.x - fx), smooth(p.y - fy), smooth(p.z - fz));
    let lerp = |a: f32, b: f32, t: f32| a + (b - a) * t;
    let mut plane = [0.0f32; 2];
    for (dz, out) in plane.iter_mut().enumerate() {
        let z = iz + dz as i64;
        let a = lerp(lattice(seed, ix, iy, z), lattice(seed, ix + 1, iy, z), tx);
        let b = lerp(lattice(seed, ix, iy + 1, z), lattice(seed, ix + 1, iy + 1, z), tx);
        *out = lerp(a, b, ty);
    }
    lerp(plane[0], plane[1], tz)
}

/// Fractal sum of `octaves` noise layers, normalized to `[0, 1]`.
fn fbm(seed: u32, p: Vec3, octaves: usize) -> f32 {
    let (mut sum, mut amp, mut norm, mut freq) = (0.0, 1.0, 0.0, 1.0);
    for o in 0..octaves {
        sum += amp * value_noise(seed.wrapping_add((o as u32).wrapping_mul(0x68e3_1da4)), p * freq);
        norm += amp;
        amp *= 0.5;
        freq *= 2.0;
    }
    sum / norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::seam_score;

    #[test]
    fn deterministic_and_seed_dependent() {
        let a = panorama(32, 3);
        assert_eq!(a, panorama(32, 3));
        assert_ne!(a, panorama(32, 4));
    }

    #[test]
    fn values_in_range_and_seamless() {
        for seed in 0..4 {
            let p = panorama(64, seed);
            assert!(p.raster().data().iter().all(|v| (0.0..=1.0).contains(v)));
            let s = seam_score(&p);
            assert!(s < 1.5, "seed {seed}: seam {s}");
        }
    }

    #[test]
    fn poles_are_consistent() {
        // The top row samples a single point from many longitudes.
        let p = Scene::random(1).render(128, 1);
        let row: Vec<_> = (0..256).map(|x| p.raster().get(x, 0)).collect();
        let spread = row.iter().map(|c| c[2]).fold(f32::NEG_INFINITY, f32::max)
            - row.iter().map(|c| c[2]).fold(f32::INFINITY, f32::min);
        assert!(spread < 0.1, "{spread}");
    }
}
