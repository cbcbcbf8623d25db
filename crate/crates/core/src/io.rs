//! PNG loading and saving. Images are 8-bit RGB on disk and `[0, 1]` floats
//! in memory; masks are 8-bit greyscale with known pixels white.

use std::path::Path;

use image::{GrayImage, RgbImage};

use crate::raster::{Mask, Raster, CHANNELS};
use crate::Result;

#[inline]
fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn load_png(path: impl AsRef<Path>) -> Result<Raster> {
    let img = image::open(path)?.into_rgb8();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(|v| v as f32 / 255.0).collect();
    Raster::from_vec(w as usize, h as usize, data)
}

pub fn save_png(raster: &Raster, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = raster.data().iter().map(|v| to_u8(*v)).collect();
    debug_assert_eq!(bytes.len(), raster.width() * raster.height() * CHANNELS);
    let img = RgbImage::from_raw(raster.width() as u32, raster.height() as u32, bytes).expect("buffer sized to image");
    img.save(path)?;
    Ok(())
}

/// Any image format works; pixels with mean intensity ≥ 0.5 are known.
pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    Ok(Mask::from_raster(&load_png(path)?))
}

pub fn save_mask(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    let bytes = mask.data().iter().map(|k| if *k { 255 } else { 0 }).collect();
    let img = GrayImage::from_raw(mask.width() as u32, mask.height() as u32, bytes).expect("buffer sized to mask");
    img.save(path)?;
    Ok(())
}
