use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, ImageFormat, Luma};

use super::{label, SegmentationMask};
use crate::error::{Error, Result};
use crate::projection::ConfidenceMap;

fn image_error(path: &Path, source: image::ImageError) -> Error {
    match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        source => Error::Image {
            path: path.into(),
            source,
        },
    }
}

fn open(path: &Path) -> Result<DynamicImage> {
    image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| image_error(path, e))
}

/// Writes a 16-bit grayscale PNG with `pixel = round(value * 65535)`.
pub fn save_confidence_map(map: &ConfidenceMap, path: &Path) -> Result<()> {
    let mut raw = Vec::with_capacity(map.values().len());
    for (i, &v) in map.values().iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::ConfidenceOutOfRange {
                x: (i % map.width() as usize) as u32,
                y: (i / map.width() as usize) as u32,
                value: v,
            });
        }
        raw.push((v as f64 * 65535.0).round() as u16);
    }
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(map.width(), map.height(), raw).expect("buffer size");
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|e| image_error(path, e))
}

pub fn load_confidence_map(path: &Path) -> Result<ConfidenceMap> {
    let img = open(path)?.into_luma16();
    let (w, h) = img.dimensions();
    let values = img
        .into_raw()
        .into_iter()
        .map(|v| (v as f64 / 65535.0) as f32)
        .collect();
    ConfidenceMap::from_values(w, h, values)
}

pub fn save_mask(mask: &SegmentationMask, path: &Path) -> Result<()> {
    let img = GrayImage::from_raw(mask.width(), mask.height(), mask.labels().to_vec())
        .expect("buffer size");
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|e| image_error(path, e))
}

/// Loads an 8-bit grayscale label mask; any value other than 0, 1, 2 fails.
pub fn load_mask(path: &Path) -> Result<SegmentationMask> {
    let img = match open(path)? {
        DynamicImage::ImageLuma8(img) => img,
        other => {
            return Err(Error::Invalid(format!(
                "{}: expected 8-bit single-channel mask, found {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    let (w, h) = img.dimensions();
    if let Some((x, y, p)) = img
        .enumerate_pixels()
        .find(|(_, _, p)| p[0] > label::OBSTACLE)
    {
        return Err(Error::InvalidLabel {
            path: path.into(),
            x,
            y,
            label: p[0],
        });
    }
    SegmentationMask::new(w, h, img.into_raw())
}

/// Loads any supported image as 8-bit luma.
pub fn load_gray_image(path: &Path) -> Result<GrayImage> {
    Ok(open(path)?.into_luma8())
}

pub fn save_gray_image(img: &GrayImage, path: &Path) -> Result<()> {
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|e| image_error(path, e))
}
