//! Image input as a luminance plane, and PGM output.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{DynamicImage, ImageReader};
use rip_core::Plane;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot decode {path}: {source}")]
    Image { path: String, source: image::ImageError },
    #[error("{path}: unsupported pixel format {format}, expected 8-bit gray or RGB")]
    UnsupportedFormat { path: String, format: String },
}

/// BT.601 luma rounded half-up.
#[inline]
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
    (y + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn luminance_of(img: &DynamicImage, path: &str) -> Result<Plane, DecodeError> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(buf) => buf.as_raw().iter().map(|&v| f64::from(v)).collect(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| f64::from(p.0[0])).collect(),
        DynamicImage::ImageRgb8(buf) => buf
            .pixels()
            .map(|p| f64::from(luma(p.0[0], p.0[1], p.0[2])))
            .collect(),
        DynamicImage::ImageRgba8(buf) => buf
            .pixels()
            .map(|p| f64::from(luma(p.0[0], p.0[1], p.0[2])))
            .collect(),
        other => {
            return Err(DecodeError::UnsupportedFormat {
                path: path.to_owned(),
                format: format!("{:?}", other.color()),
            })
        }
    };
    Ok(Plane::new(w, h, data).expect("decoder returned a consistent buffer"))
}

/// Reads an 8-bit PGM or PNG into a luminance plane.
pub fn decode_to_luminance(path: impl AsRef<Path>) -> Result<Plane, DecodeError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let reader = ImageReader::open(path)
        .map_err(|source| DecodeError::Io {
            path: name.clone(),
            source,
        })?
        .with_guessed_format()
        .map_err(|source| DecodeError::Io {
            path: name.clone(),
            source,
        })?;
    let img = reader.decode().map_err(|source| DecodeError::Image {
        path: name.clone(),
        source,
    })?;
    luminance_of(&img, &name)
}

pub fn encode_pgm(plane: &Plane) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", plane.width(), plane.height()).into_bytes();
    out.extend(plane.to_u8());
    out
}

pub fn write_pgm(path: impl AsRef<Path>, plane: &Plane) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_pgm(plane))?;
    f.sync_all()
}
