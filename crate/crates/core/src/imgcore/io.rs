use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::{DynamicImage, ImageFormat, ImageReader};

use crate::error::{Error, Result};

use super::{linear_to_srgb, srgb_to_linear, Domain, ImageBuffer};

/// Reads an 8- or 16-bit PNG or binary PPM/PGM and decodes sRGB to linear
/// RGB in `[0, 1]`. Grey images are expanded to three channels.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        other => {
            return Err(Error::Unsupported {
                path: path.into(),
                reason: format!("expected PNG or PPM, found {other:?}"),
            })
        }
    }
    let decoded = reader.decode().map_err(|e| Error::Decode {
        path: path.into(),
        reason: e.to_string(),
    })?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let data: Vec<f64> = match &decoded {
        DynamicImage::ImageLuma8(_)
        | DynamicImage::ImageLumaA8(_)
        | DynamicImage::ImageRgb8(_)
        | DynamicImage::ImageRgba8(_) => {
            let lut: Vec<f64> = (0..=255u32).map(|v| srgb_to_linear(v as f64 / 255.0)).collect();
            decoded.to_rgb8().into_raw().into_iter().map(|v| lut[v as usize]).collect()
        }
        DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_)
        | DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_) => decoded
            .to_rgb16()
            .into_raw()
            .into_iter()
            .map(|v| srgb_to_linear(v as f64 / 65535.0))
            .collect(),
        other => {
            return Err(Error::Unsupported {
                path: path.into(),
                reason: format!("unsupported bit depth / colour type {:?}", other.color()),
            })
        }
    };
    ImageBuffer::new(w, h, 3, data, Domain::Linear)
}

/// Writes an 8-bit sRGB PNG after clamping linear values to `[0, 1]`.
pub fn save_png(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .map(|&v| (linear_to_srgb(v.clamp(0.0, 1.0)) * 255.0).round() as u8)
        .collect();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let dynamic = if img.channels() == 1 {
        DynamicImage::ImageLuma8(image::GrayImage::from_raw(w, h, bytes).expect("sized buffer"))
    } else {
        DynamicImage::ImageRgb8(image::RgbImage::from_raw(w, h, bytes).expect("sized buffer"))
    };
    dynamic
        .save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::Decode {
            path: path.into(),
            reason: format!("png encode failed: {e}"),
        })
}

/// Writes a little-endian Portable Float Map (lossless f32 storage).
pub fn write_pfm(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let tag = if img.channels() == 3 { "PF" } else { "Pf" };
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        write!(out, "{tag}\n{} {}\n-1.0\n", img.width(), img.height())?;
        let row_len = img.width() * img.channels();
        // PFM stores rows bottom to top.
        for row in img.data().chunks_exact(row_len).rev() {
            for v in row {
                out.write_all(&(*v as f32).to_le_bytes())?;
            }
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let bad = |reason: &str| Error::Format {
        format: "PFM",
        reason: reason.to_string(),
    };
    let mut header = Vec::new();
    while header.len() < 3 {
        let mut line = String::new();
        if reader.read_line(&mut line).map_err(|e| Error::io(path, e))? == 0 {
            return Err(bad("truncated header"));
        }
        let line = line.trim();
        if !line.is_empty() {
            header.push(line.to_string());
        }
    }
    let channels = match header[0].as_str() {
        "PF" => 3,
        "Pf" => 1,
        _ => return Err(bad("bad magic")),
    };
    let dims: Vec<usize> = header[1]
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad("bad dimensions")))
        .collect::<Result<_>>()?;
    if dims.len() != 2 {
        return Err(bad("bad dimensions"));
    }
    let scale: f64 = header[2].parse().map_err(|_| bad("bad scale"))?;
    let little = scale < 0.0;
    let (w, h) = (dims[0], dims[1]);
    let mut raw = vec![0u8; w * h * channels * 4];
    reader.read_exact(&mut raw).map_err(|e| Error::io(path, e))?;
    let vals: Vec<f64> = raw
        .chunks_exact(4)
        .map(|b| {
            let b = [b[0], b[1], b[2], b[3]];
            (if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) }) as f64
        })
        .collect();
    let row_len = w * channels;
    let data: Vec<f64> = vals.chunks_exact(row_len).rev().flatten().copied().collect();
    ImageBuffer::new(w, h, channels, data, Domain::Linear)
}
