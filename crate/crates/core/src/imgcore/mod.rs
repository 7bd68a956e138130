//! Dense float images, colour transforms, filtering and image I/O.

mod colour;
mod filter;
mod io;

pub use colour::{
    chromaticity, lab_to_linear_rgb, linear_rgb_to_lab, linear_to_srgb, srgb_to_linear,
    to_lab_suppressed, ChromaticityField, LabField, DEFAULT_SUPPRESS,
};
pub use filter::{distance_transform, gaussian_filter, gaussian_kernel};
pub use io::{load_image, read_pfm, save_png, write_pfm};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clamp floor used before taking logarithms and when dividing by components.
pub const DEFAULT_EPS: f64 = 1e-4;

/// Value domain of an [`ImageBuffer`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    Linear,
    Log,
}

/// Dense row-major image with interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
    domain: Domain,
}

impl ImageBuffer {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f64>,
        domain: Domain,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!(
                "image must be non-empty, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Dimension(format!(
                "expected 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::Dimension(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("non-finite value at element {bad}")));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
            domain,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(
            width,
            height,
            channels,
            vec![value; width * height * channels],
            Domain::Linear,
        )
    }

    /// Builds a linear image by evaluating `f(x, y, channel)` for every element.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data, Domain::Linear)
    }

    /// Interleaves per-channel planes into one buffer.
    pub fn from_planes(width: usize, height: usize, planes: &[Vec<f64>], domain: Domain) -> Result<Self> {
        let n = width * height;
        if planes.iter().any(|p| p.len() != n) {
            return Err(Error::Dimension("plane length mismatch".into()));
        }
        let channels = planes.len();
        let mut data = vec![0.0; n * channels];
        for (c, plane) in planes.iter().enumerate() {
            for (i, v) in plane.iter().enumerate() {
                data[i * channels + c] = *v;
            }
        }
        Self::new(width, height, channels, data, domain)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Number of pixels (not elements).
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn pixel(&self, i: usize) -> &[f64] {
        &self.data[i * self.channels..(i + 1) * self.channels]
    }

    /// Copies channel `c` into a planar vector.
    pub fn plane(&self, c: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    pub fn planes(&self) -> Vec<Vec<f64>> {
        (0..self.channels).map(|c| self.plane(c)).collect()
    }

    /// Same geometry and domain, new element values.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(self.width, self.height, self.channels, data, self.domain)
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        self.with_data(self.data.iter().map(|&v| f(v)).collect())
    }

    /// Elementwise combination of two buffers of identical shape.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_shape(other)?;
        self.with_data(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.width != other.width || self.height != other.height || self.channels != other.channels {
            return Err(Error::Dimension(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )));
        }
        Ok(())
    }

    /// Mean of the channels at every pixel, as a one-channel image.
    pub fn luminance(&self) -> ImageBuffer {
        let c = self.channels as f64;
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|px| px.iter().sum::<f64>() / c)
            .collect();
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
            domain: self.domain,
        }
    }

    /// Repeats a one-channel image into three channels. Three-channel input is cloned.
    pub fn broadcast3(&self) -> ImageBuffer {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: 3,
            data,
            domain: self.domain,
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Elementwise `ln(max(v, eps))`.
pub fn to_log(img: &ImageBuffer, eps: f64) -> Result<ImageBuffer> {
    if img.domain != Domain::Linear {
        return Err(Error::Contract("to_log expects a linear-domain image".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::Param(format!("log clamp eps must be positive, got {eps}")));
    }
    Ok(img.map(|v| v.max(eps).ln())?.with_domain(Domain::Log))
}

/// Elementwise `exp(v)`, the inverse of [`to_log`] above the clamp.
pub fn from_log(img: &ImageBuffer) -> Result<ImageBuffer> {
    if img.domain != Domain::Log {
        return Err(Error::Contract("from_log expects a log-domain image".into()));
    }
    Ok(img.map(f64::exp)?.with_domain(Domain::Linear))
}
