//! Linear-RGB image buffer with 8-bit PNG encode/decode.
//!
//! Pixel values live in f64 until the moment of encoding; quantization is
//! `round(clamp(c, 0, 1) * 255)`.

use crate::error::{Error, Result};
use crate::math::Vec3;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    pub width: usize,
    pub height: usize,
    /// Interleaved RGB, row-major.
    pub data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize) -> Self {
        ImageBuffer { width, height, data: vec![0.0; width * height * 3] }
    }

    pub fn filled(width: usize, height: usize, color: Vec3) -> Self {
        let mut img = ImageBuffer::new(width, height);
        for px in img.data.chunks_exact_mut(3) {
            px[0] = color.x;
            px[1] = color.y;
            px[2] = color.z;
        }
        img
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> Vec3 {
        let i = 3 * (y * self.width + x);
        Vec3::new(self.data[i], self.data[i + 1], self.data[i + 2])
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, c: Vec3) {
        let i = 3 * (y * self.width + x);
        self.data[i] = c.x;
        self.data[i + 1] = c.y;
        self.data[i + 2] = c.z;
    }

    pub fn same_dims(&self, other: &ImageBuffer) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    /// Copy with every channel clamped to [0,1]; the renderer itself never
    /// clamps, metrics and encoding expect this range.
    pub fn clamped(&self) -> ImageBuffer {
        ImageBuffer {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|c| c.clamp(0.0, 1.0)).collect(),
        }
    }

    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Self {
        ImageBuffer {
            width,
            height,
            data: bytes.iter().map(|b| *b as f64 / 255.0).collect(),
        }
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        let file = File::create(path)?;
        let mut encoder = png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().map_err(|e| Error::Png(e.to_string()))?;
        writer
            .write_image_data(&self.to_rgb8())
            .map_err(|e| Error::Png(e.to_string()))?;
        Ok(())
    }

    pub fn read_png(path: &Path) -> Result<Self> {
        let decoder = png::Decoder::new(BufReader::new(File::open(path)?));
        let mut reader = decoder.read_info().map_err(|e| Error::Png(e.to_string()))?;
        let mut buf = vec![0u8; reader.output_buffer_size().ok_or_else(|| Error::Png("image too large".into()))?];
        let info = reader.next_frame(&mut buf).map_err(|e| Error::Png(e.to_string()))?;
        let (w, h) = (info.width as usize, info.height as usize);
        let pixels = &buf[..info.buffer_size()];
        match info.color_type {
            png::ColorType::Rgb => Ok(ImageBuffer::from_rgb8(w, h, pixels)),
            png::ColorType::Rgba => {
                let rgb: Vec<u8> = pixels
                    .chunks_exact(4)
                    .flat_map(|px| [px[0], px[1], px[2]])
                    .collect();
                Ok(ImageBuffer::from_rgb8(w, h, &rgb))
            }
            other => Err(Error::Png(format!("unsupported color type {other:?}"))),
        }
    }
}
