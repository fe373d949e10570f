use std::io::Cursor;
use std::path::Path;

use thiserror::Error;

/// 100 DPI expressed in pixels per metre for the PNG pHYs chunk.
const PIXELS_PER_METRE_100_DPI: u32 = 3937;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image dimensions must be positive, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("png encoding failed: {0}")]
    Encode(#[from] png::EncodingError),
    #[error("png decoding failed: {0}")]
    Decode(#[from] png::DecodingError),
    #[error("unsupported png layout: {0}")]
    Unsupported(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// An RGB raster with channel values in [0, 1], stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl RasterImage {
    pub const CHANNELS: usize = 3;

    pub fn filled(width: usize, height: usize, value: f32) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions { width, height });
        }
        let value = value.clamp(0.0, 1.0);
        Ok(Self {
            width,
            height,
            data: vec![value; width * height * Self::CHANNELS],
        })
    }

    pub fn white(width: usize, height: usize) -> Result<Self, ImageError> {
        Self::filled(width, height, 1.0)
    }

    pub fn black(width: usize, height: usize) -> Result<Self, ImageError> {
        Self::filled(width, height, 0.0)
    }

    /// Builds an image from interleaved RGB values, clamping into [0, 1].
    pub fn from_rgb(width: usize, height: usize, mut data: Vec<f32>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions { width, height });
        }
        if data.len() != width * height * Self::CHANNELS {
            return Err(ImageError::Unsupported(format!(
                "expected {} values, got {}",
                width * height * Self::CHANNELS,
                data.len()
            )));
        }
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * Self::CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * Self::CHANNELS;
        for (c, v) in rgb.into_iter().enumerate() {
            self.data[i + c] = v.clamp(0.0, 1.0);
        }
    }

    /// Alpha-composites `color` over the pixel with opacity `alpha`.
    pub fn blend(&mut self, x: usize, y: usize, color: [f32; 3], alpha: f32) {
        if alpha <= 0.0 {
            return;
        }
        let a = alpha.min(1.0);
        let i = (y * self.width + x) * Self::CHANNELS;
        for (c, v) in color.into_iter().enumerate() {
            let d = &mut self.data[i + c];
            *d = (*d * (1.0 - a) + v * a).clamp(0.0, 1.0);
        }
    }

    /// Per-pixel mean of the three channels.
    pub fn luminance(&self) -> Vec<f64> {
        self.data
            .chunks_exact(Self::CHANNELS)
            .map(|p| (p[0] as f64 + p[1] as f64 + p[2] as f64) / 3.0)
            .collect()
    }

    pub fn is_all_black(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn same_size(&self, other: &RasterImage) -> Result<(), ImageError> {
        if self.width == other.width && self.height == other.height {
            Ok(())
        } else {
            Err(ImageError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ))
        }
    }

    /// Quantized 8-bit RGB bytes.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    /// Encodes as an 8-bit RGB PNG tagged with 100 DPI.
    pub fn to_png(&self) -> Result<Vec<u8>, ImageError> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            enc.set_pixel_dims(Some(png::PixelDimensions {
                xppu: PIXELS_PER_METRE_100_DPI,
                yppu: PIXELS_PER_METRE_100_DPI,
                unit: png::Unit::Meter,
            }));
            let mut writer = enc.write_header()?;
            writer.write_image_data(&self.to_rgb8())?;
            writer.finish()?;
        }
        Ok(out)
    }

    /// Decodes any 8- or 16-bit gray/RGB PNG, dropping alpha.
    pub fn from_png(bytes: &[u8]) -> Result<Self, ImageError> {
        let mut dec = png::Decoder::new(Cursor::new(bytes));
        dec.set_transformations(png::Transformations::normalize_to_color8());
        let mut reader = dec.read_info()?;
        let size = reader
            .output_buffer_size()
            .ok_or_else(|| ImageError::Unsupported("image too large".into()))?;
        let mut buf = vec![0u8; size];
        let info = reader.next_frame(&mut buf)?;
        let (w, h) = (info.width as usize, info.height as usize);
        let stride = info.line_size;
        let channels = match info.color_type {
            png::ColorType::Grayscale => 1,
            png::ColorType::GrayscaleAlpha => 2,
            png::ColorType::Rgb => 3,
            png::ColorType::Rgba => 4,
            other => return Err(ImageError::Unsupported(format!("{other:?}"))),
        };
        let mut data = Vec::with_capacity(w * h * 3);
        for row in buf.chunks(stride).take(h) {
            for px in row.chunks_exact(channels).take(w) {
                let rgb = if channels < 3 {
                    [px[0]; 3]
                } else {
                    [px[0], px[1], px[2]]
                };
                data.extend(rgb.iter().map(|&v| v as f32 / 255.0));
            }
        }
        Self::from_rgb(w, h, data)
    }

    pub fn write_png(&self, path: &Path) -> Result<(), ImageError> {
        let bytes = self.to_png()?;
        std::fs::write(path, bytes).map_err(|source| ImageError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read_png(path: &Path) -> Result<Self, ImageError> {
        let bytes = std::fs::read(path).map_err(|source| ImageError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_png(&bytes)
    }
}
