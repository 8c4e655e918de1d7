//! 8-bit grayscale images, patch extraction/reassembly and PSNR.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Peak value of 8-bit imagery.
pub const PEAK: f64 = 255.0;

/// PSNR reported for a perfect reconstruction. No finite MSE maps here.
pub const PSNR_PERFECT: f64 = f64::INFINITY;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::InvalidDimensions {
                rows: height,
                cols: width,
                reason: "pixel buffer does not match image size",
            });
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Encodes as binary PGM (P5, maxval 255).
    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn from_pgm_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let magic = next_token(bytes, &mut pos)
            .ok_or_else(|| Error::MalformedHeader("empty PGM".into()))?;
        if magic != "P5" {
            return Err(Error::UnsupportedFormat(magic));
        }
        let mut field = |name: &str| -> Result<u32> {
            let tok = next_token(bytes, &mut pos)
                .ok_or_else(|| Error::MalformedHeader(format!("missing {name}")))?;
            tok.parse()
                .map_err(|_| Error::MalformedHeader(format!("bad {name} {tok:?}")))
        };
        let width = field("width")? as usize;
        let height = field("height")? as usize;
        let maxval = field("maxval")?;
        if width == 0 || height == 0 {
            return Err(Error::MalformedHeader(format!(
                "zero image size {width}x{height}"
            )));
        }
        if maxval != 255 {
            return Err(Error::UnsupportedMaxval(maxval));
        }
        // Exactly one whitespace byte separates the header from the raster.
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err(Error::MalformedHeader(
                "missing whitespace before raster".into(),
            ));
        }
        pos += 1;
        let expected = width * height;
        let raster = &bytes[pos..];
        if raster.len() < expected {
            return Err(Error::Truncated {
                expected,
                found: raster.len(),
            });
        }
        Self::new(width, height, raster[..expected].to_vec())
    }
}

/// Next whitespace-delimited header token, skipping `#` comments.
fn next_token(bytes: &[u8], pos: &mut usize) -> Option<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    (start < *pos).then(|| String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    GrayImage::from_pgm_bytes(&bytes)
}

pub fn save_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, img.to_pgm_bytes()).map_err(|e| Error::io(path, e))
}

/// Vectorized `side×side` patches, one per column, with their source
/// geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchMatrix {
    pub data: DenseMatrix,
    pub side: usize,
    pub stride: usize,
    pub width: usize,
    pub height: usize,
}

/// Number of patch positions along one axis.
pub fn positions(extent: usize, side: usize, stride: usize) -> usize {
    (extent - side) / stride + 1
}

/// Patches ordered by top-left corner in row-major scan; pixels are copied
/// as-is, without mean removal.
pub fn extract_patches(img: &GrayImage, side: usize, stride: usize) -> Result<PatchMatrix> {
    if side == 0 || side > img.width.min(img.height) {
        return Err(Error::PatchTooLarge {
            side,
            width: img.width,
            height: img.height,
        });
    }
    if stride == 0 {
        return Err(Error::InvalidArgument(
            "patch stride must be at least 1".into(),
        ));
    }
    let nx = positions(img.width, side, stride);
    let ny = positions(img.height, side, stride);
    let m = nx * ny;
    let n = side * side;
    // Build sample-major, then transpose to one patch per column.
    let mut samples = Vec::with_capacity(m * n);
    for py in 0..ny {
        for px in 0..nx {
            let (x0, y0) = (px * stride, py * stride);
            for dy in 0..side {
                let row = (y0 + dy) * img.width + x0;
                samples.extend(img.pixels[row..row + side].iter().map(|&p| p as f64));
            }
        }
    }
    let data = DenseMatrix::new(m, n, samples)?.transpose();
    Ok(PatchMatrix {
        data,
        side,
        stride,
        width: img.width,
        height: img.height,
    })
}

/// Averages all patch copies covering each pixel, rounds half up and clamps
/// to `[0, 255]`.
pub fn assemble_patches(p: &PatchMatrix) -> Result<GrayImage> {
    let PatchMatrix {
        side,
        stride,
        width,
        height,
        ..
    } = *p;
    let gap = Error::CoverageGap {
        side,
        stride,
        width,
        height,
    };
    if side == 0 || stride == 0 || stride > side || side > width.min(height) {
        return Err(gap);
    }
    let nx = positions(width, side, stride);
    let ny = positions(height, side, stride);
    if (nx - 1) * stride + side != width || (ny - 1) * stride + side != height {
        return Err(gap);
    }
    if p.data.rows() != side * side || p.data.cols() != nx * ny {
        return Err(Error::ShapeMismatch {
            op: "assemble_patches",
            left: p.data.shape(),
            right: (side * side, nx * ny),
        });
    }
    let mut sum = vec![0.0; width * height];
    let mut count = vec![0u32; width * height];
    let samples = p.data.transpose();
    for py in 0..ny {
        for px in 0..nx {
            let patch = samples.row(py * nx + px);
            for dy in 0..side {
                for dx in 0..side {
                    let idx = (py * stride + dy) * width + px * stride + dx;
                    sum[idx] += patch[dy * side + dx];
                    count[idx] += 1;
                }
            }
        }
    }
    let pixels = sum
        .iter()
        .zip(&count)
        .map(|(&s, &c)| (s / c as f64 + 0.5).floor().clamp(0.0, 255.0) as u8)
        .collect();
    GrayImage::new(width, height, pixels)
}

/// `10·log10(peak² / mse)`; [`PSNR_PERFECT`] for `mse = 0`.
pub fn psnr(mse: f64, peak: f64) -> Result<f64> {
    if mse < 0.0 || mse.is_nan() {
        return Err(Error::NegativeMse(mse));
    }
    if mse == 0.0 {
        return Ok(PSNR_PERFECT);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}
