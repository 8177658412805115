use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, ImageFormat};

use super::files::write_atomic;
use crate::chanmodel::CsiMatrix;
use crate::error::{Error, Result};

/// 8-bit luminance image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayscaleImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayscaleImage {
    pub fn pixel(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }
}

/// Smallest and largest entry magnitude.
pub fn magnitude_range(h: &CsiMatrix) -> (f64, f64) {
    h.entries()
        .iter()
        .map(|z| z.norm())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
}

/// Map `|H[m, n]|` linearly onto `0..=255`, `range.0 -> 0` and `range.1 -> 255`.
/// Rows are antennas unless `transpose`. A degenerate range gives mid-gray.
pub fn csi_to_grayscale(
    h: &CsiMatrix,
    transpose: bool,
    range: Option<(f64, f64)>,
) -> Result<GrayscaleImage> {
    if h.entries()
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::Validation("cannot render non-finite CSI".into()));
    }
    let (lo, hi) = range.unwrap_or_else(|| magnitude_range(h));
    let span = hi - lo;
    // Magnitudes equal up to rounding count as constant.
    let flat = !(span > 1e-12 * hi.abs());
    if flat {
        log::warn!("constant-magnitude CSI rendered as mid-gray");
    }
    let level = |m: usize, n: usize| -> u8 {
        if flat {
            128
        } else {
            (((h.get(m, n).norm() - lo) / span).clamp(0.0, 1.0) * 255.0).round() as u8
        }
    };
    let (height, width) = if transpose {
        (h.n_c(), h.n_t())
    } else {
        (h.n_t(), h.n_c())
    };
    let mut pixels = Vec::with_capacity(width * height);
    for r in 0..height {
        for c in 0..width {
            pixels.push(if transpose { level(c, r) } else { level(r, c) });
        }
    }
    Ok(GrayscaleImage {
        width,
        height,
        pixels,
    })
}

/// Binary PGM (P5) bytes of an image.
pub fn encode_pgm(img: &GrayscaleImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    PnmEncoder::new(&mut out)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(
            &img.pixels,
            img.width as u32,
            img.height as u32,
            ExtendedColorType::L8,
        )
        .map_err(|e| Error::Validation(format!("pgm encoding failed: {e}")))?;
    Ok(out)
}

pub fn decode_pgm(bytes: &[u8], origin: &Path) -> Result<GrayscaleImage> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Pnm)
        .map_err(|e| Error::format(origin, e.to_string()))?
        .to_luma8();
    Ok(GrayscaleImage {
        width: img.width() as usize,
        height: img.height() as usize,
        pixels: img.into_raw(),
    })
}

/// Render with per-image min-max scaling and write a PGM file.
pub fn export_grayscale(h: &CsiMatrix, path: &Path, transpose: bool) -> Result<GrayscaleImage> {
    let img = csi_to_grayscale(h, transpose, None)?;
    write_atomic(path, &encode_pgm(&img)?)?;
    Ok(img)
}

pub fn read_pgm(path: &Path) -> Result<GrayscaleImage> {
    decode_pgm(&std::fs::read(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chanmodel::{assemble_csi, ArrayGeometry, CarrierGrid, PathComponent};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};

    #[test]
    fn single_path_is_mid_gray() {
        let path = PathComponent::planar(Complex64::new(0.7, -0.2), 30e-9, 1.1).unwrap();
        let geo = ArrayGeometry::half_wavelength_ula(8, 3.5e9).unwrap();
        let grid = CarrierGrid::uniform(3.5e9, 40e6, 6).unwrap();
        let h = assemble_csi(&[path], &geo, &grid).unwrap();
        let img = csi_to_grayscale(&h, false, None).unwrap();
        assert_eq!((img.height, img.width), (8, 6));
        assert!(img.pixels.iter().all(|&p| p == 128));
    }

    #[test]
    fn one_maximum_gives_one_white_pixel() {
        let mut h = CsiMatrix::from_fn(3, 4, |m, n| Complex64::new((m + n) as f64 * 0.1, 0.0));
        h.set(1, 2, Complex64::new(0.0, 9.0));
        let img = csi_to_grayscale(&h, false, None).unwrap();
        assert_eq!(img.pixels.iter().filter(|&&p| p == 255).count(), 1);
        assert_eq!(img.pixel(1, 2), 255);
        assert_eq!(img.pixel(0, 0), 0);
        let t = csi_to_grayscale(&h, true, None).unwrap();
        assert_eq!((t.height, t.width), (4, 3));
        assert_eq!(t.pixel(2, 1), 255);
    }

    #[test]
    fn pgm_round_trip_within_one_level() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let h = CsiMatrix::from_fn(5, 7, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.pgm");
        export_grayscale(&h, &p, false).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert!(bytes.starts_with(b"P5"));
        let img = read_pgm(&p).unwrap();
        let (lo, hi) = magnitude_range(&h);
        for m in 0..5 {
            for n in 0..7 {
                let exact = (h.get(m, n).norm() - lo) / (hi - lo) * 255.0;
                assert!((img.pixel(m, n) as f64 - exact).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn shared_range_clamps() {
        let h = CsiMatrix::from_fn(2, 2, |m, _| Complex64::new(m as f64 * 4.0, 0.0));
        let img = csi_to_grayscale(&h, false, Some((0.0, 2.0))).unwrap();
        assert_eq!(img.pixels, vec![0, 0, 255, 255]);
    }
}
