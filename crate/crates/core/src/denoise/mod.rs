//! Patch-based grayscale denoising by sparse coding overlapping windows.
//!
//! Every `P×P` window on the grid is centered (its mean removed), coded with
//! at most `K` atoms by [`SparseCoder`], reconstructed and re-centered.
//! Overlapping reconstructions are averaged per pixel. Pixels no window
//! covers keep their input value.

pub mod dictionary;
pub mod pgm;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hubniht::SparseCoder;
use crate::hubreg::SolverConfig;

pub use dictionary::{Dictionary, DictionaryKind};

/// Reported PSNR for identical images.
pub const PSNR_CAP: f64 = 99.0;

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidProblem(
                "image dimensions must be positive".into(),
            ));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                context: "pixel count",
                expected: width * height,
                found: pixels.len(),
            });
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGrid {
    patch_size: usize,
    stride: usize,
}

impl Default for PatchGrid {
    fn default() -> Self {
        Self {
            patch_size: 8,
            stride: 2,
        }
    }
}

impl PatchGrid {
    pub fn new(patch_size: usize, stride: usize) -> Result<Self> {
        if patch_size < 2 || stride == 0 {
            return Err(Error::InvalidProblem(format!(
                "need patch size >= 2 and stride >= 1, got {patch_size} and {stride}"
            )));
        }
        Ok(Self { patch_size, stride })
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    fn offsets(&self, len: usize) -> impl Iterator<Item = usize> {
        let last = len.checked_sub(self.patch_size);
        (0..=last.unwrap_or(0))
            .step_by(self.stride)
            .take(if last.is_some() { usize::MAX } else { 0 })
    }

    /// Top-left corners `(row, col)` of every window, row by row.
    pub fn positions(&self, width: usize, height: usize) -> Vec<(usize, usize)> {
        let cols: Vec<usize> = self.offsets(width).collect();
        self.offsets(height)
            .flat_map(|r| cols.iter().map(move |&c| (r, c)))
            .collect()
    }

    /// Number of windows covering each pixel, row-major.
    pub fn overlap_counts(&self, width: usize, height: usize) -> Vec<u32> {
        let mut counts = vec![0u32; width * height];
        for (r, c) in self.positions(width, height) {
            for i in r..r + self.patch_size {
                for v in &mut counts[i * width + c..i * width + c + self.patch_size] {
                    *v += 1;
                }
            }
        }
        counts
    }
}

/// Replaces each pixel, with probability `eps`, by 0 or 1 with equal odds.
pub fn add_impulsive_noise(img: &GrayImage, eps: f64, seed: u64) -> Result<GrayImage> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::Domain(format!(
            "noise probability must be in [0, 1], got {eps}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixels = img
        .pixels
        .iter()
        .map(|&v| {
            let hit = rng.random::<f64>() < eps;
            let salt = rng.random::<bool>();
            match (hit, salt) {
                (false, _) => v,
                (true, true) => 1.0,
                (true, false) => 0.0,
            }
        })
        .collect();
    GrayImage::new(img.width, img.height, pixels)
}

/// Adds N(0, sd²) noise and clips to `[0, 1]`.
pub fn add_gaussian_noise(img: &GrayImage, sd: f64, seed: u64) -> Result<GrayImage> {
    if !(sd >= 0.0 && sd.is_finite()) {
        return Err(Error::Domain(format!(
            "noise level must be finite and >= 0, got {sd}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixels = img
        .pixels
        .iter()
        .map(|&v| (v + sd * rng.sample::<f64, _>(StandardNormal)).clamp(0.0, 1.0))
        .collect();
    GrayImage::new(img.width, img.height, pixels)
}

/// `10 log10(1 / MSE)`, capped at [`PSNR_CAP`].
pub fn psnr(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(Error::DimensionMismatch {
            context: "psnr image size",
            expected: a.pixels.len(),
            found: b.pixels.len(),
        });
    }
    let mse = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.pixels.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((-10.0 * mse.log10()).min(PSNR_CAP))
}

fn extract(img: &GrayImage, r: usize, c: usize, ps: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(ps * ps);
    for i in r..r + ps {
        out.extend_from_slice(&img.pixels[i * img.width + c..i * img.width + c + ps]);
    }
    out
}

fn code_patch(coder: &SparseCoder, dict: &Dictionary, patch: &[f64]) -> Result<Vec<f64>> {
    if patch.iter().all(|&v| v == patch[0]) {
        return Ok(patch.to_vec());
    }
    let mean = patch.iter().sum::<f64>() / patch.len() as f64;
    let centered: Vec<f64> = patch.iter().map(|v| v - mean).collect();
    let model = coder.fit(&centered)?;
    let rec = dict.atoms().matvec(&model.beta)?;
    Ok(rec.into_iter().map(|v| v + mean).collect())
}

pub fn denoise_image(
    img: &GrayImage,
    dict: &Dictionary,
    grid: &PatchGrid,
    k: usize,
    cfg: &SolverConfig,
) -> Result<GrayImage> {
    let ps = grid.patch_size;
    if dict.atom_dim() != ps * ps {
        return Err(Error::DimensionMismatch {
            context: "dictionary atom dimension vs patch size squared",
            expected: ps * ps,
            found: dict.atom_dim(),
        });
    }
    if img.width < ps || img.height < ps {
        return Err(Error::InvalidProblem(format!(
            "image {}x{} is smaller than the {ps}x{ps} patch",
            img.width, img.height
        )));
    }
    let coder = SparseCoder::new(dict.atoms(), k, true, cfg.clone())?;
    let positions = grid.positions(img.width, img.height);
    let patches: Vec<Vec<f64>> = positions
        .par_iter()
        .map(|&(r, c)| code_patch(&coder, dict, &extract(img, r, c, ps)))
        .collect::<Result<_>>()?;

    // accumulate offsets from the input so untouched pixels stay bit-exact
    let w = img.width;
    let mut acc = vec![0.0; img.pixels.len()];
    let mut counts = vec![0u32; img.pixels.len()];
    for (&(r, c), rec) in positions.iter().zip(&patches) {
        for i in 0..ps {
            for j in 0..ps {
                let idx = (r + i) * w + c + j;
                acc[idx] += rec[i * ps + j] - img.pixels[idx];
                counts[idx] += 1;
            }
        }
    }
    let pixels = img
        .pixels
        .iter()
        .zip(acc.iter().zip(&counts))
        .map(|(&x, (&a, &n))| {
            if n == 0 {
                x
            } else {
                (x + a / n as f64).clamp(0.0, 1.0)
            }
        })
        .collect();
    GrayImage::new(img.width, img.height, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> GrayImage {
        let px = (0..w * h)
            .map(|i| {
                let (r, c) = (i / w, i % w);
                0.5 + 0.4 * ((r as f64 * 0.3).sin() * (c as f64 * 0.2).cos())
            })
            .collect();
        GrayImage::new(w, h, px).unwrap()
    }

    #[test]
    fn overlap_counts_match_window_membership() {
        let grid = PatchGrid::new(4, 3).unwrap();
        let (w, h) = (11, 9);
        let counts = grid.overlap_counts(w, h);
        let pos = grid.positions(w, h);
        assert_eq!(pos.len(), 3 * 2);
        for r in 0..h {
            for c in 0..w {
                let n = pos
                    .iter()
                    .filter(|(pr, pc)| (*pr..pr + 4).contains(&r) && (*pc..pc + 4).contains(&c))
                    .count();
                assert_eq!(counts[r * w + c] as usize, n);
            }
        }
        // column 10 and row 8 are never covered at stride 3
        assert_eq!(counts[10], 0);
        assert_eq!(counts[8 * w], 0);
        assert!(PatchGrid::new(8, 0).is_err());
        assert!(grid.positions(3, 9).is_empty());
    }

    #[test]
    fn constant_image_is_fixed_point() {
        let img = GrayImage::filled(12, 10, 0.3).unwrap();
        let dict = Dictionary::build(4, DictionaryKind::DctHaarSpike).unwrap();
        let out = denoise_image(
            &img,
            &dict,
            &PatchGrid::new(4, 2).unwrap(),
            3,
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn full_budget_interpolates_with_a_basis() {
        let img = ramp(10, 10);
        let full = Dictionary::build(4, DictionaryKind::DctHaarSpike).unwrap();
        let cols = |range: std::ops::Range<usize>| -> Vec<Vec<f64>> {
            range.map(|j| full.atoms().column(j).to_vec()).collect()
        };
        let cfg = SolverConfig {
            tol: 1e-12,
            max_iter: 5000,
            ..SolverConfig::default()
        };
        for range in [0..16, 32..48] {
            let dict = Dictionary::from_matrix(
                crate::linalg::DenseMatrix::from_columns(&cols(range)).unwrap(),
            )
            .unwrap();
            let out = denoise_image(&img, &dict, &PatchGrid::new(4, 2).unwrap(), 16, &cfg).unwrap();
            for (a, b) in out.pixels().iter().zip(img.pixels()) {
                assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn noise_generators() {
        let img = GrayImage::filled(100, 100, 0.5).unwrap();
        assert_eq!(add_impulsive_noise(&img, 0.0, 1).unwrap(), img);
        let all = add_impulsive_noise(&img, 1.0, 1).unwrap();
        assert!(all.pixels().iter().all(|&v| v == 0.0 || v == 1.0));
        let some = add_impulsive_noise(&img, 0.1, 9).unwrap();
        let hits = some.pixels().iter().filter(|&&v| v != 0.5).count() as f64;
        // binomial(10^4, 0.1): mean 1000, sd 30
        assert!((hits - 1000.0).abs() <= 4.0 * 30.0, "{hits}");
        assert_eq!(some, add_impulsive_noise(&img, 0.1, 9).unwrap());
        assert!(add_impulsive_noise(&img, 1.5, 0).is_err());
        let g = add_gaussian_noise(&img, 0.1, 3).unwrap();
        assert!(g.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn psnr_examples() {
        let a = GrayImage::filled(4, 4, 0.0).unwrap();
        let b = GrayImage::filled(4, 4, 1.0).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP);
        assert_eq!(psnr(&a, &b).unwrap(), 0.0);
        let c = GrayImage::filled(4, 4, 0.1).unwrap();
        assert!((psnr(&a, &c).unwrap() - 20.0).abs() < 1e-12);
        assert!(psnr(&a, &GrayImage::filled(2, 2, 0.0).unwrap()).is_err());
    }
}
