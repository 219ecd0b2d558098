//! Rotation-invariant uniform local binary patterns.
//!
//! Each pixel is compared with `points` neighbours sampled on a circle of
//! `radius` pixels (bilinear interpolation, replicate borders). Patterns with
//! at most two circular 0/1 transitions map to their count of set bits
//! (`0..=P`); every other pattern shares the bucket `P + 1`.

use std::f64::consts::PI;

use crate::features::FeatureVector;
use crate::imaging::GrayImage;
use crate::GeometryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbpMethod {
    UniformRotationInvariant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbpParams {
    pub points: usize,
    pub radius: f64,
    /// Histogram block edge in pixels.
    pub block: usize,
    pub method: LbpMethod,
}

/// Named parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbpPreset {
    /// 16 points, radius 2, 16x16 blocks: 3528 values on a 224 image.
    PaperTable3,
    /// 8 points, radius 2, 16x16 blocks: 1960 values on a 224 image.
    PaperDim,
}

impl std::str::FromStr for LbpPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper-table3" => Ok(LbpPreset::PaperTable3),
            "paper-dim" => Ok(LbpPreset::PaperDim),
            other => Err(format!("unknown preset '{other}' (expected paper-table3 or paper-dim)")),
        }
    }
}

impl LbpPreset {
    pub fn as_str(self) -> &'static str {
        match self {
            LbpPreset::PaperTable3 => "paper-table3",
            LbpPreset::PaperDim => "paper-dim",
        }
    }

    pub fn params(self) -> LbpParams {
        let points = match self {
            LbpPreset::PaperTable3 => 16,
            LbpPreset::PaperDim => 8,
        };
        LbpParams {
            points,
            ..LbpParams::default()
        }
    }
}

impl Default for LbpParams {
    fn default() -> Self {
        Self {
            points: 8,
            radius: 2.0,
            block: 16,
            method: LbpMethod::UniformRotationInvariant,
        }
    }
}

impl LbpParams {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.points < 4 || self.radius < 1.0 || !self.radius.is_finite() || self.block == 0 {
            return Err(GeometryError::InvalidParams(format!("{self:?}")));
        }
        Ok(())
    }

    /// Number of distinct codes, `P + 2`.
    pub fn bins(&self) -> usize {
        self.points + 2
    }

    pub fn output_dim(&self, width: usize, height: usize) -> Option<usize> {
        self.validate().ok()?;
        if !width.is_multiple_of(self.block) || !height.is_multiple_of(self.block) || width == 0 || height == 0 {
            return None;
        }
        Some((width / self.block) * (height / self.block) * self.bins())
    }

    /// Sampling offsets `(dx, dy)` of the neighbours, counter-clockwise from
    /// the positive x axis with y pointing down. Offsets within 1e-9 of an
    /// integer are snapped so axis-aligned samples land exactly on pixels.
    pub fn offsets(&self) -> Vec<(f64, f64)> {
        let snap = |v: f64| {
            let r = v.round();
            if (v - r).abs() < 1e-9 {
                r
            } else {
                v
            }
        };
        (0..self.points)
            .map(|k| {
                let angle = 2.0 * PI * k as f64 / self.points as f64;
                (snap(self.radius * angle.cos()), snap(-self.radius * angle.sin()))
            })
            .collect()
    }
}

/// Maps a circular bit string to its rotation-invariant uniform code.
pub fn uniform_code(bits: &[bool]) -> u32 {
    let p = bits.len();
    let transitions = (0..p).filter(|&k| bits[k] != bits[(k + 1) % p]).count();
    if transitions <= 2 {
        bits.iter().filter(|&&b| b).count() as u32
    } else {
        p as u32 + 1
    }
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// Precomputed integer/fractional split of each sampling offset.
struct Sampler {
    taps: Vec<(isize, isize, f64, f64)>,
}

impl Sampler {
    fn new(p: &LbpParams) -> Self {
        let taps = p
            .offsets()
            .into_iter()
            .map(|(dx, dy)| {
                let (fx, fy) = (dx.floor(), dy.floor());
                (fx as isize, fy as isize, dx - fx, dy - fy)
            })
            .collect();
        Self { taps }
    }

    fn code(&self, img: &GrayImage, x: usize, y: usize, bits: &mut Vec<bool>) -> u32 {
        let center = img.get(x, y) as f64;
        let (xi, yi) = (x as isize, y as isize);
        bits.clear();
        for &(ox, oy, tx, ty) in &self.taps {
            let (x0, y0) = (xi + ox, yi + oy);
            let top = lerp(img.get_clamped(x0, y0) as f64, img.get_clamped(x0 + 1, y0) as f64, tx);
            let bottom = lerp(
                img.get_clamped(x0, y0 + 1) as f64,
                img.get_clamped(x0 + 1, y0 + 1) as f64,
                tx,
            );
            bits.push(lerp(top, bottom, ty) >= center);
        }
        uniform_code(bits)
    }
}

/// LBP code of a single pixel.
pub fn lbp_code(img: &GrayImage, x: usize, y: usize, p: &LbpParams) -> Result<u32, GeometryError> {
    p.validate()?;
    if x >= img.width() || y >= img.height() {
        return Err(GeometryError::OutOfBounds { x, y });
    }
    Ok(Sampler::new(p).code(img, x, y, &mut Vec::with_capacity(p.points)))
}

/// Codes for every pixel, row-major.
pub fn lbp_codes(img: &GrayImage, p: &LbpParams) -> Result<Vec<u32>, GeometryError> {
    p.validate()?;
    let sampler = Sampler::new(p);
    let mut bits = Vec::with_capacity(p.points);
    let mut codes = Vec::with_capacity(img.width() * img.height());
    for y in 0..img.height() {
        for x in 0..img.width() {
            codes.push(sampler.code(img, x, y, &mut bits));
        }
    }
    Ok(codes)
}

/// Per-block code histograms normalized to sum 1, blocks row-major.
pub fn block_histograms(img: &GrayImage, p: &LbpParams) -> Result<Vec<Vec<f64>>, GeometryError> {
    if p.output_dim(img.width(), img.height()).is_none() {
        p.validate()?;
        return Err(GeometryError::NotDivisible {
            width: img.width(),
            height: img.height(),
            unit: p.block,
        });
    }
    let codes = lbp_codes(img, p)?;
    let (bw, bh) = (img.width() / p.block, img.height() / p.block);
    let area = (p.block * p.block) as f64;
    let mut hists = vec![vec![0.0f64; p.bins()]; bw * bh];
    for y in 0..img.height() {
        for x in 0..img.width() {
            let b = (y / p.block) * bw + x / p.block;
            hists[b][codes[y * img.width() + x] as usize] += 1.0;
        }
    }
    for h in &mut hists {
        h.iter_mut().for_each(|v| *v /= area);
    }
    Ok(hists)
}

/// Concatenated block histograms.
pub fn lbp_extract(img: &GrayImage, p: &LbpParams) -> Result<FeatureVector, GeometryError> {
    let hists = block_histograms(img, p)?;
    let values = hists.into_iter().flatten().map(|v| v as f32).collect();
    Ok(FeatureVector::new(values, "lbp"))
}
