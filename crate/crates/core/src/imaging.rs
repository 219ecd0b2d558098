//! Grayscale image loading and the canonical square geometry.
//!
//! Every image entering the feature extractors goes through [`rescale_pad`]:
//! the longer side is scaled to the target (224 by default), the shorter side
//! follows the aspect ratio, and the result is centered on a zero canvas.

use std::path::Path;

use image::{ColorType, DynamicImage, ImageBuffer, Luma};
use thiserror::Error;

/// Side length of the canonical square image.
pub const CANONICAL_SIDE: usize = 224;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("image file not found: {0}")]
    FileNotFound(String),
    #[error("cannot decode {path}: {reason}")]
    DecodeError { path: String, reason: String },
    #[error("invalid image dimension {width}x{height}")]
    InvalidDimension { width: usize, height: usize },
    #[error("pixel buffer has {got} values, expected {expected}")]
    BufferSize { expected: usize, got: usize },
    #[error("pixel intensity {0} outside [0, 1]")]
    IntensityRange(f32),
    #[error("cannot write {path}: {reason}")]
    Write { path: String, reason: String },
}

/// Row-major single-channel image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f32>) -> Result<Self, ImagingError> {
        if pixels.len() != width * height {
            return Err(ImagingError::BufferSize {
                expected: width * height,
                got: pixels.len(),
            });
        }
        if let Some(&bad) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ImagingError::IntensityRange(bad));
        }
        Ok(Self { width, height, pixels })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel. Values are
    /// clamped into `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self { width, height, pixels }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.pixels[y * self.width + x]
    }

    /// Pixel lookup with coordinates clamped to the border (replicate padding).
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    /// Rotates the image by 180 degrees.
    pub fn rotate180(&self) -> Self {
        let mut pixels = self.pixels.clone();
        pixels.reverse();
        Self {
            width: self.width,
            height: self.height,
            pixels,
        }
    }
}

/// Axis-aligned rectangle in pixel units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.width && y >= self.y && y < self.y + self.height
    }
}

/// Square image produced by [`rescale_pad`]. Pixels outside `content_rect`
/// are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalImage {
    image: GrayImage,
    content_rect: Rect,
}

impl CanonicalImage {
    pub fn image(&self) -> &GrayImage {
        &self.image
    }

    pub fn into_image(self) -> GrayImage {
        self.image
    }

    pub fn content_rect(&self) -> Rect {
        self.content_rect
    }

    pub fn side(&self) -> usize {
        self.image.width
    }
}

impl AsRef<GrayImage> for CanonicalImage {
    fn as_ref(&self) -> &GrayImage {
        &self.image
    }
}

/// Loads a PNG or JPEG as a grayscale image normalized to `[0, 1]`.
///
/// Colour sources are reduced with the ITU-R 601 luma weights
/// `0.299 R + 0.587 G + 0.114 B`.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage, ImagingError> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(ImagingError::FileNotFound(path.display().to_string()));
    }
    let decoded = image::ImageReader::open(path)
        .and_then(|r| r.with_guessed_format())
        .map_err(|e| ImagingError::DecodeError {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?
        .decode()
        .map_err(|e| ImagingError::DecodeError {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
    Ok(from_dynamic(&decoded))
}

/// Converts a decoded image to [`GrayImage`].
pub fn from_dynamic(img: &DynamicImage) -> GrayImage {
    let (width, height) = (img.width() as usize, img.height() as usize);
    let pixels = if img.color().has_color() {
        img.to_rgb32f().pixels().map(|p| luma601(p[0], p[1], p[2])).collect()
    } else if matches!(img.color(), ColorType::L16 | ColorType::La16) {
        img.to_luma16().pixels().map(|p| p[0] as f32 / 65535.0).collect()
    } else {
        img.to_luma8().pixels().map(|p| p[0] as f32 / 255.0).collect()
    };
    GrayImage { width, height, pixels }
}

#[inline]
fn luma601(r: f32, g: f32, b: f32) -> f32 {
    (0.299 * r + 0.587 * g + 0.114 * b).clamp(0.0, 1.0)
}

/// Writes an 8-bit grayscale PNG (intensities rounded to the nearest level).
pub fn save_png(img: &GrayImage, path: impl AsRef<Path>) -> Result<(), ImagingError> {
    let path = path.as_ref();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_vec(
        img.width as u32,
        img.height as u32,
        img.pixels.iter().map(|v| (v * 255.0).round() as u8).collect(),
    )
    .expect("buffer length matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| ImagingError::Write {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
}

/// Size of the content region after scaling the longer side to `target`.
///
/// The shorter side is rounded to nearest (ties away from zero) and never
/// drops below one pixel.
pub fn scaled_dims(width: usize, height: usize, target: usize) -> (usize, usize) {
    let longer = width.max(height);
    let scale = target as f64 / longer as f64;
    let shorter = |d: usize| ((d as f64 * scale).round() as usize).clamp(1, target);
    if width >= height {
        (target, shorter(height))
    } else {
        (shorter(width), target)
    }
}

/// Bilinear resampling with pixel-center alignment.
pub fn resize_bilinear(img: &GrayImage, out_w: usize, out_h: usize) -> GrayImage {
    if out_w == img.width && out_h == img.height {
        return img.clone();
    }
    let sx = img.width as f64 / out_w as f64;
    let sy = img.height as f64 / out_h as f64;
    let max_x = (img.width - 1) as f64;
    let max_y = (img.height - 1) as f64;
    let mut pixels = Vec::with_capacity(out_w * out_h);
    for oy in 0..out_h {
        let fy = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(img.height - 1);
        let ty = fy - y0 as f64;
        for ox in 0..out_w {
            let fx = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(img.width - 1);
            let tx = fx - x0 as f64;
            let top = img.get(x0, y0) as f64 * (1.0 - tx) + img.get(x1, y0) as f64 * tx;
            let bottom = img.get(x0, y1) as f64 * (1.0 - tx) + img.get(x1, y1) as f64 * tx;
            let v = top * (1.0 - ty) + bottom * ty;
            pixels.push((v as f32).clamp(0.0, 1.0));
        }
    }
    GrayImage {
        width: out_w,
        height: out_h,
        pixels,
    }
}

/// Aspect-preserving rescale followed by centered zero padding onto a
/// `target x target` canvas. Odd padding puts the extra row/column at the
/// bottom/right.
pub fn rescale_pad(img: &GrayImage, target: usize) -> Result<CanonicalImage, ImagingError> {
    if img.width == 0 || img.height == 0 || target == 0 {
        return Err(ImagingError::InvalidDimension {
            width: img.width,
            height: img.height,
        });
    }
    let (w, h) = scaled_dims(img.width, img.height, target);
    let scaled = resize_bilinear(img, w, h);
    let ox = (target - w) / 2;
    let oy = (target - h) / 2;

    let mut canvas = GrayImage::zeros(target, target);
    for y in 0..h {
        let src = &scaled.pixels[y * w..(y + 1) * w];
        let start = (y + oy) * target + ox;
        canvas.pixels[start..start + w].copy_from_slice(src);
    }
    Ok(CanonicalImage {
        image: canvas,
        content_rect: Rect {
            x: ox,
            y: oy,
            width: w,
            height: h,
        },
    })
}

/// [`rescale_pad`] at the canonical 224 side.
pub fn canonicalize(img: &GrayImage) -> Result<CanonicalImage, ImagingError> {
    rescale_pad(img, CANONICAL_SIDE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_rgb_png(dir: &Path, name: &str, w: u32, h: u32, rgb: [u8; 3]) -> std::path::PathBuf {
        let p = dir.join(name);
        image::RgbImage::from_pixel(w, h, image::Rgb(rgb)).save(&p).unwrap();
        p
    }

    #[test]
    fn load_white_png() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("white.png");
        image::GrayImage::from_pixel(2, 2, Luma([255])).save(&p).unwrap();
        let img = load_image(&p).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert!(img.pixels().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn load_black_png() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("black.png");
        image::GrayImage::from_pixel(1, 1, Luma([0])).save(&p).unwrap();
        assert_eq!(load_image(&p).unwrap().pixels(), &[0.0]);
    }

    #[test]
    fn load_red_uses_601_luma() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_rgb_png(dir.path(), "red.png", 1, 1, [255, 0, 0]);
        let v = load_image(&p).unwrap().pixels()[0];
        assert!((v - 0.299).abs() < 1e-6, "{v}");
    }

    #[test]
    fn load_jpeg() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.jpg");
        image::GrayImage::from_pixel(8, 8, Luma([128])).save(&p).unwrap();
        let img = load_image(&p).unwrap();
        assert!(img.pixels().iter().all(|&v| (v - 128.0 / 255.0).abs() < 0.02));
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_image(dir.path().join("nope.png")),
            Err(ImagingError::FileNotFound(_))
        ));
        let bad = dir.path().join("bad.png");
        std::fs::write(&bad, b"definitely not a png").unwrap();
        assert!(matches!(load_image(&bad), Err(ImagingError::DecodeError { .. })));
    }

    #[test]
    fn identity_at_target() {
        let img = GrayImage::from_fn(224, 224, |x, y| ((x * 7 + y * 3) % 256) as f32 / 255.0);
        let out = canonicalize(&img).unwrap();
        assert_eq!(out.image(), &img);
        assert_eq!(
            out.content_rect(),
            Rect {
                x: 0,
                y: 0,
                width: 224,
                height: 224
            }
        );
    }

    #[test]
    fn halving_wide_image() {
        let img = GrayImage::from_fn(448, 224, |_, _| 1.0);
        let out = canonicalize(&img).unwrap();
        assert_eq!(
            out.content_rect(),
            Rect {
                x: 0,
                y: 56,
                width: 224,
                height: 112
            }
        );
        let im = out.image();
        for y in 0..224 {
            let expected = if (56..168).contains(&y) { 1.0 } else { 0.0 };
            assert!((0..224).all(|x| im.get(x, y) == expected), "row {y}");
        }
    }

    #[test]
    fn oct_scan_geometry() {
        // 768 wide, 469 tall: 469 * 224 / 768 = 136.79
        assert_eq!(scaled_dims(768, 469, 224), (224, 137));
        let img = GrayImage::from_fn(768, 469, |_, _| 0.5);
        let out = canonicalize(&img).unwrap();
        let r = out.content_rect();
        assert_eq!((r.width, r.height, r.x, r.y), (224, 137, 0, 43));
    }

    #[test]
    fn tall_image_pads_columns() {
        let img = GrayImage::from_fn(3, 7, |_, _| 1.0);
        let out = rescale_pad(&img, 14).unwrap();
        // 3 * 2 = 6 columns, offset 4 left and 4 right
        assert_eq!(
            out.content_rect(),
            Rect {
                x: 4,
                y: 0,
                width: 6,
                height: 14
            }
        );
    }

    #[test]
    fn odd_padding_goes_bottom_right() {
        let img = GrayImage::from_fn(10, 5, |_, _| 1.0);
        let out = rescale_pad(&img, 8).unwrap();
        // 5 * 0.8 = 4 rows -> 2 above, 2 below; try an odd case too
        assert_eq!(out.content_rect().y, 2);
        let img = GrayImage::from_fn(8, 3, |_, _| 1.0);
        let out = rescale_pad(&img, 8).unwrap();
        // 3 rows, 5 of padding: floor(5/2) = 2 above, 3 below
        assert_eq!(out.content_rect().y, 2);
        assert_eq!(out.content_rect().height, 3);
    }

    #[test]
    fn zero_sized_is_rejected() {
        let img = GrayImage::zeros(0, 5);
        assert!(matches!(
            rescale_pad(&img, 224),
            Err(ImagingError::InvalidDimension { .. })
        ));
    }

    #[test]
    fn new_validates() {
        assert!(GrayImage::new(2, 2, vec![0.0; 3]).is_err());
        assert!(GrayImage::new(1, 1, vec![1.5]).is_err());
        assert!(GrayImage::new(1, 1, vec![0.5]).is_ok());
    }

    fn arb_image() -> impl Strategy<Value = GrayImage> {
        (1usize..60, 1usize..60).prop_flat_map(|(w, h)| {
            proptest::collection::vec(0.0f32..=1.0, w * h).prop_map(move |px| GrayImage::new(w, h, px).unwrap())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn canonical_properties(img in arb_image(), target in 8usize..64) {
            let out = rescale_pad(&img, target).unwrap();
            let im = out.image();
            prop_assert_eq!((im.width(), im.height()), (target, target));
            let r = out.content_rect();
            prop_assert_eq!(r.width.max(r.height), target);

            let mut pad_sum = 0.0f32;
            for y in 0..target {
                for x in 0..target {
                    if !r.contains(x, y) {
                        pad_sum += im.get(x, y);
                    }
                }
            }
            prop_assert_eq!(pad_sum, 0.0);

            let in_ratio = img.width() as f64 / img.height() as f64;
            let out_ratio = r.width as f64 / r.height as f64;
            let bound = (1.0 + in_ratio) / r.width.min(r.height) as f64;
            prop_assert!((out_ratio - in_ratio).abs() <= bound + 1e-12,
                "in {in_ratio} out {out_ratio} bound {bound}");

            let twice = rescale_pad(out.image(), target).unwrap();
            prop_assert_eq!(twice.image(), out.image());
        }
    }
}
