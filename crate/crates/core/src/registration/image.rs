//! Grayscale images, binary PGM I/O, bilinear sampling and warping.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{invalid, Error, Result};

/// Row-major grayscale image with values nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Image {
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid("image dimensions must be positive"));
        }
        if values.len() != width * height {
            return Err(Error::ShapeMismatch(format!("{} values for a {width}x{height} image", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("image contains non-finite values"));
        }
        Ok(Self { width, height, values })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let values = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self::from_values(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Bilinear interpolation at `(x, y)` with positions clamped to the image
    /// rectangle (Neumann boundary).
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let xc = x.clamp(0.0, (self.width - 1) as f64);
        let yc = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = (xc.floor() as usize).min(self.width - 1);
        let y0 = (yc.floor() as usize).min(self.height - 1);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = xc - x0 as f64;
        let fy = yc - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// `|self - other|`, pixelwise.
    pub fn abs_diff(&self, other: &Image) -> Result<Image> {
        self.check_same_shape(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).collect();
        Image::from_values(self.width, self.height, values)
    }

    /// `1/2 sum (self - other)^2`.
    pub fn ssd(&self, other: &Image) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(0.5 * self.values.iter().zip(&other.values).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
    }

    pub fn mean_abs_diff(&self, other: &Image) -> Result<f64> {
        self.check_same_shape(other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum();
        Ok(s / self.values.len() as f64)
    }

    fn check_same_shape(&self, other: &Image) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }
}

/// Dense displacement field, one `(dx, dy)` per pixel in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Deformation {
    pub width: usize,
    pub height: usize,
    pub values: Vec<[f64; 2]>,
}

impl Deformation {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, values: vec![[0.0, 0.0]; width * height] }
    }

    pub fn constant(width: usize, height: usize, d: [f64; 2]) -> Self {
        Self { width, height, values: vec![d; width * height] }
    }

    /// Field `z(x) = c + rot(-degrees)(x - c) - x` about the image center, so
    /// that warping by it rotates the content by `degrees`.
    pub fn rotation(width: usize, height: usize, degrees: f64) -> Self {
        let (cx, cy) = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
        let (s, c) = (-degrees.to_radians()).sin_cos();
        let values = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x as f64, y as f64)))
            .map(|(x, y)| {
                let (rx, ry) = (x - cx, y - cy);
                [cx + c * rx - s * ry - x, cy + s * rx + c * ry - y]
            })
            .collect();
        Self { width, height, values }
    }

    pub fn magnitude(&self, i: usize) -> f64 {
        let [a, b] = self.values[i];
        (a * a + b * b).sqrt()
    }
}

/// `out(x) = T(x + def(x))`.
pub fn warp(template: &Image, def: &Deformation) -> Result<Image> {
    if def.width != template.width() || def.height != template.height() {
        return Err(Error::ShapeMismatch("deformation and image differ in size".into()));
    }
    let w = template.width();
    let values = def
        .values
        .iter()
        .enumerate()
        .map(|(i, d)| {
            if d[0] == 0.0 && d[1] == 0.0 {
                template.values()[i]
            } else {
                template.sample((i % w) as f64 + d[0], (i / w) as f64 + d[1])
            }
        })
        .collect();
    Image::from_values(template.width(), template.height(), values)
}

/// Rotation of the image content about its center by `degrees`, bilinear
/// resampling with clamped borders.
pub fn synth_rotation(image: &Image, degrees: f64) -> Image {
    if degrees == 0.0 {
        return image.clone();
    }
    warp(image, &Deformation::rotation(image.width(), image.height(), degrees)).expect("shapes agree by construction")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndpointError {
    pub mean: f64,
    pub max: f64,
    pub count: usize,
}

/// Per-pixel Euclidean error of `def` against `truth`, restricted to pixels
/// whose true displacement has length at most `radius`.
pub fn endpoint_error(def: &Deformation, truth: &Deformation, radius: f64) -> Result<EndpointError> {
    if def.values.len() != truth.values.len() {
        return Err(Error::ShapeMismatch("deformation fields differ in size".into()));
    }
    let errs: Vec<f64> = (0..def.values.len())
        .filter(|&i| truth.magnitude(i) <= radius)
        .map(|i| {
            let (a, b) = (def.values[i], truth.values[i]);
            ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
        })
        .collect();
    if errs.is_empty() {
        return Err(invalid("endpoint error mask is empty"));
    }
    Ok(EndpointError {
        mean: errs.iter().sum::<f64>() / errs.len() as f64,
        max: errs.iter().fold(0.0, |a: f64, &b| a.max(b)),
        count: errs.len(),
    })
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    parse_pgm(&bytes).map_err(|reason| Error::Format { path: path.to_path_buf(), reason })
}

fn parse_pgm(bytes: &[u8]) -> std::result::Result<Image, String> {
    let mut pos = 0;
    let mut token = || -> std::result::Result<String, String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err("not a binary PGM (P5)".into());
    }
    let mut num = |name: &str| -> std::result::Result<usize, String> {
        token()?.parse::<usize>().map_err(|_| format!("bad {name} in header"))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if width == 0 || height == 0 {
        return Err("zero image dimension".into());
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval {maxval} outside 1..=65535"));
    }
    // a single whitespace byte separates the header from the raster
    let data_start = pos + 1;
    let bpp = if maxval < 256 { 1 } else { 2 };
    let needed = width * height * bpp;
    if bytes.len() < data_start + needed {
        return Err(format!("truncated raster: need {needed} bytes"));
    }
    let raster = &bytes[data_start..data_start + needed];
    let scale = maxval as f64;
    let values = if bpp == 1 {
        raster.iter().map(|&b| b as f64 / scale).collect()
    } else {
        raster.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / scale).collect()
    };
    Image::from_values(width, height, values).map_err(|e| e.to_string())
}

/// Writes an 8-bit P5 PGM; values are clamped to `[0, 1]`.
pub fn save_pgm(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.values().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    let mut f = fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smooth(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |x, y| {
            let (x, y) = (x as f64 / w as f64, y as f64 / h as f64);
            0.5 + 0.25 * (6.0 * x).sin() * (5.0 * y + 0.3).cos()
        })
        .unwrap()
    }

    #[test]
    fn pgm_parse_and_errors() {
        let mut bytes = b"P5\n# comment\n2 2\n255\n".to_vec();
        bytes.extend([0u8, 255, 255, 0]);
        let img = parse_pgm(&bytes).unwrap();
        assert_eq!(img.values(), &[0.0, 1.0, 1.0, 0.0]);
        assert!(parse_pgm(b"P5\n2 2\n70000\n").unwrap_err().contains("maxval"));
        assert!(parse_pgm(b"P5\n2 2\n255\n\x01").unwrap_err().contains("truncated"));
        assert!(parse_pgm(b"P2\n2 2\n255\n").is_err());
    }

    #[test]
    fn pgm_sixteen_bit() {
        let mut bytes = b"P5 1 2 65535\n".to_vec();
        bytes.extend([0xff, 0xff, 0x00, 0x00]);
        assert_eq!(parse_pgm(&bytes).unwrap().values(), &[1.0, 0.0]);
    }

    #[test]
    fn pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = smooth(7, 5);
        let p = dir.path().join("a.pgm");
        save_pgm(&img, &p).unwrap();
        let back = load_pgm(&p).unwrap();
        for (a, b) in img.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 1.0 / 510.0 + 1e-12);
        }
    }

    #[test]
    fn bilinear_examples() {
        let img = Image::from_values(2, 2, vec![0.0, 1.0, 0.25, 0.5]).unwrap();
        assert_eq!(img.sample(1.0, 1.0), 0.5);
        assert_eq!(img.sample(0.5, 0.0), 0.5);
        assert_eq!(img.sample(-10.0, 50.0), 0.25);
        assert_eq!(img.sample(9.0, -3.0), 1.0);
    }

    #[test]
    fn warp_identity_and_shift() {
        let img = smooth(6, 4);
        assert_eq!(warp(&img, &Deformation::zeros(6, 4)).unwrap(), img);
        let shifted = warp(&img, &Deformation::constant(6, 4, [1.0, 0.0])).unwrap();
        for y in 0..4 {
            for x in 0..6 {
                assert_eq!(shifted.get(x, y), img.get((x + 1).min(5), y));
            }
        }
        assert!(warp(&img, &Deformation::zeros(3, 3)).is_err());
    }

    #[test]
    fn rotation_round_trips() {
        let img = smooth(32, 32);
        assert_eq!(synth_rotation(&img, 0.0), img);
        assert!(synth_rotation(&img, 360.0).mean_abs_diff(&img).unwrap() < 1e-9);
        let back = synth_rotation(&synth_rotation(&img, 40.0), -40.0);
        assert!(back.mean_abs_diff(&img).unwrap() < 0.05);
        // the rotation field carries the template onto the rotated image exactly
        let r = synth_rotation(&img, 40.0);
        assert_eq!(warp(&img, &Deformation::rotation(32, 32, 40.0)).unwrap(), r);
        let undo = warp(&r, &Deformation::rotation(32, 32, -40.0)).unwrap();
        assert!(undo.mean_abs_diff(&img).unwrap() < 0.05);
    }

    #[test]
    fn endpoint_error_examples() {
        let gt = Deformation::rotation(8, 8, 30.0);
        let e = endpoint_error(&gt, &gt, 100.0).unwrap();
        assert_eq!((e.mean, e.max), (0.0, 0.0));
        let mut off = gt.clone();
        off.values.iter_mut().for_each(|v| v[0] += 1.0);
        let e = endpoint_error(&off, &gt, 100.0).unwrap();
        assert!((e.mean - 1.0).abs() < 1e-12 && (e.max - 1.0).abs() < 1e-12);
        assert!(endpoint_error(&off, &gt, -1.0).is_err());
    }
}
