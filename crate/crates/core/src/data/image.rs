//! Grayscale images: binary PGM I/O, per-pixel window features and
//! visualizations of split parameters and leaf affiliations.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::alternating::route_all;
use crate::dataset::SampleSet;
use crate::error::{Error, Result};
use crate::tree::Tree;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if pixels.len() != height * width {
            return Err(Error::invalid(format!(
                "{} pixels do not form a {height}x{width} image",
                pixels.len()
            )));
        }
        Ok(GrayImage { height, width, pixels })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    /// Pixels scaled to `[0, 1]`, row-major.
    pub fn to_unit_grid(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| f64::from(p) / 255.0).collect()
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Format("truncated PGM header".into()));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        if fields[0] != "P5" {
            return Err(Error::Format(format!("expected P5, found {:?}", fields[0])));
        }
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Format(format!("invalid PGM header field {s:?}")))
        };
        let (width, height, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
        if maxval != 255 {
            return Err(Error::Format(format!("unsupported PGM maximum value {maxval}")));
        }
        // Exactly one whitespace byte separates the header from the raster.
        let body = bytes.get(pos + 1..).unwrap_or(&[]);
        if body.len() != width * height {
            return Err(Error::Format(format!(
                "PGM raster has {} bytes, expected {}",
                body.len(),
                width * height
            )));
        }
        GrayImage::new(height, width, body.to_vec())
    }
}

pub fn write_pgm(image: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, image.to_pgm())?;
    Ok(())
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    GrayImage::from_pgm(&fs::read(path)?)
}

/// Handling of window positions outside the image.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Border {
    /// Symmetric reflection including the edge pixel: `-1 → 0`, `-2 → 1`.
    #[default]
    Mirror,
    /// Nearest edge pixel.
    Replicate,
    Zero,
}

impl FromStr for Border {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mirror" => Ok(Border::Mirror),
            "replicate" => Ok(Border::Replicate),
            "zero" => Ok(Border::Zero),
            other => Err(Error::invalid(format!("unknown border mode {other:?}"))),
        }
    }
}

fn fold(i: isize, n: usize, border: Border) -> Option<usize> {
    let n = n as isize;
    if (0..n).contains(&i) {
        return Some(i as usize);
    }
    match border {
        Border::Zero => None,
        Border::Replicate => Some(i.clamp(0, n - 1) as usize),
        Border::Mirror => {
            let m = i.rem_euclid(2 * n);
            Some(if m < n { m } else { 2 * n - 1 - m } as usize)
        }
    }
}

/// One sample per pixel holding the `window × window` patch centred on it,
/// row-major. `labels` gives per-pixel classes and their count; without it
/// every sample gets class 0 of a single class.
pub fn sliding_window_features(
    grid: &[f64],
    height: usize,
    width: usize,
    window: usize,
    border: Border,
    labels: Option<(&[usize], usize)>,
) -> Result<SampleSet> {
    if window.is_multiple_of(2) {
        return Err(Error::invalid(format!("window size {window} must be odd")));
    }
    if height == 0 || width == 0 || grid.len() != height * width {
        return Err(Error::invalid("grid does not match the image shape"));
    }
    let r = (window / 2) as isize;
    let mut features = Vec::with_capacity(height * width * window * window);
    for y in 0..height as isize {
        for x in 0..width as isize {
            for dy in -r..=r {
                for dx in -r..=r {
                    let v = match (fold(y + dy, height, border), fold(x + dx, width, border)) {
                        (Some(yy), Some(xx)) => grid[yy * width + xx],
                        _ => 0.0,
                    };
                    features.push(v);
                }
            }
        }
    }
    let (labels, k) = match labels {
        Some((l, k)) => (l.to_vec(), k),
        None => (vec![0; height * width], 1),
    };
    SampleSet::new(features, labels, window * window, k)
}

/// Affine map of `weights` onto `0..=255`; constant weights give mid-gray.
pub fn beta_image(weights: &[f64], height: usize, width: usize) -> Result<GrayImage> {
    if weights.len() != height * width {
        return Err(Error::invalid(format!(
            "{} weights cannot be shown as a {height}x{width} image",
            weights.len()
        )));
    }
    let lo = weights.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pixels = if hi > lo {
        weights
            .iter()
            .map(|&v| ((v - lo) / (hi - lo) * 255.0).round() as u8)
            .collect()
    } else {
        vec![128; weights.len()]
    };
    GrayImage::new(height, width, pixels)
}

/// Write the feature weights of a split parameter vector (bias excluded) as PGM.
pub fn export_beta_image(beta: &[f64], height: usize, width: usize, path: impl AsRef<Path>) -> Result<GrayImage> {
    if beta.len() != height * width + 1 {
        return Err(Error::invalid(format!(
            "split has {} feature weights but the image shape is {height}x{width}",
            beta.len().saturating_sub(1)
        )));
    }
    let img = beta_image(&beta[..beta.len() - 1], height, width)?;
    write_pgm(&img, path)?;
    Ok(img)
}

/// Gray value of each pixel's leaf, spread evenly from black (leftmost leaf)
/// to white (rightmost leaf).
pub fn leaf_map(tree: &Tree, pixels: &SampleSet, height: usize, width: usize) -> Result<GrayImage> {
    if pixels.len() != height * width {
        return Err(Error::invalid("one feature row per pixel is required"));
    }
    let last = tree.num_leaves() - 1;
    let values = route_all(tree, pixels)?
        .into_iter()
        .map(|l| {
            if last == 0 {
                0
            } else {
                ((l * 255) as f64 / last as f64).round() as u8
            }
        })
        .collect();
    GrayImage::new(height, width, values)
}

pub fn export_leaf_map(
    tree: &Tree,
    pixels: &SampleSet,
    height: usize,
    width: usize,
    path: impl AsRef<Path>,
) -> Result<GrayImage> {
    let img = leaf_map(tree, pixels, height, width)?;
    write_pgm(&img, path)?;
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_and_constant() {
        let img = beta_image(&[0.0, 1.0, 2.0, 3.0], 2, 2).unwrap();
        assert_eq!(img.pixels(), &[0, 85, 170, 255]);
        let img = beta_image(&[-4.0; 6], 2, 3).unwrap();
        assert!(img.pixels().iter().all(|&p| p == 128));
        assert!(beta_image(&[1.0; 3], 2, 2).is_err());
    }

    #[test]
    fn pgm_round_trip() {
        let img = GrayImage::new(2, 3, vec![0, 1, 2, 253, 254, 255]).unwrap();
        let bytes = img.to_pgm();
        assert!(bytes.starts_with(b"P5"));
        assert_eq!(GrayImage::from_pgm(&bytes).unwrap(), img);
        let commented = b"P5\n# note\n3 2\n255\n\x00\x01\x02\xfd\xfe\xff";
        assert_eq!(GrayImage::from_pgm(commented).unwrap(), img);
        assert!(GrayImage::from_pgm(&bytes[..bytes.len() - 1]).is_err());
        assert!(GrayImage::from_pgm(b"P2\n1 1\n255\n0").is_err());
    }

    #[test]
    fn window_one_is_identity() {
        let grid = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let d = sliding_window_features(&grid, 2, 3, 1, Border::Mirror, None).unwrap();
        assert_eq!(d.features(), &grid);
        assert!(sliding_window_features(&grid, 2, 3, 2, Border::Mirror, None).is_err());
    }

    #[test]
    fn mirror_padding_reflects_edges() {
        let grid = [1.0, 2.0, 3.0];
        let d = sliding_window_features(&grid, 1, 3, 5, Border::Mirror, None).unwrap();
        // Columns fold -2 → 1 and -1 → 0.
        assert_eq!(&d.row(0)[10..15], &[2.0, 1.0, 1.0, 2.0, 3.0]);
        let z = sliding_window_features(&grid, 1, 3, 3, Border::Zero, None).unwrap();
        assert_eq!(z.row(0), &[0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0]);
        let r = sliding_window_features(&grid, 1, 3, 3, Border::Replicate, None).unwrap();
        assert_eq!(&r.row(2)[3..6], &[2.0, 3.0, 3.0]);
    }

    #[test]
    fn leaf_map_values() {
        let t = Tree::stump(vec![1.0, -0.5], vec![0.5, 0.5], vec![0.5, 0.5]).unwrap();
        let px = SampleSet::new(vec![0.0, 1.0, 0.2, 0.9], vec![0; 4], 1, 2).unwrap();
        assert_eq!(leaf_map(&t, &px, 2, 2).unwrap().pixels(), &[0, 255, 0, 255]);
        let leaf = Tree::single_leaf(1, vec![1.0, 0.0]).unwrap();
        assert_eq!(leaf_map(&leaf, &px, 1, 4).unwrap().pixels(), &[0; 4]);
    }
}
