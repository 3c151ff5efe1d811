//! Image ingestion, dataset manifests and the synthetic oriented-texture
//! generator.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::{filter, FrequencyLattice, ImageGrid};

/// Default crop side.
pub const DEFAULT_CROP: usize = 200;

/// Manifest file name written next to generated data.
pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Path relative to the manifest root (absolute paths are kept as is).
    pub path: String,
    pub label: String,
}

impl ManifestEntry {
    pub fn new(path: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            label: label.into(),
        }
    }
}

/// Ordered list of labelled image paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn new(root: impl Into<PathBuf>, entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            check_field(&e.path, "path", i + 1)?;
            check_field(&e.label, "label", i + 1)?;
            if e.label.contains(',') {
                return Err(Error::Manifest {
                    line: i + 1,
                    reason: format!("label {:?} contains a comma", e.label),
                });
            }
            if e.path.starts_with('#') {
                return Err(Error::Manifest {
                    line: i + 1,
                    reason: format!("path {:?} starts with a comment marker", e.path),
                });
            }
            if !seen.insert(e.path.as_str()) {
                return Err(Error::Manifest {
                    line: i + 1,
                    reason: format!("duplicate path {:?}", e.path),
                });
            }
        }
        Ok(Self {
            root: root.into(),
            entries,
        })
    }

    /// Parses `path,label` lines; the label follows the last comma.
    pub fn parse(text: &str, root: impl Into<PathBuf>) -> Result<Self> {
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (path, label) = line.rsplit_once(',').ok_or_else(|| Error::Manifest {
                line: i + 1,
                reason: "expected `path,label`".into(),
            })?;
            let (path, label) = (path.trim(), label.trim());
            if path.is_empty() || label.is_empty() {
                return Err(Error::Manifest {
                    line: i + 1,
                    reason: "empty path or label".into(),
                });
            }
            if !seen.insert(path.to_owned()) {
                return Err(Error::Manifest {
                    line: i + 1,
                    reason: format!("duplicate path {path:?}"),
                });
            }
            entries.push(ManifestEntry::new(path, label));
        }
        Ok(Self {
            root: root.into(),
            entries,
        })
    }

    /// Reads a manifest file; relative paths resolve against its directory.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, root)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.path);
            out.push(',');
            out.push_str(&e.label);
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.label.as_str()).collect()
    }

    pub fn label_counts(&self) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for e in &self.entries {
            *counts.entry(e.label.as_str()).or_insert(0) += 1;
        }
        counts
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }
}

fn check_field(value: &str, what: &str, line: usize) -> Result<()> {
    if value.is_empty() || value.trim() != value || value.contains(['\n', '\r']) {
        return Err(Error::Manifest {
            line,
            reason: format!("{what} {value:?} is empty or has surrounding whitespace"),
        });
    }
    Ok(())
}

/// Luma of an RGB triple in `[0, 1]`.
pub fn luma(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

/// Converts a decoded image to a `[0, 1]` grayscale raster.
pub fn grayscale(img: &DynamicImage) -> Result<ImageGrid> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values: Vec<f64> = if img.color().has_color() {
        img.to_rgb16()
            .pixels()
            .map(|p| {
                let [r, g, b] = p.0.map(|v| f64::from(v) / 65535.0);
                luma(r, g, b)
            })
            .collect()
    } else {
        img.to_luma16()
            .pixels()
            .map(|p| f64::from(p.0[0]) / 65535.0)
            .collect()
    };
    ImageGrid::new(h, w, values)
}

/// Loads a PNG or binary PGM file as a grayscale raster in `[0, 1]`.
pub fn load_grayscale(path: impl AsRef<Path>) -> Result<ImageGrid> {
    let path = path.as_ref();
    let ingestion = |reason: String| Error::Ingestion {
        path: path.to_path_buf(),
        reason,
    };
    let img = image::ImageReader::open(path)
        .map_err(|e| ingestion(e.to_string()))?
        .with_guessed_format()
        .map_err(|e| ingestion(e.to_string()))?
        .decode()
        .map_err(|e| ingestion(e.to_string()))?;
    grayscale(&img).map_err(|e| ingestion(e.to_string()))
}

/// Central `size × size` window, top-left at `(⌊(H−size)/2⌋, ⌊(W−size)/2⌋)`.
pub fn center_crop(img: &ImageGrid, size: usize) -> Result<ImageGrid> {
    let (h, w) = img.dims();
    if size == 0 || h < size || w < size {
        return Err(Error::Crop {
            height: h,
            width: w,
            size,
        });
    }
    let (r0, c0) = ((h - size) / 2, (w - size) / 2);
    ImageGrid::from_fn(size, size, |r, c| img.get(r0 + r, c0 + c))
}

/// Loads and crops every manifest entry in parallel. On failure the error of
/// the earliest failing entry is returned.
pub fn load_dataset(manifest: &DatasetManifest, crop: usize) -> Result<Vec<ImageGrid>> {
    let loaded: Vec<Result<ImageGrid>> = manifest
        .entries
        .par_iter()
        .map(|e| {
            let path = manifest.resolve(e);
            let img = load_grayscale(&path)?;
            center_crop(&img, crop).map_err(|err| Error::Ingestion {
                path,
                reason: err.to_string(),
            })
        })
        .collect();
    loaded.into_iter().collect()
}

/// Writes a raster as an 8-bit grayscale PNG, clamping to `[0, 1]`.
pub fn save_png8(img: &ImageGrid, path: impl AsRef<Path>) -> Result<()> {
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_fn(img.width() as u32, img.height() as u32, |x, y| {
            Luma([(img.get(y as usize, x as usize).clamp(0.0, 1.0) * 255.0).round() as u8])
        });
    buf.save(path.as_ref()).map_err(|e| Error::Ingestion {
        path: path.as_ref().to_path_buf(),
        reason: e.to_string(),
    })
}

/// Writes a raster as a 16-bit grayscale PNG, clamping to `[0, 1]`.
pub fn save_png16(img: &ImageGrid, path: impl AsRef<Path>) -> Result<()> {
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_fn(img.width() as u32, img.height() as u32, |x, y| {
            Luma([(img.get(y as usize, x as usize).clamp(0.0, 1.0) * 65535.0).round() as u16])
        });
    buf.save(path.as_ref()).map_err(|e| Error::Ingestion {
        path: path.as_ref().to_path_buf(),
        reason: e.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthParams {
    pub n_classes: usize,
    pub n_per_class: usize,
    pub size: usize,
    pub seed: u64,
}

impl SynthParams {
    fn validate(&self) -> Result<()> {
        if !(2..=8).contains(&self.n_classes) {
            return Err(Error::InvalidConfig(format!(
                "synthetic class count must be in 2..=8, got {}",
                self.n_classes
            )));
        }
        if self.size == 0 || !self.size.is_multiple_of(8) {
            return Err(Error::InvalidConfig(format!(
                "synthetic image size must be a positive multiple of 8, got {}",
                self.size
            )));
        }
        Ok(())
    }
}

/// Radial band of the synthetic textures in rad/sample.
pub const SYNTH_BAND: (f64, f64) = (PI / 8.0, PI / 2.0);

pub fn synth_class_label(class: usize) -> String {
    format!("class{class}")
}

/// Orientation of class `class`, in `[0, π)`.
pub fn wedge_angle(class: usize, n_classes: usize) -> f64 {
    class as f64 * PI / n_classes as f64
}

/// Whether frequency `(ξ₁, ξ₂)` lies in the class wedge (angle modulo π,
/// measured from the ξ₂ axis) and the radial band.
pub fn in_wedge(xi1: f64, xi2: f64, class: usize, n_classes: usize) -> bool {
    let r = xi1.hypot(xi2);
    if r < SYNTH_BAND.0 || r > SYNTH_BAND.1 {
        return false;
    }
    let theta = xi1.atan2(xi2).rem_euclid(PI);
    let diff = (theta - wedge_angle(class, n_classes)).rem_euclid(PI);
    diff.min(PI - diff) <= PI / (2.0 * n_classes as f64)
}

/// One texture sample: wedge-filtered white noise, zero mean, unit variance.
pub fn synth_texture(class: usize, index: usize, params: &SynthParams) -> Result<ImageGrid> {
    params.validate()?;
    if class >= params.n_classes {
        return Err(Error::InvalidConfig(format!(
            "class {class} out of range for {} classes",
            params.n_classes
        )));
    }
    let n = params.size;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(((class as u64) << 32) | index as u64);
    let noise = ImageGrid::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng))?;
    let mask = FrequencyLattice::square(n).field(|_, _, xi1, xi2| {
        if in_wedge(xi1, xi2, class, params.n_classes) {
            1.0
        } else {
            0.0
        }
    });
    let textured = filter(&noise, &mask)?;
    let count = (n * n) as f64;
    let mean = textured.values().iter().sum::<f64>() / count;
    let var = textured
        .values()
        .iter()
        .map(|v| (v - mean).powi(2))
        .sum::<f64>()
        / count;
    let scale = if var > 0.0 { var.sqrt().recip() } else { 0.0 };
    Ok(textured.map(|v| (v - mean) * scale))
}

/// Maps a unit-variance texture into `[0, 1]` for storage.
pub fn texture_to_intensity(img: &ImageGrid) -> ImageGrid {
    img.map(|v| (0.5 + v / 8.0).clamp(0.0, 1.0))
}

/// A generated dataset kept in memory.
#[derive(Debug, Clone)]
pub struct SyntheticSet {
    pub manifest: DatasetManifest,
    /// Unit-variance textures in manifest order.
    pub images: Vec<ImageGrid>,
}

impl SyntheticSet {
    /// Writes 16-bit PNGs and `manifest.csv` under `dir`, returning the
    /// manifest rooted there.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<DatasetManifest> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        for (entry, img) in self.manifest.entries.iter().zip(&self.images) {
            let path = dir.join(&entry.path);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            save_png16(&texture_to_intensity(img), &path)?;
        }
        let manifest = DatasetManifest::new(dir, self.manifest.entries.clone())?;
        manifest.write(dir.join(MANIFEST_FILE))?;
        Ok(manifest)
    }
}

/// Generates `n_classes × n_per_class` oriented textures, class-major.
pub fn synth_textures(params: &SynthParams) -> Result<SyntheticSet> {
    params.validate()?;
    let jobs: Vec<(usize, usize)> = (0..params.n_classes)
        .flat_map(|c| (0..params.n_per_class).map(move |i| (c, i)))
        .collect();
    let images = jobs
        .par_iter()
        .map(|&(c, i)| synth_texture(c, i, params))
        .collect::<Result<Vec<_>>>()?;
    let entries = jobs
        .iter()
        .map(|&(c, i)| {
            let label = synth_class_label(c);
            ManifestEntry::new(format!("{label}/{i:04}.png"), label)
        })
        .collect();
    Ok(SyntheticSet {
        manifest: DatasetManifest::new(".", entries)?,
        images,
    })
}
