//! Two-layer monogenic wavelet scattering.
//!
//! Layer `m` propagates `U[j, l] f = |(band[j] · m_l) * f|` decimated by
//! `rate_u`, where `m_0 = 1` and `m_1, m_2` are the Riesz multipliers. Every
//! layer's output is the propagated raster low-passed by `L₁` on its own grid
//! and decimated by `rate_s`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filterbank::{lowpass_at_scale, BandComposition, MonogenicFilterBank};
use crate::monogenic::RieszMultipliers;
use crate::spectral::{
    apply_multiplier, forward_dft, inverse_dft, FrequencyLattice, ImageGrid, RealField,
    SpectralGrid,
};

/// Isotropic channel or one of the two Riesz channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Component {
    Isotropic = 0,
    /// `R₁`, along rows.
    Vertical = 1,
    /// `R₂`, along columns.
    Horizontal = 2,
}

impl Component {
    pub const ALL: [Component; 3] = [
        Component::Isotropic,
        Component::Vertical,
        Component::Horizontal,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(l: usize) -> Option<Self> {
        Self::ALL.get(l).copied()
    }

    /// Image of this channel under a quarter turn (`R₁ ↔ R₂`).
    pub fn rotated(self) -> Self {
        match self {
            Component::Isotropic => Component::Isotropic,
            Component::Vertical => Component::Horizontal,
            Component::Horizontal => Component::Vertical,
        }
    }
}

/// Position of one output raster in the cascade.
///
/// The derived ordering is the canonical feature order: for layer 2 it runs
/// `j1`, `l1`, `j2`, `l2` from slowest to fastest, i.e. row-major over the
/// `3J × 3J` block mosaic with block row `3(j1-1) + l1` and block column
/// `3(j2-1) + l2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PathIndex {
    Zeroth,
    First {
        j: usize,
        l: Component,
    },
    Second {
        j1: usize,
        l1: Component,
        j2: usize,
        l2: Component,
    },
}

impl PathIndex {
    pub fn layer(&self) -> usize {
        match self {
            PathIndex::Zeroth => 0,
            PathIndex::First { .. } => 1,
            PathIndex::Second { .. } => 2,
        }
    }

    /// The path a quarter-turned input maps this one to.
    pub fn rotated(self) -> Self {
        match self {
            PathIndex::Zeroth => PathIndex::Zeroth,
            PathIndex::First { j, l } => PathIndex::First { j, l: l.rotated() },
            PathIndex::Second { j1, l1, j2, l2 } => PathIndex::Second {
                j1,
                l1: l1.rotated(),
                j2,
                l2: l2.rotated(),
            },
        }
    }
}

impl fmt::Display for PathIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathIndex::Zeroth => write!(f, "s0"),
            PathIndex::First { j, l } => write!(f, "s1 l={} j={j}", l.index()),
            PathIndex::Second { j1, l1, j2, l2 } => {
                write!(f, "s2 l1={} l2={} j1={j1} j2={j2}", l1.index(), l2.index())
            }
        }
    }
}

pub fn layer1_paths(scales: usize) -> Vec<PathIndex> {
    let mut paths: Vec<_> = (1..=scales)
        .flat_map(|j| Component::ALL.map(|l| PathIndex::First { j, l }))
        .collect();
    paths.sort();
    paths
}

pub fn layer2_paths(scales: usize) -> Vec<PathIndex> {
    let mut paths = Vec::with_capacity(9 * scales * scales);
    for j1 in 1..=scales {
        for l1 in Component::ALL {
            for j2 in 1..=scales {
                for l2 in Component::ALL {
                    paths.push(PathIndex::Second { j1, l1, j2, l2 });
                }
            }
        }
    }
    paths
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringConfig {
    pub scales: usize,
    /// Decimation after the modulus.
    pub rate_u: usize,
    /// Decimation after averaging.
    pub rate_s: usize,
    /// Cascade depth, 1 or 2.
    pub layers: usize,
    pub composition: BandComposition,
    /// Keep the propagated `u` rasters in the output.
    pub retain_propagation: bool,
}

impl Default for ScatteringConfig {
    fn default() -> Self {
        Self {
            scales: 4,
            rate_u: 2,
            rate_s: 2,
            layers: 2,
            composition: BandComposition::Cascade,
            retain_propagation: false,
        }
    }
}

impl ScatteringConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scales == 0 {
            return Err(Error::InvalidConfig(
                "scale count must be at least 1".into(),
            ));
        }
        if self.rate_u == 0 || self.rate_s == 0 {
            return Err(Error::InvalidConfig(
                "subsampling rates must be at least 1".into(),
            ));
        }
        if !(1..=2).contains(&self.layers) {
            return Err(Error::InvalidConfig(format!(
                "layer count must be 1 or 2, got {}",
                self.layers
            )));
        }
        Ok(())
    }

    /// Input sizes must be multiples of this.
    pub fn size_divisor(&self) -> usize {
        self.rate_u.pow(self.layers as u32) * self.rate_s
    }

    /// Checks that a `size × size` input runs through the cascade.
    pub fn check_size(&self, size: usize) -> Result<()> {
        self.validate()?;
        let divisor = self.size_divisor();
        if size == 0 || !size.is_multiple_of(divisor) {
            return Err(Error::InvalidConfig(format!(
                "input size {size} is not divisible by {divisor} (rate_u^layers * rate_s)"
            )));
        }
        let min = MonogenicFilterBank::min_grid_size(self.scales);
        for layer in 0..self.layers {
            let grid = size / self.rate_u.pow(layer as u32);
            if !grid.is_multiple_of(2) || grid < min {
                return Err(Error::Resolution {
                    size: grid,
                    scales: self.scales,
                    min,
                });
            }
        }
        Ok(())
    }

    /// Side of every raster at `layer` (`s0`, `s1` or `s2`).
    pub fn output_side(&self, size: usize, layer: usize) -> usize {
        size / self.rate_u.pow(layer as u32) / self.rate_s
    }

    pub fn path_count(&self, layer: usize) -> usize {
        (3 * self.scales).pow(layer as u32)
    }

    /// Length of [`flatten_layer2`] for a `size × size` input.
    pub fn feature_len(&self, size: usize) -> Result<usize> {
        self.check_size(size)?;
        if self.layers < 2 {
            return Err(Error::State("configuration has no second layer".into()));
        }
        Ok(self.path_count(2) * self.output_side(size, 2).pow(2))
    }
}

/// Band and Riesz multipliers on one propagation grid.
#[derive(Debug, Clone)]
pub struct LayerFilters {
    pub bank: Arc<MonogenicFilterBank>,
    pub riesz: Arc<RieszMultipliers>,
}

impl LayerFilters {
    pub fn new(size: usize, scales: usize, composition: BandComposition) -> Result<Self> {
        let bank = MonogenicFilterBank::shared(size, scales, composition)?;
        let riesz = RieszMultipliers::shared(bank.lattice());
        Ok(Self { bank, riesz })
    }

    pub fn grid_size(&self) -> usize {
        self.bank.grid_size()
    }
}

/// `L₁` on a `size × size` grid.
pub fn averaging_filter(size: usize) -> Arc<RealField> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<RealField>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().expect("averaging cache poisoned");
    Arc::clone(guard.entry(size).or_insert_with(|| {
        Arc::new(
            lowpass_at_scale(FrequencyLattice::square(size), 1, 1)
                .expect("scale 1 is always in range"),
        )
    }))
}

fn propagate_spectrum(
    spec: &SpectralGrid,
    filters: &LayerFilters,
    scale: usize,
    component: Component,
    rate: usize,
) -> Result<ImageGrid> {
    let banded = apply_multiplier(spec, filters.bank.band(scale)?)?;
    let filtered = match filters.riesz.component(component.index()) {
        None => banded,
        Some(m) => apply_multiplier(&banded, m)?,
    };
    inverse_dft(&filtered)?.map(f64::abs).decimate(rate)
}

fn smooth_spectrum(spec: &SpectralGrid, rate: usize) -> Result<ImageGrid> {
    let averaging = averaging_filter(spec.height());
    inverse_dft(&apply_multiplier(spec, &averaging)?)?.decimate(rate)
}

/// One propagation step `|(band[j]·m_l) * f|`, decimated by `rate`.
pub fn propagate(
    input: &ImageGrid,
    filters: &LayerFilters,
    scale: usize,
    component: Component,
    rate: usize,
) -> Result<ImageGrid> {
    let n = filters.grid_size();
    if input.dims() != (n, n) {
        return Err(Error::InvalidConfig(format!(
            "filters built for {n}x{n}, input is {}x{}",
            input.height(),
            input.width()
        )));
    }
    if rate == 0 || !n.is_multiple_of(rate) {
        return Err(Error::InvalidConfig(format!(
            "input size {n} is not divisible by rate {rate}"
        )));
    }
    propagate_spectrum(&forward_dft(input), filters, scale, component, rate)
}

/// `L₁` low-pass on `u`'s own grid, decimated by `rate`.
pub fn smooth_output(u: &ImageGrid, rate: usize) -> Result<ImageGrid> {
    if u.height() != u.width() {
        return Err(Error::InvalidConfig(format!(
            "averaging needs a square raster, got {}x{}",
            u.height(),
            u.width()
        )));
    }
    if rate == 0 || !u.height().is_multiple_of(rate) {
        return Err(Error::InvalidConfig(format!(
            "raster size {} is not divisible by rate {rate}",
            u.height()
        )));
    }
    smooth_spectrum(&forward_dft(u), rate)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringOutput {
    pub config: ScatteringConfig,
    pub input_size: usize,
    pub s0: ImageGrid,
    pub s1: BTreeMap<PathIndex, ImageGrid>,
    pub s2: BTreeMap<PathIndex, ImageGrid>,
    pub u1: Option<BTreeMap<PathIndex, ImageGrid>>,
    pub u2: Option<BTreeMap<PathIndex, ImageGrid>>,
}

impl ScatteringOutput {
    pub fn get(&self, path: &PathIndex) -> Option<&ImageGrid> {
        match path {
            PathIndex::Zeroth => Some(&self.s0),
            PathIndex::First { .. } => self.s1.get(path),
            PathIndex::Second { .. } => self.s2.get(path),
        }
    }

    /// All output rasters in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (PathIndex, &ImageGrid)> {
        std::iter::once((PathIndex::Zeroth, &self.s0))
            .chain(self.s1.iter().map(|(p, g)| (*p, g)))
            .chain(self.s2.iter().map(|(p, g)| (*p, g)))
    }
}

struct FirstLayerPath {
    path: PathIndex,
    u1: ImageGrid,
    s1: ImageGrid,
    second: Vec<(PathIndex, ImageGrid, ImageGrid)>,
}

/// Full cascade on a square image.
pub fn scatter(img: &ImageGrid, cfg: &ScatteringConfig) -> Result<ScatteringOutput> {
    if img.height() != img.width() {
        return Err(Error::InvalidConfig(format!(
            "scattering needs a square image, got {}x{}",
            img.height(),
            img.width()
        )));
    }
    let n = img.height();
    cfg.check_size(n)?;

    let first = LayerFilters::new(n, cfg.scales, cfg.composition)?;
    let second = if cfg.layers >= 2 {
        Some(LayerFilters::new(
            n / cfg.rate_u,
            cfg.scales,
            cfg.composition,
        )?)
    } else {
        None
    };

    let spec0 = forward_dft(img);
    let s0 = smooth_spectrum(&spec0, cfg.rate_s)?;

    let layer: Vec<FirstLayerPath> = layer1_paths(cfg.scales)
        .into_par_iter()
        .map(|path| -> Result<FirstLayerPath> {
            let PathIndex::First { j, l } = path else {
                unreachable!("layer1_paths yields first-layer paths")
            };
            let u1 = propagate_spectrum(&spec0, &first, j, l, cfg.rate_u)?;
            let spec1 = forward_dft(&u1);
            let s1 = smooth_spectrum(&spec1, cfg.rate_s)?;
            let second = match &second {
                None => Vec::new(),
                Some(filters) => (1..=cfg.scales)
                    .flat_map(|j2| Component::ALL.map(|l2| (j2, l2)))
                    .collect::<Vec<_>>()
                    .into_par_iter()
                    .map(|(j2, l2)| {
                        let u2 = propagate_spectrum(&spec1, filters, j2, l2, cfg.rate_u)?;
                        let s2 = smooth_output(&u2, cfg.rate_s)?;
                        let path = PathIndex::Second {
                            j1: j,
                            l1: l,
                            j2,
                            l2,
                        };
                        Ok((path, u2, s2))
                    })
                    .collect::<Result<Vec<_>>>()?,
            };
            Ok(FirstLayerPath {
                path,
                u1,
                s1,
                second,
            })
        })
        .collect::<Result<_>>()?;

    let mut out = ScatteringOutput {
        config: cfg.clone(),
        input_size: n,
        s0,
        s1: BTreeMap::new(),
        s2: BTreeMap::new(),
        u1: cfg.retain_propagation.then(BTreeMap::new),
        u2: (cfg.retain_propagation && cfg.layers >= 2).then(BTreeMap::new),
    };
    for entry in layer {
        out.s1.insert(entry.path, entry.s1);
        if let Some(u1) = out.u1.as_mut() {
            u1.insert(entry.path, entry.u1);
        }
        for (path, u2, s2) in entry.second {
            out.s2.insert(path, s2);
            if let Some(map) = out.u2.as_mut() {
                map.insert(path, u2);
            }
        }
    }
    Ok(out)
}

/// Concatenation of all layer-2 rasters in canonical path order.
pub fn flatten_layer2(out: &ScatteringOutput) -> Result<Vec<f64>> {
    if out.s2.is_empty() {
        return Err(Error::State("scattering output has no second layer".into()));
    }
    let len = out.s2.values().map(|g| g.values().len()).sum();
    let mut features = Vec::with_capacity(len);
    for raster in out.s2.values() {
        features.extend_from_slice(raster.values());
    }
    Ok(features)
}

/// Scatters and flattens the second layer.
pub fn layer2_features(img: &ImageGrid, cfg: &ScatteringConfig) -> Result<Vec<f64>> {
    flatten_layer2(&scatter(img, cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(n: usize, seed: u64) -> ImageGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageGrid::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)).unwrap()
    }

    #[test]
    fn path_order_follows_mosaic_blocks() {
        let paths = layer2_paths(4);
        assert_eq!(paths.len(), 144);
        let mut sorted = paths.clone();
        sorted.sort();
        assert_eq!(sorted, paths);
        for (idx, path) in paths.iter().enumerate() {
            let (i, j) = (idx / 12 + 1, idx % 12 + 1);
            let expected = PathIndex::Second {
                l1: Component::from_index((i - 1) % 3).unwrap(),
                l2: Component::from_index((j - 1) % 3).unwrap(),
                j1: (i - 1) / 3 + 1,
                j2: (j - 1) / 3 + 1,
            };
            assert_eq!(*path, expected);
        }
        assert_eq!(layer1_paths(4).len(), 12);
    }

    #[test]
    fn zero_and_constant_images_propagate_to_zero() {
        let filters = LayerFilters::new(32, 4, BandComposition::Cascade).unwrap();
        for value in [0.0, 1.7] {
            let img = ImageGrid::filled(32, 32, value).unwrap();
            for j in 1..=4 {
                for l in Component::ALL {
                    let u = propagate(&img, &filters, j, l, 2).unwrap();
                    assert!(u.values().iter().all(|v| v.abs() < 1e-12));
                }
            }
        }
    }

    #[test]
    fn propagate_halves_size() {
        let filters = LayerFilters::new(200, 4, BandComposition::Cascade).unwrap();
        let u = propagate(&random_image(200, 1), &filters, 2, Component::Vertical, 2).unwrap();
        assert_eq!(u.dims(), (100, 100));
        assert!(u.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn propagate_rejects_mismatch() {
        let filters = LayerFilters::new(32, 4, BandComposition::Cascade).unwrap();
        assert!(propagate(&random_image(64, 1), &filters, 1, Component::Isotropic, 2).is_err());
        assert!(propagate(&random_image(32, 1), &filters, 1, Component::Isotropic, 3).is_err());
    }

    #[test]
    fn smoothing_keeps_constants() {
        let out = smooth_output(&ImageGrid::filled(50, 50, 0.25).unwrap(), 2).unwrap();
        assert_eq!(out.dims(), (25, 25));
        assert!(out.values().iter().all(|v| (v - 0.25).abs() < 1e-12));
        let zero = smooth_output(&ImageGrid::filled(8, 8, 0.0).unwrap(), 2).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        assert!(smooth_output(&ImageGrid::filled(9, 9, 0.0).unwrap(), 2).is_err());
    }

    #[test]
    fn paper_dimensions() {
        let cfg = ScatteringConfig::default();
        let out = scatter(&random_image(200, 3), &cfg).unwrap();
        assert_eq!(out.s0.dims(), (100, 100));
        assert_eq!(out.s1.len(), 12);
        assert!(out.s1.values().all(|g| g.dims() == (50, 50)));
        assert_eq!(out.s2.len(), 144);
        assert!(out.s2.values().all(|g| g.dims() == (25, 25)));
        assert_eq!(flatten_layer2(&out).unwrap().len(), 90_000);
        assert_eq!(cfg.feature_len(200).unwrap(), 90_000);
    }

    #[test]
    fn feature_len_arithmetic() {
        let cfg = ScatteringConfig::default();
        assert_eq!(cfg.feature_len(160).unwrap(), 57_600);
        assert!(cfg.feature_len(100).is_err());
        // 64 → second-layer grid 32 is the smallest that resolves J = 4
        assert!(cfg.feature_len(64).is_ok());
        assert!(matches!(cfg.feature_len(48), Err(Error::Resolution { .. })));
    }

    #[test]
    fn zero_image_scatters_to_zero() {
        let cfg = ScatteringConfig {
            retain_propagation: true,
            ..Default::default()
        };
        let out = scatter(&ImageGrid::filled(64, 64, 0.0).unwrap(), &cfg).unwrap();
        for (_, raster) in out.iter() {
            assert!(raster.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn propagated_rasters_nonnegative_and_shaped() {
        let cfg = ScatteringConfig {
            retain_propagation: true,
            ..Default::default()
        };
        let out = scatter(&random_image(64, 4), &cfg).unwrap();
        let (u1, u2) = (out.u1.as_ref().unwrap(), out.u2.as_ref().unwrap());
        assert_eq!((u1.len(), u2.len()), (12, 144));
        assert!(u1.values().all(|g| g.dims() == (32, 32)));
        assert!(u2.values().all(|g| g.dims() == (16, 16)));
        for g in u1.values().chain(u2.values()) {
            assert!(g.values().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn single_layer_has_no_features() {
        let cfg = ScatteringConfig {
            layers: 1,
            ..Default::default()
        };
        let out = scatter(&random_image(64, 5), &cfg).unwrap();
        assert!(out.s2.is_empty());
        assert!(matches!(flatten_layer2(&out), Err(Error::State(_))));
    }

    #[test]
    fn rectangular_input_rejected() {
        let img = ImageGrid::filled(64, 32, 1.0).unwrap();
        assert!(scatter(&img, &ScatteringConfig::default()).is_err());
    }

    #[test]
    fn bit_identical_runs() {
        let img = random_image(64, 6);
        let cfg = ScatteringConfig::default();
        let a = flatten_layer2(&scatter(&img, &cfg).unwrap()).unwrap();
        let b = flatten_layer2(&scatter(&img, &cfg).unwrap()).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
