//! Gaussian radial filter bank.
//!
//! `H(ξ) = 1 - exp(-‖ξ‖²/2)`, `H_j(ξ) = H(2^{j-1} ξ)` and
//! `L_j = sqrt(1 - H_j²)`. Bands are cascaded, `band[j] = H_j · Π_{k<j} L_k`,
//! with `residual = Π_{k≤J} L_k`, so the squared responses telescope to one at
//! every frequency.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::spectral::{FrequencyLattice, RealField};

/// How band `j` is formed from the high/low-pass pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BandComposition {
    /// `band[j] = H_j · Π_{k<j} L_k` (tight frame).
    #[default]
    Cascade,
    /// `band[j] = H_j`, overlapping high-passes. Not a partition of unity.
    PlainHighpass,
}

/// `H` evaluated at radius `‖ξ‖`.
pub fn gaussian_highpass_value(radius: f64) -> f64 {
    -(-0.5 * radius * radius).exp_m1()
}

fn dilation(scale: usize) -> f64 {
    (1u64 << (scale - 1)) as f64
}

/// `H_j` at radius `‖ξ‖`.
pub fn highpass_value(scale: usize, radius: f64) -> f64 {
    gaussian_highpass_value(dilation(scale) * radius)
}

/// `L_j` at radius `‖ξ‖`, computed as `sqrt(e(2 - e))` with `e = 1 - H_j` to
/// keep `H_j² + L_j² = 1` tight near the pass band.
pub fn lowpass_value(scale: usize, radius: f64) -> f64 {
    let r = dilation(scale) * radius;
    let e = (-0.5 * r * r).exp();
    (e * (2.0 - e)).sqrt()
}

fn check_scale(scale: usize, max_scale: usize) -> Result<()> {
    if scale == 0 || scale > max_scale {
        return Err(Error::InvalidScale {
            scale,
            max: max_scale,
        });
    }
    Ok(())
}

pub fn gaussian_highpass(lattice: FrequencyLattice) -> RealField {
    lattice.field(|r, c, _, _| gaussian_highpass_value(lattice.radius(r, c)))
}

pub fn highpass_at_scale(
    lattice: FrequencyLattice,
    scale: usize,
    max_scale: usize,
) -> Result<RealField> {
    check_scale(scale, max_scale)?;
    Ok(lattice.field(|r, c, _, _| highpass_value(scale, lattice.radius(r, c))))
}

pub fn lowpass_at_scale(
    lattice: FrequencyLattice,
    scale: usize,
    max_scale: usize,
) -> Result<RealField> {
    check_scale(scale, max_scale)?;
    Ok(lattice.field(|r, c, _, _| lowpass_value(scale, lattice.radius(r, c))))
}

/// Band-pass family, residual low-pass and averaging low-pass on one square
/// grid.
#[derive(Debug, Clone)]
pub struct MonogenicFilterBank {
    scales: usize,
    grid_size: usize,
    composition: BandComposition,
    bands: Vec<RealField>,
    residual: RealField,
    averaging: RealField,
}

impl MonogenicFilterBank {
    /// Smallest grid accepted for `scales` scales.
    pub fn min_grid_size(scales: usize) -> usize {
        1usize << (scales + 1)
    }

    pub fn build(grid_size: usize, scales: usize) -> Result<Self> {
        Self::build_with(grid_size, scales, BandComposition::Cascade)
    }

    pub fn build_with(
        grid_size: usize,
        scales: usize,
        composition: BandComposition,
    ) -> Result<Self> {
        if scales == 0 || scales > 30 {
            return Err(Error::InvalidConfig(format!(
                "scale count must be in 1..=30, got {scales}"
            )));
        }
        let min = Self::min_grid_size(scales);
        if !grid_size.is_multiple_of(2) || grid_size < min {
            return Err(Error::Resolution {
                size: grid_size,
                scales,
                min,
            });
        }
        let lattice = FrequencyLattice::square(grid_size);
        let mut bands = Vec::with_capacity(scales);
        let mut passed = RealField::constant(lattice, 1.0);
        for j in 1..=scales {
            let high = highpass_at_scale(lattice, j, scales)?;
            let low = lowpass_at_scale(lattice, j, scales)?;
            bands.push(match composition {
                BandComposition::Cascade => high.product(&passed),
                BandComposition::PlainHighpass => high,
            });
            passed = match composition {
                BandComposition::Cascade => passed.product(&low),
                BandComposition::PlainHighpass => low,
            };
        }
        Ok(Self {
            scales,
            grid_size,
            composition,
            bands,
            residual: passed,
            averaging: lowpass_at_scale(lattice, 1, scales)?,
        })
    }

    /// Process-wide immutable bank for `(grid_size, scales, composition)`.
    pub fn shared(
        grid_size: usize,
        scales: usize,
        composition: BandComposition,
    ) -> Result<Arc<Self>> {
        type Cache = Mutex<HashMap<(usize, usize, BandComposition), Arc<MonogenicFilterBank>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let key = (grid_size, scales, composition);
        let cache = CACHE.get_or_init(Default::default);
        if let Some(bank) = cache.lock().expect("filter bank cache poisoned").get(&key) {
            return Ok(Arc::clone(bank));
        }
        let bank = Arc::new(Self::build_with(grid_size, scales, composition)?);
        Ok(Arc::clone(
            cache
                .lock()
                .expect("filter bank cache poisoned")
                .entry(key)
                .or_insert(bank),
        ))
    }

    pub fn scales(&self) -> usize {
        self.scales
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn composition(&self) -> BandComposition {
        self.composition
    }

    pub fn lattice(&self) -> FrequencyLattice {
        FrequencyLattice::square(self.grid_size)
    }

    /// Band-pass multiplier for scale `j ∈ 1..=J`.
    pub fn band(&self, scale: usize) -> Result<&RealField> {
        check_scale(scale, self.scales)?;
        Ok(&self.bands[scale - 1])
    }

    pub fn bands(&self) -> &[RealField] {
        &self.bands
    }

    pub fn residual(&self) -> &RealField {
        &self.residual
    }

    /// `L₁` on this grid; the per-layer averaging filter.
    pub fn averaging(&self) -> &RealField {
        &self.averaging
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{filter, ImageGrid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn highpass_closed_form() {
        assert_eq!(gaussian_highpass_value(0.0), 0.0);
        // 1 - e^{-1/2}, 1 - e^{-8}
        assert!((gaussian_highpass_value(1.0) - 0.393_469_340_287_366_6).abs() < 1e-15);
        assert!((gaussian_highpass_value(4.0) - 0.999_664_537_372_097_5).abs() < 1e-15);
        assert!((highpass_value(2, 0.5) - 0.393_469_340_287_366_6).abs() < 1e-15);
        assert_eq!(highpass_value(4, 0.0), 0.0);
    }

    #[test]
    fn lowpass_closed_form() {
        for j in 1..=4 {
            assert_eq!(lowpass_value(j, 0.0), 1.0);
        }
        // sqrt(1 - (1 - e^{-1/2})²)
        assert!((lowpass_value(1, 1.0) - 0.919_337_738_947_893_2).abs() < 1e-12);
        for i in 0..200 {
            let r = i as f64 * 0.02;
            for j in 1..=4 {
                let (h, l) = (highpass_value(j, r), lowpass_value(j, r));
                assert!((h * h + l * l - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn scale_one_matches_base_filter() {
        let lattice = FrequencyLattice::square(32);
        assert_eq!(
            highpass_at_scale(lattice, 1, 4).unwrap(),
            gaussian_highpass(lattice)
        );
    }

    #[test]
    fn scale_range_is_checked() {
        let lattice = FrequencyLattice::square(32);
        assert!(matches!(
            highpass_at_scale(lattice, 0, 4),
            Err(Error::InvalidScale { .. })
        ));
        assert!(matches!(
            lowpass_at_scale(lattice, 5, 4),
            Err(Error::InvalidScale { .. })
        ));
    }

    #[test]
    fn single_scale_bank() {
        let bank = MonogenicFilterBank::build(16, 1).unwrap();
        let lattice = bank.lattice();
        assert_eq!(
            bank.band(1).unwrap(),
            &highpass_at_scale(lattice, 1, 1).unwrap()
        );
        assert_eq!(bank.residual(), &lowpass_at_scale(lattice, 1, 1).unwrap());
    }

    #[test]
    fn resolution_error() {
        assert!(matches!(
            MonogenicFilterBank::build(16, 4),
            Err(Error::Resolution { min: 32, .. })
        ));
        assert!(MonogenicFilterBank::build(33, 4).is_err());
        assert!(MonogenicFilterBank::build(32, 4).is_ok());
    }

    #[test]
    fn paper_configuration_shape() {
        let bank = MonogenicFilterBank::build(200, 4).unwrap();
        assert_eq!(bank.bands().len(), 4);
        assert_eq!(bank.residual().values().len(), 200 * 200);
        assert_eq!(bank.averaging().values().len(), 200 * 200);
    }

    #[test]
    fn partition_of_unity() {
        for size in [32usize, 64, 200, 256] {
            let bank = MonogenicFilterBank::build(size, 4).unwrap();
            for i in 0..size * size {
                let sum: f64 = bank
                    .bands()
                    .iter()
                    .map(|b| b.values()[i].powi(2))
                    .sum::<f64>()
                    + bank.residual().values()[i].powi(2);
                assert!((sum - 1.0).abs() < 1e-12, "size {size}, bin {i}: {sum}");
            }
        }
    }

    #[test]
    fn plain_highpass_overlaps() {
        let bank = MonogenicFilterBank::build_with(64, 4, BandComposition::PlainHighpass).unwrap();
        let lattice = bank.lattice();
        assert_eq!(
            bank.band(3).unwrap(),
            &highpass_at_scale(lattice, 3, 4).unwrap()
        );
    }

    #[test]
    fn multipliers_bounded_and_radial() {
        let n = 64;
        let bank = MonogenicFilterBank::build(n, 4).unwrap();
        let fields = bank
            .bands()
            .iter()
            .chain([bank.residual(), bank.averaging()]);
        for field in fields {
            for r in 0..n {
                for c in 0..n {
                    let v = field.get(r, c);
                    assert!((0.0..=1.0).contains(&v));
                    // transposed and negated bins share the radius (away from Nyquist)
                    if r != n / 2 && c != n / 2 {
                        assert!((v - field.get(c, r)).abs() < 1e-14);
                        assert!((v - field.get((n - r) % n, (n - c) % n)).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn band_peaks_move_inward() {
        let n = 128;
        let bank = MonogenicFilterBank::build(n, 4).unwrap();
        let lattice = bank.lattice();
        let mut previous = f64::INFINITY;
        for band in bank.bands() {
            let (mut best, mut at) = (f64::NEG_INFINITY, 0.0);
            for r in 0..n {
                for c in 0..n {
                    if band.get(r, c) > best {
                        best = band.get(r, c);
                        at = lattice.radius(r, c);
                    }
                }
            }
            assert!(at <= previous, "peak radius {at} after {previous}");
            previous = at;
        }
    }

    #[test]
    fn spatial_energy_conserved() {
        let n = 32;
        let bank = MonogenicFilterBank::build(n, 4).unwrap();
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let img = ImageGrid::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)).unwrap();
            let total: f64 = bank
                .bands()
                .iter()
                .chain([bank.residual()])
                .map(|m| filter(&img, m).unwrap().energy())
                .sum();
            assert!((total - img.energy()).abs() <= 1e-10 * img.energy());
        }
    }

    #[test]
    fn shared_bank_is_cached() {
        let a = MonogenicFilterBank::shared(48, 3, BandComposition::Cascade).unwrap();
        let b = MonogenicFilterBank::shared(48, 3, BandComposition::Cascade).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }
}
