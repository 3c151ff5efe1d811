//! Periodic 2D DFT engine.
//!
//! Every convolution in the crate is circular and runs through this module as
//! a pointwise product on the DFT lattice. Frequencies are radians per sample:
//! bin `i` of an axis of length `n` maps to `2πk/n` with
//! `k ∈ [-⌊n/2⌋, ⌈n/2⌉)`, so the Nyquist bin of an even axis sits at `-π`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Imaginary energy (relative) tolerated by [`inverse_dft`] before the
/// spectrum is rejected as non-conjugate-symmetric.
pub const IMAGINARY_TOLERANCE: f64 = 1e-10;

/// Real-valued raster, row-major. Row index is the first (vertical)
/// coordinate, column index the second.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl ImageGrid {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height < 2 || width < 2 {
            return Err(Error::InvalidInput(format!(
                "image must be at least 2x2, got {height}x{width}"
            )));
        }
        if values.len() != height * width {
            return Err(Error::InvalidInput(format!(
                "expected {} samples for {height}x{width}, got {}",
                height * width,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite sample at ({}, {})",
                pos / width,
                pos % width
            )));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Self::new(height, width, values)
    }

    /// Constructor for rasters derived from already-validated ones.
    pub(crate) fn from_parts(height: usize, width: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), height * width);
        Self {
            height,
            width,
            values,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Sum of squared samples.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_parts(
            self.height,
            self.width,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Keeps every `rate`-th row and column, starting at index 0.
    pub fn decimate(&self, rate: usize) -> Result<Self> {
        if rate == 0 || !self.height.is_multiple_of(rate) || !self.width.is_multiple_of(rate) {
            return Err(Error::InvalidConfig(format!(
                "{}x{} raster is not divisible by rate {rate}",
                self.height, self.width
            )));
        }
        if rate == 1 {
            return Ok(self.clone());
        }
        let (h, w) = (self.height / rate, self.width / rate);
        let mut values = Vec::with_capacity(h * w);
        for r in 0..h {
            let row = &self.values[r * rate * self.width..][..self.width];
            values.extend(row.iter().step_by(rate));
        }
        Ok(Self::from_parts(h, w, values))
    }

    /// Quarter-turn about the lattice origin on the periodic grid:
    /// `out(x₁, x₂) = in(x₂, -x₁ mod n)`. Requires a square raster.
    ///
    /// Anchoring at the origin makes the rotation commute with decimation,
    /// which keeps index 0 of every axis.
    pub fn rotate_quarter(&self) -> Result<Self> {
        if self.height != self.width {
            return Err(Error::InvalidInput(format!(
                "quarter rotation needs a square raster, got {}x{}",
                self.height, self.width
            )));
        }
        let n = self.height;
        Ok(Self::from_parts(
            n,
            n,
            (0..n * n)
                .map(|i| {
                    let (r, c) = (i / n, i % n);
                    self.get(c, (n - r) % n)
                })
                .collect(),
        ))
    }
}

/// Radian frequency lattice of an `height × width` DFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrequencyLattice {
    pub height: usize,
    pub width: usize,
}

impl FrequencyLattice {
    pub fn new(height: usize, width: usize) -> Self {
        Self { height, width }
    }

    pub fn square(size: usize) -> Self {
        Self::new(size, size)
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Signed integer frequency index of bin `i` on an axis of length `n`.
    pub fn signed_index(i: usize, n: usize) -> i64 {
        if i < n.div_ceil(2) {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// Radian frequency of bin `i` on an axis of length `n`.
    pub fn axis_frequency(i: usize, n: usize) -> f64 {
        2.0 * PI * Self::signed_index(i, n) as f64 / n as f64
    }

    /// `(ξ₁, ξ₂)` of bin `(row, col)`.
    pub fn xi(&self, row: usize, col: usize) -> (f64, f64) {
        (
            Self::axis_frequency(row, self.height),
            Self::axis_frequency(col, self.width),
        )
    }

    pub fn radius(&self, row: usize, col: usize) -> f64 {
        let (a, b) = self.xi(row, col);
        a.hypot(b)
    }

    pub fn is_nyquist_row(&self, row: usize) -> bool {
        self.height.is_multiple_of(2) && row == self.height / 2
    }

    pub fn is_nyquist_col(&self, col: usize) -> bool {
        self.width.is_multiple_of(2) && col == self.width / 2
    }

    /// Evaluates `f(row, col, ξ₁, ξ₂)` on every bin.
    pub fn field<T: MultiplierValue>(
        &self,
        mut f: impl FnMut(usize, usize, f64, f64) -> T,
    ) -> MultiplierField<T> {
        let mut values = Vec::with_capacity(self.len());
        for r in 0..self.height {
            let xi1 = Self::axis_frequency(r, self.height);
            for c in 0..self.width {
                let xi2 = Self::axis_frequency(c, self.width);
                values.push(f(r, c, xi1, xi2));
            }
        }
        MultiplierField::new(*self, values)
    }
}

/// Scalar types usable as Fourier multipliers.
pub trait MultiplierValue: Copy + Send + Sync {
    fn to_complex(self) -> Complex64;
    fn magnitude(self) -> f64;
}

impl MultiplierValue for f64 {
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl MultiplierValue for Complex64 {
    fn to_complex(self) -> Complex64 {
        self
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// A multiplier sampled on a frequency lattice (DFT bin order).
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierField<T> {
    lattice: FrequencyLattice,
    values: Vec<T>,
    sup: f64,
}

pub type RealField = MultiplierField<f64>;
pub type ComplexField = MultiplierField<Complex64>;

impl<T: MultiplierValue> MultiplierField<T> {
    pub fn new(lattice: FrequencyLattice, values: Vec<T>) -> Self {
        assert_eq!(values.len(), lattice.len(), "multiplier size mismatch");
        let sup = values.iter().map(|v| v.magnitude()).fold(0.0, f64::max);
        Self {
            lattice,
            values,
            sup,
        }
    }

    pub fn constant(lattice: FrequencyLattice, value: T) -> Self {
        Self::new(lattice, vec![value; lattice.len()])
    }

    pub fn lattice(&self) -> FrequencyLattice {
        self.lattice
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.values[row * self.lattice.width + col]
    }

    /// Largest magnitude over the lattice.
    pub fn sup_norm(&self) -> f64 {
        self.sup
    }
}

impl RealField {
    /// Pointwise product of two real fields on the same lattice.
    pub fn product(&self, other: &RealField) -> RealField {
        assert_eq!(self.lattice, other.lattice, "multiplier lattice mismatch");
        MultiplierField::new(
            self.lattice,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        )
    }

    /// Real field times complex field.
    pub fn times_complex(&self, other: &ComplexField) -> ComplexField {
        assert_eq!(self.lattice, other.lattice, "multiplier lattice mismatch");
        MultiplierField::new(
            self.lattice,
            self.values
                .iter()
                .zip(other.values())
                .map(|(&a, &b)| b * a)
                .collect(),
        )
    }
}

/// Unnormalized complex spectrum on a frequency lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGrid {
    height: usize,
    width: usize,
    values: Vec<Complex64>,
    /// Spatial-domain norm bound of the signal this spectrum came from; the
    /// yardstick for imaginary residue in [`inverse_dft`].
    scale: f64,
}

impl SpectralGrid {
    pub fn new(height: usize, width: usize, values: Vec<Complex64>) -> Result<Self> {
        if height < 2 || width < 2 || values.len() != height * width {
            return Err(Error::InvalidInput(format!(
                "spectrum of {} bins does not fit {height}x{width}",
                values.len()
            )));
        }
        let scale = spectral_norm(&values) / ((height * width) as f64).sqrt();
        Ok(Self {
            height,
            width,
            values,
            scale,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn lattice(&self) -> FrequencyLattice {
        FrequencyLattice::new(self.height, self.width)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.values[row * self.width + col]
    }
}

fn spectral_norm(values: &[Complex64]) -> f64 {
    values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Unnormalized in-place 2D transform, rows then columns.
fn transform_2d(data: &mut [Complex64], height: usize, width: usize, inverse: bool) {
    let rows = plan(width, inverse);
    let mut scratch = vec![Complex64::default(); rows.get_inplace_scratch_len()];
    rows.process_with_scratch(data, &mut scratch);

    let cols = plan(height, inverse);
    let mut scratch = vec![Complex64::default(); cols.get_inplace_scratch_len()];
    let mut column = vec![Complex64::default(); height];
    for c in 0..width {
        for (r, slot) in column.iter_mut().enumerate() {
            *slot = data[r * width + c];
        }
        cols.process_with_scratch(&mut column, &mut scratch);
        for (r, v) in column.iter().enumerate() {
            data[r * width + c] = *v;
        }
    }
}

/// Unnormalized forward DFT; the DC bin holds the sum of all samples.
pub fn forward_dft(img: &ImageGrid) -> SpectralGrid {
    let (h, w) = img.dims();
    let mut data: Vec<Complex64> = img
        .values()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    transform_2d(&mut data, h, w, false);
    SpectralGrid {
        height: h,
        width: w,
        values: data,
        scale: img.energy().sqrt(),
    }
}

/// Inverse DFT (normalized by `1/(h·w)`) returning the real part.
///
/// The imaginary residue is measured as `‖Im‖₂ / max(‖out‖₂, scale)`, where
/// `scale` bounds the norm of the signal the spectrum was derived from.
pub fn inverse_dft(spec: &SpectralGrid) -> Result<ImageGrid> {
    let (h, w) = (spec.height, spec.width);
    let mut data = spec.values.clone();
    transform_2d(&mut data, h, w, true);
    let norm = 1.0 / (h * w) as f64;
    let mut re_energy = 0.0;
    let mut im_energy = 0.0;
    let values: Vec<f64> = data
        .iter()
        .map(|z| {
            let (re, im) = (z.re * norm, z.im * norm);
            re_energy += re * re;
            im_energy += im * im;
            re
        })
        .collect();
    let reference = (re_energy + im_energy).sqrt().max(spec.scale);
    let residue = im_energy.sqrt();
    if residue > IMAGINARY_TOLERANCE * reference {
        return Err(Error::SymmetryViolation {
            residue: residue / reference,
        });
    }
    Ok(ImageGrid::from_parts(h, w, values))
}

/// Bin-wise product of a spectrum with a multiplier field (circular
/// convolution in space).
pub fn apply_multiplier<T: MultiplierValue>(
    spec: &SpectralGrid,
    multiplier: &MultiplierField<T>,
) -> Result<SpectralGrid> {
    let lattice = multiplier.lattice();
    if lattice.height != spec.height || lattice.width != spec.width {
        return Err(Error::InvalidInput(format!(
            "multiplier is {}x{} but spectrum is {}x{}",
            lattice.height, lattice.width, spec.height, spec.width
        )));
    }
    let values = spec
        .values
        .iter()
        .zip(multiplier.values())
        .map(|(z, m)| z * m.to_complex())
        .collect();
    Ok(SpectralGrid {
        height: spec.height,
        width: spec.width,
        values,
        scale: spec.scale * multiplier.sup_norm(),
    })
}

/// Filters a real image by a multiplier and returns the real result.
pub fn filter<T: MultiplierValue>(
    img: &ImageGrid,
    multiplier: &MultiplierField<T>,
) -> Result<ImageGrid> {
    inverse_dft(&apply_multiplier(&forward_dft(img), multiplier)?)
}
