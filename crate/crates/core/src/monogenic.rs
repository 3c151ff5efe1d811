//! Riesz transform, monogenic signal and its amplitude/phase/orientation
//! decomposition.
//!
//! The monogenic signal `g + 𝕚R₁g + 𝕛R₂g` is carried as three real rasters;
//! nothing downstream multiplies two quaternions, so no quaternion type is
//! needed.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{
    apply_multiplier, forward_dft, inverse_dft, ComplexField, FrequencyLattice, ImageGrid,
};

/// Riesz multipliers `m_l(ξ) = -i ξ_l / ‖ξ‖` on one lattice.
///
/// Conventions at bins where the continuous kernel is ambiguous:
/// * DC is 0.
/// * On the Nyquist row of an even axis, `ξ₁` takes the representative
///   `-π·sgn(ξ₂)`; on the Nyquist column, `ξ₂ = +π·sgn(ξ₁)`. Conjugate-paired
///   bins then carry negated frequency vectors, so outputs stay real, and the
///   pair of rules is exchanged by a quarter turn of the lattice.
/// * Bins that are their own conjugate pair (`(N/2, 0)`, `(0, N/2)`,
///   `(N/2, N/2)`) are 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RieszMultipliers {
    pub m1: ComplexField,
    pub m2: ComplexField,
}

impl RieszMultipliers {
    pub fn new(lattice: FrequencyLattice) -> Self {
        let effective = |r: usize, c: usize, xi1: f64, xi2: f64| -> Option<(f64, f64)> {
            let (nyq_row, nyq_col) = (lattice.is_nyquist_row(r), lattice.is_nyquist_col(c));
            match (nyq_row, nyq_col) {
                (true, true) => None,
                (true, false) if c == 0 => None,
                (false, true) if r == 0 => None,
                (true, false) => Some((-PI * xi2.signum(), xi2)),
                (false, true) => Some((xi1, PI * xi1.signum())),
                (false, false) if r == 0 && c == 0 => None,
                (false, false) => Some((xi1, xi2)),
            }
        };
        let component = |axis: usize| {
            lattice.field(|r, c, xi1, xi2| match effective(r, c, xi1, xi2) {
                None => Complex64::default(),
                Some((a, b)) => {
                    let xi = if axis == 1 { a } else { b };
                    Complex64::new(0.0, -xi / a.hypot(b))
                }
            })
        };
        Self {
            m1: component(1),
            m2: component(2),
        }
    }

    /// Process-wide immutable multipliers for `lattice`.
    pub fn shared(lattice: FrequencyLattice) -> Arc<Self> {
        static CACHE: OnceLock<Mutex<HashMap<FrequencyLattice, Arc<RieszMultipliers>>>> =
            OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut guard = cache.lock().expect("riesz cache poisoned");
        Arc::clone(
            guard
                .entry(lattice)
                .or_insert_with(|| Arc::new(Self::new(lattice))),
        )
    }

    pub fn component(&self, l: usize) -> Option<&ComplexField> {
        match l {
            1 => Some(&self.m1),
            2 => Some(&self.m2),
            _ => None,
        }
    }
}

pub fn riesz_multipliers(lattice: FrequencyLattice) -> RieszMultipliers {
    RieszMultipliers::new(lattice)
}

/// `(g, R₁g, R₂g)`: R₁ acts along rows (vertical), R₂ along columns.
#[derive(Debug, Clone, PartialEq)]
pub struct MonogenicTriple {
    pub iso: ImageGrid,
    pub r1: ImageGrid,
    pub r2: ImageGrid,
}

impl MonogenicTriple {
    pub fn new(iso: ImageGrid, r1: ImageGrid, r2: ImageGrid) -> Result<Self> {
        if iso.dims() != r1.dims() || iso.dims() != r2.dims() {
            return Err(Error::InvalidInput(format!(
                "triple components differ in shape: {:?}, {:?}, {:?}",
                iso.dims(),
                r1.dims(),
                r2.dims()
            )));
        }
        Ok(Self { iso, r1, r2 })
    }
}

/// Instantaneous amplitude `A`, phase `φ ∈ [0, π]` and orientation
/// `θ ∈ (-π, π]` (the angle of `ν = Rg/‖Rg‖`).
#[derive(Debug, Clone, PartialEq)]
pub struct MonogenicPolar {
    pub amplitude: ImageGrid,
    pub phase: ImageGrid,
    pub orientation: ImageGrid,
}

impl MonogenicPolar {
    /// `A·(cos φ, sin φ cos θ, sin φ sin θ)`.
    pub fn reconstruct(&self) -> MonogenicTriple {
        let (h, w) = self.amplitude.dims();
        let mut iso = Vec::with_capacity(h * w);
        let mut r1 = Vec::with_capacity(h * w);
        let mut r2 = Vec::with_capacity(h * w);
        for ((&a, &phi), &theta) in self
            .amplitude
            .values()
            .iter()
            .zip(self.phase.values())
            .zip(self.orientation.values())
        {
            let (s, c) = phi.sin_cos();
            iso.push(a * c);
            r1.push(a * s * theta.cos());
            r2.push(a * s * theta.sin());
        }
        MonogenicTriple {
            iso: ImageGrid::from_parts(h, w, iso),
            r1: ImageGrid::from_parts(h, w, r1),
            r2: ImageGrid::from_parts(h, w, r2),
        }
    }
}

pub fn riesz_transform(img: &ImageGrid) -> Result<MonogenicTriple> {
    let spec = forward_dft(img);
    let riesz = RieszMultipliers::shared(spec.lattice());
    let r1 = inverse_dft(&apply_multiplier(&spec, &riesz.m1)?)?;
    let r2 = inverse_dft(&apply_multiplier(&spec, &riesz.m2)?)?;
    Ok(MonogenicTriple {
        iso: img.clone(),
        r1,
        r2,
    })
}

/// Monogenic signal `M⁺g = g + Rg` as a triple; same as [`riesz_transform`].
pub fn monogenic_signal(img: &ImageGrid) -> Result<MonogenicTriple> {
    riesz_transform(img)
}

/// Polar decomposition. Degenerate points: `φ = 0` where `A = 0`, `θ = 0`
/// where `‖Rg‖ = 0`.
pub fn monogenic_decompose(t: &MonogenicTriple) -> MonogenicPolar {
    let (h, w) = t.iso.dims();
    let n = h * w;
    let (mut amplitude, mut phase, mut orientation) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for ((&g, &a), &b) in t.iso.values().iter().zip(t.r1.values()).zip(t.r2.values()) {
        let riesz = a.hypot(b);
        let amp = g.hypot(riesz);
        amplitude.push(amp);
        // atan2(‖Rg‖, g) = arccos(g / A) on A > 0, without the loss of
        // precision of arccos near ±1.
        phase.push(if amp > 0.0 { riesz.atan2(g) } else { 0.0 });
        orientation.push(if riesz > 0.0 { b.atan2(a) } else { 0.0 });
    }
    MonogenicPolar {
        amplitude: ImageGrid::from_parts(h, w, amplitude),
        phase: ImageGrid::from_parts(h, w, phase),
        orientation: ImageGrid::from_parts(h, w, orientation),
    }
}
