//! Coefficient mosaics.
//!
//! The layer-2 mosaic is a `3J × 3J` grid whose block at row `3(j1-1) + l1`
//! and column `3(j2-1) + l2` shows `s2[l1, l2; j1, j2]`. The layer-1 mosaic is
//! a `3 × J` grid with row `l` and column `j - 1`. Blocks are separated by
//! one black pixel.

use crate::error::{Error, Result};
use crate::scattering::{Component, PathIndex, ScatteringOutput};
use crate::spectral::ImageGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Each block is stretched to `[0, 1]` on its own.
    #[default]
    PerBlock,
    /// One range for the whole mosaic.
    Global,
}

/// Mosaic cell of a layer-2 path.
pub fn layer2_cell(path: &PathIndex) -> Option<(usize, usize)> {
    match *path {
        PathIndex::Second { j1, l1, j2, l2 } => {
            Some((3 * (j1 - 1) + l1.index(), 3 * (j2 - 1) + l2.index()))
        }
        _ => None,
    }
}

/// Mosaic cell of a layer-1 path.
pub fn layer1_cell(path: &PathIndex) -> Option<(usize, usize)> {
    match *path {
        PathIndex::First { j, l } => Some((l.index(), j - 1)),
        _ => None,
    }
}

/// Inverse of [`layer2_cell`].
pub fn layer2_path(row: usize, col: usize) -> PathIndex {
    let comp = |i: usize| Component::from_index(i % 3).expect("index below 3");
    PathIndex::Second {
        j1: row / 3 + 1,
        l1: comp(row),
        j2: col / 3 + 1,
        l2: comp(col),
    }
}

/// Side length of a mosaic with `blocks` blocks of side `block` per axis.
pub fn mosaic_side(blocks: usize, block: usize) -> usize {
    blocks * block + blocks.saturating_sub(1)
}

fn range(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

fn stretch(v: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        0.0
    }
}

fn assemble(
    cells: &[((usize, usize), &ImageGrid)],
    grid: (usize, usize),
    norm: Normalization,
) -> Result<ImageGrid> {
    let Some(&(_, first)) = cells.first() else {
        return Err(Error::State("no rasters to display".into()));
    };
    let (bh, bw) = first.dims();
    if cells.iter().any(|(_, g)| g.dims() != (bh, bw)) {
        return Err(Error::State("mosaic blocks differ in shape".into()));
    }
    let global = cells
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |acc, (_, g)| {
            let (lo, hi) = range(g.values());
            (acc.0.min(lo), acc.1.max(hi))
        });
    let (h, w) = (mosaic_side(grid.0, bh), mosaic_side(grid.1, bw));
    let mut values = vec![0.0; h * w];
    for &((br, bc), g) in cells {
        let span = match norm {
            Normalization::PerBlock => range(g.values()),
            Normalization::Global => global,
        };
        let (r0, c0) = (br * (bh + 1), bc * (bw + 1));
        for r in 0..bh {
            for c in 0..bw {
                values[(r0 + r) * w + c0 + c] = stretch(g.get(r, c), span);
            }
        }
    }
    ImageGrid::new(h, w, values)
}

/// `3J × 3J` grid of the layer-2 outputs.
pub fn layer2_mosaic(out: &ScatteringOutput, norm: Normalization) -> Result<ImageGrid> {
    if out.s2.is_empty() {
        return Err(Error::State("scattering output has no second layer".into()));
    }
    let cells: Vec<_> = out
        .s2
        .iter()
        .map(|(p, g)| (layer2_cell(p).expect("layer-2 path"), g))
        .collect();
    let n = 3 * out.config.scales;
    assemble(&cells, (n, n), norm)
}

/// `3 × J` grid of the layer-1 outputs.
pub fn layer1_mosaic(out: &ScatteringOutput, norm: Normalization) -> Result<ImageGrid> {
    let cells: Vec<_> = out
        .s1
        .iter()
        .map(|(p, g)| (layer1_cell(p).expect("layer-1 path"), g))
        .collect();
    assemble(&cells, (3, out.config.scales), norm)
}

/// Extracts block `(row, col)` of a mosaic with square blocks of side `block`.
pub fn mosaic_block(mosaic: &ImageGrid, row: usize, col: usize, block: usize) -> Result<ImageGrid> {
    let (r0, c0) = (row * (block + 1), col * (block + 1));
    if r0 + block > mosaic.height() || c0 + block > mosaic.width() {
        return Err(Error::InvalidInput(format!(
            "block ({row}, {col}) outside the mosaic"
        )));
    }
    ImageGrid::from_fn(block, block, |r, c| mosaic.get(r0 + r, c0 + c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scattering::{scatter, ScatteringConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(n: usize, seed: u64) -> ImageGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageGrid::from_fn(n, n, |_, _| rng.random_range(0.0..1.0)).unwrap()
    }

    #[test]
    fn cell_mapping_is_a_bijection() {
        let mut seen = std::collections::HashSet::new();
        for p in crate::scattering::layer2_paths(4) {
            let (r, c) = layer2_cell(&p).unwrap();
            assert!(r < 12 && c < 12);
            assert_eq!(layer2_path(r, c), p);
            assert!(seen.insert((r, c)));
        }
        assert_eq!(seen.len(), 144);
        // The canonical path order walks the mosaic row-major.
        let order: Vec<_> = crate::scattering::layer2_paths(4)
            .iter()
            .map(|p| layer2_cell(p).unwrap())
            .collect();
        let row_major: Vec<_> = (0..12).flat_map(|r| (0..12).map(move |c| (r, c))).collect();
        assert_eq!(order, row_major);
    }

    #[test]
    fn default_geometry() {
        let cfg = ScatteringConfig::default();
        let out = scatter(&random_image(200, 1), &cfg).unwrap();
        let m2 = layer2_mosaic(&out, Normalization::PerBlock).unwrap();
        assert_eq!(m2.dims(), (12 * 25 + 11, 12 * 25 + 11));
        let m1 = layer1_mosaic(&out, Normalization::PerBlock).unwrap();
        assert_eq!(m1.dims(), (3 * 50 + 2, 4 * 50 + 3));
        for k in 0..11 {
            let sep = 25 + k * 26;
            assert!((0..m2.width()).all(|c| m2.get(sep, c) == 0.0));
            assert!((0..m2.height()).all(|r| m2.get(r, sep) == 0.0));
        }
        for v in m2.values() {
            assert!((0.0..=1.0).contains(v));
        }
        let block = mosaic_block(&m2, 4, 7, 25).unwrap();
        let (lo, hi) = range(block.values());
        assert_eq!((lo, hi), (0.0, 1.0));
    }

    #[test]
    fn constant_image_gives_black_mosaic() {
        let img = ImageGrid::filled(64, 64, 0.7).unwrap();
        let out = scatter(&img, &ScatteringConfig::default()).unwrap();
        for norm in [Normalization::PerBlock, Normalization::Global] {
            let m = layer2_mosaic(&out, norm).unwrap();
            assert!(m.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn rotation_permutes_and_turns_blocks() {
        let img = random_image(64, 3);
        let cfg = ScatteringConfig::default();
        let base = layer2_mosaic(&scatter(&img, &cfg).unwrap(), Normalization::PerBlock).unwrap();
        let turned = layer2_mosaic(
            &scatter(&img.rotate_quarter().unwrap(), &cfg).unwrap(),
            Normalization::PerBlock,
        )
        .unwrap();
        let b = cfg.output_side(64, 2);
        for p in crate::scattering::layer2_paths(4) {
            let (r, c) = layer2_cell(&p).unwrap();
            let (rr, rc) = layer2_cell(&p.rotated()).unwrap();
            let expect = mosaic_block(&base, r, c, b)
                .unwrap()
                .rotate_quarter()
                .unwrap();
            let got = mosaic_block(&turned, rr, rc, b).unwrap();
            for (x, y) in got.values().iter().zip(expect.values()) {
                assert!((x - y).abs() < 1e-8, "{p}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn global_normalization_shares_one_range() {
        let out = scatter(&random_image(64, 5), &ScatteringConfig::default()).unwrap();
        let m = layer2_mosaic(&out, Normalization::Global).unwrap();
        let (lo, hi) = range(m.values());
        assert_eq!(hi, 1.0);
        assert_eq!(lo, 0.0);
        let blocks_at_one = (0..12)
            .flat_map(|r| (0..12).map(move |c| (r, c)))
            .filter(|&(r, c)| mosaic_block(&m, r, c, 8).unwrap().values().contains(&1.0))
            .count();
        assert_eq!(blocks_at_one, 1);
    }
}
