//! Batch feature extraction and the small text sidecars around it.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::dataset::{load_dataset, DatasetManifest};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::scattering::{layer2_features, layer2_paths, ScatteringConfig};
use crate::spectral::ImageGrid;
use crate::viz::layer2_cell;

/// Layer-2 features of every image, one row per image in input order.
pub fn scatter_images(images: &[ImageGrid], cfg: &ScatteringConfig) -> Result<FeatureMatrix> {
    let first = images.first().ok_or(Error::EmptyDataset)?;
    let len = cfg.feature_len(first.height())?;
    let rows: Vec<Result<Vec<f64>>> = images
        .par_iter()
        .map(|img| layer2_features(img, cfg))
        .collect();
    let mut values = Vec::with_capacity(images.len() * len);
    for (i, row) in rows.into_iter().enumerate() {
        let row = row?;
        if row.len() != len {
            return Err(Error::InvalidInput(format!(
                "image {i} gives {} features, expected {len}",
                row.len()
            )));
        }
        values.extend(row);
    }
    FeatureMatrix::new(images.len(), len, values)
}

/// Loads, crops and scatters every manifest entry.
pub fn scatter_manifest(manifest: &DatasetManifest, run: &RunConfig) -> Result<FeatureMatrix> {
    if manifest.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let cfg = run.scattering();
    cfg.check_size(run.crop)?;
    let images = load_dataset(manifest, run.crop)?;
    scatter_images(&images, &cfg)
}

/// CSV table of the feature layout: one row per layer-2 path in feature
/// order with its offset, indices, mosaic cell and raster shape.
pub fn path_table(cfg: &ScatteringConfig, size: usize) -> Result<String> {
    cfg.feature_len(size)?;
    let side = cfg.output_side(size, 2);
    let mut out = String::from("offset,j1,l1,j2,l2,mosaic_row,mosaic_col,rows,cols\n");
    for (k, p) in layer2_paths(cfg.scales).iter().enumerate() {
        let crate::scattering::PathIndex::Second { j1, l1, j2, l2 } = *p else {
            unreachable!("layer2_paths yields second-layer paths")
        };
        let (r, c) = layer2_cell(p).expect("layer-2 path");
        let _ = writeln!(
            out,
            "{},{j1},{},{j2},{},{r},{c},{side},{side}",
            k * side * side,
            l1.index(),
            l2.index()
        );
    }
    Ok(out)
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[&str]) -> Result<()> {
    let mut text = labels.join("\n");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// One label per non-empty line.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<String>> {
    Ok(fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_textures, SynthParams};

    #[test]
    fn synthetic_rows_have_expected_length() {
        let set = synth_textures(&SynthParams {
            n_classes: 2,
            n_per_class: 4,
            size: 160,
            seed: 0,
        })
        .unwrap();
        let x = scatter_images(&set.images, &ScatteringConfig::default()).unwrap();
        assert_eq!((x.rows(), x.cols()), (8, 57_600));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            scatter_images(&[], &ScatteringConfig::default()),
            Err(Error::EmptyDataset)
        ));
        let empty = DatasetManifest::new(".", vec![]).unwrap();
        let err = scatter_manifest(&empty, &RunConfig::default()).unwrap_err();
        assert_eq!(err.to_string(), "empty dataset");
    }

    #[test]
    fn path_table_layout() {
        let table = path_table(&ScatteringConfig::default(), 200).unwrap();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 145);
        assert_eq!(lines[1], "0,1,0,1,0,0,0,25,25");
        assert_eq!(lines[2], "625,1,0,1,1,0,1,25,25");
        assert_eq!(lines[144], "89375,4,2,4,2,11,11,25,25");
    }

    #[test]
    fn labels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.txt");
        write_labels(&path, &["b", "a", "b"]).unwrap();
        assert_eq!(read_labels(&path).unwrap(), vec!["b", "a", "b"]);
    }
}
