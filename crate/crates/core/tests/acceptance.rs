//! Acceptance criteria, one test per criterion. Each test writes a
//! `[criterion N] PASS|FAIL|SKIP ...` line straight to stderr so the lines
//! are visible without `--nocapture`.
//!
//! Criteria that cannot be met by a faithful implementation are `#[ignore]`d
//! with the reason; `cargo test --test acceptance -- --include-ignored` runs
//! them and they fail.

mod common;

use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};

use common::{covariance, jacobi_eigenvalues};
use mwsn::classifier::cross_validate;
use mwsn::config::RunConfig;
use mwsn::dataset::{synth_textures, DatasetManifest, SynthParams};
use mwsn::features::{pca_fit, FeatureMatrix};
use mwsn::filterbank::MonogenicFilterBank;
use mwsn::monogenic::{monogenic_decompose, monogenic_signal, riesz_transform};
use mwsn::pipeline::scatter_manifest;
use mwsn::scattering::{flatten_layer2, scatter, ScatteringConfig};
use mwsn::spectral::{filter, ImageGrid};
use mwsn::tensor::{encode, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[criterion {id}] {verdict} {detail}");
}

fn skip(id: &str, detail: &str) {
    let _ = writeln!(std::io::stderr(), "[criterion {id}] SKIP {detail}");
}

fn random_image(n: usize, seed: u64) -> ImageGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ImageGrid::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)).unwrap()
}

fn max_abs_diff(a: &ImageGrid, b: &ImageGrid) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn criterion_1_filter_bank_tightness() {
    let start = Instant::now();
    let bank = MonogenicFilterBank::build(256, 4).unwrap();
    let mut worst_bin: f64 = 0.0;
    for i in 0..bank.residual().values().len() {
        let sum: f64 = bank
            .bands()
            .iter()
            .map(|b| b.values()[i].powi(2))
            .sum::<f64>()
            + bank.residual().values()[i].powi(2);
        worst_bin = worst_bin.max((sum - 1.0).abs());
    }
    let mut worst_energy: f64 = 0.0;
    for seed in 0..50 {
        let img = random_image(256, seed);
        let mut energy = filter(&img, bank.residual()).unwrap().energy();
        for band in bank.bands() {
            energy += filter(&img, band).unwrap().energy();
        }
        worst_energy = worst_energy.max((energy - img.energy()).abs() / img.energy());
    }
    let elapsed = start.elapsed();
    let pass = worst_bin < 1e-12 && worst_energy < 1e-10 && elapsed < Duration::from_secs(5);
    report(
        "1",
        pass,
        &format!("partition max dev {worst_bin:.2e}, energy max rel dev {worst_energy:.2e}, {elapsed:.2?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_2a_riesz_plane_waves() {
    let n = 32;
    let waves: [(i64, i64); 10] = [
        (1, 0),
        (0, 1),
        (3, 5),
        (-4, 7),
        (15, 1),
        (2, -15),
        (8, 8),
        (-7, -3),
        (11, -13),
        (5, 14),
    ];
    let mut worst: f64 = 0.0;
    for (k1, k2) in waves {
        let phase =
            |r: usize, c: usize| 2.0 * PI * (k1 * r as i64 + k2 * c as i64) as f64 / n as f64;
        let img = ImageGrid::from_fn(n, n, |r, c| phase(r, c).cos()).unwrap();
        let t = riesz_transform(&img).unwrap();
        let norm = ((k1 * k1 + k2 * k2) as f64).sqrt();
        for r in 0..n {
            for c in 0..n {
                let s = phase(r, c).sin();
                worst = worst.max((t.r1.get(r, c) - k1 as f64 / norm * s).abs());
                worst = worst.max((t.r2.get(r, c) - k2 as f64 / norm * s).abs());
            }
        }
    }
    let pass = worst <= 1e-10;
    report(
        "2a",
        pass,
        &format!("plane-wave closed form max dev {worst:.2e} over 10 waves"),
    );
    assert!(pass);
}

/// White noise has energy on the self-conjugate Nyquist bins, where a real,
/// odd and quarter-turn covariant Riesz multiplier must vanish. See README.
#[test]
#[ignore = "unattainable together with criterion 5: the Riesz multiplier is zero on the self-conjugate Nyquist bins"]
fn criterion_2b_riesz_parseval() {
    let n = 32;
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let noise = random_image(n, 500 + seed);
        let mean = noise.values().iter().sum::<f64>() / (n * n) as f64;
        let g = noise.map(|v| v - mean);
        let t = riesz_transform(&g).unwrap();
        let dev = (t.r1.energy() + t.r2.energy() - g.energy()).abs() / g.energy();
        worst = worst.max(dev);
    }
    let pass = worst <= 1e-10;
    report(
        "2b",
        pass,
        &format!("zero-mean Parseval max rel dev {worst:.2e} over 20 seeds"),
    );
    assert!(pass);
}

#[test]
fn criterion_3_monogenic_decomposition() {
    let mut worst_rec: f64 = 0.0;
    for seed in 0..10 {
        let img = random_image(64, 900 + seed);
        let polar = monogenic_decompose(&monogenic_signal(&img).unwrap());
        let a_cos_phi = ImageGrid::from_fn(64, 64, |r, c| {
            polar.amplitude.get(r, c) * polar.phase.get(r, c).cos()
        })
        .unwrap();
        worst_rec = worst_rec.max(max_abs_diff(&a_cos_phi, &img));
    }
    let n = 64;
    let mut worst_amp: f64 = 0.0;
    for (k1, k2) in [(1, 0), (0, 3), (5, 2), (-6, 9), (17, -4), (10, 10)] {
        let img = ImageGrid::from_fn(n, n, |r, c| {
            (2.0 * PI * (k1 * r as i64 + k2 * c as i64) as f64 / n as f64).cos()
        })
        .unwrap();
        let polar = monogenic_decompose(&monogenic_signal(&img).unwrap());
        for a in polar.amplitude.values() {
            worst_amp = worst_amp.max((a - 1.0).abs());
        }
    }
    let pass = worst_rec <= 1e-12 && worst_amp <= 1e-10;
    report(
        "3",
        pass,
        &format!("A cos(phi) reconstruction max dev {worst_rec:.2e}, plane-wave amplitude max dev {worst_amp:.2e}"),
    );
    assert!(pass);
}

fn layer2_vector_200() -> Vec<f64> {
    let out = scatter(&random_image(200, 4), &ScatteringConfig::default()).unwrap();
    flatten_layer2(&out).unwrap()
}

#[test]
fn criterion_4_feature_dimension() {
    let len = layer2_vector_200().len();
    let pass = len == 90_000;
    report(
        "4",
        pass,
        &format!("200x200, J=4, rates 2 gives {len} features (expected 90000)"),
    );
    assert!(pass);
}

fn rotation_deviation() -> (f64, usize) {
    let cfg = ScatteringConfig::default();
    let img = random_image(64, 77);
    let base = scatter(&img, &cfg).unwrap();
    let turned = scatter(&img.rotate_quarter().unwrap(), &cfg).unwrap();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (path, raster) in base.iter() {
        let got = turned.get(&path.rotated()).expect("rotated path exists");
        worst = worst.max(max_abs_diff(got, &raster.rotate_quarter().unwrap()));
        count += 1;
    }
    (worst, count)
}

#[test]
fn criterion_5_rotation_equivariance() {
    let start = Instant::now();
    let (worst, count) = rotation_deviation();
    let elapsed = start.elapsed();
    let pass = worst <= 1e-10 && count == 157 && elapsed < Duration::from_secs(5);
    report(
        "5",
        pass,
        &format!("{count} rasters, max dev {worst:.2e}, {elapsed:.2?}"),
    );
    assert!(pass);
}

fn pca_sweep() -> (f64, f64, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst_ev, mut worst_orth): (f64, f64) = (0.0, 0.0);
    let mut bytes = Vec::new();
    for n in 2..=12 {
        for d in 1..=12 {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect())
                .collect();
            let k = (n - 1).min(d);
            let model = pca_fit(&FeatureMatrix::from_rows(&rows).unwrap(), k).unwrap();
            let oracle = jacobi_eigenvalues(covariance(&rows));
            for (got, want) in model.explained().iter().zip(&oracle) {
                worst_ev = worst_ev.max((got - want).abs());
            }
            for a in 0..k {
                for b in 0..k {
                    let dot: f64 = model
                        .component(a)
                        .iter()
                        .zip(model.component(b))
                        .map(|(x, y)| x * y)
                        .sum();
                    worst_orth = worst_orth.max((dot - if a == b { 1.0 } else { 0.0 }).abs());
                }
            }
            bytes.extend(encode(&Tensor::vector(model.components().to_vec())));
            bytes.extend(encode(&Tensor::vector(model.explained().to_vec())));
        }
    }
    (worst_ev, worst_orth, bytes)
}

#[test]
fn criterion_6_pca_oracle() {
    let (worst_ev, worst_orth, _) = pca_sweep();
    let pass = worst_ev <= 1e-8 && worst_orth <= 1e-10;
    report(
        "6",
        pass,
        &format!("132 fits (n 2..=12, d 1..=12): variance max dev {worst_ev:.2e}, orthonormality max dev {worst_orth:.2e}"),
    );
    assert!(pass);
}

struct PipelineRun {
    features: Vec<u8>,
    report_csv: String,
    mean: f64,
    std_dev: f64,
    elapsed: Duration,
}

/// Synthetic 4-class set, 40 images per class at 160×160, seed 0; default
/// run configuration except the crop, which must fit the 160×160 images.
fn synthetic_pipeline() -> PipelineRun {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let set = synth_textures(&SynthParams {
        n_classes: 4,
        n_per_class: 40,
        size: 160,
        seed: 0,
    })
    .unwrap();
    set.write(dir.path()).unwrap();
    let manifest = DatasetManifest::read(dir.path().join("manifest.csv")).unwrap();
    let run = RunConfig {
        crop: 160,
        ..RunConfig::default()
    };
    let x = scatter_manifest(&manifest, &run).unwrap();
    let path = dir.path().join("features.mwsf");
    mwsn::tensor::save_features(&path, &x).unwrap();
    let cv = cross_validate(&x, &manifest.labels(), &run.cv_params()).unwrap();
    PipelineRun {
        features: std::fs::read(&path).unwrap(),
        report_csv: cv.to_csv(),
        mean: cv.mean,
        std_dev: cv.std_dev,
        elapsed: start.elapsed(),
    }
}

/// The 45° and 135° classes are mirror images under x₂ → −x₂, which every
/// stage of the cascade commutes with, so their features share one
/// distribution and a linear classifier cannot beat about 0.75. See README.
#[test]
#[ignore = "unattainable: two of the four synthetic classes are mirror images and the features are mirror invariant"]
fn criterion_7_synthetic_classification() {
    let run = synthetic_pipeline();
    let pass = run.mean >= 0.95 && run.elapsed < Duration::from_secs(300);
    report(
        "7",
        pass,
        &format!(
            "mean accuracy {:.4} ± {:.4} (need >= 0.95), {:.2?}",
            run.mean, run.std_dev, run.elapsed
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_curet_headline() {
    let Ok(path) = std::env::var("MWSN_CURET_MANIFEST") else {
        skip(
            "8",
            "optional: set MWSN_CURET_MANIFEST to a CUReT manifest to run",
        );
        return;
    };
    let manifest = DatasetManifest::read(&path).unwrap();
    let run = RunConfig::default();
    let x = scatter_manifest(&manifest, &run).unwrap();
    let cv = cross_validate(&x, &manifest.labels(), &run.cv_params()).unwrap();
    let pass = cv.mean >= 0.958;
    report(
        "8",
        pass,
        &format!(
            "CUReT mean accuracy {:.4} ± {:.4} (need >= 0.958)",
            cv.mean, cv.std_dev
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_9_determinism() {
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let same_4 = bits(&layer2_vector_200()) == bits(&layer2_vector_200());
    let rot_a = rotation_deviation();
    let rot_b = rotation_deviation();
    let same_5 = rot_a.0.to_bits() == rot_b.0.to_bits();
    let same_6 = pca_sweep().2 == pca_sweep().2;
    let (a, b) = (synthetic_pipeline(), synthetic_pipeline());
    let same_7 = a.features == b.features && a.report_csv == b.report_csv;
    let pass = same_4 && same_5 && same_6 && same_7;
    report(
        "9",
        pass,
        &format!("bit-identical reruns: features {same_4}, rotation {same_5}, PCA {same_6}, pipeline files {same_7}"),
    );
    assert!(pass);
}
