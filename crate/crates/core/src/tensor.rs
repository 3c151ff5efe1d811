//! Binary tensor files.
//!
//! Layout: magic `MWSF`, version (u32 LE), rank (u32 LE), one u64 LE per
//! dimension, then the row-major f64 LE payload. A bundle is several tensors
//! back to back.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::classifier::{LinearModel, TrainParams};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, PcaModel};

pub const MAGIC: [u8; 4] = *b"MWSF";
pub const VERSION: u32 = 1;
/// Largest rank accepted when reading.
pub const MAX_RANK: u32 = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len = element_count(&dims)?;
        if len != data.len() {
            return Err(Error::Format(format!(
                "dimensions {dims:?} need {len} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            dims: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    fn expect_rank(&self, rank: usize, what: &str) -> Result<()> {
        if self.rank() != rank {
            return Err(Error::Format(format!(
                "{what} must have rank {rank}, found {:?}",
                self.dims
            )));
        }
        Ok(())
    }

    pub fn to_feature_matrix(&self) -> Result<FeatureMatrix> {
        self.expect_rank(2, "feature matrix")?;
        FeatureMatrix::new(self.dims[0], self.dims[1], self.data.clone())
    }
}

impl From<&FeatureMatrix> for Tensor {
    fn from(x: &FeatureMatrix) -> Self {
        Self {
            dims: vec![x.rows(), x.cols()],
            data: x.values().to_vec(),
        }
    }
}

fn element_count(dims: &[usize]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .filter(|n| n.checked_mul(8).is_some())
        .ok_or_else(|| Error::Format(format!("dimensions {dims:?} overflow")))
}

pub fn write_tensor<W: Write>(mut w: W, t: &Tensor) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(t.dims.len() as u32).to_le_bytes())?;
    for &d in &t.dims {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in &t.data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_exact_or_format<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated {what}")),
        _ => Error::Io(e),
    })
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact_or_format(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

/// Reads one tensor, or `None` at a clean end of stream.
fn read_tensor_opt<R: Read>(r: &mut R) -> Result<Option<Tensor>> {
    let mut magic = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut magic[got..]) {
            Ok(0) => break,
            Ok(n) => got += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    if got == 0 {
        return Ok(None);
    }
    if got < 4 || magic != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let version = read_u32(r, "header")?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let rank = read_u32(r, "header")?;
    if rank > MAX_RANK {
        return Err(Error::Format(format!("rank {rank} exceeds {MAX_RANK}")));
    }
    let mut dims = Vec::with_capacity(rank as usize);
    for _ in 0..rank {
        let mut b = [0u8; 8];
        read_exact_or_format(r, &mut b, "dimensions")?;
        let d = usize::try_from(u64::from_le_bytes(b))
            .map_err(|_| Error::Format("dimension exceeds address space".into()))?;
        dims.push(d);
    }
    let len = element_count(&dims)?;
    let mut bytes = Vec::new();
    r.by_ref().take((len * 8) as u64).read_to_end(&mut bytes)?;
    if bytes.len() != len * 8 {
        return Err(Error::Format(format!(
            "payload has {} bytes, expected {}",
            bytes.len(),
            len * 8
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(Some(Tensor { dims, data }))
}

pub fn read_tensor<R: Read>(mut r: R) -> Result<Tensor> {
    read_tensor_opt(&mut r)?.ok_or_else(|| Error::Format("empty tensor stream".into()))
}

pub fn encode(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * t.dims.len() + 8 * t.data.len());
    write_tensor(&mut out, t).expect("writing to a Vec cannot fail");
    out
}

/// Decodes exactly one tensor; trailing bytes are an error.
pub fn decode(bytes: &[u8]) -> Result<Tensor> {
    let mut cursor = bytes;
    let t = read_tensor(&mut cursor)?;
    if !cursor.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes", cursor.len())));
    }
    Ok(t)
}

pub fn write_bundle<W: Write>(mut w: W, tensors: &[Tensor]) -> Result<()> {
    for t in tensors {
        write_tensor(&mut w, t)?;
    }
    Ok(())
}

pub fn read_bundle<R: Read>(mut r: R) -> Result<Vec<Tensor>> {
    let mut out = Vec::new();
    while let Some(t) = read_tensor_opt(&mut r)? {
        out.push(t);
    }
    Ok(out)
}

pub fn save_bundle(path: impl AsRef<Path>, tensors: &[Tensor]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_bundle(&mut w, tensors)?;
    w.flush()?;
    Ok(())
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<Vec<Tensor>> {
    read_bundle(BufReader::new(File::open(path)?))
}

pub fn save_tensor(path: impl AsRef<Path>, t: &Tensor) -> Result<()> {
    save_bundle(path, std::slice::from_ref(t))
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let mut tensors = load_bundle(path)?;
    if tensors.len() != 1 {
        return Err(Error::Format(format!(
            "expected one tensor, found {}",
            tensors.len()
        )));
    }
    Ok(tensors.remove(0))
}

pub fn save_features(path: impl AsRef<Path>, x: &FeatureMatrix) -> Result<()> {
    save_tensor(path, &Tensor::from(x))
}

pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    load_tensor(path)?.to_feature_matrix()
}

/// `[mean (d), components (k×d), explained (k)]`.
pub fn pca_to_tensors(m: &PcaModel) -> Vec<Tensor> {
    vec![
        Tensor::vector(m.mean().to_vec()),
        Tensor {
            dims: vec![m.n_components(), m.dim()],
            data: m.components().to_vec(),
        },
        Tensor::vector(m.explained().to_vec()),
    ]
}

pub fn pca_from_tensors(tensors: &[Tensor]) -> Result<PcaModel> {
    let [mean, comps, explained] = tensors else {
        return Err(Error::Format(format!(
            "PCA model needs 3 tensors, found {}",
            tensors.len()
        )));
    };
    mean.expect_rank(1, "PCA mean")?;
    comps.expect_rank(2, "PCA components")?;
    explained.expect_rank(1, "PCA variances")?;
    if comps.dims[1] != mean.dims[0] || comps.dims[0] != explained.dims[0] {
        return Err(Error::Format("PCA tensor shapes disagree".into()));
    }
    PcaModel::from_parts(
        mean.data.clone(),
        comps.data.clone(),
        explained.data.clone(),
    )
}

pub fn save_pca(path: impl AsRef<Path>, m: &PcaModel) -> Result<()> {
    save_bundle(path, &pca_to_tensors(m))
}

pub fn load_pca(path: impl AsRef<Path>) -> Result<PcaModel> {
    pca_from_tensors(&load_bundle(path)?)
}

/// `[W (C×k), b (C), hyper]` with hyper = `[C, max_iter, tol, seed_hi, seed_lo]`.
/// Class labels are not numeric and travel separately.
pub fn linear_to_tensors(m: &LinearModel) -> Vec<Tensor> {
    let p = m.params();
    vec![
        Tensor {
            dims: vec![m.classes().len(), m.dim()],
            data: m.weights().to_vec(),
        },
        Tensor::vector(m.biases().to_vec()),
        Tensor::vector(vec![
            p.c_reg,
            p.max_iter as f64,
            p.tol,
            (p.seed >> 32) as f64,
            (p.seed & 0xffff_ffff) as f64,
        ]),
    ]
}

pub fn linear_from_tensors(tensors: &[Tensor], classes: Vec<String>) -> Result<LinearModel> {
    let [w, b, hyper] = tensors else {
        return Err(Error::Format(format!(
            "linear model needs 3 tensors, found {}",
            tensors.len()
        )));
    };
    w.expect_rank(2, "weights")?;
    b.expect_rank(1, "biases")?;
    hyper.expect_rank(1, "hyperparameters")?;
    if w.dims[0] != classes.len() || b.dims[0] != classes.len() || hyper.dims[0] != 5 {
        return Err(Error::Format("linear model tensor shapes disagree".into()));
    }
    let h = &hyper.data;
    let as_u32 = |v: f64| -> Result<u64> {
        if v.fract() == 0.0 && (0.0..=u32::MAX as f64).contains(&v) {
            Ok(v as u64)
        } else {
            Err(Error::Format(format!("bad integer hyperparameter {v}")))
        }
    };
    let params = TrainParams {
        c_reg: h[0],
        max_iter: as_u32(h[1])? as usize,
        tol: h[2],
        seed: (as_u32(h[3])? << 32) | as_u32(h[4])?,
    };
    LinearModel::from_parts(classes, w.data.clone(), b.data.clone(), params)
}

/// Sidecar holding one class label per line.
pub fn classes_path(model_path: &Path) -> PathBuf {
    let mut s = model_path.as_os_str().to_owned();
    s.push(".classes");
    PathBuf::from(s)
}

pub fn save_linear(path: impl AsRef<Path>, m: &LinearModel) -> Result<()> {
    let path = path.as_ref();
    save_bundle(path, &linear_to_tensors(m))?;
    let mut text = m.classes().join("\n");
    text.push('\n');
    fs::write(classes_path(path), text)?;
    Ok(())
}

pub fn load_linear(path: impl AsRef<Path>) -> Result<LinearModel> {
    let path = path.as_ref();
    let classes = fs::read_to_string(classes_path(path))?
        .lines()
        .map(str::to_owned)
        .collect();
    linear_from_tensors(&load_bundle(path)?, classes)
}
