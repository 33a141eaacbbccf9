//! On-disk formats.
//!
//! Frame files (`.wstf`), all integers little-endian:
//!
//! ```text
//! magic      4 bytes  "WSTF"
//! version    u16      1
//! channels   u32
//! samples    u32
//! id_len     u32      byte length of the profile id
//! profile_id id_len bytes of UTF-8
//! payload    channels * samples IEEE-754 f64, channel-major
//! ```
//!
//! Models and manifests are JSON documents carrying a `schema` version.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::classifier::LdaModel;
use crate::error::{Error, Result};
use crate::filterbank::FilterBankConfig;
use crate::pipeline::{config_digest, FeatureLayout, PipelineModel, PipelineParams};
use crate::reduction::ProjectionModel;
use crate::scattering::SignalFrame;

pub const FRAME_MAGIC: [u8; 4] = *b"WSTF";
pub const FRAME_VERSION: u16 = 1;
pub const MODEL_SCHEMA: u32 = 1;
pub const MANIFEST_SCHEMA: u32 = 1;

pub fn encode_frame(frame: &SignalFrame) -> Vec<u8> {
    let id = frame.profile_id.as_bytes();
    let mut out = Vec::with_capacity(18 + id.len() + frame.data().len() * 8);
    out.extend_from_slice(&FRAME_MAGIC);
    out.extend_from_slice(&FRAME_VERSION.to_le_bytes());
    out.extend_from_slice(&(frame.channels as u32).to_le_bytes());
    out.extend_from_slice(&(frame.samples as u32).to_le_bytes());
    out.extend_from_slice(&(id.len() as u32).to_le_bytes());
    out.extend_from_slice(id);
    for v in frame.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::TruncatedFile {
                path: self.path.to_path_buf(),
                detail: format!(
                    "{what}: need {n} bytes at offset {}, {} available",
                    self.pos,
                    self.bytes.len() - self.pos
                ),
            });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Parses a frame file image; `path` is only used in error messages.
pub fn decode_frame(bytes: &[u8], path: &Path) -> Result<SignalFrame> {
    let mut cur = Cursor { bytes, pos: 0, path };
    if cur.take(4, "magic")? != FRAME_MAGIC {
        return Err(Error::MagicMismatch {
            path: path.to_path_buf(),
        });
    }
    let version = cur.u16("version")?;
    if version != FRAME_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let channels = cur.u32("channels")? as usize;
    let samples = cur.u32("samples")? as usize;
    let id_len = cur.u32("profile id length")? as usize;
    let profile_id = std::str::from_utf8(cur.take(id_len, "profile id")?)
        .map_err(|e| Error::InvalidFrame(format!("profile id is not UTF-8: {e}")))?
        .to_string();
    let count = channels
        .checked_mul(samples)
        .ok_or_else(|| Error::InvalidFrame(format!("frame size {channels}x{samples} overflows")))?;
    let payload = cur.take(count * 8, "payload")?;
    if cur.pos != bytes.len() {
        return Err(Error::InvalidFrame(format!(
            "{} trailing bytes after payload",
            bytes.len() - cur.pos
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    SignalFrame::new(channels, samples, profile_id, data)
}

pub fn write_frame(frame: &SignalFrame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_frame(frame)).map_err(|e| Error::io(path, e))
}

pub fn read_frame(path: impl AsRef<Path>) -> Result<SignalFrame> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_frame(&bytes, path)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Frame file path relative to the manifest's directory.
    pub path: String,
    pub class_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_hint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub class_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Checks duplicate paths and unknown class names.
    pub fn validate(&self) -> Result<()> {
        if self.schema != MANIFEST_SCHEMA {
            return Err(Error::Schema(format!(
                "manifest schema {} is not supported (expected {MANIFEST_SCHEMA})",
                self.schema
            )));
        }
        let known: HashSet<&str> = self.class_names.iter().map(String::as_str).collect();
        if known.len() != self.class_names.len() {
            return Err(Error::Schema("manifest class_names contain duplicates".into()));
        }
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.path.as_str()) {
                return Err(Error::Schema(format!("duplicate manifest path {:?}", e.path)));
            }
            if !known.contains(e.class_name.as_str()) {
                return Err(Error::Schema(format!(
                    "entry {:?} has unknown class {:?}",
                    e.path, e.class_name
                )));
            }
        }
        Ok(())
    }

    pub fn label_of(&self, entry: &ManifestEntry) -> usize {
        self.class_names
            .iter()
            .position(|c| *c == entry.class_name)
            .expect("validated manifest")
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len()];
        for e in &self.entries {
            counts[self.label_of(e)] += 1;
        }
        counts
    }
}

/// A validated manifest plus the directory its paths are relative to.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedManifest {
    pub manifest: Manifest,
    pub root: PathBuf,
}

impl LoadedManifest {
    pub fn frame_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }
}

pub fn manifest_to_json(manifest: &Manifest) -> String {
    serde_json::to_string_pretty(manifest).expect("manifest serializes")
}

pub fn write_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, manifest_to_json(manifest) + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<LoadedManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    manifest.validate()?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let loaded = LoadedManifest { manifest, root };
    for e in &loaded.manifest.entries {
        let p = loaded.frame_path(e);
        if !p.is_file() {
            return Err(Error::io(
                p,
                std::io::Error::new(std::io::ErrorKind::NotFound, "manifest entry is missing"),
            ));
        }
    }
    Ok(loaded)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ProjectionDoc {
    mean: Vec<f64>,
    /// One array per projection direction.
    basis_columns: Vec<Vec<f64>>,
    ridge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LdaDoc {
    class_means: Vec<Vec<f64>>,
    pooled_precision: Vec<Vec<f64>>,
    log_priors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelDoc {
    schema: u32,
    config_digest: String,
    filter_config: FilterBankConfig,
    params: PipelineParams,
    layout: FeatureLayout,
    class_names: Vec<String>,
    norm_mean: Vec<f64>,
    norm_std: Vec<f64>,
    projection: ProjectionDoc,
    lda: LdaDoc,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Schema(format!("{what} has ragged rows")));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

impl ModelDoc {
    fn from_model(m: &PipelineModel) -> Self {
        ModelDoc {
            schema: MODEL_SCHEMA,
            config_digest: m.config_digest.clone(),
            filter_config: m.filter_config.clone(),
            params: m.params.clone(),
            layout: m.layout,
            class_names: m.lda.class_names.clone(),
            norm_mean: m.norm_mean.iter().copied().collect(),
            norm_std: m.norm_std.iter().copied().collect(),
            projection: ProjectionDoc {
                mean: m.projection.mean.iter().copied().collect(),
                basis_columns: m
                    .projection
                    .basis
                    .column_iter()
                    .map(|c| c.iter().copied().collect())
                    .collect(),
                ridge: m.projection.ridge,
            },
            lda: LdaDoc {
                class_means: rows_of(&m.lda.class_means),
                pooled_precision: rows_of(&m.lda.pooled_precision),
                log_priors: m.lda.log_priors.iter().copied().collect(),
            },
        }
    }

    fn into_model(self) -> Result<PipelineModel> {
        if self.schema != MODEL_SCHEMA {
            return Err(Error::Schema(format!(
                "model schema {} is not supported (expected {MODEL_SCHEMA})",
                self.schema
            )));
        }
        let d = self.norm_mean.len();
        let c = self.class_names.len();
        let p = self.projection.basis_columns.len();
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Schema(format!("inconsistent model dimensions: {what}")))
            }
        };
        check(self.norm_std.len() == d, "norm_std length")?;
        check(self.projection.mean.len() == d, "projection mean length")?;
        check(
            self.projection.basis_columns.iter().all(|col| col.len() == d),
            "projection basis column length",
        )?;
        check(c >= 2 && p == c - 1, "projection output must be classes - 1")?;
        check(self.layout.dim() == d, "feature layout")?;
        let class_means = matrix_from_rows(&self.lda.class_means, "class_means")?;
        let precision = matrix_from_rows(&self.lda.pooled_precision, "pooled_precision")?;
        check(class_means.shape() == (c, p), "class_means shape")?;
        check(precision.shape() == (p, p), "pooled_precision shape")?;
        check(self.lda.log_priors.len() == c, "log_priors length")?;
        let expected = config_digest(&self.filter_config, &self.params);
        check(
            expected == self.config_digest,
            "config digest does not match hyperparameters",
        )?;

        let basis = DMatrix::from_fn(d, p, |i, j| self.projection.basis_columns[j][i]);
        Ok(PipelineModel {
            norm_mean: DVector::from_vec(self.norm_mean),
            norm_std: DVector::from_vec(self.norm_std),
            projection: ProjectionModel {
                mean: DVector::from_vec(self.projection.mean),
                basis,
                ridge: self.projection.ridge,
            },
            lda: LdaModel {
                class_means,
                pooled_precision: precision,
                log_priors: DVector::from_vec(self.lda.log_priors),
                class_names: self.class_names,
            },
            filter_config: self.filter_config,
            params: self.params,
            layout: self.layout,
            config_digest: self.config_digest,
        })
    }
}

pub fn model_to_json(model: &PipelineModel) -> String {
    serde_json::to_string(&ModelDoc::from_model(model)).expect("model serializes")
}

pub fn model_from_json(text: &str) -> Result<PipelineModel> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    doc.into_model()
}

pub fn model_to_value(model: &PipelineModel) -> serde_json::Value {
    serde_json::to_value(ModelDoc::from_model(model)).expect("model serializes")
}

pub fn model_from_value(value: serde_json::Value) -> Result<PipelineModel> {
    let doc: ModelDoc = serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
    doc.into_model()
}

pub fn save_model(model: &PipelineModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, &ModelDoc::from_model(model)).map_err(|e| Error::io(path, e.into()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PipelineModel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    BufReader::new(file)
        .read_to_string(&mut text)
        .map_err(|e| Error::io(path, e))?;
    model_from_json(&text).map_err(|e| match e {
        Error::Schema(msg) => Error::Schema(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Warning text when a model was trained under a different filter bank than
/// the one configured at runtime.
pub fn digest_warning(model: &PipelineModel, runtime: &FilterBankConfig) -> Option<String> {
    let runtime_digest = config_digest(runtime, &model.params);
    (runtime_digest != model.config_digest).then(|| {
        format!(
            "model config digest {} differs from runtime filter bank digest {runtime_digest}",
            model.config_digest
        )
    })
}
