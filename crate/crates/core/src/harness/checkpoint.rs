//! Binary checkpoint container.
//!
//! Layout: magic `CRFF`, little-endian `u16` format version, then sections
//! in a fixed order. Each section is a 4-byte tag followed by a `u64`
//! payload length and the payload. All integers are little-endian and all
//! reals are IEEE-754 bit patterns, so a decode restores values exactly.

use std::fs;
use std::path::Path;

use super::config::{parse_config_str, ExperimentConfig};
use crate::creff::FederatedFeatureBank;
use crate::error::{CheckpointError, Error, Result};
use crate::metrics::RoundReport;
use crate::numeric::{Activation, Extractor, Layer, Matrix, ModelParams};
use crate::rng::SeedStream;

pub const MAGIC: &[u8; 4] = b"CRFF";
pub const VERSION: u16 = 1;

/// Everything needed to continue a run bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ExperimentConfig,
    /// Root of every derived random stream.
    pub seed_stream: SeedStream,
    /// Rounds completed so far.
    pub next_round: usize,
    pub global: ModelParams,
    pub retrained_classifier: Matrix,
    pub bank: FederatedFeatureBank,
    /// Classes that have had an aggregated gradient in some round.
    pub observed: Vec<bool>,
    pub history: Vec<RoundReport>,
}

type DecodeResult<T> = std::result::Result<T, CheckpointError>;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, x: u8) {
        self.0.push(x);
    }
    fn u64(&mut self, x: u64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn len(&mut self, x: usize) {
        self.u64(x as u64);
    }
    fn f64s(&mut self, xs: &[f64]) {
        for x in xs {
            self.0.extend_from_slice(&x.to_bits().to_le_bytes());
        }
    }
    fn matrix(&mut self, m: &Matrix) {
        self.len(m.rows());
        self.len(m.cols());
        self.f64s(m.as_slice());
    }
    fn model(&mut self, w: &ModelParams) {
        self.len(w.extractor.layers().len());
        for layer in w.extractor.layers() {
            self.u8(match layer.activation {
                Activation::Identity => 0,
                Activation::Relu => 1,
            });
            self.matrix(&layer.weight);
            self.len(layer.bias.len());
            self.f64s(&layer.bias);
        }
        self.matrix(&w.classifier);
    }
    fn section(&mut self, tag: &[u8; 4], payload: Vec<u8>) {
        self.0.extend_from_slice(tag);
        self.len(payload.len());
        self.0.extend_from_slice(&payload);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    section: &'static str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> DecodeResult<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(CheckpointError::Truncated { section: self.section });
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }
    fn u8(&mut self) -> DecodeResult<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> DecodeResult<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }
    fn u64(&mut self) -> DecodeResult<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn len(&mut self) -> DecodeResult<usize> {
        usize::try_from(self.u64()?).map_err(|_| self.malformed("length overflows usize"))
    }
    fn malformed(&self, reason: &str) -> CheckpointError {
        CheckpointError::Malformed {
            section: self.section,
            reason: reason.to_string(),
        }
    }
    fn f64s(&mut self, n: usize) -> DecodeResult<Vec<f64>> {
        let bytes = n
            .checked_mul(8)
            .ok_or_else(|| self.malformed("element count overflows"))?;
        let raw = self.take(bytes)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().expect("8 bytes"))))
            .collect())
    }
    fn matrix(&mut self) -> DecodeResult<Matrix> {
        let rows = self.len()?;
        let cols = self.len()?;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| self.malformed("matrix size overflows"))?;
        let data = self.f64s(n)?;
        Matrix::from_vec(rows, cols, data).map_err(|e| self.malformed(&e.to_string()))
    }
    fn model(&mut self) -> DecodeResult<ModelParams> {
        let count = self.len()?;
        // Each layer needs at least 25 bytes; reject counts the payload cannot hold.
        if count > self.bytes.len() / 25 {
            return Err(CheckpointError::Truncated { section: self.section });
        }
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let activation = match self.u8()? {
                0 => Activation::Identity,
                1 => Activation::Relu,
                _ => return Err(self.malformed("unknown activation tag")),
            };
            let weight = self.matrix()?;
            let n = self.len()?;
            let bias = self.f64s(n)?;
            if bias.iter().any(|b| !b.is_finite()) {
                return Err(self.malformed("non-finite bias"));
            }
            layers.push(Layer::new(weight, bias, activation).map_err(|e| self.malformed(&e.to_string()))?);
        }
        let classifier = self.matrix()?;
        let extractor = Extractor::new(layers).map_err(|e| self.malformed(&e.to_string()))?;
        ModelParams::new(extractor, classifier).map_err(|e| self.malformed(&e.to_string()))
    }
    fn finish(&self) -> DecodeResult<()> {
        if self.bytes.is_empty() {
            Ok(())
        } else {
            Err(self.malformed("trailing bytes"))
        }
    }
}

const SECTIONS: [(&[u8; 4], &str); 8] = [
    (b"CONF", "config"),
    (b"RNGS", "rng"),
    (b"ROUN", "round"),
    (b"GLOB", "global model"),
    (b"RETR", "retrained classifier"),
    (b"BANK", "feature bank"),
    (b"SEEN", "observed classes"),
    (b"HIST", "history"),
];

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Writer(Vec::new());
        out.0.extend_from_slice(MAGIC);
        out.0.extend_from_slice(&VERSION.to_le_bytes());

        out.section(b"CONF", self.config.to_text().into_bytes());

        let mut w = Writer(Vec::new());
        w.u64(self.config.seed);
        w.u64(self.seed_stream.key());
        out.section(b"RNGS", w.0);

        let mut w = Writer(Vec::new());
        w.len(self.next_round);
        out.section(b"ROUN", w.0);

        let mut w = Writer(Vec::new());
        w.model(&self.global);
        out.section(b"GLOB", w.0);

        let mut w = Writer(Vec::new());
        w.matrix(&self.retrained_classifier);
        out.section(b"RETR", w.0);

        let mut w = Writer(Vec::new());
        w.len(self.bank.classes());
        w.len(self.bank.per_class());
        w.len(self.bank.dim());
        for block in self.bank.blocks() {
            w.f64s(block.as_slice());
        }
        out.section(b"BANK", w.0);

        let mut w = Writer(Vec::new());
        w.len(self.observed.len());
        for &seen in &self.observed {
            w.u8(u8::from(seen));
        }
        out.section(b"SEEN", w.0);

        let history = serde_json::to_vec(&self.history).expect("reports serialize");
        out.section(b"HIST", history);
        out.0
    }

    pub fn decode(bytes: &[u8]) -> DecodeResult<Self> {
        let mut r = Reader { bytes, section: "header" };
        let magic = r.take(4).map_err(|_| CheckpointError::BadMagic {
            found: bytes.get(..4).unwrap_or(bytes).to_vec(),
        })?;
        if magic != MAGIC {
            return Err(CheckpointError::BadMagic { found: magic.to_vec() });
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(CheckpointError::UnsupportedVersion {
                found: version,
                supported: VERSION,
            });
        }
        let mut payloads: Vec<&[u8]> = Vec::with_capacity(SECTIONS.len());
        for (tag, name) in SECTIONS {
            r.section = name;
            let found = r.take(4)?;
            if found != tag {
                return Err(CheckpointError::Malformed {
                    section: name,
                    reason: format!("expected tag {:?}", String::from_utf8_lossy(tag)),
                });
            }
            let n = r.len()?;
            payloads.push(r.take(n)?);
        }
        r.section = "trailer";
        r.finish()?;

        let section = |i: usize| Reader {
            bytes: payloads[i],
            section: SECTIONS[i].1,
        };

        let text = std::str::from_utf8(payloads[0]).map_err(|_| CheckpointError::Malformed {
            section: "config",
            reason: "not UTF-8".into(),
        })?;
        let config = parse_config_str(text, &[]).map_err(|e| CheckpointError::Malformed {
            section: "config",
            reason: e.to_string(),
        })?;

        let mut s = section(1);
        let seed = s.u64()?;
        let key = s.u64()?;
        s.finish()?;
        let seed_stream = SeedStream::new(seed);
        if seed != config.seed || key != seed_stream.key() {
            return Err(s.malformed("seed stream does not match the configured seed"));
        }

        let mut s = section(2);
        let next_round = s.len()?;
        s.finish()?;

        let mut s = section(3);
        let global = s.model()?;
        s.finish()?;

        let mut s = section(4);
        let retrained_classifier = s.matrix()?;
        s.finish()?;
        if retrained_classifier.shape() != global.classifier.shape() {
            return Err(s.malformed("shape differs from the global classifier"));
        }

        let mut s = section(5);
        let classes = s.len()?;
        let per_class = s.len()?;
        let dim = s.len()?;
        let block_len = per_class
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(classes))
            .ok_or_else(|| s.malformed("bank size overflows"))?;
        if block_len.saturating_mul(8) > s.bytes.len() {
            return Err(CheckpointError::Truncated { section: s.section });
        }
        let mut blocks = Vec::with_capacity(classes);
        for _ in 0..classes {
            let data = s.f64s(per_class * dim)?;
            blocks.push(Matrix::from_vec(per_class, dim, data).map_err(|e| s.malformed(&e.to_string()))?);
        }
        s.finish()?;
        let bank = FederatedFeatureBank::from_blocks(blocks).map_err(|e| s.malformed(&e.to_string()))?;
        if bank.classes() != global.classes() || bank.dim() != global.feature_dim() {
            return Err(s.malformed("bank shape does not match the model"));
        }

        let mut s = section(6);
        let n = s.len()?;
        let observed = s
            .take(n)?
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(CheckpointError::Malformed {
                    section: "observed classes",
                    reason: "flag is not 0 or 1".into(),
                }),
            })
            .collect::<DecodeResult<Vec<bool>>>()?;
        s.finish()?;

        let history: Vec<RoundReport> =
            serde_json::from_slice(payloads[7]).map_err(|e| CheckpointError::Malformed {
                section: "history",
                reason: e.to_string(),
            })?;

        Ok(Checkpoint {
            config,
            seed_stream,
            next_round,
            global,
            retrained_classifier,
            bank,
            observed,
            history,
        })
    }

    /// Writes through a temporary file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.encode())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Checkpoint::decode(&bytes).map_err(Error::from)
    }
}

pub fn save_checkpoint(path: &Path, state: &Checkpoint) -> Result<()> {
    state.save(path)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::load(path)
}
