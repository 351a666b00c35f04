//! Versioned binary model file.
//!
//! All integers and floats are little-endian; floats are IEEE-754 doubles
//! written bit-for-bit, so a loaded model samples exactly like the saved
//! one. Layout:
//!
//! ```text
//! magic            8 bytes  "DPMERF\0M"
//! version          u32
//! feature map      d: u64, D: u64, bandwidth: f64, seed: u64,
//!                  frequencies: (D/2) * d f64, row-major
//! schema           u64 length + UTF-8 schema text
//! architecture     latent_dim: u64, num_classes: u64,
//!                  hidden: u64 count + u64 widths,
//!                  num_numerical: u64, blocks: u64 count + u64 widths
//! parameters       per layer: activation u8, weights row-major f64, bias f64
//! release          mode: str, kind: str, num_samples: u64,
//!                  sensitivity, sigma, epsilon, target_epsilon, delta,
//!                  alpha: f64, num_releases: u32, weighted: u8,
//!                  noise_seed: u64, train_seed: u64, prng: str
//! label dist       u64 count + f64 probabilities
//! ```

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Activation, Architecture, GeneratorParams, Layer, OutputSpec};
use crate::data::Schema;
use crate::embedding::EmbeddingKind;
use crate::error::{Error, Result};
use crate::featuremap::FeatureMap;

pub const MAGIC: &[u8; 8] = b"DPMERF\0M";
pub const FORMAT_VERSION: u32 = 1;

/// Release and accounting metadata; the released values themselves are not
/// stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ReleaseInfo {
    pub mode: String,
    pub kind: EmbeddingKind,
    pub num_samples: u64,
    pub sensitivity: f64,
    pub sigma: f64,
    /// Epsilon actually achieved by the calibrated noise multiplier.
    pub epsilon: f64,
    pub target_epsilon: f64,
    pub delta: f64,
    /// Renyi order attaining the conversion minimum.
    pub alpha: f64,
    pub num_releases: u32,
    pub weighted: bool,
    pub noise_seed: u64,
    pub train_seed: u64,
    pub prng: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub map: FeatureMap,
    pub schema: Schema,
    pub params: GeneratorParams,
    pub release: ReleaseInfo,
    pub label_dist: Vec<f64>,
}

impl Model {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Enc(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(FORMAT_VERSION);

        let map = &self.map;
        w.u64(map.input_dim() as u64);
        w.u64(map.num_features() as u64);
        w.f64(map.bandwidth());
        w.u64(map.seed());
        map.frequencies().iter().for_each(|&v| w.f64(v));

        w.str(&self.schema.to_text());

        let arch = self.params.arch();
        w.u64(arch.latent_dim as u64);
        w.u64(arch.num_classes as u64);
        w.usizes(&arch.hidden);
        w.u64(arch.output.num_numerical as u64);
        w.usizes(&arch.output.categorical_blocks);

        for layer in self.params.layers() {
            w.0.push(match layer.activation {
                Activation::Relu => 0,
                Activation::Identity => 1,
            });
            layer.weights.iter().for_each(|&v| w.f64(v));
            layer.bias.iter().for_each(|&v| w.f64(v));
        }

        let r = &self.release;
        w.str(&r.mode);
        w.str(r.kind.as_str());
        w.u64(r.num_samples);
        for v in [r.sensitivity, r.sigma, r.epsilon, r.target_epsilon, r.delta, r.alpha] {
            w.f64(v);
        }
        w.u32(r.num_releases);
        w.0.push(u8::from(r.weighted));
        w.u64(r.noise_seed);
        w.u64(r.train_seed);
        w.str(&r.prng);

        w.u64(self.label_dist.len() as u64);
        self.label_dist.iter().for_each(|&v| w.f64(v));
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Dec { buf: bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::MalformedModel("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch { found: version, expected: FORMAT_VERSION });
        }

        let d = r.len()?;
        let features = r.len()?;
        let bandwidth = r.f64()?;
        let seed = r.u64()?;
        let freqs = r.f64s(features / 2 * d)?;
        let frequencies = Array2::from_shape_vec((features / 2, d), freqs).map_err(|e| Error::MalformedModel(e.to_string()))?;
        let map = FeatureMap::from_parts(frequencies, bandwidth, seed)?;
        if map.num_features() != features {
            return Err(Error::MalformedModel("feature count disagrees with frequencies".into()));
        }

        let schema = Schema::parse(&r.str()?)?;

        let latent_dim = r.len()?;
        let num_classes = r.len()?;
        let hidden = r.usizes()?;
        let num_numerical = r.len()?;
        let categorical_blocks = r.usizes()?;
        let arch = Architecture { latent_dim, num_classes, hidden, output: OutputSpec { num_numerical, categorical_blocks } };
        arch.validate()?;

        let mut layers = Vec::new();
        for (fan_in, fan_out) in arch.layer_shapes() {
            let activation = match r.take(1)?[0] {
                0 => Activation::Relu,
                1 => Activation::Identity,
                t => return Err(Error::MalformedModel(format!("unknown activation tag {t}"))),
            };
            let weights = Array2::from_shape_vec((fan_out, fan_in), r.f64s(fan_in * fan_out)?)
                .map_err(|e| Error::MalformedModel(e.to_string()))?;
            let bias = Array1::from(r.f64s(fan_out)?);
            layers.push(Layer { weights, bias, activation });
        }
        let params = GeneratorParams::from_parts(arch, layers)?;

        let mode = r.str()?;
        let kind_text = r.str()?;
        let kind = EmbeddingKind::parse(&kind_text)
            .ok_or_else(|| Error::MalformedModel(format!("unknown embedding kind '{kind_text}'")))?;
        let num_samples = r.u64()?;
        let sensitivity = r.f64()?;
        let sigma = r.f64()?;
        let epsilon = r.f64()?;
        let target_epsilon = r.f64()?;
        let delta = r.f64()?;
        let alpha = r.f64()?;
        let num_releases = r.u32()?;
        let weighted = r.take(1)?[0] != 0;
        let noise_seed = r.u64()?;
        let train_seed = r.u64()?;
        let prng = r.str()?;
        let release = ReleaseInfo {
            mode,
            kind,
            num_samples,
            sensitivity,
            sigma,
            epsilon,
            target_epsilon,
            delta,
            alpha,
            num_releases,
            weighted,
            noise_seed,
            train_seed,
            prng,
        };

        let n = r.len()?;
        let label_dist = r.f64s(n)?;
        if r.pos != bytes.len() {
            return Err(Error::MalformedModel(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { map, schema, params, release, label_dist })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)?.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

struct Enc(Vec<u8>);

impl Enc {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_bits().to_le_bytes());
    }

    fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.0.extend_from_slice(s.as_bytes());
    }

    fn usizes(&mut self, v: &[usize]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|&x| self.u64(x as u64));
    }
}

struct Dec<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Dec<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::MalformedModel(format!("truncated at byte {} (wanted {n} more)", self.pos))
        })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    /// A length that must fit in the remaining buffer.
    fn len(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v)
            .ok()
            .filter(|&n| n <= self.buf.len())
            .ok_or_else(|| Error::MalformedModel(format!("implausible length {v}")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::MalformedModel("overflow".into()))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().expect("8 bytes")))).collect())
    }

    fn str(&mut self) -> Result<String> {
        let n = self.len()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| Error::MalformedModel(e.to_string()))
    }

    fn usizes(&mut self) -> Result<Vec<usize>> {
        let n = self.len()?;
        (0..n).map(|_| self.len()).collect()
    }
}
