//! Little-endian binary checkpoints for every network type.
//!
//! Layout:
//!
//! ```text
//! magic    8 bytes  "MDLCKPT\0"
//! version  u32      1
//! kind     u8       0 = mode network, 1 = dense, 2 = svd
//! head     u8       0 = softmax/cross-entropy, 1 = identity/mse
//! n        u32      number of widths, followed by n × u32 widths
//! mode network:
//!   tying  u8       0 = untied, 1 = tied
//!   frozen u8       1 if Σ is fixed
//!   n-1 × u32 mode counts
//!   per layer: ξ̂ (N_l × p), Σ (p), ξ (N_{l+1} × p) as f64, row-major
//! dense:
//!   per layer: w (N_l × N_{l+1})
//! svd:
//!   λ_o f64, λ_s f64
//!   per layer: r u32, U (N_l × r), s (r), V (N_{l+1} × r)
//! ```
//!
//! Tied pattern matrices are written once per side they appear on and must
//! agree bit-for-bit when read back.

use std::path::Path;

use crate::baselines::{DenseNetwork, SvdLayer, SvdNetwork, SvdRegConfig};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::modes::{MdlNetwork, Tying};
use crate::training::{Head, Model};

pub const MAGIC: &[u8; 8] = b"MDLCKPT\0";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum Checkpoint {
    Mdl(MdlNetwork),
    Dense(DenseNetwork),
    Svd(SvdNetwork),
}

impl Checkpoint {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Checkpoint::Mdl(n) if n.sigma_frozen() => "lrd",
            Checkpoint::Mdl(_) => "mdl",
            Checkpoint::Dense(_) => "bp",
            Checkpoint::Svd(_) => "svd",
        }
    }

    pub fn as_model(&self) -> &dyn Model {
        match self {
            Checkpoint::Mdl(n) => n,
            Checkpoint::Dense(n) => n,
            Checkpoint::Svd(n) => n,
        }
    }

    pub fn widths(&self) -> &[usize] {
        match self {
            Checkpoint::Mdl(n) => n.widths(),
            Checkpoint::Dense(n) => n.widths(),
            Checkpoint::Svd(n) => n.widths(),
        }
    }
}

fn head_code(h: Head) -> u8 {
    match h {
        Head::SoftmaxCrossEntropy => 0,
        Head::IdentityMse => 1,
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("dimension fits in u32");
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        for v in vs {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub fn encode(ckpt: &Checkpoint) -> Vec<u8> {
    let mut w = Writer(MAGIC.to_vec());
    w.0.extend_from_slice(&VERSION.to_le_bytes());
    let (kind, head) = match ckpt {
        Checkpoint::Mdl(n) => (0, n.head()),
        Checkpoint::Dense(n) => (1, n.head()),
        Checkpoint::Svd(n) => (2, n.head()),
    };
    w.u8(kind);
    w.u8(head_code(head));
    let widths = ckpt.widths();
    w.u32(widths.len());
    widths.iter().for_each(|&n| w.u32(n));
    match ckpt {
        Checkpoint::Mdl(net) => {
            w.u8(u8::from(net.tying() == Tying::OneLayerOnePattern));
            w.u8(u8::from(net.sigma_frozen()));
            net.mode_counts().iter().for_each(|&p| w.u32(p));
            for l in 0..net.num_layers() {
                let layer = net.layer(l);
                w.f64s(layer.xi_hat.as_slice());
                w.f64s(layer.sigma);
                w.f64s(layer.xi.as_slice());
            }
        }
        Checkpoint::Dense(net) => net.weights().iter().for_each(|m| w.f64s(m.as_slice())),
        Checkpoint::Svd(net) => {
            w.f64s(&[net.reg().lambda_o, net.reg().lambda_s]);
            for layer in net.layers() {
                w.u32(layer.rank());
                w.f64s(layer.u.as_slice());
                w.f64s(&layer.s);
                w.f64s(layer.v.as_slice());
            }
        }
    }
    w.0
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| Error::Length {
            what: what.to_string(),
            expected: self.pos.saturating_add(n),
            found: self.bytes.len(),
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }
    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()) as usize)
    }
    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Format(format!("{what} too large")))?, what)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
    fn matrix(&mut self, rows: usize, cols: usize, what: &str) -> Result<Matrix> {
        Matrix::from_vec(rows, cols, self.f64s(rows * cols, what)?)
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "magic").map_err(|_| Error::Format("file too short for a checkpoint header".into()))? != MAGIC {
        return Err(Error::Format("not a checkpoint file (bad magic)".into()));
    }
    let version = r.u32("version")?;
    if version != VERSION as usize {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let kind = r.u8("kind")?;
    let head = match r.u8("head")? {
        0 => Head::SoftmaxCrossEntropy,
        1 => Head::IdentityMse,
        h => return Err(Error::Format(format!("unknown head code {h}"))),
    };
    let n = r.u32("width count")?;
    if !(2..=64).contains(&n) {
        return Err(Error::Format(format!("implausible width count {n}")));
    }
    let widths = (0..n).map(|_| r.u32("widths")).collect::<Result<Vec<_>>>()?;
    let layers = n - 1;
    let ckpt = match kind {
        0 => {
            let tying = match r.u8("tying")? {
                0 => Tying::OneLayerTwoPatterns,
                1 => Tying::OneLayerOnePattern,
                t => return Err(Error::Format(format!("unknown tying code {t}"))),
            };
            let frozen = r.u8("frozen flag")? != 0;
            let modes = (0..layers).map(|_| r.u32("mode counts")).collect::<Result<Vec<_>>>()?;
            let mut patterns: Vec<Matrix> = Vec::new();
            let mut sigmas = Vec::with_capacity(layers);
            for l in 0..layers {
                let xi_hat = r.matrix(widths[l], modes[l], "upstream patterns")?;
                let sigma = r.f64s(modes[l], "importances")?;
                let xi = r.matrix(widths[l + 1], modes[l], "downstream patterns")?;
                match tying {
                    Tying::OneLayerOnePattern if l > 0 => {
                        if patterns.last() != Some(&xi_hat) {
                            return Err(Error::Format(format!("tied pattern copies disagree at layer {l}")));
                        }
                    }
                    Tying::OneLayerOnePattern => patterns.push(xi_hat),
                    Tying::OneLayerTwoPatterns => patterns.push(xi_hat),
                }
                patterns.push(xi);
                sigmas.push(sigma);
            }
            Checkpoint::Mdl(MdlNetwork::from_parts(widths, tying, head, patterns, sigmas, frozen)?)
        }
        1 => {
            let weights = (0..layers)
                .map(|l| r.matrix(widths[l], widths[l + 1], "weights"))
                .collect::<Result<Vec<_>>>()?;
            Checkpoint::Dense(DenseNetwork::from_weights(head, weights)?)
        }
        2 => {
            let lam = r.f64s(2, "penalty strengths")?;
            let reg = SvdRegConfig {
                lambda_o: lam[0],
                lambda_s: lam[1],
            };
            let mut svd_layers = Vec::with_capacity(layers);
            for l in 0..layers {
                let rank = r.u32("rank")?;
                svd_layers.push(SvdLayer {
                    u: r.matrix(widths[l], rank, "u")?,
                    s: r.f64s(rank, "singular values")?,
                    v: r.matrix(widths[l + 1], rank, "v")?,
                });
            }
            Checkpoint::Svd(SvdNetwork::from_layers(head, reg, svd_layers)?)
        }
        k => return Err(Error::Format(format!("unknown network kind {k}"))),
    };
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes after checkpoint", bytes.len() - r.pos)));
    }
    Ok(ckpt)
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    std::fs::write(path, encode(ckpt)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
