//! Binary checkpoint format (little-endian throughout).
//!
//! ```text
//! magic        4 bytes  "SQDR"
//! version      u32      1
//! config_len   u32      then config_len bytes of UTF-8 `key=value\n` lines
//! epoch        u64
//! seed         u64
//! n_sections   u32      parameter values, then batch-norm running stats
//!   section    u32 name_len, name bytes, u32 ndim, ndim × u64 dims,
//!              prod(dims) × f64 values
//! has_momentum u8       0 or 1
//!   [u32 n, n sections named "<param>.momentum"]   when has_momentum = 1
//! ```
//!
//! Loading rebuilds the network from the embedded config and requires the
//! section names and shapes to match that network exactly.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::frontend::FrontendConfig;
use crate::model::{ModelConfig, VadModel};

pub const MAGIC: [u8; 4] = *b"SQDR";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrainMeta {
    pub epoch: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: VadModel,
    pub meta: TrainMeta,
    pub has_momentum: bool,
}

impl Checkpoint {
    /// Returns the model if it was saved with exactly `config`.
    pub fn into_model_for(self, config: &ModelConfig) -> Result<VadModel> {
        if &self.model.config != config {
            return Err(Error::InvalidConfig(format!(
                "checkpoint config {:?} does not match requested {:?}",
                self.model.config, config
            )));
        }
        Ok(self.model)
    }
}

fn config_text(cfg: &ModelConfig) -> String {
    let f = &cfg.frontend;
    format!(
        "channels={}\nn_encoders={}\npatch={}\ngroups={}\nfrontend.n_filters={}\n\
         frontend.half_len={}\nfrontend.frame_len={}\nfrontend.hop_len={}\n\
         frontend.sample_rate={}\nfrontend.log_floor={:e}\n",
        cfg.channels,
        cfg.n_encoders,
        cfg.patch,
        cfg.groups,
        f.n_filters,
        f.half_len,
        f.frame_len,
        f.hop_len,
        f.sample_rate,
        f.log_floor
    )
}

fn parse_config_text(text: &str) -> Result<ModelConfig> {
    let mut cfg = ModelConfig {
        frontend: FrontendConfig::default(),
        ..ModelConfig::default()
    };
    let corrupt = |m: String| Error::Corrupt(m);
    for line in text.lines().filter(|l| !l.is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| corrupt(format!("config line {line:?}")))?;
        let int = || v.parse::<usize>().map_err(|_| corrupt(format!("{k}={v}")));
        match k {
            "channels" => cfg.channels = int()?,
            "n_encoders" => cfg.n_encoders = int()?,
            "patch" => cfg.patch = int()?,
            "groups" => cfg.groups = int()?,
            "frontend.n_filters" => cfg.frontend.n_filters = int()?,
            "frontend.half_len" => cfg.frontend.half_len = int()?,
            "frontend.frame_len" => cfg.frontend.frame_len = int()?,
            "frontend.hop_len" => cfg.frontend.hop_len = int()?,
            "frontend.sample_rate" => {
                cfg.frontend.sample_rate = v.parse().map_err(|_| corrupt(format!("{k}={v}")))?
            }
            "frontend.log_floor" => {
                cfg.frontend.log_floor = v.parse().map_err(|_| corrupt(format!("{k}={v}")))?
            }
            _ => return Err(corrupt(format!("unknown config key {k:?}"))),
        }
    }
    Ok(cfg)
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_section(buf: &mut Vec<u8>, name: &str, shape: &[usize], values: &[f64]) {
    put_u32(buf, name.len() as u32);
    buf.extend_from_slice(name.as_bytes());
    put_u32(buf, shape.len() as u32);
    for &d in shape {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn to_bytes(model: &VadModel, meta: TrainMeta, with_momentum: bool) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&MAGIC);
    put_u32(&mut buf, VERSION);
    let cfg = config_text(&model.config);
    put_u32(&mut buf, cfg.len() as u32);
    buf.extend_from_slice(cfg.as_bytes());
    buf.extend_from_slice(&meta.epoch.to_le_bytes());
    buf.extend_from_slice(&meta.seed.to_le_bytes());
    let params = model.params();
    let buffers = model.buffers();
    put_u32(&mut buf, (params.len() + buffers.len()) as u32);
    for p in &params {
        put_section(&mut buf, &p.name, p.value.shape(), p.value.data());
    }
    for (name, values) in &buffers {
        put_section(&mut buf, name, &[values.len()], values);
    }
    buf.push(u8::from(with_momentum));
    if with_momentum {
        put_u32(&mut buf, params.len() as u32);
        for p in &params {
            put_section(
                &mut buf,
                &format!("{}.momentum", p.name),
                p.momentum.shape(),
                p.momentum.data(),
            );
        }
    }
    buf
}

pub fn save(model: &VadModel, meta: TrainMeta, with_momentum: bool, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(model, meta, with_momentum)).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Truncated(format!(
                "reading {what}: need {n} bytes at offset {}, {} left",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn section(&mut self) -> Result<(String, Vec<usize>, Vec<f64>)> {
        let len = self.u32("section name length")? as usize;
        let name = String::from_utf8(self.take(len, "section name")?.to_vec())
            .map_err(|_| Error::Corrupt("section name is not UTF-8".into()))?;
        let ndim = self.u32("section rank")? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(self.u64("section dims")? as usize);
        }
        let n: usize = shape.iter().product();
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Corrupt("huge section".into()))?, &name)?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok((name, shape, values))
    }
}

fn expect_section(got: (String, Vec<usize>, Vec<f64>), name: &str, shape: &[usize]) -> Result<Vec<f64>> {
    let (n, s, v) = got;
    if n != name || s != shape {
        return Err(Error::Corrupt(format!(
            "expected section {name:?} {shape:?}, found {n:?} {s:?}"
        )));
    }
    Ok(v)
}

pub fn from_bytes(buf: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { buf, pos: 0 };
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let clen = r.u32("config length")? as usize;
    let text = std::str::from_utf8(r.take(clen, "config")?)
        .map_err(|_| Error::Corrupt("config is not UTF-8".into()))?;
    let config = parse_config_text(text)?;
    config.validate()?;
    let meta = TrainMeta {
        epoch: r.u64("epoch")?,
        seed: r.u64("seed")?,
    };
    let mut model = VadModel::build(config, 0)?;
    let n_sections = r.u32("section count")? as usize;
    let n_params = model.params().len();
    let n_buffers = model.buffers().len();
    if n_sections != n_params + n_buffers {
        return Err(Error::Corrupt(format!(
            "{n_sections} sections, model has {} parameters and {} buffers",
            n_params, n_buffers
        )));
    }
    for p in model.params_mut() {
        let shape = p.value.shape().to_vec();
        let v = expect_section(r.section()?, &p.name, &shape)?;
        p.value.data_mut().copy_from_slice(&v);
    }
    for (name, buf) in model.buffers_mut() {
        let v = expect_section(r.section()?, &name, &[buf.len()])?;
        buf.copy_from_slice(&v);
    }
    let has_momentum = match r.take(1, "momentum flag")?[0] {
        0 => false,
        1 => true,
        other => return Err(Error::Corrupt(format!("momentum flag {other}"))),
    };
    if has_momentum {
        let n = r.u32("momentum count")? as usize;
        if n != n_params {
            return Err(Error::Corrupt(format!("{n} momentum sections for {n_params} parameters")));
        }
        for p in model.params_mut() {
            let shape = p.value.shape().to_vec();
            let v = expect_section(r.section()?, &format!("{}.momentum", p.name), &shape)?;
            p.momentum.data_mut().copy_from_slice(&v);
        }
    }
    if r.pos != buf.len() {
        return Err(Error::Corrupt(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    Ok(Checkpoint {
        model,
        meta,
        has_momentum,
    })
}

pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{BnMode, Tensor};

    fn trained_ish(cfg: ModelConfig) -> VadModel {
        let mut m = VadModel::build(cfg, 21).unwrap();
        let x = Tensor::from_fn(&[2, 1, 64, 8], |i| (i as f64 * 0.37).sin());
        let p = m.forward_train(&x, BnMode::Train).unwrap();
        m.backward(&[p[0] - 1.0, p[1]]).unwrap();
        crate::nn::sgd_step(m.params_mut(), 0.05, crate::nn::SgdConfig::default());
        m
    }

    #[test]
    fn round_trip_is_bitwise() {
        let m = trained_ish(ModelConfig::default());
        let meta = TrainMeta { epoch: 7, seed: 99 };
        let ck = from_bytes(&to_bytes(&m, meta, true)).unwrap();
        assert_eq!(ck.meta, meta);
        assert!(ck.has_momentum);
        assert_eq!(ck.model, m);
        let lean = from_bytes(&to_bytes(&m, meta, false)).unwrap();
        assert!(!lean.has_momentum);
        for (a, b) in lean.model.params().iter().zip(m.params()) {
            assert_eq!(a.value, b.value);
        }
        assert_eq!(lean.model.buffers(), m.buffers());
    }

    #[test]
    fn header_errors() {
        let m = VadModel::build(ModelConfig::default(), 1).unwrap();
        let bytes = to_bytes(&m, TrainMeta::default(), false);
        let mut bad = bytes.clone();
        bad[1] = b'X';
        assert!(matches!(from_bytes(&bad), Err(Error::BadMagic(_))));
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(from_bytes(&v2), Err(Error::VersionMismatch { found: 2, expected: 1 })));
        assert!(matches!(from_bytes(&bytes[..bytes.len() - 3]), Err(Error::Truncated(_))));
        assert!(matches!(from_bytes(&bytes[..2]), Err(Error::Truncated(_))));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(from_bytes(&long), Err(Error::Corrupt(_))));
    }

    #[test]
    fn invalid_embedded_config_rejected() {
        let m = VadModel::build(ModelConfig::default(), 1).unwrap();
        let bytes = to_bytes(&m, TrainMeta::default(), false);
        let text = std::str::from_utf8(&bytes[12..12 + 200]).unwrap();
        let at = 12 + text.find("groups=8").unwrap() + 7;
        let mut bad = bytes.clone();
        bad[at] = b'5';
        assert!(matches!(from_bytes(&bad), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn config_travels_with_the_file() {
        let cfg = ModelConfig { channels: 24, groups: 4, ..ModelConfig::default() };
        let m = VadModel::build(cfg, 3).unwrap();
        let ck = from_bytes(&to_bytes(&m, TrainMeta::default(), false)).unwrap();
        assert_eq!(ck.model.config, cfg);
        assert!(ck.clone().into_model_for(&ModelConfig::default()).is_err());
        assert!(ck.into_model_for(&cfg).is_ok());
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.sqdr");
        let m = trained_ish(ModelConfig { channels: 16, ..ModelConfig::default() });
        save(&m, TrainMeta { epoch: 1, seed: 2 }, true, &p).unwrap();
        assert_eq!(load(&p).unwrap().model, m);
        assert!(matches!(load(dir.path().join("missing")), Err(Error::Io { .. })));
    }
}
