//! On-disk artifacts of the step-by-step verbs.
//!
//! A key directory holds `params.json`, `public.key`, `secret.key` and
//! `eval.key`. Transciphered inputs (`HHET`) and results (`HHER`) are
//! length-prefixed ciphertext lists.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use hhe_core::bfv::{BfvContext, BfvProfile, Ciphertext, EvaluationKey, PublicKey, SecretKey};
use hhe_core::codec::{Put, Reader};
use hhe_core::pasta::CipherProfile;
use hhe_core::xof::Xof;
use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

pub const KEYS_FORMAT: &str = "hhe-keys/1";
const TRANSCIPHERED_MAGIC: &[u8; 4] = b"HHET";
const RESULTS_MAGIC: &[u8; 4] = b"HHER";

/// 32 seed bytes for `label`, derived from the numeric `--seed`.
pub fn seed32(seed: u64, label: &str) -> [u8; 32] {
    let mut out = [0u8; 32];
    Xof::new(b"hhe-cli", &[label.as_bytes(), &seed.to_le_bytes()]).fill_bytes(&mut out);
    out
}

pub fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::file(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::file(path, e))
}

pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::file(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::file(dir, e))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyParams {
    pub format: String,
    pub profile: String,
    pub cipher: String,
}

impl KeyParams {
    pub fn new(bfv: &BfvProfile, cipher: &CipherProfile) -> Self {
        Self {
            format: KEYS_FORMAT.into(),
            profile: bfv.name.into(),
            cipher: cipher.name.into(),
        }
    }
}

/// Parameters of a key directory, with the context they describe.
pub struct KeyDir {
    pub params: KeyParams,
    pub ctx: Arc<BfvContext>,
    pub cipher: CipherProfile,
    dir: std::path::PathBuf,
}

impl KeyDir {
    pub fn create(dir: &Path, bundle: &hhe_core::hhe::HheKeyBundle) -> Result<()> {
        ensure_dir(dir)?;
        let ctx = &bundle.ctx;
        let params = KeyParams::new(&ctx.profile, &bundle.cipher);
        write(&dir.join("params.json"), serde_json::to_string_pretty(&params)? + "\n")?;
        write(&dir.join("public.key"), bundle.public_key().to_bytes(ctx))?;
        write(&dir.join("secret.key"), bundle.secret_key().to_bytes(ctx))?;
        write(&dir.join("eval.key"), bundle.evk().to_bytes(ctx))?;
        Ok(())
    }

    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join("params.json");
        let params: KeyParams = serde_json::from_str(&read_text(&path)?)
            .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
        if params.format != KEYS_FORMAT {
            return Err(CliError::invalid(format!(
                "{}: unknown format {:?}",
                path.display(),
                params.format
            )));
        }
        let ctx = BfvContext::from_profile(BfvProfile::by_name(&params.profile)?)?;
        let cipher = CipherProfile::by_name(&params.cipher)?;
        Ok(Self {
            params,
            ctx,
            cipher,
            dir: dir.to_path_buf(),
        })
    }

    pub fn public_key(&self) -> Result<PublicKey> {
        Ok(PublicKey::from_bytes(&self.ctx, &read(&self.dir.join("public.key"))?)?)
    }

    pub fn secret_key(&self) -> Result<SecretKey> {
        Ok(SecretKey::from_bytes(&self.ctx, &read(&self.dir.join("secret.key"))?)?)
    }

    pub fn eval_key(&self) -> Result<EvaluationKey> {
        Ok(EvaluationKey::from_bytes(&self.ctx, &read(&self.dir.join("eval.key"))?)?)
    }
}

fn put_ct(out: &mut Vec<u8>, ctx: &BfvContext, ct: &Ciphertext) {
    let b = ct.to_bytes(ctx);
    out.put_u64(b.len() as u64);
    out.extend(b);
}

fn get_ct(r: &mut Reader, ctx: &BfvContext) -> Result<Ciphertext> {
    let n = r.u64()?;
    if n > r.remaining() as u64 {
        return Err(CliError::invalid("truncated ciphertext"));
    }
    Ok(Ciphertext::from_bytes(ctx, r.bytes(n as usize)?)?)
}

/// Transciphered inputs: `(words, ciphertext)` per input.
pub fn encode_transciphered(ctx: &BfvContext, items: &[(usize, Ciphertext)]) -> Vec<u8> {
    let mut out = TRANSCIPHERED_MAGIC.to_vec();
    out.put_u16(1);
    out.put_u32(items.len() as u32);
    for (len, ct) in items {
        out.put_u32(*len as u32);
        put_ct(&mut out, ctx, ct);
    }
    out
}

pub fn decode_transciphered(ctx: &BfvContext, bytes: &[u8]) -> Result<Vec<(usize, Ciphertext)>> {
    let mut r = Reader::new(bytes);
    r.expect_magic(TRANSCIPHERED_MAGIC, 1)?;
    let n = r.u32()?;
    let mut items = Vec::new();
    for _ in 0..n {
        let len = r.u32()? as usize;
        items.push((len, get_ct(&mut r, ctx)?));
    }
    r.finish()?;
    Ok(items)
}

/// Encrypted scores: `out_dim`, `window`, then one ciphertext per input.
pub struct Results {
    pub out_dim: usize,
    pub window: usize,
    pub cts: Vec<Ciphertext>,
}

impl Results {
    pub fn encode(&self, ctx: &BfvContext) -> Vec<u8> {
        let mut out = RESULTS_MAGIC.to_vec();
        out.put_u16(1);
        out.put_u32(self.out_dim as u32);
        out.put_u32(self.window as u32);
        out.put_u32(self.cts.len() as u32);
        for ct in &self.cts {
            put_ct(&mut out, ctx, ct);
        }
        out
    }

    pub fn decode(ctx: &BfvContext, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.expect_magic(RESULTS_MAGIC, 1)?;
        let out_dim = r.u32()? as usize;
        let window = r.u32()? as usize;
        if out_dim == 0 || window == 0 || out_dim * window > ctx.slots() {
            return Err(CliError::invalid(format!(
                "results header: {out_dim} scores of window {window}"
            )));
        }
        let n = r.u32()?;
        let mut cts = Vec::new();
        for _ in 0..n {
            cts.push(get_ct(&mut r, ctx)?);
        }
        r.finish()?;
        Ok(Self { out_dim, window, cts })
    }
}

/// Integer vectors, one per line, comma-separated; `#` starts a comment.
pub fn read_vectors(path: &Path, p: u64) -> Result<Vec<Vec<u64>>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v = line
            .split(',')
            .map(|s| {
                let s = s.trim();
                match s.parse::<u64>() {
                    Ok(v) if v < p => Ok(v),
                    Ok(v) => Err(format!("{v} is not below {p}")),
                    Err(_) => Err(format!("{s:?} is not a non-negative integer")),
                }
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|m| CliError::invalid(format!("{}:{}: {m}", path.display(), i + 1)))?;
        out.push(v);
    }
    if out.is_empty() {
        return Err(CliError::invalid(format!("{}: no vectors", path.display())));
    }
    Ok(out)
}

/// Header line plus rows, comma-separated.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::invalid(e.to_string()))?;
    write(path, bytes)
}
