//! Content-addressed store of solved representations.

use std::path::{Path, PathBuf};

use cuspidal::bgbasis::{BGForm, BGFormJson};
use cuspidal::num::{Prec, Q};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Everything a cached representation depends on.
#[derive(Debug, Clone, Serialize)]
pub struct CacheKey {
    pub level: u64,
    pub weight: String,
    pub character: (u64, u64),
    pub input_hash: String,
    pub length: usize,
    pub prec: Prec,
}

impl CacheKey {
    pub fn new(level: u64, weight: Q, character: (u64, u64), input_hash: String, length: usize, prec: Prec) -> Self {
        Self { level, weight: format!("{}/{}", weight.numer(), weight.denom()), character, input_hash, length, prec }
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("key serializes")))
    }
}

#[derive(Debug, Clone)]
pub struct Cache {
    dir: Option<PathBuf>,
}

impl Cache {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir }
    }

    pub fn disabled() -> Self {
        Self { dir: None }
    }

    /// `$XDG_CACHE_HOME/cuspidal`, else `$HOME/.cache/cuspidal`.
    pub fn default_dir() -> Option<PathBuf> {
        if let Some(x) = std::env::var_os("XDG_CACHE_HOME").filter(|s| !s.is_empty()) {
            return Some(PathBuf::from(x).join("cuspidal"));
        }
        std::env::var_os("HOME").map(|h| Path::new(&h).join(".cache").join("cuspidal"))
    }

    fn path(&self, key: &CacheKey) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("bgform-{}.json", key.digest())))
    }

    pub fn get(&self, key: &CacheKey) -> Option<BGForm> {
        let path = self.path(key)?;
        let text = std::fs::read_to_string(&path).ok()?;
        let parsed = serde_json::from_str::<BGFormJson>(&text).ok().and_then(|j| BGForm::from_json(&j).ok());
        if parsed.is_none() {
            log::warn!("ignoring unreadable cache entry {}", path.display());
        }
        parsed
    }

    /// Write through a temporary file so readers never see a partial entry.
    pub fn put(&self, key: &CacheKey, form: &BGForm) {
        let Some(path) = self.path(key) else { return };
        let write = || -> std::io::Result<()> {
            std::fs::create_dir_all(path.parent().expect("cache path has a parent"))?;
            let tmp = path.with_extension(format!("tmp{}", std::process::id()));
            std::fs::write(&tmp, serde_json::to_vec(&form.to_json()).expect("form serializes"))?;
            std::fs::rename(&tmp, &path)
        };
        if let Err(e) = write() {
            log::warn!("could not write cache entry {}: {e}", path.display());
        }
    }
}
