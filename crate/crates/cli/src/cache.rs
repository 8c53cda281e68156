//! Content-addressed stage cache.
//!
//! An entry's key is the SHA-256 of the stage name, the crate version and
//! the JSON of every configuration section the stage reads, so changing an
//! unrelated section (say the simulation size) keeps a long RPF solve valid.

use std::cell::RefCell;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliResult;
use crate::report::{ensure_dir, write_file};

pub const CACHE_DIR: &str = "cache";

pub fn cache_key<T: Serialize + ?Sized>(stage: &str, inputs: &T) -> String {
    let mut h = Sha256::new();
    h.update(stage.as_bytes());
    h.update([0]);
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    h.update([0]);
    h.update(serde_json::to_vec(inputs).expect("cache inputs serialise"));
    hex::encode(h.finalize())
}

pub struct Cache {
    dir: PathBuf,
    force: bool,
    /// Keys served from disk during this run, in order.
    hits: RefCell<Vec<String>>,
}

impl Cache {
    /// With `force`, lookups always miss; entries are still written.
    pub fn new(out: &Path, force: bool) -> Self {
        Cache { dir: out.join(CACHE_DIR), force, hits: RefCell::new(Vec::new()) }
    }

    /// A cache that neither reads nor writes.
    pub fn disabled() -> Self {
        Cache { dir: PathBuf::new(), force: true, hits: RefCell::new(Vec::new()) }
    }

    fn enabled(&self) -> bool {
        !self.dir.as_os_str().is_empty()
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn load<T: DeserializeOwned>(&self, key: &str) -> Option<T> {
        if self.force || !self.enabled() {
            return None;
        }
        let text = std::fs::read_to_string(self.path(key)).ok()?;
        let v = serde_json::from_str(&text).ok()?;
        self.hits.borrow_mut().push(key.to_string());
        Some(v)
    }

    pub fn store<T: Serialize>(&self, key: &str, value: &T) -> CliResult<()> {
        if !self.enabled() {
            return Ok(());
        }
        ensure_dir(&self.dir)?;
        write_file(&self.dir, &format!("{key}.json"), &serde_json::to_string(value).expect("cache values serialise"))
    }

    pub fn hits(&self) -> Vec<String> {
        self.hits.borrow().clone()
    }

    /// Return the cached value for `key`, or compute and store it.
    pub fn get_or<T, F>(&self, key: &str, compute: F) -> CliResult<(T, bool)>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> CliResult<T>,
    {
        if let Some(v) = self.load(key) {
            return Ok((v, true));
        }
        let v = compute()?;
        self.store(key, &v)?;
        Ok((v, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_depend_on_stage_and_inputs() {
        let a = cache_key("rpf", &[1, 2]);
        assert_eq!(a.len(), 64);
        assert_eq!(a, cache_key("rpf", &[1, 2]));
        assert_ne!(a, cache_key("rpf", &[1, 3]));
        assert_ne!(a, cache_key("cones", &[1, 2]));
    }

    #[test]
    fn force_recomputes_but_still_stores() {
        let dir = tempfile::tempdir().unwrap();
        let c = Cache::new(dir.path(), false);
        let (v, hit) = c.get_or("k", || Ok(vec![0.1f64, 1.0 / 3.0])).unwrap();
        assert!(!hit);
        let (w, hit) = c.get_or::<Vec<f64>, _>("k", || unreachable!()).unwrap();
        assert!(hit && v == w);
        let forced = Cache::new(dir.path(), true);
        let (_, hit) = forced.get_or("k", || Ok(vec![2.0f64])).unwrap();
        assert!(!hit);
        assert_eq!(c.load::<Vec<f64>>("k").unwrap(), vec![2.0]);
    }
}
