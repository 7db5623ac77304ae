//! Content-addressed result cache. An entry stores every file a command
//! wrote, so a hit reproduces the cold run byte for byte.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CACHE_ENV: &str = "DBSPEC_CACHE_DIR";

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CacheKey(pub String);

impl CacheKey {
    /// SHA-256 of the compact JSON rendering. `serde_json` keeps object
    /// keys sorted, which makes the rendering canonical.
    pub fn of(value: &serde_json::Value) -> Self {
        let bytes = serde_json::to_vec(value).expect("value serializes");
        CacheKey(hex::encode(Sha256::digest(&bytes)))
    }
}

/// Output file name to contents.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub files: BTreeMap<String, String>,
}

pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    /// `DBSPEC_CACHE_DIR` if set, otherwise `.cache` under the output dir.
    pub fn for_output(out: &Path) -> Self {
        let dir = std::env::var_os(CACHE_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| out.join(".cache"));
        Self { dir }
    }

    pub fn at(dir: PathBuf) -> Self {
        Self { dir }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(format!("{}.json", key.0))
    }

    pub fn get(&self, key: &CacheKey) -> Option<Bundle> {
        let text = std::fs::read_to_string(self.path(key)).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Writes to a temporary file in the cache dir and renames it into place.
    pub fn put(&self, key: &CacheKey, bundle: &Bundle) -> std::io::Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        let tmp = self.dir.join(format!("{}.{}.tmp", key.0, std::process::id()));
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(serde_json::to_string(bundle).expect("bundle serializes").as_bytes())?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, self.path(key))
    }
}

/// Writes each file of the bundle under `out`, atomically per file.
pub fn write_bundle(out: &Path, bundle: &Bundle) -> std::io::Result<()> {
    std::fs::create_dir_all(out)?;
    for (name, content) in &bundle.files {
        let target = out.join(name);
        let tmp = out.join(format!(".{name}.{}.tmp", std::process::id()));
        std::fs::write(&tmp, content)?;
        std::fs::rename(&tmp, target)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::example_config;

    #[test]
    fn identical_configs_share_a_key() {
        let a = example_config();
        let b = example_config();
        assert_eq!(
            CacheKey::of(&a.cache_subset("solve")),
            CacheKey::of(&b.cache_subset("solve"))
        );
    }

    #[test]
    fn solver_change_invalidates_output_dir_does_not() {
        let base = example_config();
        let key = |c: &crate::cli::config::RunConfig| CacheKey::of(&c.cache_subset("sweep"));
        let mut c = base.clone();
        c.output.dir = "elsewhere".into();
        assert_eq!(key(&c), key(&base));
        let mut c = base.clone();
        c.solver.tol = 1e-7;
        assert_ne!(key(&c), key(&base));
        let mut c = base.clone();
        c.solver.seed += 1;
        assert_ne!(key(&c), key(&base));
        let mut c = base.clone();
        c.mesh.h_bulk = 0.04;
        assert_ne!(key(&c), key(&base));
        let mut c = base.clone();
        c.sweep.epsilons = vec![0.08, 0.04];
        assert_ne!(key(&c), key(&base));
    }

    #[test]
    fn put_then_get() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::at(dir.path().join("c"));
        let key = CacheKey("abc".into());
        let mut b = Bundle::default();
        b.files.insert("x.json".into(), "{\"a\":1}".into());
        assert!(cache.get(&key).is_none());
        cache.put(&key, &b).unwrap();
        assert_eq!(cache.get(&key).unwrap(), b);
        let leftovers: Vec<_> = std::fs::read_dir(cache.dir())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }
}
