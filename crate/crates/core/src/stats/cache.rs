//! Content-addressed persistence for computed statistics.
//!
//! Cache entries are keyed by the SHA-224 of the capture file plus the
//! window spec, so a changed capture or a different windowing never aliases
//! a stale entry.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha224};

use crate::stats::{compute_statistics, StatsDb, StatsError, WindowSpec, STATS_FORMAT_VERSION};

/// SHA-224 of the file bytes as lowercase hex, streamed in 64 KiB chunks.
pub fn content_hash(path: &Path) -> std::io::Result<String> {
    let mut file = fs::File::open(path)?;
    let mut hasher = Sha224::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn stats_cache_path(cache_dir: &Path, hash: &str, spec: WindowSpec) -> PathBuf {
    cache_dir.join(format!("{hash}-{}.stats", spec.cache_key()))
}

/// How [`load_or_compute`] satisfied the request; mostly of interest to
/// logging and tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheOutcome {
    /// Served from a valid cache entry without re-reading packets.
    Hit,
    /// No entry existed; computed and stored.
    Computed,
    /// An entry existed but was corrupt or from another format version.
    RecomputedInvalid,
    /// Caching was disabled for this call.
    Disabled,
}

/// Returns cached statistics when a valid entry exists, otherwise computes
/// them and persists the result. `cache_dir` of `None` disables caching.
pub fn load_or_compute(
    path: &Path,
    cache_dir: Option<&Path>,
    spec: WindowSpec,
) -> Result<(StatsDb, CacheOutcome), StatsError> {
    let Some(dir) = cache_dir else {
        return Ok((compute_statistics(path, spec)?, CacheOutcome::Disabled));
    };
    let hash = content_hash(path)?;
    let entry = stats_cache_path(dir, &hash, spec);

    let mut invalid = false;
    if entry.is_file() {
        match try_load(&entry, &hash, spec) {
            Ok(db) => return Ok((db, CacheOutcome::Hit)),
            Err(reason) => {
                log::warn!(
                    "ignoring cache entry {}: {reason}; recomputing",
                    entry.display()
                );
                invalid = true;
            }
        }
    }

    let db = compute_statistics(path, spec)?;
    if let Err(e) = store(&entry, dir, &db) {
        // a read-only or full cache directory should not fail the run
        log::warn!("could not write cache entry {}: {e}", entry.display());
    }
    Ok((
        db,
        if invalid {
            CacheOutcome::RecomputedInvalid
        } else {
            CacheOutcome::Computed
        },
    ))
}

fn try_load(entry: &Path, hash: &str, spec: WindowSpec) -> Result<StatsDb, String> {
    let bytes = fs::read(entry).map_err(|e| e.to_string())?;
    let db: StatsDb = serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
    if db.format_version != STATS_FORMAT_VERSION {
        return Err(format!(
            "format version {} (current is {STATS_FORMAT_VERSION})",
            db.format_version
        ));
    }
    if db.content_hash != hash {
        return Err("content hash mismatch".into());
    }
    if db.window_spec != spec {
        return Err("window spec mismatch".into());
    }
    Ok(db)
}

fn store(entry: &Path, dir: &Path, db: &StatsDb) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    // write-then-rename so a crashed run never leaves a torn entry
    let tmp = entry.with_extension("stats.tmp");
    fs::write(&tmp, serde_json::to_vec(db)?)?;
    fs::rename(&tmp, entry)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_hash_matches_reference() {
        // SHA-224("")
        let mut hasher = Sha224::new();
        hasher.update(b"");
        assert_eq!(
            hex::encode(hasher.finalize()),
            "d14a028c2a3a2bc9476102bb288234c415a2b01f828ea62ac5b3e42f"
        );
    }

    #[test]
    fn cache_path_layout() {
        let p = stats_cache_path(Path::new("/tmp/cache"), "abc123", WindowSpec::Seconds(2.5));
        assert_eq!(p, Path::new("/tmp/cache/abc123-2500ms.stats"));
        let p = stats_cache_path(Path::new("/tmp/cache"), "abc123", WindowSpec::Count(100));
        assert_eq!(p, Path::new("/tmp/cache/abc123-w100.stats"));
    }
}
