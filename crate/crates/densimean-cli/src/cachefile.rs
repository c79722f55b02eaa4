//! Factorization cache persistence: one JSON object per line, append-only.
//! Entries are validated on the way in (product must reconstruct the key,
//! primes certified and ascending); corrupt lines produce a warning and are
//! skipped, never a failure.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    factors: Vec<(String, u32)>,
}

/// Loads the cache file into the process-wide factor cache. Returns the set
/// of keys that were already on disk, so the save pass appends only new work.
pub fn load(path: &Path) -> HashSet<BigUint> {
    let mut seen = HashSet::new();
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(_) => return seen,
    };
    let cache = densimean::numtheory::factor_cache();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                eprintln!(
                    "warning: {}:{}: unreadable line: {e}",
                    path.display(),
                    lineno + 1
                );
                continue;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        match parse_entry(&line) {
            Ok((key, factors)) => match cache.insert_checked(key.clone(), factors) {
                Ok(()) => {
                    seen.insert(key);
                }
                Err(e) => eprintln!(
                    "warning: {}:{}: rejected entry: {e}",
                    path.display(),
                    lineno + 1
                ),
            },
            Err(msg) => eprintln!("warning: {}:{}: {msg}", path.display(), lineno + 1),
        }
    }
    seen
}

fn parse_entry(line: &str) -> Result<(BigUint, Vec<(BigUint, u32)>), String> {
    let entry: CacheEntry =
        serde_json::from_str(line).map_err(|e| format!("not a cache entry: {e}"))?;
    let key = BigUint::from_str(&entry.key).map_err(|e| format!("bad key: {e}"))?;
    let mut factors = Vec::with_capacity(entry.factors.len());
    for (p, e) in &entry.factors {
        let p = BigUint::from_str(p).map_err(|err| format!("bad prime {p}: {err}"))?;
        factors.push((p, *e));
    }
    Ok((key, factors))
}

/// Appends every in-memory factorization whose key was not on disk when the
/// run started. One process, one appender.
pub fn save_new(path: &Path, already: &HashSet<BigUint>) -> Result<(), CliError> {
    let fresh: Vec<CacheEntry> = densimean::numtheory::factor_cache()
        .snapshot()
        .into_iter()
        .filter(|(key, _)| !already.contains(key))
        .map(|(key, factorization)| CacheEntry {
            key: key.to_string(),
            factors: factorization
                .entries()
                .iter()
                .map(|(p, e)| (p.to_string(), *e))
                .collect(),
        })
        .collect();
    if fresh.is_empty() {
        return Ok(());
    }
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CliError::internal(format!("cannot open cache {}: {e}", path.display())))?;
    for entry in fresh {
        let line = serde_json::to_string(&entry)
            .map_err(|e| CliError::internal(format!("cache serialization: {e}")))?;
        writeln!(file, "{line}")
            .map_err(|e| CliError::internal(format!("cache write: {e}")))?;
    }
    Ok(())
}

/// Counts the valid entries without touching the in-memory cache state
/// beyond loading them.
pub fn stats(path: &Path) -> usize {
    load(path).len()
}

pub fn clear(path: &Path) -> Result<bool, CliError> {
    densimean::numtheory::factor_cache().clear();
    match std::fs::remove_file(path) {
        Ok(()) => Ok(true),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(false),
        Err(e) => Err(CliError::internal(format!(
            "cannot remove {}: {e}",
            path.display()
        ))),
    }
}
