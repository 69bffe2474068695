//! Segmented sieve of Eratosthenes and the on-disk prime cache.
//!
//! The cache format is a flat file: the 8-byte magic `ADLPRIM1` followed by
//! every prime up to the bound as a little-endian `u64`. The bound is part of
//! the file name, so a cache never has to be trusted beyond what it claims.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};

pub const CACHE_MAGIC: &[u8; 8] = b"ADLPRIM1";

const SEGMENT: u64 = 1 << 18;

fn small_primes(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// All primes `<= bound`, in increasing order.
pub fn primes_up_to(bound: u64) -> Vec<u64> {
    primes_up_to_with(bound, Execution::default())
}

pub fn primes_up_to_with(bound: u64, exec: Execution) -> Vec<u64> {
    if bound < 2 {
        return Vec::new();
    }
    let base = small_primes(isqrt(bound));
    let segments = (bound - 1).div_ceil(SEGMENT) as usize;
    let chunks = map_indexed(exec, segments, |s| {
        let lo = 2 + s as u64 * SEGMENT;
        let hi = (lo + SEGMENT - 1).min(bound);
        let mut composite = vec![false; (hi - lo + 1) as usize];
        for &p in &base {
            if p * p > hi {
                break;
            }
            let start = (p * p).max(lo.div_ceil(p) * p);
            let mut m = start;
            while m <= hi {
                composite[(m - lo) as usize] = true;
                m += p;
            }
        }
        composite
            .iter()
            .enumerate()
            .filter(|(_, &c)| !c)
            .map(|(i, _)| lo + i as u64)
            .collect::<Vec<_>>()
    });
    chunks.concat()
}

pub fn cache_path(dir: &Path, bound: u64) -> PathBuf {
    dir.join(format!("primes-le-{bound}.bin"))
}

pub fn write_cache(path: &Path, primes: &[u64]) -> Result<()> {
    let mut buf = Vec::with_capacity(8 + primes.len() * 8);
    buf.extend_from_slice(CACHE_MAGIC);
    for p in primes {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_cache(path: &Path) -> Result<Vec<u64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let malformed = |reason: &str| Error::Cache {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if bytes.len() < 8 || &bytes[..8] != CACHE_MAGIC {
        return Err(malformed("bad magic"));
    }
    let body = &bytes[8..];
    if body.len() % 8 != 0 {
        return Err(malformed("truncated entry"));
    }
    let primes: Vec<u64> = body
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    if primes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(malformed("primes not strictly increasing"));
    }
    Ok(primes)
}

/// Primes up to `bound`, read from `dir` when a cache exists and written
/// there otherwise. Without a directory this is plain sieving.
pub fn load_or_compute(dir: Option<&Path>, bound: u64, exec: Execution) -> Result<Vec<u64>> {
    let Some(dir) = dir else {
        return Ok(primes_up_to_with(bound, exec));
    };
    let path = cache_path(dir, bound);
    if path.exists() {
        return read_cache(&path);
    }
    let primes = primes_up_to_with(bound, exec);
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_cache(&path, &primes)?;
    Ok(primes)
}
