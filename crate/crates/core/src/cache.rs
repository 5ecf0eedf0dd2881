//! Binary spectrum cache.
//!
//! Layout (little-endian): magic `ECSP`, `u32` format version, 32-byte
//! SHA-256 of the base distribution, `u64` copy count, `u64` segment count,
//! then `(log_value, log_multiplicity)` as pairs of IEEE doubles.
//! Exact multiplicities are not stored; loaded spectra are log-domain.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::spectrum::{Mode, Segment, Spectrum, SpectrumOptions, SpectrumSource, Staircase};

pub const MAGIC: &[u8; 4] = b"ECSP";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 32 + 8 + 8;

/// Environment variable that overrides the configured cache directory.
pub const CACHE_ENV: &str = "ENTCONV_CACHE";

fn encode(s: &Spectrum) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 16 * s.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&s.base().hash());
    buf.extend_from_slice(&(s.n() as u64).to_le_bytes());
    buf.extend_from_slice(&(s.len() as u64).to_le_bytes());
    for seg in s.segments() {
        buf.extend_from_slice(&seg.log_value.to_le_bytes());
        buf.extend_from_slice(&seg.log_multiplicity.to_le_bytes());
    }
    buf
}

/// Writes `s` to `path` atomically (temporary file in the same directory,
/// then rename).
pub fn save(s: &Spectrum, path: &Path) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(d) = dir {
        fs::create_dir_all(d)?;
    }
    let file_name = path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_else(|| "spectrum".into());
    let tmp = path.with_file_name(format!(".{file_name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&encode(s))?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn integrity(path: &Path, reason: impl Into<String>) -> Error {
    Error::CacheIntegrity {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn read_u64(b: &[u8]) -> u64 {
    u64::from_le_bytes(b.try_into().expect("8 bytes"))
}

/// Loads a spectrum for `base`, rejecting files written for another base.
pub fn load(path: &Path, base: &Distribution) -> Result<Spectrum> {
    let bytes = fs::read(path)?;
    if bytes.len() < HEADER_LEN {
        return Err(integrity(
            path,
            format!("{} bytes, header needs {HEADER_LEN}", bytes.len()),
        ));
    }
    if &bytes[0..4] != MAGIC {
        return Err(integrity(path, "bad magic bytes"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::CacheVersion {
            path: path.to_path_buf(),
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    if bytes[8..40] != base.hash() {
        return Err(Error::CacheHashMismatch {
            path: path.to_path_buf(),
        });
    }
    let n = read_u64(&bytes[40..48]);
    let count = read_u64(&bytes[48..56]);
    let body = &bytes[HEADER_LEN..];
    if n == 0 || n > u32::MAX as u64 {
        return Err(integrity(path, format!("copy count {n} out of range")));
    }
    if count.checked_mul(16) != Some(body.len() as u64) {
        return Err(integrity(
            path,
            format!("{count} segments declared, {} payload bytes", body.len()),
        ));
    }
    let segments: Vec<Segment> = body
        .chunks_exact(16)
        .map(|c| Segment {
            log_value: f64::from_le_bytes(c[0..8].try_into().expect("8 bytes")),
            log_multiplicity: f64::from_le_bytes(c[8..16].try_into().expect("8 bytes")),
        })
        .collect();
    if segments
        .iter()
        .any(|s| !s.log_value.is_finite() || !s.log_multiplicity.is_finite())
    {
        return Err(integrity(path, "non-finite segment"));
    }
    Ok(Spectrum::from_parts(
        base.clone(),
        n as u32,
        Mode::LogDomain,
        Staircase::new(segments, None),
    ))
}

/// Saves then reloads `s`.
pub fn cache_roundtrip(s: &Spectrum, path: &Path) -> Result<Spectrum> {
    save(s, path)?;
    load(path, s.base())
}

/// Spectrum provider with an optional on-disk cache keyed by
/// (distribution hash, n, mode).
#[derive(Debug, Clone, Default)]
pub struct SpectrumStore {
    dir: Option<PathBuf>,
}

impl SpectrumStore {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir }
    }

    /// Uses `ENTCONV_CACHE` when set, otherwise `dir`.
    pub fn from_env_or(dir: Option<PathBuf>) -> Self {
        match std::env::var_os(CACHE_ENV) {
            Some(v) if !v.is_empty() => Self::new(Some(PathBuf::from(v))),
            _ => Self::new(dir),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn path_for(&self, base: &Distribution, n: u32, mode: Mode) -> Option<PathBuf> {
        let hex: String = base.hash()[..12]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        self.dir
            .as_ref()
            .map(|d| d.join(format!("{hex}-n{n}-{mode}.ecsp")))
    }

    /// Loads from disk when possible, otherwise builds and (if a directory is
    /// configured) stores. Exact-mode spectra are never served from disk.
    pub fn get<S: SpectrumSource + ?Sized>(
        &self,
        source: &S,
        n: u32,
        opts: &SpectrumOptions,
    ) -> Result<Spectrum> {
        let path = match (&self.dir, opts.mode) {
            (Some(_), Mode::LogDomain) => self.path_for(&source.distribution(), n, opts.mode),
            _ => None,
        };
        let Some(path) = path else {
            return source.spectrum(n, opts);
        };
        if path.exists() {
            if let Ok(s) = load(&path, &source.distribution()) {
                if s.n() == n {
                    return Ok(s);
                }
            }
        }
        let built = source.spectrum(n, opts)?;
        let s = Spectrum::from_parts(
            source.distribution(),
            n,
            built.mode(),
            built.stairs().clone(),
        );
        save(&s, &path)?;
        Ok(s)
    }
}
