//! The EEGB recording container.
//!
//! One file holds one subject-condition recording: a fixed 20-byte header
//! followed by the samples in single precision. Every field is little-endian
//! and nothing is variable-length, so the format can be parsed from any
//! language in a dozen lines:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "EEGB"
//!      4     2  format version, u16 (currently 1)
//!      6     2  channel count, u16
//!      8     4  samples per channel, u32
//!     12     4  sample rate in Hz, f32
//!     16     1  condition: 0 = rest, 1 = meditation
//!     17     3  reserved, written as zero, ignored on read
//!     20     …  samples, f32, channel-major (channel 0 complete, then 1, …)
//! ```
//!
//! Samples are stored as `f32`: EEG amplifiers deliver well under 24 bits of
//! signal, so single precision loses nothing physical, and it halves the file
//! size. Writing casts `f64 → f32` once; reading widens back. A file read and
//! rewritten reproduces itself byte for byte.
//!
//! The subject identifier is deliberately *not* stored in the file — the
//! manifest that accompanies a data directory carries it (see
//! [`crate::manifest`]), keeping the container free of string encoding.

use std::fs;
use std::path::Path;

use medeeg_core::{Condition, Recording};
use ndarray::Array2;
use thiserror::Error;

/// The four magic bytes that open every EEGB file.
pub const MAGIC: [u8; 4] = *b"EEGB";

/// Current format version; bumped only for incompatible layout changes.
pub const VERSION: u16 = 1;

/// Bytes before the first sample.
pub const HEADER_LEN: usize = 20;

#[derive(Debug, Error)]
pub enum EegbError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not an EEGB file (magic bytes {0:02x?})")]
    BadMagic([u8; 4]),
    #[error("unsupported EEGB version {0} (this build reads version {VERSION})")]
    UnsupportedVersion(u16),
    #[error("condition byte {0} is neither 0 (rest) nor 1 (meditation)")]
    BadCondition(u8),
    #[error("file length {actual} does not match header ({channels} channels × {samples} samples needs {expected})")]
    SizeMismatch {
        channels: usize,
        samples: usize,
        expected: usize,
        actual: usize,
    },
    #[error("recording too large for the container: {0}")]
    TooLarge(String),
    #[error("file decodes to an invalid recording: {0}")]
    InvalidData(String),
}

/// Serialize a recording into the EEGB byte layout.
///
/// Fails only if the shape exceeds the header's u16/u32 fields.
pub fn encode(rec: &Recording) -> Result<Vec<u8>, EegbError> {
    let channels = rec.n_channels();
    let samples = rec.n_samples();
    if channels > u16::MAX as usize {
        return Err(EegbError::TooLarge(format!("{channels} channels > 65535")));
    }
    if samples > u32::MAX as usize {
        return Err(EegbError::TooLarge(format!("{samples} samples > 2^32-1")));
    }

    let mut bytes = Vec::with_capacity(HEADER_LEN + 4 * channels * samples);
    bytes.extend_from_slice(&MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&(channels as u16).to_le_bytes());
    bytes.extend_from_slice(&(samples as u32).to_le_bytes());
    bytes.extend_from_slice(&(rec.sample_rate_hz as f32).to_le_bytes());
    bytes.push(rec.condition.label());
    bytes.extend_from_slice(&[0u8; 3]);
    // Row-major iteration over a channels×samples array IS channel-major
    // order on disk: channel 0's samples first.
    for &x in rec.data.iter() {
        bytes.extend_from_slice(&(x as f32).to_le_bytes());
    }
    Ok(bytes)
}

/// Parse EEGB bytes back into a [`Recording`].
///
/// The container stores no subject identifier, so the caller supplies one
/// (normally from the manifest entry that pointed at the file).
pub fn decode(bytes: &[u8], subject_id: &str) -> Result<Recording, EegbError> {
    if bytes.len() < HEADER_LEN {
        return Err(EegbError::SizeMismatch {
            channels: 0,
            samples: 0,
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(EegbError::BadMagic(magic));
    }
    let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
    if version != VERSION {
        return Err(EegbError::UnsupportedVersion(version));
    }
    let channels = u16::from_le_bytes(bytes[6..8].try_into().unwrap()) as usize;
    let samples = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let sample_rate = f32::from_le_bytes(bytes[12..16].try_into().unwrap());
    let condition = Condition::from_label(bytes[16]).ok_or(EegbError::BadCondition(bytes[16]))?;

    let expected = HEADER_LEN + 4 * channels * samples;
    if bytes.len() != expected {
        return Err(EegbError::SizeMismatch {
            channels,
            samples,
            expected,
            actual: bytes.len(),
        });
    }

    let mut data = Vec::with_capacity(channels * samples);
    for chunk in bytes[HEADER_LEN..].chunks_exact(4) {
        data.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
    }
    let data = Array2::from_shape_vec((channels, samples), data)
        .map_err(|e| EegbError::InvalidData(e.to_string()))?;
    Recording::new(subject_id, condition, sample_rate as f64, data)
        .map_err(|e| EegbError::InvalidData(e.to_string()))
}

/// Write a recording to `path` in EEGB format, replacing any existing file.
pub fn write_recording(path: &Path, rec: &Recording) -> Result<(), EegbError> {
    let bytes = encode(rec)?;
    fs::write(path, bytes)?;
    Ok(())
}

/// Read an EEGB file, attaching `subject_id` to the resulting recording.
pub fn read_recording(path: &Path, subject_id: &str) -> Result<Recording, EegbError> {
    let bytes = fs::read(path)?;
    decode(&bytes, subject_id)
}
