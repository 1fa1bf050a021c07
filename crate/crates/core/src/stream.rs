//! Photon streams, intensity traces, micro-times, and their on-disk formats.
//!
//! Two interchangeable file formats are supported:
//!
//! * **binary `.psph`** — 24-byte little-endian header (`PSPH` magic,
//!   format version `u16`, channel count `u16`, repetition period `u64` ps,
//!   record count `u64`) followed by 9-byte records (`channel: u8`,
//!   `t_abs: u64` ps).
//! * **TSV** — optional `#`-prefixed `key=value` metadata lines, then one
//!   `channel<TAB>t_abs_ps` record per line.
//!
//! The binary header carries no acquisition span, so the duration of a
//! reloaded stream is the timestamp of its last record; TSV files persist
//! `duration_ps` as metadata.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const PSPH_MAGIC: [u8; 4] = *b"PSPH";
pub const PSPH_VERSION: u16 = 1;
const PSPH_HEADER_LEN: u64 = 24;
const PSPH_RECORD_LEN: u64 = 9;

/// One photon detection: detector channel and absolute arrival time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct PhotonRecord {
    /// Absolute arrival time in picoseconds since acquisition start.
    pub t_abs: u64,
    /// Detector id; 0 or 1 for the two arms of an HBT setup.
    pub channel: u8,
}

impl PhotonRecord {
    pub fn new(channel: u8, t_abs: u64) -> Self {
        Self { t_abs, channel }
    }
}

/// Delay of a photon after the most recent excitation pulse edge, in ps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct MicroTime(pub u64);

/// Stream file format selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamFormat {
    Binary,
    Tsv,
}

/// An ordered sequence of photon detections plus acquisition metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhotonStream {
    records: Vec<PhotonRecord>,
    /// Excitation pulse period in ps; 0 for continuous-wave excitation.
    pub rep_period_ps: u64,
    /// Total acquisition span in ps.
    pub duration_ps: u64,
    /// Free-form annotations, persisted by the TSV format.
    pub meta: BTreeMap<String, String>,
}

impl PhotonStream {
    /// Builds a stream and validates the ordering/channel/range invariants.
    pub fn new(records: Vec<PhotonRecord>, rep_period_ps: u64, duration_ps: u64) -> Result<Self> {
        let stream = Self {
            records,
            rep_period_ps,
            duration_ps,
            meta: BTreeMap::new(),
        };
        stream.validate()?;
        Ok(stream)
    }

    pub fn records(&self) -> &[PhotonRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// True if the stream was acquired under pulsed excitation.
    pub fn is_pulsed(&self) -> bool {
        self.rep_period_ps > 0
    }

    /// Number of detector channels implied by the records (1 or 2).
    pub fn channel_count(&self) -> u16 {
        if self.records.iter().any(|r| r.channel == 1) {
            2
        } else {
            1
        }
    }

    pub fn has_channel(&self, channel: u8) -> bool {
        self.records.iter().any(|r| r.channel == channel)
    }

    /// Checks ordering, channel range, and duration bounds.
    pub fn validate(&self) -> Result<()> {
        let mut prev = 0u64;
        for (index, rec) in self.records.iter().enumerate() {
            if rec.channel > 1 {
                return Err(Error::BadChannel {
                    index,
                    channel: rec.channel,
                    n_channels: 2,
                });
            }
            if rec.t_abs < prev {
                return Err(Error::NonMonotonic {
                    index,
                    t_abs: rec.t_abs,
                });
            }
            if rec.t_abs > self.duration_ps {
                return Err(Error::BeyondDuration {
                    index,
                    t_abs: rec.t_abs,
                    duration: self.duration_ps,
                });
            }
            prev = rec.t_abs;
        }
        Ok(())
    }

    /// Arrival times of all records on one channel.
    pub fn channel_times(&self, channel: u8) -> Vec<u64> {
        self.records
            .iter()
            .filter(|r| r.channel == channel)
            .map(|r| r.t_abs)
            .collect()
    }
}

/// Binned photon-count time trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntensityTrace {
    /// Bin duration in ps.
    pub bin_width_ps: u64,
    /// Time of the first bin edge in ps.
    pub start_ps: u64,
    /// Photon count per bin.
    pub counts: Vec<u32>,
}

impl IntensityTrace {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }
}

/// Bins the stream into fixed-width intensity bins starting at t = 0.
///
/// Bin `k` counts records with `k·w ≤ t_abs < (k+1)·w`; the trailing
/// partial bin is dropped so every kept bin covers a full exposure.
pub fn bin_intensity(
    stream: &PhotonStream,
    bin_width_ps: u64,
    channel_filter: Option<u8>,
) -> Result<IntensityTrace> {
    if bin_width_ps == 0 {
        return Err(Error::InvalidInput("bin width must be positive".into()));
    }
    let n_bins = (stream.duration_ps / bin_width_ps) as usize;
    let mut counts = vec![0u32; n_bins];
    let span = n_bins as u64 * bin_width_ps;
    for rec in stream.records() {
        if let Some(ch) = channel_filter {
            if rec.channel != ch {
                continue;
            }
        }
        if rec.t_abs < span {
            counts[(rec.t_abs / bin_width_ps) as usize] += 1;
        }
    }
    Ok(IntensityTrace {
        bin_width_ps,
        start_ps: 0,
        counts,
    })
}

/// Photon delays after the most recent pulse edge: `t_abs mod rep_period`.
///
/// Pulse phase is zero at `t_abs = 0`; a hardware sync offset shows up as
/// the fitted `t0` of the decay models.
pub fn micro_times(stream: &PhotonStream) -> Result<Vec<MicroTime>> {
    if !stream.is_pulsed() {
        return Err(Error::UnsupportedMode(
            "micro-times are undefined for a continuous-wave stream (rep_period_ps = 0)".into(),
        ));
    }
    let period = stream.rep_period_ps;
    Ok(stream
        .records()
        .iter()
        .map(|r| MicroTime(r.t_abs % period))
        .collect())
}

/// Reads a photon stream from disk, validating it on the way in.
pub fn read_stream(path: &Path, format: StreamFormat) -> Result<PhotonStream> {
    match format {
        StreamFormat::Binary => read_binary(path),
        StreamFormat::Tsv => read_tsv(path),
    }
}

/// Writes a photon stream; `read_stream` reproduces it record-for-record.
pub fn write_stream(stream: &PhotonStream, path: &Path, format: StreamFormat) -> Result<()> {
    stream.validate()?;
    match format {
        StreamFormat::Binary => write_binary(stream, path),
        StreamFormat::Tsv => write_tsv(stream, path),
    }
}

fn read_binary(path: &Path) -> Result<PhotonStream> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut header = [0u8; PSPH_HEADER_LEN as usize];
    read_exact_at(&mut reader, &mut header, 0)?;
    if header[0..4] != PSPH_MAGIC {
        return Err(Error::Format {
            offset: 0,
            reason: "bad magic, expected \"PSPH\"".into(),
        });
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != PSPH_VERSION {
        return Err(Error::Format {
            offset: 4,
            reason: format!("unsupported format version {version}"),
        });
    }
    let n_channels = u16::from_le_bytes([header[6], header[7]]);
    if n_channels == 0 || n_channels > 2 {
        return Err(Error::Format {
            offset: 6,
            reason: format!("channel count {n_channels} outside 1..=2"),
        });
    }
    let rep_period_ps = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let n_records = u64::from_le_bytes(header[16..24].try_into().unwrap());

    let mut records = Vec::with_capacity(n_records.min(1 << 32) as usize);
    let mut buf = [0u8; PSPH_RECORD_LEN as usize];
    let mut prev = 0u64;
    for index in 0..n_records {
        let offset = PSPH_HEADER_LEN + index * PSPH_RECORD_LEN;
        read_exact_at(&mut reader, &mut buf, offset)?;
        let channel = buf[0];
        let t_abs = u64::from_le_bytes(buf[1..9].try_into().unwrap());
        if channel >= n_channels as u8 || channel > 1 {
            return Err(Error::BadChannel {
                index: index as usize,
                channel,
                n_channels,
            });
        }
        if t_abs < prev {
            return Err(Error::NonMonotonic {
                index: index as usize,
                t_abs,
            });
        }
        prev = t_abs;
        records.push(PhotonRecord { t_abs, channel });
    }
    let duration_ps = records.last().map_or(0, |r| r.t_abs);
    Ok(PhotonStream {
        records,
        rep_period_ps,
        duration_ps,
        meta: BTreeMap::new(),
    })
}

fn read_exact_at<R: Read>(reader: &mut R, buf: &mut [u8], offset: u64) -> Result<()> {
    reader.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format {
                offset,
                reason: "file truncated".into(),
            }
        } else {
            Error::Io(e)
        }
    })
}

fn write_binary(stream: &PhotonStream, path: &Path) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    writer.write_all(&PSPH_MAGIC)?;
    writer.write_all(&PSPH_VERSION.to_le_bytes())?;
    writer.write_all(&stream.channel_count().to_le_bytes())?;
    writer.write_all(&stream.rep_period_ps.to_le_bytes())?;
    writer.write_all(&(stream.len() as u64).to_le_bytes())?;
    for rec in stream.records() {
        writer.write_all(&[rec.channel])?;
        writer.write_all(&rec.t_abs.to_le_bytes())?;
    }
    writer.flush()?;
    Ok(())
}

fn read_tsv(path: &Path) -> Result<PhotonStream> {
    let reader = BufReader::new(File::open(path)?);
    let mut meta = BTreeMap::new();
    let mut records = Vec::new();
    let mut offset = 0u64;
    let mut prev = 0u64;
    for line in reader.lines() {
        let line = line?;
        let line_offset = offset;
        offset += line.len() as u64 + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            if let Some((key, value)) = rest.split_once('=') {
                meta.insert(key.trim().to_string(), value.trim().to_string());
            }
            continue;
        }
        let (ch_txt, t_txt) = trimmed.split_once('\t').ok_or_else(|| Error::Format {
            offset: line_offset,
            reason: "expected `channel<TAB>t_abs_ps`".into(),
        })?;
        let channel: u8 = ch_txt.trim().parse().map_err(|_| Error::Format {
            offset: line_offset,
            reason: format!("bad channel `{ch_txt}`"),
        })?;
        let t_abs: u64 = t_txt.trim().parse().map_err(|_| Error::Format {
            offset: line_offset,
            reason: format!("bad timestamp `{t_txt}`"),
        })?;
        let index = records.len();
        if channel > 1 {
            return Err(Error::BadChannel {
                index,
                channel,
                n_channels: 2,
            });
        }
        if t_abs < prev {
            return Err(Error::NonMonotonic { index, t_abs });
        }
        prev = t_abs;
        records.push(PhotonRecord { t_abs, channel });
    }
    let rep_period_ps = parse_meta_u64(&meta, "rep_period_ps", 0, path)?;
    let last = records.last().map_or(0, |r| r.t_abs);
    let duration_ps = parse_meta_u64(&meta, "duration_ps", last, path)?;
    meta.remove("rep_period_ps");
    meta.remove("duration_ps");
    let stream = PhotonStream {
        records,
        rep_period_ps,
        duration_ps,
        meta,
    };
    stream.validate()?;
    Ok(stream)
}

fn parse_meta_u64(
    meta: &BTreeMap<String, String>,
    key: &str,
    default: u64,
    path: &Path,
) -> Result<u64> {
    match meta.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| Error::Format {
            offset: 0,
            reason: format!("bad metadata {key}={v} in {}", path.display()),
        }),
    }
}

fn write_tsv(stream: &PhotonStream, path: &Path) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    writeln!(writer, "# rep_period_ps={}", stream.rep_period_ps)?;
    writeln!(writer, "# duration_ps={}", stream.duration_ps)?;
    for (key, value) in &stream.meta {
        writeln!(writer, "# {key}={value}")?;
    }
    for rec in stream.records() {
        writeln!(writer, "{}\t{}", rec.channel, rec.t_abs)?;
    }
    writer.flush()?;
    Ok(())
}
