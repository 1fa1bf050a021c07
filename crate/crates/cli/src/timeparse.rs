//! Human-friendly duration arguments: `600s`, `10ms`, `10us`, `1ns`,
//! `100ps`, or a bare integer meaning picoseconds.

use anyhow::{bail, Result};

pub fn parse_ps(text: &str) -> Result<u64> {
    let t = text.trim();
    let split = t
        .find(|c: char| !(c.is_ascii_digit() || c == '.'))
        .unwrap_or(t.len());
    let (num, unit) = t.split_at(split);
    if num.is_empty() {
        bail!("missing number in duration `{text}`");
    }
    let value: f64 = num.parse()?;
    let scale: f64 = match unit.trim() {
        "" | "ps" => 1.0,
        "ns" => 1e3,
        "us" | "µs" => 1e6,
        "ms" => 1e9,
        "s" => 1e12,
        other => bail!("unknown time unit `{other}` in `{text}`"),
    };
    let ps = value * scale;
    if !(ps >= 0.0 && ps < 1.9e19) {
        bail!("duration `{text}` out of range");
    }
    Ok(ps.round() as u64)
}
