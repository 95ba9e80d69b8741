//! Line-oriented text helpers shared by the file formats.

use std::io::BufRead;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::RestrictionTriple;

/// Iterates non-empty, non-comment lines, tracking the byte offset of each.
pub(crate) struct Lines<R> {
    reader: R,
    offset: usize,
    buf: String,
}

impl<R: BufRead> Lines<R> {
    pub fn new(reader: R) -> Self {
        Lines {
            reader,
            offset: 0,
            buf: String::new(),
        }
    }

    /// Offset just past the last consumed line.
    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn next_record(&mut self) -> Result<Option<(usize, &str)>> {
        loop {
            self.buf.clear();
            let start = self.offset;
            let n = self
                .reader
                .read_line(&mut self.buf)
                .map_err(|e| match e.kind() {
                    std::io::ErrorKind::InvalidData => Error::format(start, "invalid UTF-8"),
                    _ => Error::Io(e),
                })?;
            if n == 0 {
                return Ok(None);
            }
            self.offset += n;
            let line = self.buf.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return Ok(Some((start, self.buf.trim())));
        }
    }
}

pub(crate) fn parse_token<T: FromStr>(tok: Option<&str>, offset: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::format(offset, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| Error::format(offset, format!("bad {what}: {tok:?}")))
}

pub(crate) fn parse_limit(tok: Option<&str>, offset: usize) -> Result<f64> {
    match tok {
        Some("-") => Ok(f64::INFINITY),
        other => parse_token(other, offset, "limit"),
    }
}

pub(crate) fn parse_limits<'a>(
    it: &mut impl Iterator<Item = &'a str>,
    offset: usize,
) -> Result<RestrictionTriple> {
    let he = parse_limit(it.next(), offset)?;
    let wi = parse_limit(it.next(), offset)?;
    let wt = parse_limit(it.next(), offset)?;
    RestrictionTriple::new(he, wi, wt).map_err(|e| Error::format(offset, e.to_string()))
}

pub(crate) fn expect_end<'a>(it: &mut impl Iterator<Item = &'a str>, offset: usize) -> Result<()> {
    match it.next() {
        None => Ok(()),
        Some(t) => Err(Error::format(
            offset,
            format!("unexpected trailing token {t:?}"),
        )),
    }
}

/// 64-bit FNV-1a, stable across platforms and toolchains.
pub(crate) fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}
