//! PGM images and commented CSV tables.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::potts::Image;

/// Encoding of a written PGM file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PgmFormat {
    /// `P2` when true, `P5` otherwise.
    pub ascii: bool,
    /// Maximum gray value: 255 or 65535.
    pub maxval: u16,
}

impl PgmFormat {
    pub const BINARY16: PgmFormat = PgmFormat { ascii: false, maxval: 65535 };
    pub const BINARY8: PgmFormat = PgmFormat { ascii: false, maxval: 255 };
}

impl Default for PgmFormat {
    fn default() -> Self {
        PgmFormat::BINARY16
    }
}

struct Tokens<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.data.len() {
            let c = self.data[self.pos];
            if c == b'#' {
                while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn next(&mut self) -> Result<&'a str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Parse("unexpected end of PGM data".into()));
        }
        std::str::from_utf8(&self.data[start..self.pos]).map_err(|_| Error::Parse("non-ASCII PGM header".into()))
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let t = self.next()?;
        t.parse().map_err(|_| Error::Parse(format!("invalid PGM {what}: {t:?}")))
    }
}

/// Parses PGM bytes into an image normalized to `[0, 1]`, with the file's maxval.
pub fn parse_pgm(data: &[u8]) -> Result<(Image, u16)> {
    let mut tok = Tokens { data, pos: 0 };
    let magic = tok.next()?;
    let ascii = match magic {
        "P2" => true,
        "P5" => false,
        other => return Err(Error::Parse(format!("not a PGM file (magic {other:?})"))),
    };
    let width = tok.number("width")?;
    let height = tok.number("height")?;
    let maxval = tok.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Parse(format!("PGM maxval {maxval} outside 1..=65535")));
    }
    let count = width * height;
    let scale = 1.0 / maxval as f64;
    let mut values = Vec::with_capacity(count);
    if ascii {
        for _ in 0..count {
            let v = tok.number("sample")?;
            if v > maxval {
                return Err(Error::Parse(format!("PGM sample {v} exceeds maxval {maxval}")));
            }
            values.push(v as f64 * scale);
        }
    } else {
        // Exactly one whitespace byte separates the header from the raster.
        let start = tok.pos + 1;
        let bytes = if maxval > 255 { 2 } else { 1 };
        let raster =
            data.get(start..start + count * bytes).ok_or_else(|| Error::Parse("PGM raster is truncated".into()))?;
        for chunk in raster.chunks_exact(bytes) {
            let v = if bytes == 2 { u16::from_be_bytes([chunk[0], chunk[1]]) as usize } else { chunk[0] as usize };
            if v > maxval {
                return Err(Error::Parse(format!("PGM sample {v} exceeds maxval {maxval}")));
            }
            values.push(v as f64 * scale);
        }
    }
    Ok((Image::new(height, width, values)?, maxval as u16))
}

pub fn read_pgm(path: &Path) -> Result<(Image, u16)> {
    parse_pgm(&fs::read(path)?)
}

/// Encodes an image, clamping to `[0, 1]` and rounding to the format's depth.
/// `comments` are written as `#` lines after the magic number.
pub fn encode_pgm(img: &Image, format: PgmFormat, comments: &[String]) -> Vec<u8> {
    let maxval = format.maxval.max(1);
    let mut out = Vec::new();
    out.extend_from_slice(if format.ascii { b"P2\n" } else { b"P5\n" });
    for c in comments {
        for line in c.lines() {
            out.extend_from_slice(format!("# {line}\n").as_bytes());
        }
    }
    out.extend_from_slice(format!("{} {}\n{}\n", img.n2, img.n1, maxval).as_bytes());
    let q = |v: f64| (v.clamp(0.0, 1.0) * maxval as f64).round() as u16;
    if format.ascii {
        for row in img.values.chunks(img.n2) {
            let line: Vec<String> = row.iter().map(|&v| q(v).to_string()).collect();
            out.extend_from_slice(line.join(" ").as_bytes());
            out.push(b'\n');
        }
    } else if maxval > 255 {
        for &v in &img.values {
            out.extend_from_slice(&q(v).to_be_bytes());
        }
    } else {
        out.extend(img.values.iter().map(|&v| q(v) as u8));
    }
    out
}

pub fn write_pgm(path: &Path, img: &Image, format: PgmFormat, comments: &[String]) -> Result<()> {
    fs::write(path, encode_pgm(img, format, comments))?;
    Ok(())
}

/// Rescales an image affinely onto `[0, 1]`; constant images map to zero.
pub fn normalize(img: &Image) -> Image {
    let (lo, hi) = img.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = hi - lo;
    let values = img.values.iter().map(|&v| if span > 0.0 { (v - lo) / span } else { 0.0 }).collect();
    Image { n1: img.n1, n2: img.n2, values }
}

/// Integers as integers, everything else in round-trip exponent form.
fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:e}")
    }
}

/// A numeric table written as CSV after `#` comment lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(comments: Vec<String>, columns: &[&str]) -> Self {
        Table { comments, columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Missing entries are written as empty fields.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for c in &self.comments {
            for line in c.lines() {
                writeln!(out, "# {line}")?;
            }
        }
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Parse(format!("csv: {e}"));
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.map(format_number).unwrap_or_default())).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Parse(format!("csv: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }
}
