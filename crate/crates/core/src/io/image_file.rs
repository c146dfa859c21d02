//! Image files.
//!
//! Binary layout (all multi-byte fields in the declared byte order):
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 8    | magic `CFITIMG\0`                       |
//! | 8      | 1    | byte order, `b'L'` or `b'B'`            |
//! | 9      | 1    | value kind, 0 = counts, 1 = intensity   |
//! | 10     | 2    | format version (u16), currently 1       |
//! | 12     | 4    | side `n` (u32)                          |
//! | 16     | 16   | center `x`, `y` (f64)                   |
//! | 32     | 8 n² | values (f64), row-major, `values[y n + x]` |
//!
//! The CSV form has `n` rows of `n` values, optionally preceded by a
//! `# kind=counts center=x,y` line.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Center, PixelImage};

pub const MAGIC: &[u8; 8] = b"CFITIMG\0";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    #[default]
    Counts,
    Intensity,
}

impl ValueKind {
    fn code(self) -> u8 {
        match self {
            Self::Counts => 0,
            Self::Intensity => 1,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Self::Counts => "counts",
            Self::Intensity => "intensity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteOrder {
    Little,
    Big,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageFile {
    pub kind: ValueKind,
    pub image: PixelImage,
}

impl ImageFile {
    pub fn new(kind: ValueKind, image: PixelImage) -> Result<Self> {
        if kind == ValueKind::Counts {
            if let Some(i) = image.values().iter().position(|v| v.fract() != 0.0) {
                return Err(Error::Format(format!("count image has non-integer value at pixel {i}")));
            }
        }
        Ok(Self { kind, image })
    }

    pub fn encode(&self) -> Vec<u8> {
        self.encode_with(ByteOrder::Little)
    }

    pub fn encode_with(&self, order: ByteOrder) -> Vec<u8> {
        let img = &self.image;
        let n = img.n();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * n * n);
        out.extend_from_slice(MAGIC);
        out.push(match order {
            ByteOrder::Little => b'L',
            ByteOrder::Big => b'B',
        });
        out.push(self.kind.code());
        let (u16b, u32b, f64b): (fn(u16) -> [u8; 2], fn(u32) -> [u8; 4], fn(f64) -> [u8; 8]) = match order {
            ByteOrder::Little => (u16::to_le_bytes, u32::to_le_bytes, f64::to_le_bytes),
            ByteOrder::Big => (u16::to_be_bytes, u32::to_be_bytes, f64::to_be_bytes),
        };
        out.extend_from_slice(&u16b(VERSION));
        out.extend_from_slice(&u32b(n as u32));
        out.extend_from_slice(&f64b(img.center().x));
        out.extend_from_slice(&f64b(img.center().y));
        for v in img.values() {
            out.extend_from_slice(&f64b(*v));
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("image file: {m}"));
        if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
            return Err(bad("missing magic header"));
        }
        let big = match bytes[8] {
            b'L' => false,
            b'B' => true,
            b => return Err(bad(&format!("unknown byte order tag 0x{b:02x}"))),
        };
        let kind = match bytes[9] {
            0 => ValueKind::Counts,
            1 => ValueKind::Intensity,
            k => return Err(bad(&format!("unknown value kind {k}"))),
        };
        let u16_at = |o: usize| {
            let b = [bytes[o], bytes[o + 1]];
            if big { u16::from_be_bytes(b) } else { u16::from_le_bytes(b) }
        };
        let u32_at = |o: usize| {
            let b: [u8; 4] = bytes[o..o + 4].try_into().unwrap();
            if big { u32::from_be_bytes(b) } else { u32::from_le_bytes(b) }
        };
        let f64_at = |o: usize| {
            let b: [u8; 8] = bytes[o..o + 8].try_into().unwrap();
            if big { f64::from_be_bytes(b) } else { f64::from_le_bytes(b) }
        };
        let version = u16_at(10);
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let n = u32_at(12) as usize;
        let expect = n
            .checked_mul(n)
            .and_then(|p| p.checked_mul(8))
            .and_then(|p| p.checked_add(HEADER_LEN))
            .ok_or_else(|| bad("side too large"))?;
        if bytes.len() != expect {
            return Err(bad(&format!("expected {expect} bytes for n = {n}, found {}", bytes.len())));
        }
        let center = Center::new(f64_at(16), f64_at(24));
        let values = (0..n * n).map(|i| f64_at(HEADER_LEN + 8 * i)).collect();
        Self::new(kind, PixelImage::new(n, values, center)?)
    }

    pub fn to_csv(&self) -> String {
        let img = &self.image;
        let n = img.n();
        let c = img.center();
        let mut s = format!("# kind={} center={},{}\n", self.kind.as_str(), c.x, c.y);
        for row in img.values().chunks(n) {
            let cells: Vec<String> = row.iter().map(|v| format_value(*v)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    /// Parses the CSV form; without a header line the values are counts and
    /// the center is the image center.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut kind = ValueKind::Counts;
        let mut center = None;
        let mut body = String::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if let Some(meta) = t.strip_prefix('#') {
                for field in meta.split_whitespace() {
                    match field.split_once('=') {
                        Some(("kind", "counts")) => kind = ValueKind::Counts,
                        Some(("kind", "intensity")) => kind = ValueKind::Intensity,
                        Some(("center", xy)) => {
                            let parsed = xy
                                .split_once(',')
                                .and_then(|(x, y)| Some((x.parse().ok()?, y.parse().ok()?)));
                            let (x, y) = parsed
                                .ok_or_else(|| Error::Format(format!("line {}: bad center '{xy}'", i + 1)))?;
                            center = Some(Center::new(x, y));
                        }
                        _ => return Err(Error::Format(format!("line {}: unknown header field '{field}'", i + 1))),
                    }
                }
            } else {
                body.push_str(line);
                body.push('\n');
            }
        }
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(body.as_bytes());
        let mut values = Vec::new();
        let mut n = None;
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Format(format!("image csv: {e}")))?;
            let row = rec.position().map(|p| p.line()).unwrap_or(0);
            if *n.get_or_insert(rec.len()) != rec.len() {
                return Err(Error::Format(format!("image csv: row {row} has {} values, expected {}", rec.len(), n.unwrap())));
            }
            for f in rec.iter() {
                values.push(f.parse::<f64>().map_err(|_| Error::Format(format!("image csv: bad number '{f}' in row {row}")))?);
            }
        }
        let n = n.ok_or_else(|| Error::Format("image csv is empty".into()))?;
        if values.len() != n * n {
            return Err(Error::Format(format!("image csv: {} rows of {n} values is not square", values.len() / n)));
        }
        let center = center.unwrap_or_else(|| Center::of_image(n));
        Self::new(kind, PixelImage::new(n, values, center)?)
    }
}

/// Integers verbatim, everything else with 15 significant digits.
pub fn format_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v}")
    } else {
        format!("{v:.14e}")
    }
}

/// I/O error that names the file.
pub fn with_path(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| with_path(path, e))
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads either form; `.csv` files are text, anything else binary.
pub fn read_image(path: &Path) -> Result<ImageFile> {
    let ctx = |e: Error| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        e => e,
    };
    if is_csv(path) {
        ImageFile::from_csv(&read_to_string(path)?).map_err(ctx)
    } else {
        let bytes = std::fs::read(path).map_err(|e| with_path(path, e))?;
        ImageFile::decode(&bytes).map_err(ctx)
    }
}

pub fn write_image(path: &Path, file: &ImageFile) -> Result<()> {
    let bytes = if is_csv(path) { file.to_csv().into_bytes() } else { file.encode() };
    std::fs::write(path, bytes).map_err(|e| with_path(path, e))
}
