//! Image import/export: Netpbm graymaps (P2/P5, 8-bit) and plain CSV matrices.
//!
//! PGM input is rescaled to `[0, 1]` by the file's maxval. PGM output is
//! min-max quantised to `0..=255`, a constant image becoming all zeros. CSV
//! stores one image row per line with 17 significant digits, so float images
//! survive a write/read cycle bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::image::Image;
use crate::scalar::Scalar;

/// Reads a P2 or P5 graymap. The grid uses the default connectivity for its
/// shape.
pub fn read_pgm<T: Scalar>(path: impl AsRef<Path>) -> Result<Image<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes).map_err(|(offset, message)| Error::Parse {
        path: path.to_path_buf(),
        offset,
        message,
    })
}

type ParseResult<T> = std::result::Result<T, (usize, String)>;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self, what: &str) -> ParseResult<(usize, &'a [u8])> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err((
                start,
                format!("unexpected end of data while reading {what}"),
            ));
        }
        Ok((start, &self.bytes[start..self.pos]))
    }

    fn number(&mut self, what: &str) -> ParseResult<(usize, u32)> {
        let (at, tok) = self.token(what)?;
        let text = std::str::from_utf8(tok).map_err(|_| (at, format!("invalid {what}")))?;
        let value = text
            .parse::<u32>()
            .map_err(|_| (at, format!("invalid {what} '{text}'")))?;
        Ok((at, value))
    }
}

fn parse_pgm<T: Scalar>(bytes: &[u8]) -> ParseResult<Image<T>> {
    let mut cur = Cursor { bytes, pos: 0 };
    let (_, magic) = cur.token("magic number")?;
    let binary = match magic {
        b"P2" => false,
        b"P5" => true,
        other => {
            return Err((
                0,
                format!(
                    "unsupported magic '{}', expected P2 or P5",
                    String::from_utf8_lossy(other)
                ),
            ))
        }
    };
    let (at_w, width) = cur.number("width")?;
    let (at_h, height) = cur.number("height")?;
    let (at_m, maxval) = cur.number("maxval")?;
    if width == 0 {
        return Err((at_w, "width must be positive".into()));
    }
    if height == 0 {
        return Err((at_h, "height must be positive".into()));
    }
    if maxval == 0 || maxval > 255 {
        return Err((at_m, format!("unsupported maxval {maxval} (1..=255)")));
    }
    let n = width as usize * height as usize;
    let mut raw = Vec::with_capacity(n);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        let start = cur.pos + 1;
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err((cur.pos, "missing whitespace after maxval".into()));
        }
        if bytes.len() < start + n {
            return Err((
                bytes.len(),
                format!(
                    "truncated raster: expected {n} bytes, found {}",
                    bytes.len().saturating_sub(start)
                ),
            ));
        }
        for (k, &b) in bytes[start..start + n].iter().enumerate() {
            if u32::from(b) > maxval {
                return Err((start + k, format!("sample {b} exceeds maxval {maxval}")));
            }
            raw.push(u32::from(b));
        }
    } else {
        for _ in 0..n {
            let (at, v) = cur.number("sample")?;
            if v > maxval {
                return Err((at, format!("sample {v} exceeds maxval {maxval}")));
            }
            raw.push(v);
        }
    }
    let scale = T::of(f64::from(maxval));
    let values = raw
        .into_iter()
        .map(|v| T::of(f64::from(v)) / scale)
        .collect();
    let grid = Grid::with_default_connectivity(width as usize, height as usize)
        .map_err(|e| (0, e.to_string()))?;
    Image::new(values, grid).map_err(|e| (0, e.to_string()))
}

/// Min-max quantisation to bytes. Constant images map to zeros.
pub fn quantize<T: Scalar>(image: &Image<T>) -> Vec<u8> {
    let (lo, hi) = image.min_max();
    let range = hi - lo;
    if !(range > T::zero()) {
        return vec![0; image.len()];
    }
    let full = T::of(255.0);
    image
        .values()
        .iter()
        .map(|&v| {
            let t = ((v.max(lo).min(hi) - lo) / range * full).round();
            t.to_u8().unwrap_or(255)
        })
        .collect()
}

/// Writes a binary (P5) graymap after min-max quantisation.
pub fn write_pgm<T: Scalar>(image: &Image<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let g = image.grid();
    let mut out = format!("P5\n{} {}\n255\n", g.width(), g.height()).into_bytes();
    out.extend(quantize(image));
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a comma-separated matrix, one image row per line.
pub fn read_csv_matrix<T: Scalar>(path: impl AsRef<Path>) -> Result<Image<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text).map_err(|(offset, message)| Error::Parse {
        path: path.to_path_buf(),
        offset,
        message,
    })
}

fn parse_csv<T: Scalar>(text: &str) -> ParseResult<Image<T>> {
    let mut values = Vec::new();
    let mut width = None;
    let mut height = 0usize;
    let mut offset = 0usize;
    for line in text.split_inclusive('\n') {
        let line_start = offset;
        offset += line.len();
        let body = line.trim_end_matches(['\n', '\r']);
        if body.trim().is_empty() {
            continue;
        }
        let mut field_start = line_start;
        let mut count = 0usize;
        for field in body.split(',') {
            let trimmed = field.trim();
            let v: f64 = trimmed
                .parse()
                .map_err(|_| (field_start, format!("invalid number '{trimmed}'")))?;
            if !v.is_finite() {
                return Err((field_start, format!("non-finite value '{trimmed}'")));
            }
            values.push(T::of(v));
            count += 1;
            field_start += field.len() + 1;
        }
        match width {
            None => width = Some(count),
            Some(w) if w != count => {
                return Err((
                    line_start,
                    format!("row {height} has {count} columns, expected {w}"),
                ))
            }
            _ => {}
        }
        height += 1;
    }
    let width = width.ok_or((0, "empty matrix".to_string()))?;
    let grid = Grid::with_default_connectivity(width, height).map_err(|e| (0, e.to_string()))?;
    Image::new(values, grid).map_err(|e| (0, e.to_string()))
}

/// Formats one value with 17 significant digits.
pub fn format_value<T: Scalar>(v: T) -> String {
    format!("{:.16e}", v.as_f64())
}

/// Writes the image as a CSV matrix with 17 significant digits per value.
pub fn write_csv_matrix<T: Scalar>(image: &Image<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let w = image.grid().width();
    let mut out = Vec::with_capacity(image.len() * 24);
    for row in image.values().chunks(w) {
        let line: Vec<String> = row.iter().map(|&v| format_value(v)).collect();
        out.extend_from_slice(line.join(",").as_bytes());
        out.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

/// Dispatches on the extension: `.pgm` or `.csv` (anything else is read as CSV).
pub fn read_image<T: Scalar>(path: impl AsRef<Path>) -> Result<Image<T>> {
    let path = path.as_ref();
    if is_pgm(path) {
        read_pgm(path)
    } else {
        read_csv_matrix(path)
    }
}

pub fn write_image<T: Scalar>(image: &Image<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if is_pgm(path) {
        write_pgm(image, path)
    } else {
        write_csv_matrix(image, path)
    }
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}
