//! Reader and writer for the NPY container (little-endian floats, C order).

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

const MAGIC: &[u8] = b"\x93NUMPY";
/// Header blocks are padded so the data starts on this boundary.
const ALIGN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

/// What the reader found, beyond the values themselves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadReport {
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    /// Set when 32-bit input was widened to 64-bit working precision.
    pub widened: bool,
}

/// A parsed array of any rank, values widened to `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    pub report: LoadReport,
}

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset,
        message: message.into(),
    }
}

/// Parses an NPY byte buffer of any rank.
pub fn parse_npy(bytes: &[u8]) -> Result<NpyArray> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(format_err(0, "missing NPY magic string"));
    }
    if bytes.len() < 8 {
        return Err(format_err(bytes.len(), "truncated version field"));
    }
    let (major, minor) = (bytes[6], bytes[7]);
    let (header_len, header_start) = match major {
        1 => {
            if bytes.len() < 10 {
                return Err(format_err(bytes.len(), "truncated header length"));
            }
            (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10)
        }
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(format_err(bytes.len(), "truncated header length"));
            }
            let n = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize;
            (n, 12)
        }
        _ => {
            return Err(format_err(
                6,
                format!("unsupported NPY version {major}.{minor}"),
            ))
        }
    };
    let data_start = header_start + header_len;
    if bytes.len() < data_start {
        return Err(format_err(bytes.len(), "header extends past end of file"));
    }
    let header = std::str::from_utf8(&bytes[header_start..data_start])
        .map_err(|e| format_err(header_start + e.valid_up_to(), "header is not text"))?;
    let h = parse_header(header, header_start)?;
    if h.fortran_order {
        return Err(format_err(
            header_start,
            "Fortran-ordered arrays are not supported",
        ));
    }
    let dtype = match h.descr.as_str() {
        "<f8" => Dtype::F64,
        "<f4" => Dtype::F32,
        other => {
            return Err(format_err(
                header_start,
                format!("unsupported dtype '{other}' (expected '<f8' or '<f4')"),
            ))
        }
    };
    let count: usize = h.shape.iter().product();
    let need = count
        .checked_mul(dtype.size())
        .ok_or_else(|| format_err(header_start, "shape is too large"))?;
    let payload = &bytes[data_start..];
    if payload.len() < need {
        return Err(format_err(
            bytes.len(),
            format!(
                "data truncated: expected {need} bytes, found {}",
                payload.len()
            ),
        ));
    }
    if payload.len() > need {
        return Err(format_err(
            data_start + need,
            "trailing bytes after array data",
        ));
    }
    let data: Vec<f64> = match dtype {
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect(),
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")) as f64)
            .collect(),
    };
    Ok(NpyArray {
        report: LoadReport {
            dtype,
            shape: h.shape.clone(),
            widened: dtype == Dtype::F32,
        },
        shape: h.shape,
        data,
    })
}

/// Parses a rank-2 NPY buffer into a matrix.
pub fn read_matrix(bytes: &[u8]) -> Result<(Matrix, LoadReport)> {
    let arr = parse_npy(bytes)?;
    if arr.shape.len() != 2 {
        return Err(format_err(
            10,
            format!("expected a 2-D array, found rank {}", arr.shape.len()),
        ));
    }
    let m = Matrix::new(arr.shape[0], arr.shape[1], arr.data)?;
    Ok((m, arr.report))
}

/// NPY v1.0 bytes for an `f64` array of the given shape.
pub fn encode_npy(shape: &[usize], data: &[f64]) -> Vec<u8> {
    debug_assert_eq!(shape.iter().product::<usize>(), data.len());
    let dims = match shape {
        [n] => format!("({n},)"),
        _ => format!(
            "({})",
            shape
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    let mut header = format!("{{'descr': '<f8', 'fortran_order': False, 'shape': {dims}, }}");
    let unpadded = MAGIC.len() + 2 + 2 + header.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    header.push_str(&" ".repeat(pad));
    header.push('\n');

    let mut out = Vec::with_capacity(MAGIC.len() + 4 + header.len() + data.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_matrix(m: &Matrix) -> Vec<u8> {
    encode_npy(&[m.rows(), m.cols()], m.as_slice())
}

/// Loads a 2-D array; 32-bit files are widened to `f64`.
pub fn load_array(path: impl AsRef<Path>) -> Result<Matrix> {
    Ok(load_array_with_report(path)?.0)
}

pub fn load_array_with_report(path: impl AsRef<Path>) -> Result<(Matrix, LoadReport)> {
    read_matrix(&std::fs::read(path)?)
}

/// Writes a 2-D `f64` array atomically.
pub fn save_array(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    super::write_atomic(path.as_ref(), &write_matrix(m))
}

struct Header {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

/// Parses the Python dict literal of an NPY header. `base` is the header's byte
/// offset in the file, used for error positions.
fn parse_header(text: &str, base: usize) -> Result<Header> {
    let mut p = Parser {
        s: text.as_bytes(),
        pos: 0,
        base,
    };
    let mut descr = None;
    let mut fortran = None;
    let mut shape = None;
    p.skip_ws();
    p.expect(b'{')?;
    loop {
        p.skip_ws();
        if p.peek() == Some(b'}') {
            p.pos += 1;
            break;
        }
        let key_at = p.pos;
        let key = p.string()?;
        p.skip_ws();
        p.expect(b':')?;
        p.skip_ws();
        match key.as_str() {
            "descr" => descr = Some(p.string()?),
            "fortran_order" => fortran = Some(p.boolean()?),
            "shape" => shape = Some(p.tuple()?),
            other => return Err(p.err_at(key_at, format!("unexpected header key '{other}'"))),
        }
        p.skip_ws();
        match p.peek() {
            Some(b',') => p.pos += 1,
            Some(b'}') => {}
            _ => return Err(p.err("expected ',' or '}' in header")),
        }
    }
    p.skip_ws();
    if p.pos != p.s.len() {
        return Err(p.err("unexpected text after header dictionary"));
    }
    let missing = |k: &str| format_err(base, format!("header lacks '{k}'"));
    Ok(Header {
        descr: descr.ok_or_else(|| missing("descr"))?,
        fortran_order: fortran.ok_or_else(|| missing("fortran_order"))?,
        shape: shape.ok_or_else(|| missing("shape"))?,
    })
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    base: usize,
}

impl Parser<'_> {
    fn err(&self, msg: impl Into<String>) -> Error {
        self.err_at(self.pos, msg)
    }

    fn err_at(&self, pos: usize, msg: impl Into<String>) -> Error {
        format_err(self.base + pos, msg)
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected '{}' in header", c as char)))
        }
    }

    fn string(&mut self) -> Result<String> {
        let q = match self.peek() {
            Some(q @ (b'\'' | b'"')) => q,
            _ => return Err(self.err("expected a quoted string in header")),
        };
        self.pos += 1;
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c == q {
                let s = String::from_utf8_lossy(&self.s[start..self.pos]).into_owned();
                self.pos += 1;
                return Ok(s);
            }
            self.pos += 1;
        }
        Err(self.err("unterminated string in header"))
    }

    fn boolean(&mut self) -> Result<bool> {
        let rest = &self.s[self.pos..];
        if rest.starts_with(b"True") {
            self.pos += 4;
            Ok(true)
        } else if rest.starts_with(b"False") {
            self.pos += 5;
            Ok(false)
        } else {
            Err(self.err("expected True or False in header"))
        }
    }

    fn tuple(&mut self) -> Result<Vec<usize>> {
        self.expect(b'(')?;
        let mut dims = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b')') => {
                    self.pos += 1;
                    return Ok(dims);
                }
                Some(c) if c.is_ascii_digit() => {
                    let start = self.pos;
                    while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                        self.pos += 1;
                    }
                    let text = std::str::from_utf8(&self.s[start..self.pos]).expect("digits");
                    let v = text
                        .parse::<usize>()
                        .map_err(|_| self.err_at(start, "dimension out of range"))?;
                    dims.push(v);
                    self.skip_ws();
                    match self.peek() {
                        Some(b',') => self.pos += 1,
                        Some(b')') => {}
                        _ => return Err(self.err("expected ',' or ')' in shape")),
                    }
                }
                _ => return Err(self.err("expected a dimension in shape")),
            }
        }
    }
}
