//! Concept banks stored as a zip of NPY members (the `.npz` layout), written
//! byte-for-byte reproducibly.

use std::io::{Cursor, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipArchive, ZipWriter};

use crate::cca::{ConceptBank, Provenance};
use crate::error::{Error, Result};

use super::npy::{encode_npy, parse_npy, read_matrix};

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    format: u32,
    provenance: Provenance,
    d: usize,
    k: usize,
    ridge: Option<f64>,
}

fn zip_err(e: zip::result::ZipError) -> Error {
    match e {
        zip::result::ZipError::Io(io) => Error::Io(io),
        other => Error::Format {
            offset: 0,
            message: format!("bank archive: {other}"),
        },
    }
}

/// Serializes a bank. Members are stored uncompressed with fixed timestamps in
/// a fixed order so equal banks give equal bytes.
pub fn bank_to_bytes(bank: &ConceptBank) -> Result<Vec<u8>> {
    let mut zw = ZipWriter::new(Cursor::new(Vec::new()));
    let opts = SimpleFileOptions::default()
        .compression_method(CompressionMethod::Stored)
        .last_modified_time(DateTime::default())
        .unix_permissions(0o644);
    let mut put = |name: &str, bytes: &[u8]| -> Result<()> {
        zw.start_file(name, opts).map_err(zip_err)?;
        zw.write_all(bytes)?;
        Ok(())
    };
    let meta = Meta {
        format: FORMAT_VERSION,
        provenance: bank.provenance(),
        d: bank.d(),
        k: bank.k(),
        ridge: bank.ridge(),
    };
    put(
        "meta.json",
        serde_json::to_string_pretty(&meta)
            .expect("meta")
            .as_bytes(),
    )?;
    put(
        "c.npy",
        &encode_npy(&[bank.d(), bank.k()], bank.c().as_slice()),
    )?;
    put("mu_x.npy", &encode_npy(&[bank.d()], bank.mu_x()))?;
    if let Some(s) = bank.singular_values() {
        put("singular_values.npy", &encode_npy(&[s.len()], s))?;
    }
    if let Some(labels) = bank.labels() {
        put(
            "labels.txt",
            super::text_io::lines_to_string(labels).as_bytes(),
        )?;
    }
    Ok(zw.finish().map_err(zip_err)?.into_inner())
}

pub fn bank_from_bytes(bytes: &[u8]) -> Result<ConceptBank> {
    let mut za = ZipArchive::new(Cursor::new(bytes)).map_err(zip_err)?;
    let mut member = |name: &str| -> Result<Option<Vec<u8>>> {
        match za.by_name(name) {
            Ok(mut f) => {
                let mut buf = Vec::new();
                f.read_to_end(&mut buf)?;
                Ok(Some(buf))
            }
            Err(zip::result::ZipError::FileNotFound) => Ok(None),
            Err(e) => Err(zip_err(e)),
        }
    };
    let missing = |name: &str| Error::Format {
        offset: 0,
        message: format!("bank archive lacks {name}"),
    };
    let meta: Meta =
        serde_json::from_slice(&member("meta.json")?.ok_or_else(|| missing("meta.json"))?)
            .map_err(|e| Error::Format {
                offset: 0,
                message: format!("meta.json: {e}"),
            })?;
    if meta.format != FORMAT_VERSION {
        return Err(Error::Format {
            offset: 0,
            message: format!("unsupported bank format {}", meta.format),
        });
    }
    let (c, _) = read_matrix(&member("c.npy")?.ok_or_else(|| missing("c.npy"))?)?;
    let mu = parse_npy(&member("mu_x.npy")?.ok_or_else(|| missing("mu_x.npy"))?)?;
    if c.shape() != (meta.d, meta.k) {
        return Err(Error::Format {
            offset: 0,
            message: format!(
                "c.npy is {}x{} but meta.json says {}x{}",
                c.rows(),
                c.cols(),
                meta.d,
                meta.k
            ),
        });
    }
    let mut bank = ConceptBank::new(c, mu.data, meta.provenance)?;
    if let Some(s) = member("singular_values.npy")? {
        bank = bank.with_singular_values(parse_npy(&s)?.data);
    }
    if let Some(r) = meta.ridge {
        bank = bank.with_ridge(r);
    }
    if let Some(l) = member("labels.txt")? {
        let text = String::from_utf8(l).map_err(|e| Error::Format {
            offset: e.utf8_error().valid_up_to(),
            message: "labels.txt is not UTF-8".into(),
        })?;
        bank = bank.with_labels(super::text_io::parse_lines(&text))?;
    }
    Ok(bank)
}

pub fn save_bank(path: impl AsRef<Path>, bank: &ConceptBank) -> Result<()> {
    super::write_atomic(path.as_ref(), &bank_to_bytes(bank)?)
}

pub fn load_bank(path: impl AsRef<Path>) -> Result<ConceptBank> {
    bank_from_bytes(&std::fs::read(path)?)
}
