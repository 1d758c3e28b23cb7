//! Binary on-disk index format.
//!
//! Layout: magic `LXIX`, version byte, dim (u32 LE), mode byte (0 exact,
//! 1 forest + n_trees u32 + leaf_size u32 + seed u64), entry count (u64),
//! then per entry a length-prefixed UTF-8 doc id, a length-prefixed
//! label, and `dim` little-endian f64 values. Forest trees are not
//! stored; the build seed reproduces them exactly on load.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{EmbeddingIndex, IndexEntry, IndexError, IndexMode};
use crate::backend::EmbeddingVector;
use crate::corpus::LabelId;

const MAGIC: &[u8; 4] = b"LXIX";
const VERSION: u8 = 1;

fn write_str(writer: &mut impl Write, s: &str) -> std::io::Result<()> {
    writer.write_all(&(s.len() as u32).to_le_bytes())?;
    writer.write_all(s.as_bytes())
}

pub(crate) fn save(index: &EmbeddingIndex, path: &Path) -> Result<(), IndexError> {
    let file = File::create(path)?;
    let mut writer = BufWriter::new(file);
    writer.write_all(MAGIC)?;
    writer.write_all(&[VERSION])?;
    writer.write_all(&(index.dim() as u32).to_le_bytes())?;
    match index.mode() {
        IndexMode::Exact => writer.write_all(&[0u8])?,
        IndexMode::Forest {
            n_trees,
            leaf_size,
            seed,
        } => {
            writer.write_all(&[1u8])?;
            writer.write_all(&(n_trees as u32).to_le_bytes())?;
            writer.write_all(&(leaf_size as u32).to_le_bytes())?;
            writer.write_all(&seed.to_le_bytes())?;
        }
    }
    writer.write_all(&(index.len() as u64).to_le_bytes())?;
    for entry in index.entries() {
        write_str(&mut writer, &entry.doc_id)?;
        write_str(&mut writer, entry.label.as_str())?;
        for value in entry.vector.values() {
            writer.write_all(&value.to_le_bytes())?;
        }
    }
    writer.flush()?;
    Ok(())
}

struct Parser<R> {
    reader: R,
}

impl<R: Read> Parser<R> {
    fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N], IndexError> {
        let mut buf = [0u8; N];
        self.reader
            .read_exact(&mut buf)
            .map_err(|_| IndexError::Format(format!("truncated while reading {what}")))?;
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.bytes(what)?))
    }

    fn u64(&mut self, what: &str) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(self.bytes(what)?))
    }

    fn string(&mut self, what: &str) -> Result<String, IndexError> {
        let len = self.u32(what)? as usize;
        let mut buf = vec![0u8; len];
        self.reader
            .read_exact(&mut buf)
            .map_err(|_| IndexError::Format(format!("truncated while reading {what}")))?;
        String::from_utf8(buf).map_err(|_| IndexError::Format(format!("{what} is not UTF-8")))
    }
}

pub(crate) fn load(path: &Path) -> Result<(Vec<IndexEntry>, IndexMode), IndexError> {
    let file = File::open(path)?;
    let mut parser = Parser {
        reader: BufReader::new(file),
    };

    let magic: [u8; 4] = parser.bytes("magic")?;
    if &magic != MAGIC {
        return Err(IndexError::Format("bad magic header".into()));
    }
    let [version] = parser.bytes::<1>("version")?;
    if version != VERSION {
        return Err(IndexError::Format(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let dim = parser.u32("dim")? as usize;
    let [mode_byte] = parser.bytes::<1>("mode")?;
    let mode = match mode_byte {
        0 => IndexMode::Exact,
        1 => IndexMode::Forest {
            n_trees: parser.u32("n_trees")? as usize,
            leaf_size: parser.u32("leaf_size")? as usize,
            seed: parser.u64("seed")?,
        },
        other => return Err(IndexError::Format(format!("unknown mode byte {other}"))),
    };

    let count = parser.u64("entry count")? as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let doc_id = parser.string("doc id")?;
        let label = parser.string("label")?;
        let mut values = Vec::with_capacity(dim);
        for _ in 0..dim {
            values.push(f64::from_le_bytes(parser.bytes("vector value")?));
        }
        let vector = EmbeddingVector::new(values)
            .map_err(|e| IndexError::Format(format!("entry {doc_id:?}: {e}")))?;
        entries.push(IndexEntry {
            doc_id,
            label: LabelId::new(label),
            vector,
        });
    }

    let mut trailing = [0u8; 1];
    if parser.reader.read(&mut trailing)? != 0 {
        return Err(IndexError::Format("trailing bytes after entries".into()));
    }
    Ok((entries, mode))
}
