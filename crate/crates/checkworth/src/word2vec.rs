//! Embedding table files.
//!
//! Three layouts are read: the word2vec text format (`count dim` header,
//! then `word v1 .. vd` per line), the original word2vec binary format
//! (`.bin`, little-endian `f32`), and a lossless sidecar of little-endian
//! `f64` rows that starts with [`SIDECAR_MAGIC`].

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use checkworth_core::corpus::Vocabulary;
use checkworth_core::embedding::EmbeddingTable;

pub const SIDECAR_MAGIC: &[u8; 8] = b"CWVEC01\n";

#[derive(Debug, thiserror::Error)]
pub enum VectorsError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Text { line: usize, message: String },
    #[error("malformed binary vectors: {0}")]
    Binary(String),
}

/// Word vectors in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Vectors {
    pub dim: usize,
    pub entries: Vec<(String, Vec<f64>)>,
}

fn text_err(line: usize, message: impl Into<String>) -> VectorsError {
    VectorsError::Text {
        line,
        message: message.into(),
    }
}

fn parse_header(line: &str, n: usize) -> Result<(usize, usize), VectorsError> {
    let mut parts = line.split_whitespace();
    let mut field = |name: &str| -> Result<usize, VectorsError> {
        parts
            .next()
            .and_then(|p| p.parse().ok())
            .ok_or_else(|| text_err(n, format!("header needs an integer {name}")))
    };
    let count = field("count")?;
    let dim = field("dim")?;
    if dim == 0 {
        return Err(text_err(n, "dimension must be positive"));
    }
    Ok((count, dim))
}

pub fn read_text(reader: impl BufRead) -> Result<Vectors, VectorsError> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| text_err(1, "missing header"))??;
    let (count, dim) = parse_header(&header, 1)?;
    let mut entries = Vec::with_capacity(count);
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().expect("non-empty line").to_string();
        let vector = parts
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| text_err(n, format!("bad number `{p}`")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if vector.len() != dim {
            return Err(text_err(
                n,
                format!("expected {dim} components, found {}", vector.len()),
            ));
        }
        entries.push((word, vector));
    }
    if entries.len() != count {
        return Err(text_err(
            1,
            format!(
                "header announces {count} vectors, file has {}",
                entries.len()
            ),
        ));
    }
    Ok(Vectors { dim, entries })
}

/// Writes `vocab`'s words with their rows of `table`. Values use the
/// shortest representation that reads back exactly.
pub fn write_text(mut w: impl Write, vocab: &Vocabulary, table: &EmbeddingTable) -> io::Result<()> {
    writeln!(w, "{} {}", vocab.len(), table.dim())?;
    for (i, word) in vocab.words().iter().enumerate() {
        write!(w, "{word}")?;
        for v in table.row(i) {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn read_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn write_sidecar(
    mut w: impl Write,
    vocab: &Vocabulary,
    table: &EmbeddingTable,
) -> io::Result<()> {
    w.write_all(SIDECAR_MAGIC)?;
    w.write_all(&(vocab.len() as u64).to_le_bytes())?;
    w.write_all(&(table.dim() as u64).to_le_bytes())?;
    for (i, word) in vocab.words().iter().enumerate() {
        w.write_all(&(word.len() as u64).to_le_bytes())?;
        w.write_all(word.as_bytes())?;
        for v in table.row(i) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a sidecar whose magic bytes have already been consumed.
fn read_sidecar_body(r: &mut impl Read) -> Result<Vectors, VectorsError> {
    let count = read_u64(r)? as usize;
    let dim = read_u64(r)? as usize;
    if dim == 0 {
        return Err(VectorsError::Binary("dimension must be positive".into()));
    }
    let mut entries = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let len = read_u64(r)? as usize;
        let mut word = vec![0u8; len];
        r.read_exact(&mut word)?;
        let word = String::from_utf8(word)
            .map_err(|_| VectorsError::Binary("word is not UTF-8".into()))?;
        let mut vector = Vec::with_capacity(dim);
        for _ in 0..dim {
            vector.push(f64::from_bits(read_u64(r)?));
        }
        entries.push((word, vector));
    }
    Ok(Vectors { dim, entries })
}

pub fn read_sidecar(mut r: impl Read) -> Result<Vectors, VectorsError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != SIDECAR_MAGIC {
        return Err(VectorsError::Binary("missing sidecar magic".into()));
    }
    read_sidecar_body(&mut r)
}

/// The original word2vec binary layout: text header, then per word the
/// word, one space, and `dim` little-endian `f32`s, optionally followed by
/// a newline.
pub fn read_word2vec_binary(reader: impl BufRead) -> Result<Vectors, VectorsError> {
    let mut r = reader;
    let mut header = String::new();
    r.read_line(&mut header)?;
    let (count, dim) = parse_header(&header, 1)?;
    let mut entries = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let mut word = Vec::new();
        r.read_until(b' ', &mut word)?;
        if word.last() != Some(&b' ') {
            return Err(VectorsError::Binary("truncated word".into()));
        }
        word.pop();
        while word.first() == Some(&b'\n') {
            word.remove(0);
        }
        let word = String::from_utf8(word)
            .map_err(|_| VectorsError::Binary("word is not UTF-8".into()))?;
        let mut buf = vec![0u8; dim * 4];
        r.read_exact(&mut buf)?;
        let vector = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        entries.push((word, vector));
    }
    Ok(Vectors { dim, entries })
}

/// Reads any supported layout. Sidecars are recognized by their magic
/// bytes, word2vec binary files by a `.bin` extension; anything else is
/// text.
pub fn read_vectors(path: impl AsRef<Path>) -> Result<Vectors, VectorsError> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path)?);
    if r.fill_buf()?.starts_with(SIDECAR_MAGIC) {
        r.consume(SIDECAR_MAGIC.len());
        return read_sidecar_body(&mut r);
    }
    if path.extension().is_some_and(|e| e == "bin") {
        read_word2vec_binary(r)
    } else {
        read_text(r)
    }
}
