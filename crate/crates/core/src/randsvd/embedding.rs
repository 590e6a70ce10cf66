//! Embedding matrices and their binary file.
//!
//! Layout, little-endian: `"LNE2EMB0"`, `u32 version = 1`, `u64 n`,
//! `u32 d`, then `n·d` `f32` values row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1};

use super::{SvdError, SvdFactors};

pub const EMBEDDING_MAGIC: &[u8; 8] = b"LNE2EMB0";
const EMBEDDING_VERSION: u32 = 1;

/// `n × d` node embedding, one row per vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding(pub Array2<f32>);

impl Embedding {
    pub fn num_nodes(&self) -> usize {
        self.0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f32> {
        self.0.row(i)
    }

    pub fn matrix(&self) -> &Array2<f32> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f32> {
        self.0
    }
}

/// `X[:, j] = U[:, j] · sqrt(sigma[j])`.
pub fn embedding_from_factors(f: &SvdFactors) -> Embedding {
    let mut x = f.u.clone();
    for (mut col, &s) in x.columns_mut().into_iter().zip(&f.sigma) {
        col *= s.max(0.0).sqrt();
    }
    Embedding(x)
}

pub fn write_embedding<W: Write>(e: &Embedding, mut w: W) -> Result<(), SvdError> {
    w.write_all(EMBEDDING_MAGIC)?;
    w.write_all(&EMBEDDING_VERSION.to_le_bytes())?;
    w.write_all(&(e.num_nodes() as u64).to_le_bytes())?;
    w.write_all(&(e.dim() as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(e.num_nodes() * e.dim() * 4);
    for x in e.0.iter() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_embedding<R: Read>(mut r: R) -> Result<Embedding, SvdError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != EMBEDDING_MAGIC {
        return Err(SvdError::Format("missing LNE2EMB0 magic".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != EMBEDDING_VERSION {
        return Err(SvdError::Format(format!("unsupported version {version}")));
    }
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b4)?;
    let d = u32::from_le_bytes(b4) as usize;
    let mut raw = vec![0u8; n * d * 4];
    r.read_exact(&mut raw)?;
    let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    let x = Array2::from_shape_vec((n, d), data).map_err(|e| SvdError::Format(e.to_string()))?;
    Ok(Embedding(x))
}

/// One line per vertex: `id v_1 ... v_d`.
pub fn write_embedding_text<W: Write>(e: &Embedding, mut w: W) -> Result<(), SvdError> {
    for (i, row) in e.0.rows().into_iter().enumerate() {
        write!(w, "{i}")?;
        for x in row {
            write!(w, " {x}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_embedding_file(e: &Embedding, path: &Path) -> Result<(), SvdError> {
    write_embedding(e, BufWriter::new(File::create(path)?))
}

pub fn read_embedding_file(path: &Path) -> Result<Embedding, SvdError> {
    read_embedding(BufReader::new(File::open(path)?))
}
