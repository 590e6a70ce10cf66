//! Text edge lists and the binary graph file.
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! "LNE2GRPH"  u32 version = 1  u8 compressed
//! u64 n  u64 m  u64 offsets[n + 1]  payload[offsets[n]]
//! ```
//!
//! The payload is `u32` neighbor ids for raw graphs, or the block-compressed
//! vertex records for compressed ones. Offsets are in bytes either way.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{build_graph, codec, normalize_edges, Adjacency, EdgeList, Graph, GraphError, SENTINEL_ID};

pub const GRAPH_MAGIC: &[u8; 8] = b"LNE2GRPH";
pub const GRAPH_VERSION: u32 = 1;

/// Parses whitespace-separated `u v` lines. Lines starting with `#` and blank
/// lines are skipped; extra columns are ignored.
pub fn parse_edge_list<R: BufRead>(reader: R) -> Result<EdgeList, GraphError> {
    let mut edges = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let mut next_id = || -> Result<u32, GraphError> {
            let tok = fields
                .next()
                .ok_or_else(|| GraphError::Parse { line: line_no, msg: "expected two vertex ids".into() })?;
            let id: u64 = tok
                .parse()
                .map_err(|_| GraphError::Parse { line: line_no, msg: format!("invalid vertex id {tok:?}") })?;
            if id >= u64::from(SENTINEL_ID) {
                return Err(GraphError::Parse { line: line_no, msg: GraphError::IdTooLarge { id }.to_string() });
            }
            Ok(id as u32)
        };
        let u = next_id()?;
        let v = next_id()?;
        edges.push((u, v));
    }
    Ok(EdgeList::new(edges))
}

pub fn read_edge_list_file(path: &Path) -> Result<EdgeList, GraphError> {
    parse_edge_list(BufReader::new(File::open(path)?))
}

pub fn write_graph<W: Write>(g: &Graph, mut w: W) -> Result<(), GraphError> {
    w.write_all(GRAPH_MAGIC)?;
    w.write_all(&GRAPH_VERSION.to_le_bytes())?;
    w.write_all(&[u8::from(g.is_compressed())])?;
    w.write_all(&(g.num_vertices() as u64).to_le_bytes())?;
    w.write_all(&g.num_edges().to_le_bytes())?;
    for &off in g.offsets() {
        w.write_all(&off.to_le_bytes())?;
    }
    match g.adjacency() {
        Adjacency::Raw(ids) => {
            let mut buf = Vec::with_capacity(ids.len() * 4);
            for id in ids {
                buf.extend_from_slice(&id.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Adjacency::Compressed(bytes) => w.write_all(bytes)?,
    }
    w.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, GraphError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_graph<R: Read>(mut r: R) -> Result<Graph, GraphError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != GRAPH_MAGIC {
        return Err(GraphError::Format("missing LNE2GRPH magic".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != GRAPH_VERSION {
        return Err(GraphError::Format(format!("unsupported version {version}")));
    }
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    let n = read_u64(&mut r)?;
    let m = read_u64(&mut r)?;
    if n > u64::from(SENTINEL_ID) {
        return Err(GraphError::Format(format!("vertex count {n} too large")));
    }
    let n = n as usize;
    let offsets = (0..=n).map(|_| read_u64(&mut r)).collect::<Result<Vec<_>, _>>()?;
    if offsets[0] != 0 || offsets.windows(2).any(|w| w[0] > w[1]) {
        return Err(GraphError::Format("offsets are not monotone from 0".into()));
    }
    let mut payload = vec![0u8; offsets[n] as usize];
    r.read_exact(&mut payload)?;

    let (degrees, adjacency): (Vec<u32>, _) = match flag[0] {
        0 => {
            if offsets.iter().any(|o| o % 4 != 0) {
                return Err(GraphError::Format("raw offsets must be multiples of 4".into()));
            }
            let degrees = offsets.windows(2).map(|w| ((w[1] - w[0]) / 4) as u32).collect();
            let ids = payload.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
            (degrees, Adjacency::Raw(ids))
        }
        1 => {
            let degrees = offsets
                .windows(2)
                .map(|w| {
                    let mut pos = w[0] as usize;
                    let d = codec::read_varint(&payload[..w[1] as usize], &mut pos)?;
                    u32::try_from(d).map_err(|_| GraphError::Corrupt("degree overflow"))
                })
                .collect::<Result<_, _>>()?;
            (degrees, Adjacency::Compressed(payload))
        }
        other => return Err(GraphError::Format(format!("unknown compression flag {other}"))),
    };
    let total: u64 = degrees.iter().map(|&d| u64::from(d)).sum();
    if total != 2 * m {
        return Err(GraphError::Format(format!("degree sum {total} != 2m = {}", 2 * m)));
    }
    Ok(Graph::from_parts(n, m, degrees, offsets, adjacency))
}

pub fn write_graph_file(g: &Graph, path: &Path) -> Result<(), GraphError> {
    write_graph(g, BufWriter::new(File::create(path)?))
}

pub fn read_graph_file(path: &Path) -> Result<Graph, GraphError> {
    read_graph(BufReader::new(File::open(path)?))
}

/// Loads either a binary graph file (detected by its magic) or a text edge
/// list, which is normalized and built with the given compression flag.
pub fn load_graph(path: &Path, compress: bool) -> Result<Graph, GraphError> {
    let mut head = [0u8; 8];
    let is_binary = {
        let mut f = File::open(path)?;
        f.read(&mut head)? == 8 && &head == GRAPH_MAGIC
    };
    if is_binary {
        read_graph_file(path)
    } else {
        build_graph(&normalize_edges(read_edge_list_file(path)?)?, compress)
    }
}
