//! Parallel-byte block codec.
//!
//! A block holds up to [`BLOCK_SIZE`] ascending neighbor ids of one source
//! vertex. The first id is stored as `zigzag(id - source)`, every following
//! id as the (positive) gap to its predecessor. All values are LEB128
//! varints: 7 data bits per byte, high bit set on every byte but the last.

use super::{GraphError, VertexId};

/// Default number of neighbors per block.
pub const BLOCK_SIZE: usize = 64;

#[inline]
pub fn zigzag(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

#[inline]
pub fn unzigzag(v: u64) -> i64 {
    ((v >> 1) as i64) ^ -((v & 1) as i64)
}

#[inline]
pub fn write_varint(mut v: u64, out: &mut Vec<u8>) {
    while v >= 0x80 {
        out.push((v as u8) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

/// Decodes one varint starting at `*pos`, advancing `*pos` past it.
#[inline]
pub fn read_varint(bytes: &[u8], pos: &mut usize) -> Result<u64, GraphError> {
    let mut value = 0u64;
    let mut shift = 0u32;
    loop {
        let byte = *bytes.get(*pos).ok_or(GraphError::Corrupt("truncated varint"))?;
        *pos += 1;
        if shift >= 64 {
            return Err(GraphError::Corrupt("varint overflow"));
        }
        value |= u64::from(byte & 0x7f) << shift;
        if byte & 0x80 == 0 {
            return Ok(value);
        }
        shift += 7;
    }
}

/// Appends the encoding of `neighbors` to `out`.
pub fn encode_block_into(source: VertexId, neighbors: &[VertexId], out: &mut Vec<u8>) -> Result<(), GraphError> {
    let Some((&first, rest)) = neighbors.split_first() else {
        return Ok(());
    };
    write_varint(zigzag(i64::from(first) - i64::from(source)), out);
    let mut prev = first;
    for &id in rest {
        if id <= prev {
            return Err(GraphError::NotAscending { vertex: source, prev, next: id });
        }
        write_varint(u64::from(id - prev), out);
        prev = id;
    }
    Ok(())
}

/// Encodes one block of ascending neighbors of `source`.
pub fn encode_block(source: VertexId, neighbors: &[VertexId]) -> Result<Vec<u8>, GraphError> {
    let mut out = Vec::with_capacity(neighbors.len() * 2);
    encode_block_into(source, neighbors, &mut out)?;
    Ok(out)
}

/// Decodes `count` neighbors from the front of `bytes`. Returns the ids and
/// the number of bytes consumed.
pub fn decode_block(source: VertexId, bytes: &[u8], count: usize) -> Result<(Vec<VertexId>, usize), GraphError> {
    let mut out = Vec::with_capacity(count);
    let mut pos = 0;
    decode_block_into(source, bytes, &mut pos, count, &mut out)?;
    Ok((out, pos))
}

pub(crate) fn decode_block_into(
    source: VertexId,
    bytes: &[u8],
    pos: &mut usize,
    count: usize,
    out: &mut Vec<VertexId>,
) -> Result<(), GraphError> {
    if count == 0 {
        return Ok(());
    }
    let first = i64::from(source) + unzigzag(read_varint(bytes, pos)?);
    let mut cur = u32::try_from(first).map_err(|_| GraphError::Corrupt("neighbor id out of range"))?;
    out.push(cur);
    for _ in 1..count {
        let gap = read_varint(bytes, pos)?;
        cur = u32::try_from(u64::from(cur) + gap).map_err(|_| GraphError::Corrupt("neighbor id out of range"))?;
        out.push(cur);
    }
    Ok(())
}

/// Decodes only the `index`-th entry of a block.
#[inline]
pub(crate) fn decode_nth(source: VertexId, bytes: &[u8], index: usize) -> VertexId {
    let mut pos = 0;
    // Blocks are produced by the builder, so a malformed byte here is a bug.
    let mut cur = (i64::from(source) + unzigzag(read_varint(bytes, &mut pos).expect("block"))) as u64;
    for _ in 0..index {
        cur += read_varint(bytes, &mut pos).expect("block");
    }
    cur as VertexId
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_encoded_blocks() {
        assert_eq!(encode_block(5, &[2, 7, 9]).unwrap(), vec![0x05, 0x05, 0x02]);
        assert_eq!(encode_block(0, &[1]).unwrap(), vec![0x02]);
        // 300 = 0b10_0101100 -> [0xac, 0x02]
        assert_eq!(encode_block(0, &[0, 300]).unwrap(), vec![0x00, 0xac, 0x02]);
    }

    #[test]
    fn rejects_non_ascending() {
        assert!(matches!(encode_block(0, &[3, 3]), Err(GraphError::NotAscending { .. })));
        assert!(encode_block(0, &[4, 2]).is_err());
    }

    #[test]
    fn zigzag_small_values() {
        assert_eq!(zigzag(0), 0);
        assert_eq!(zigzag(-1), 1);
        assert_eq!(zigzag(1), 2);
        assert_eq!(zigzag(-3), 5);
        for v in [-1_000_000_007i64, -1, 0, 5, u32::MAX as i64, -(u32::MAX as i64)] {
            assert_eq!(unzigzag(zigzag(v)), v);
        }
    }

    #[test]
    fn truncated_input_is_an_error() {
        assert!(decode_block(0, &[0x80], 1).is_err());
        assert!(decode_block(0, &[0x02], 2).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn block_round_trip(
            source in 0u32..u32::MAX - 1,
            mut ids in proptest::collection::btree_set(0u32..u32::MAX - 1, 0..=BLOCK_SIZE)
                .prop_map(|s| s.into_iter().collect::<Vec<_>>()),
        ) {
            ids.dedup();
            let bytes = encode_block(source, &ids).unwrap();
            let (decoded, used) = decode_block(source, &bytes, ids.len()).unwrap();
            prop_assert_eq!(used, bytes.len());
            for (i, &id) in ids.iter().enumerate() {
                prop_assert_eq!(decode_nth(source, &bytes, i), id);
            }
            prop_assert_eq!(decoded, ids);
        }
    }
}
