use rand::RngCore;

use super::{Graph, GraphError, VertexId};

/// Endpoint of a `steps`-step uniform random walk from `start`.
///
/// Each step draws a fresh 32-bit value `r` and moves to neighbor
/// `r mod degree`.
pub fn random_walk<R: RngCore + ?Sized>(
    g: &Graph,
    start: VertexId,
    steps: usize,
    rng: &mut R,
) -> Result<VertexId, GraphError> {
    g.check_vertex(start)?;
    let mut cur = start;
    for _ in 0..steps {
        let degree = g.degree(cur);
        if degree == 0 {
            return Err(GraphError::IsolatedVertex(cur));
        }
        cur = g.kth_neighbor_unchecked(cur, (rng.next_u32() % degree) as usize);
    }
    Ok(cur)
}
