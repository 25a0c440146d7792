//! Multi-index bookkeeping for dense truncated jets.
//!
//! A jet in `dim` variables truncated at total degree `order` stores one
//! coefficient per multi-index `A = (a_1, ..., a_dim)` with `|A| <= order`.
//! Coefficients are laid out by total degree first, then lexicographically by
//! exponent tuple, so truncating to a lower order is a prefix copy.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Shared lookup tables for one `(dim, order)` jet layout.
///
/// Shapes are interned: two jets with equal `(dim, order)` share the same
/// `Arc<JetShape>`, so binary operations can precompute the truncated product
/// table once per layout.
pub struct JetShape {
    dim: usize,
    order: usize,
    /// Multi-indices in storage order (degree-graded, then lexicographic).
    indices: Vec<Vec<u8>>,
    /// Inverse of `indices`.
    rank_of: HashMap<Vec<u8>, usize>,
    /// All `(rank_a, rank_b, rank_out)` triples with `deg a + deg b <= order`.
    products: Vec<(u32, u32, u32)>,
    /// `factorial(A)` per multi-index, used to convert coefficients to derivatives.
    factorials: Vec<f64>,
}

impl JetShape {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of stored coefficients: `C(dim + order, order)`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn indices(&self) -> &[Vec<u8>] {
        &self.indices
    }

    pub fn index_at(&self, rank: usize) -> &[u8] {
        &self.indices[rank]
    }

    /// Storage rank of a multi-index, if it is within the truncation order.
    pub fn rank(&self, index: &[u8]) -> Option<usize> {
        self.rank_of.get(index).copied()
    }

    pub fn products(&self) -> &[(u32, u32, u32)] {
        &self.products
    }

    pub fn factorial(&self, rank: usize) -> f64 {
        self.factorials[rank]
    }

    fn build(dim: usize, order: usize) -> JetShape {
        assert!(dim >= 1, "jet dimension must be at least 1");
        let mut indices = Vec::new();
        for degree in 0..=order {
            let mut prefix = vec![0u8; dim];
            enumerate_degree(dim, degree, 0, &mut prefix, &mut indices);
        }
        let rank_of: HashMap<Vec<u8>, usize> = indices
            .iter()
            .enumerate()
            .map(|(r, ix)| (ix.clone(), r))
            .collect();
        let degree = |ix: &[u8]| ix.iter().map(|&e| e as usize).sum::<usize>();
        let mut products = Vec::new();
        for (ra, ia) in indices.iter().enumerate() {
            let da = degree(ia);
            for (rb, ib) in indices.iter().enumerate() {
                if da + degree(ib) > order {
                    continue;
                }
                let sum: Vec<u8> = ia.iter().zip(ib).map(|(a, b)| a + b).collect();
                let out = rank_of[&sum];
                products.push((ra as u32, rb as u32, out as u32));
            }
        }
        let factorials = indices
            .iter()
            .map(|ix| {
                ix.iter()
                    .map(|&e| (1..=e as u64).map(|k| k as f64).product::<f64>())
                    .product()
            })
            .collect();
        JetShape {
            dim,
            order,
            indices,
            rank_of,
            products,
            factorials,
        }
    }

    /// Interned shape for `(dim, order)`.
    pub fn get(dim: usize, order: usize) -> Arc<JetShape> {
        static REGISTRY: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetShape>>>> = OnceLock::new();
        let registry = REGISTRY.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = registry.lock().expect("jet shape registry poisoned");
        map.entry((dim, order))
            .or_insert_with(|| Arc::new(JetShape::build(dim, order)))
            .clone()
    }
}

/// Emit, in lexicographically ascending order, every tuple of length `dim`
/// with entries summing to exactly `degree`.
fn enumerate_degree(
    dim: usize,
    degree: usize,
    position: usize,
    prefix: &mut Vec<u8>,
    out: &mut Vec<Vec<u8>>,
) {
    if position + 1 == dim {
        prefix[position] = degree as u8;
        out.push(prefix.clone());
        return;
    }
    for e in 0..=degree {
        prefix[position] = e as u8;
        enumerate_degree(dim, degree - e, position + 1, prefix, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_count_is_binomial() {
        // C(dim + order, order)
        assert_eq!(JetShape::get(1, 4).len(), 5);
        assert_eq!(JetShape::get(2, 3).len(), 10);
        assert_eq!(JetShape::get(3, 2).len(), 10);
        assert_eq!(JetShape::get(4, 5).len(), 126);
    }

    #[test]
    fn ordering_is_graded_then_lexicographic() {
        let shape = JetShape::get(2, 2);
        let expected: Vec<Vec<u8>> = vec![
            vec![0, 0],
            vec![0, 1],
            vec![1, 0],
            vec![0, 2],
            vec![1, 1],
            vec![2, 0],
        ];
        assert_eq!(shape.indices(), expected.as_slice());
    }

    #[test]
    fn shapes_are_interned() {
        let a = JetShape::get(3, 4);
        let b = JetShape::get(3, 4);
        assert!(Arc::ptr_eq(&a, &b));
    }

    #[test]
    fn ranks_beyond_order_are_absent() {
        let shape = JetShape::get(2, 4);
        assert!(shape.rank(&[2, 3]).is_none()); // degree 5 > order 4
        assert!(shape.rank(&[0, 4]).is_some());
    }

    #[test]
    fn factorial_values() {
        let shape = JetShape::get(2, 4);
        let rank = shape.rank(&[2, 2]).unwrap();
        assert_eq!(shape.factorial(rank), 4.0); // 2! * 2!
        let rank = shape.rank(&[4, 0]).unwrap();
        assert_eq!(shape.factorial(rank), 24.0);
    }
}
