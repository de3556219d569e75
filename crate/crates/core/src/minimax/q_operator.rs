use crate::lift::FunctionalWeights;
use crate::linalg;
use crate::{CMat, CVec};

/// Flattened operator with blocks
/// `Q(p,q)_{kn} = Σ_{s>=0} a_{k,s+p} conj(a_{n,s+q})`, `p, q = 0…N`.
#[derive(Debug, Clone, PartialEq)]
pub struct QOperator {
    pub dim: usize,
    pub n_blocks: usize,
    pub matrix: CMat,
}

impl QOperator {
    pub fn block(&self, p: usize, q: usize) -> CMat {
        self.matrix
            .view((p * self.dim, q * self.dim), (self.dim, self.dim))
            .into_owned()
    }

    /// Largest eigenvalue and a unit eigenvector.
    pub fn top_eigenpair(&self) -> (f64, CVec) {
        let (values, vectors) = linalg::hermitian_eigen(&self.matrix);
        let last = values.len() - 1;
        (
            values[last],
            CVec::from_column_slice(vectors.column(last).clone_owned().as_slice()),
        )
    }
}

/// Builds the operator over `n_blocks` blocks (at least the stored weights).
pub fn build_q_operator(weights: &FunctionalWeights, n_blocks: Option<usize>) -> QOperator {
    let k = weights.dim();
    let stored = weights.len();
    let n = n_blocks.unwrap_or(stored).max(stored);
    let a = weights.blocks();
    let mut m = CMat::zeros(n * k, n * k);
    for p in 0..stored {
        for q in 0..stored {
            let mut block = CMat::zeros(k, k);
            let mut s = 0;
            while s + p < stored && s + q < stored {
                let ap = &a[s + p];
                let aq = &a[s + q];
                for r in 0..k {
                    for c in 0..k {
                        block[(r, c)] += ap[r] * aq[c].conj();
                    }
                }
                s += 1;
            }
            m.view_mut((p * k, q * k), (k, k)).copy_from(&block);
        }
    }
    QOperator {
        dim: k,
        n_blocks: n,
        matrix: m,
    }
}
