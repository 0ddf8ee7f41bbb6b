//! Tensor-product structure: Kronecker products, partial traces and embeddings.
//!
//! Composite indices are lexicographic with factor 0 most significant: on
//! `d0 ⊗ d1 ⊗ d2` the basis state `|i0 i1 i2⟩` has index `(i0·d1 + i1)·d2 + i2`.

use serde::{Deserialize, Serialize};

use super::matrix::{ComplexMatrix, ZERO};
use crate::error::{Error, Result};

/// Ordered tensor factorization `H = H_0 ⊗ H_1 ⊗ …`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct CompositeSpace {
    factor_dims: Vec<usize>,
    total_dim: usize,
}

impl CompositeSpace {
    pub fn new(factor_dims: Vec<usize>) -> Result<Self> {
        if factor_dims.is_empty() {
            return Err(Error::InvalidArgument(
                "composite space needs at least one factor".into(),
            ));
        }
        if let Some(k) = factor_dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidArgument(format!("factor {k} has dimension 0")));
        }
        let total_dim = factor_dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidArgument("composite dimension overflows".into()))?;
        Ok(Self {
            factor_dims,
            total_dim,
        })
    }

    /// A single-factor space.
    pub fn single(dim: usize) -> Result<Self> {
        Self::new(vec![dim])
    }

    /// `n` qubits.
    pub fn qubits(n: usize) -> Result<Self> {
        Self::new(vec![2; n])
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn num_factors(&self) -> usize {
        self.factor_dims.len()
    }

    pub fn factor_dim(&self, factor: usize) -> Result<usize> {
        self.factor_dims
            .get(factor)
            .copied()
            .ok_or(Error::IndexOutOfRange {
                context: "factor index",
                index: factor,
                len: self.factor_dims.len(),
            })
    }

    /// Dimension of everything except `factor`.
    pub fn complement_dim(&self, factor: usize) -> Result<usize> {
        Ok(self.total_dim / self.factor_dim(factor)?)
    }

    /// Index bookkeeping for separating `keep` from the remaining factors.
    pub fn split(&self, keep: &[usize]) -> Result<Split> {
        let mut kept: Vec<usize> = keep.to_vec();
        kept.sort_unstable();
        kept.dedup();
        if kept.is_empty() {
            return Err(Error::InvalidArgument(
                "partial trace must keep at least one factor; use trace() instead".into(),
            ));
        }
        if let Some(&bad) = kept.iter().find(|&&k| k >= self.num_factors()) {
            return Err(Error::IndexOutOfRange {
                context: "factor index",
                index: bad,
                len: self.num_factors(),
            });
        }
        let traced: Vec<usize> = (0..self.num_factors())
            .filter(|k| !kept.contains(k))
            .collect();
        let kept_dim: usize = kept.iter().map(|&k| self.factor_dims[k]).product();
        let traced_dim: usize = traced.iter().map(|&k| self.factor_dims[k]).product();

        let n = self.total_dim;
        let mut kept_index = vec![0; n];
        let mut traced_index = vec![0; n];
        let mut full_index = vec![0; n];
        let mut digits = vec![0usize; self.num_factors()];
        for (idx, (k_slot, t_slot)) in kept_index.iter_mut().zip(&mut traced_index).enumerate() {
            let mut rem = idx;
            for f in (0..self.num_factors()).rev() {
                digits[f] = rem % self.factor_dims[f];
                rem /= self.factor_dims[f];
            }
            let k = kept
                .iter()
                .fold(0, |acc, &f| acc * self.factor_dims[f] + digits[f]);
            let t = traced
                .iter()
                .fold(0, |acc, &f| acc * self.factor_dims[f] + digits[f]);
            *k_slot = k;
            *t_slot = t;
            full_index[k * traced_dim + t] = idx;
        }
        Ok(Split {
            kept,
            traced,
            kept_dim,
            traced_dim,
            kept_index,
            traced_index,
            full_index,
        })
    }
}

impl TryFrom<Vec<usize>> for CompositeSpace {
    type Error = Error;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Self::new(dims)
    }
}

impl From<CompositeSpace> for Vec<usize> {
    fn from(space: CompositeSpace) -> Self {
        space.factor_dims
    }
}

/// Precomputed index maps between a composite space and a (kept, traced) bipartition.
///
/// Both sides keep the original relative factor order.
#[derive(Debug, Clone)]
pub struct Split {
    kept: Vec<usize>,
    traced: Vec<usize>,
    kept_dim: usize,
    traced_dim: usize,
    kept_index: Vec<usize>,
    traced_index: Vec<usize>,
    full_index: Vec<usize>,
}

impl Split {
    pub fn kept_factors(&self) -> &[usize] {
        &self.kept
    }

    pub fn traced_factors(&self) -> &[usize] {
        &self.traced
    }

    pub fn kept_dim(&self) -> usize {
        self.kept_dim
    }

    pub fn traced_dim(&self) -> usize {
        self.traced_dim
    }

    pub fn total_dim(&self) -> usize {
        self.kept_dim * self.traced_dim
    }

    /// Full-space index of the product basis state `|kept⟩ ⊗ |traced⟩`.
    #[inline]
    pub fn full(&self, kept: usize, traced: usize) -> usize {
        self.full_index[kept * self.traced_dim + traced]
    }

    /// Sum over the traced factors.
    pub fn partial_trace(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        a.require_dim(self.total_dim(), "partial trace input")?;
        let mut out = ComplexMatrix::zeros(self.kept_dim, self.kept_dim);
        for r in 0..self.kept_dim {
            for c in 0..self.kept_dim {
                let mut acc = ZERO;
                for e in 0..self.traced_dim {
                    acc += a.get(self.full(r, e), self.full(c, e));
                }
                out[(r, c)] = acc;
            }
        }
        Ok(out)
    }

    /// `kept_op ⊗ traced_op`, laid out in the original factor order.
    pub fn join(&self, kept_op: &ComplexMatrix, traced_op: &ComplexMatrix) -> Result<ComplexMatrix> {
        kept_op.require_dim(self.kept_dim, "kept-factor operator")?;
        traced_op.require_dim(self.traced_dim, "traced-factor operator")?;
        let n = self.total_dim();
        let mut out = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            let (ki, ti) = (self.kept_index[i], self.traced_index[i]);
            for j in 0..n {
                let k = kept_op.get(ki, self.kept_index[j]);
                if k == ZERO {
                    continue;
                }
                out[(i, j)] = k * traced_op.get(ti, self.traced_index[j]);
            }
        }
        Ok(out)
    }

    /// Full-space vector `|kept⟩ ⊗ |traced⟩` in the original factor order.
    pub fn join_vectors(
        &self,
        kept: &[super::C64],
        traced: &[super::C64],
    ) -> Result<Vec<super::C64>> {
        if kept.len() != self.kept_dim {
            return Err(Error::DimensionMismatch {
                context: "kept-factor vector",
                expected: self.kept_dim,
                found: kept.len(),
            });
        }
        if traced.len() != self.traced_dim {
            return Err(Error::DimensionMismatch {
                context: "traced-factor vector",
                expected: self.traced_dim,
                found: traced.len(),
            });
        }
        Ok((0..self.total_dim())
            .map(|i| kept[self.kept_index[i]] * traced[self.traced_index[i]])
            .collect())
    }
}

/// Kronecker product with factor `a` most significant.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ar, ac, br, bc) = (a.rows(), a.cols(), b.rows(), b.cols());
    let mut out = ComplexMatrix::zeros(ar * br, ac * bc);
    for i1 in 0..ar {
        for j1 in 0..ac {
            let x = a.get(i1, j1);
            if x == ZERO {
                continue;
            }
            for i2 in 0..br {
                for j2 in 0..bc {
                    out[(i1 * br + i2, j1 * bc + j2)] = x * b.get(i2, j2);
                }
            }
        }
    }
    out
}

/// Kronecker product of a list of operators, left to right.
pub fn kron_all<'a>(ops: impl IntoIterator<Item = &'a ComplexMatrix>) -> ComplexMatrix {
    ops.into_iter()
        .fold(ComplexMatrix::identity(1), |acc, m| kron(&acc, m))
}

/// Kronecker product of vectors.
pub fn kron_vec(a: &[super::C64], b: &[super::C64]) -> Vec<super::C64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

/// Reduces `a` to the factors listed in `keep` (ascending factor order in the result).
pub fn partial_trace(a: &ComplexMatrix, space: &CompositeSpace, keep: &[usize]) -> Result<ComplexMatrix> {
    a.require_dim(space.total_dim(), "partial trace input")?;
    space.split(keep)?.partial_trace(a)
}

/// `I ⊗ … ⊗ x ⊗ … ⊗ I` with `x` acting on `factor`.
pub fn embed(x: &ComplexMatrix, space: &CompositeSpace, factor: usize) -> Result<ComplexMatrix> {
    let d = space.factor_dim(factor)?;
    x.require_dim(d, "embedded operator")?;
    let left: usize = space.factor_dims()[..factor].iter().product();
    let right: usize = space.factor_dims()[factor + 1..].iter().product();
    let inner = kron(x, &ComplexMatrix::identity(right));
    Ok(kron(&ComplexMatrix::identity(left), &inner))
}
