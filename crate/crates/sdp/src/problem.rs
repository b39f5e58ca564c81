use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("inconsistent problem dimensions: {0}")]
    Dimensions(String),
    #[error("coefficient matrix not symmetric within 1e-14 at block {block} ({i},{j})")]
    NotSymmetric { block: usize, i: usize, j: usize },
    #[error("linear algebra failure: {0}")]
    Numerical(String),
    #[error("constraint {0} does not have identity coefficient on every block")]
    NotIdentityRow(usize),
}

/// Sparse symmetric matrix stored as upper-triangle triplets.
///
/// An entry `(r, c, v)` with `r <= c` means `M[r,c] = M[c,r] = v`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMat {
    pub dim: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseSymMat {
    pub fn new(dim: usize) -> Self {
        Self { dim, entries: Vec::new() }
    }

    /// Add `v` to entry (r, c); order of r, c irrelevant.
    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        let (r, c) = if r <= c { (r, c) } else { (c, r) };
        assert!(c < self.dim, "entry out of range");
        if let Some(e) = self.entries.iter_mut().find(|e| e.0 == r && e.1 == c) {
            e.2 += v;
        } else {
            self.entries.push((r, c, v));
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, entries: (0..dim).map(|i| (i, i, 1.0)).collect() }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
        m
    }

    /// <M, X> = sum_{rc} M[r,c] X[r,c] for symmetric X.
    pub fn inner(&self, x: &DMatrix<f64>) -> f64 {
        let mut acc = 0.0;
        for &(r, c, v) in &self.entries {
            if r == c {
                acc += v * x[(r, c)];
            } else {
                acc += 2.0 * v * x[(r, c)];
            }
        }
        acc
    }

    /// dst += w * M (dense accumulation).
    pub fn add_to(&self, dst: &mut DMatrix<f64>, w: f64) {
        for &(r, c, v) in &self.entries {
            dst[(r, c)] += w * v;
            if r != c {
                dst[(c, r)] += w * v;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.2.abs()))
    }

    fn is_identity(&self) -> bool {
        let mut diag = vec![false; self.dim];
        for &(r, c, v) in &self.entries {
            if r == c {
                if (v - 1.0).abs() > 1e-12 {
                    return false;
                }
                diag[r] = true;
            } else if v != 0.0 {
                return false;
            }
        }
        diag.iter().all(|&d| d)
    }
}

/// Block-diagonal symmetric coefficient: sparse per-block pieces, blocks not
/// listed are zero.
#[derive(Debug, Clone, Default)]
pub struct BlockMat {
    pub blocks: Vec<(usize, SparseSymMat)>,
}

impl BlockMat {
    pub fn new() -> Self {
        Self { blocks: Vec::new() }
    }

    pub fn push(&mut self, block: usize, r: usize, c: usize, v: f64, dims: &[usize]) {
        if let Some((_, m)) = self.blocks.iter_mut().find(|(b, _)| *b == block) {
            m.push(r, c, v);
        } else {
            let mut m = SparseSymMat::new(dims[block]);
            m.push(r, c, v);
            self.blocks.push((block, m));
            self.blocks.sort_by_key(|(b, _)| *b);
        }
    }

    pub fn identity(dims: &[usize]) -> Self {
        Self {
            blocks: dims
                .iter()
                .enumerate()
                .map(|(b, &d)| (b, SparseSymMat::identity(d)))
                .collect(),
        }
    }

    pub fn inner_blocks(&self, x: &[DMatrix<f64>]) -> f64 {
        self.blocks.iter().map(|(b, m)| m.inner(&x[*b])).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().fold(0.0, |m, (_, s)| m.max(s.max_abs()))
    }

    pub fn is_identity_on(&self, dims: &[usize]) -> bool {
        if self.blocks.len() != dims.len() {
            return false;
        }
        self.blocks
            .iter()
            .zip(dims.iter())
            .all(|((b, m), &d)| m.dim == d && dims[*b] == d && m.is_identity())
    }
}

/// Equality-constrained block SDP, maximization sense.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub block_dims: Vec<usize>,
    pub objective: BlockMat,
    /// (coefficient, right-hand side) per constraint row.
    pub constraints: Vec<(BlockMat, f64)>,
}

impl SdpProblem {
    pub fn new(block_dims: Vec<usize>) -> Self {
        Self { block_dims, objective: BlockMat::new(), constraints: Vec::new() }
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        let check = |bm: &BlockMat| -> Result<(), SdpError> {
            for (b, m) in &bm.blocks {
                if *b >= self.block_dims.len() || m.dim != self.block_dims[*b] {
                    return Err(SdpError::Dimensions(format!(
                        "block {} has dim {} expected {:?}",
                        b,
                        m.dim,
                        self.block_dims.get(*b)
                    )));
                }
                for &(r, c, _) in &m.entries {
                    if r > c || c >= m.dim {
                        return Err(SdpError::Dimensions(format!("entry ({r},{c}) in block {b}")));
                    }
                }
            }
            Ok(())
        };
        check(&self.objective)?;
        for (mat, _) in &self.constraints {
            check(mat)?;
        }
        Ok(())
    }

    /// Validate a dense symmetric matrix and convert to sparse form.
    pub fn dense_to_sparse(block: usize, m: &DMatrix<f64>) -> Result<SparseSymMat, SdpError> {
        let d = m.nrows();
        let mut out = SparseSymMat::new(d);
        for r in 0..d {
            for c in r..d {
                if (m[(r, c)] - m[(c, r)]).abs() > 1e-14 {
                    return Err(SdpError::NotSymmetric { block, i: r, j: c });
                }
                if m[(r, c)] != 0.0 {
                    out.entries.push((r, c, m[(r, c)]));
                }
            }
        }
        Ok(out)
    }
}
