//! Block bookkeeping for fat distributions of rank `k` on `n`-manifolds.
//!
//! The canonical frame splits indices into `a` and `b` (each of size `n − k`) and `c`
//! (size `2k − n`). The structural matrices are `A = [[0, I, 0], [0, 0, 0], [0, 0, 0]]`
//! and `B = diag(0, I, I)`.

use std::ops::Range;

use nalgebra::{DMatrix, Matrix2};

use crate::error::{Error, Result};
use crate::riccati_engine::{min_sym_eigenvalue, StructuralPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FatDims {
    k: usize,
    n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    A,
    B,
    C,
}

impl FatDims {
    pub fn new(k: usize, n: usize) -> Result<Self> {
        if k < 3 || k >= n || n > 2 * k - 1 {
            return Err(Error::InvalidInput(format!(
                "(k, n) = ({k}, {n}) violates 3 ≤ k < n ≤ 2k − 1"
            )));
        }
        Ok(Self { k, n })
    }

    /// Dimensions of the quaternionic Hopf fibration over `ℍP^d`.
    pub fn qhf(d: usize) -> Result<Self> {
        Self::new(4 * d, 4 * d + 3)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `|a| = |b| = n − k`.
    pub fn corank(&self) -> usize {
        self.n - self.k
    }

    /// `|c| = 2k − n`.
    pub fn c_size(&self) -> usize {
        2 * self.k - self.n
    }

    pub fn range(&self, block: Block) -> Range<usize> {
        let m = self.corank();
        match block {
            Block::A => 0..m,
            Block::B => m..2 * m,
            Block::C => 2 * m..self.n,
        }
    }
}

/// An `n × n` matrix together with its `(a, b, c)` partition.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    mat: DMatrix<f64>,
    dims: FatDims,
}

impl BlockMatrix {
    pub fn new(mat: DMatrix<f64>, dims: FatDims) -> Result<Self> {
        if mat.nrows() != dims.n() || mat.ncols() != dims.n() {
            return Err(Error::Dimension(format!(
                "matrix is {}x{}, partition needs {}x{}",
                mat.nrows(),
                mat.ncols(),
                dims.n(),
                dims.n()
            )));
        }
        Ok(Self { mat, dims })
    }

    pub fn zeros(dims: FatDims) -> Self {
        Self {
            mat: DMatrix::zeros(dims.n(), dims.n()),
            dims,
        }
    }

    pub fn dims(&self) -> FatDims {
        self.dims
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    pub fn block(&self, row: Block, col: Block) -> DMatrix<f64> {
        let r = self.dims.range(row);
        let c = self.dims.range(col);
        self.mat
            .view((r.start, c.start), (r.len(), c.len()))
            .into_owned()
    }

    pub fn set_block(&mut self, row: Block, col: Block, value: &DMatrix<f64>) -> Result<()> {
        let r = self.dims.range(row);
        let c = self.dims.range(col);
        if value.nrows() != r.len() || value.ncols() != c.len() {
            return Err(Error::Dimension(format!(
                "block {row:?}{col:?} is {}x{}, got {}x{}",
                r.len(),
                c.len(),
                value.nrows(),
                value.ncols()
            )));
        }
        self.mat
            .view_mut((r.start, c.start), (r.len(), c.len()))
            .copy_from(value);
        Ok(())
    }
}

pub fn build_structural(dims: FatDims) -> StructuralPair {
    let mut a = BlockMatrix::zeros(dims);
    let mut b = BlockMatrix::zeros(dims);
    let m = dims.corank();
    let c = dims.c_size();
    let id_m = DMatrix::identity(m, m);
    a.set_block(Block::A, Block::B, &id_m).unwrap();
    b.set_block(Block::B, Block::B, &id_m).unwrap();
    b.set_block(Block::C, Block::C, &DMatrix::identity(c, c)).unwrap();
    StructuralPair::new(a.into_matrix(), b.into_matrix()).expect("structural B is a projector")
}

/// The type-I corner (rows/columns `a ∪ b`) and the type-II corner (`c × c`).
pub fn split_i_ii(m: &BlockMatrix) -> (DMatrix<f64>, DMatrix<f64>) {
    let dims = m.dims();
    let ab = 2 * dims.corank();
    let c = dims.c_size();
    let mat = m.matrix();
    (
        mat.view((0, 0), (ab, ab)).into_owned(),
        mat.view((ab, ab), (c, c)).into_owned(),
    )
}

/// Normalised block traces `(1/(n−k)) ((tr V_aa, tr V_ab), (tr V_ba, tr V_bb))`.
pub fn traced_type_i(v_i: &DMatrix<f64>, dims: FatDims) -> Result<Matrix2<f64>> {
    let m = dims.corank();
    if v_i.nrows() != 2 * m || v_i.ncols() != 2 * m {
        return Err(Error::Dimension(format!(
            "type-I corner must be {0}x{0}, got {1}x{2}",
            2 * m,
            v_i.nrows(),
            v_i.ncols()
        )));
    }
    let tr = |r: usize, c: usize| v_i.view((r * m, c * m), (m, m)).trace() / m as f64;
    Ok(Matrix2::new(tr(0, 0), tr(0, 1), tr(1, 0), tr(1, 1)))
}

/// Normalised trace of the `c′` block (the `c` block without the motion direction).
pub fn traced_type_ii(v_cc_prime: &DMatrix<f64>, dims: FatDims) -> Result<f64> {
    let size = dims.c_size();
    if size < 2 {
        return Err(Error::InvalidInput(
            "2k − n = 1: the c block is only the direction of motion".into(),
        ));
    }
    if v_cc_prime.nrows() != size - 1 || v_cc_prime.ncols() != size - 1 {
        return Err(Error::Dimension(format!(
            "c′ block must be {0}x{0}, got {1}x{2}",
            size - 1,
            v_cc_prime.nrows(),
            v_cc_prime.ncols()
        )));
    }
    Ok(v_cc_prime.trace() / (size - 1) as f64)
}

/// The `c′ × c′` block: the `c` block with the last (motion) row and column removed.
pub fn c_prime_block(m: &BlockMatrix) -> DMatrix<f64> {
    let cc = m.block(Block::C, Block::C);
    let s = cc.nrows() - 1;
    cc.view((0, 0), (s, s)).into_owned()
}

/// `‖X‖²‖Y‖² − ⟨X,Y⟩² + (2/m) tr X tr Y ⟨X,Y⟩ ≥ (1/m)(tr(Y)²‖X‖² + tr(X)²‖Y‖²)`, Frobenius.
pub fn trace_inequality_check(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<bool> {
    Ok(trace_inequality_gap(x, y)? >= -1e-9)
}

/// Left-hand side minus right-hand side of [`trace_inequality_check`].
pub fn trace_inequality_gap(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    let m = x.nrows();
    if x.ncols() != m || y.nrows() != m || y.ncols() != m || m == 0 {
        return Err(Error::Dimension("trace inequality needs equal square matrices".into()));
    }
    let mf = m as f64;
    let (x2, y2) = (x.norm_squared(), y.norm_squared());
    let xy = x.dot(y);
    let (tx, ty) = (x.trace(), y.trace());
    let lhs = x2 * y2 - xy * xy + 2.0 / mf * tx * ty * xy;
    let rhs = (ty * ty * x2 + tx * tx * y2) / mf;
    Ok(lhs - rhs)
}

/// The two correction terms of the traced type-I curvature, given the full Riccati solution `V`.
///
/// Tracing the Riccati equation over the `a`/`b` blocks produces
/// `ṽ + a*ṽ + ṽa + r_I + ṽ b ṽ = 0` for `ṽ = traced_type_i(V_I)`, where
/// `r_I = (1/(n−k)) diag(tr R_aa, tr R_bb) + D₁ + D₂`. `D₁` collects the `c`-coupling and
/// `D₂` the fluctuation of the `ab` blocks around their traces. Both are positive semidefinite.
pub fn type_i_corrections(v: &BlockMatrix) -> (Matrix2<f64>, Matrix2<f64>) {
    let m = v.dims().corank() as f64;
    let vac = v.block(Block::A, Block::C);
    let vbc = v.block(Block::B, Block::C);
    let vab = v.block(Block::A, Block::B);
    let vbb = v.block(Block::B, Block::B);
    let d1 = Matrix2::new(
        vac.norm_squared(),
        vac.dot(&vbc),
        vbc.dot(&vac),
        vbc.norm_squared(),
    ) / m;
    let fro = |x: &DMatrix<f64>, y: &DMatrix<f64>| x.dot(y) / m;
    let tr = |x: &DMatrix<f64>| x.trace() / m;
    let off = fro(&vab, &vbb) - tr(&vab) * tr(&vbb);
    let d2 = Matrix2::new(
        fro(&vab, &vab) - tr(&vab) * tr(&vab),
        off,
        off,
        fro(&vbb, &vbb) - tr(&vbb) * tr(&vbb),
    );
    (d1, d2)
}

/// Checks that the motion direction (last `c` index) lies in the kernel of `R`.
pub fn check_motion_direction(r: &BlockMatrix, tol: f64) -> Result<()> {
    let n = r.dims().n();
    let mat = r.matrix();
    let worst = (0..n)
        .map(|i| mat[(n - 1, i)].abs().max(mat[(i, n - 1)].abs()))
        .fold(0.0, f64::max);
    if worst >= tol {
        return Err(Error::InvalidInput(format!(
            "motion direction row/column has entry {worst:e} ≥ {tol:e}"
        )));
    }
    Ok(())
}

/// `2×2` symmetric matrix is PSD up to `tol`.
pub fn is_psd2(m: &Matrix2<f64>, tol: f64) -> bool {
    let d = DMatrix::from_column_slice(2, 2, m.as_slice());
    min_sym_eigenvalue(&d) >= -tol
}
