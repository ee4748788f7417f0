//! Canonical curvature of 3-Sasakian manifolds along a unit extremal.
//!
//! Everything depends on the vertical part `v = (v_I, v_J, v_K)` of the covector, through the
//! skew matrix `V` with `V_{αβ} = v_{αβ}` (the component of the quaternion product `αβ`), and on
//! a handful of frame contractions collected in [`CurvatureInputs`].

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::fat_structure::{Block, BlockMatrix, FatDims};
use crate::riccati_engine::asymmetry;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerticalVector {
    v: Vector3<f64>,
}

impl VerticalVector {
    pub fn new(v_i: f64, v_j: f64, v_k: f64) -> Self {
        Self {
            v: Vector3::new(v_i, v_j, v_k),
        }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    /// `‖v‖ (1, 0, 0)`.
    pub fn along_i(norm: f64) -> Self {
        Self::new(norm, 0.0, 0.0)
    }

    pub fn components(&self) -> Vector3<f64> {
        self.v
    }

    pub fn norm(&self) -> f64 {
        self.v.norm()
    }

    pub fn norm_squared(&self) -> f64 {
        self.v.norm_squared()
    }

    /// `V` with `V_{IJ} = v_K`, `V_{JK} = v_I`, `V_{KI} = v_J`: minus the cross-product matrix.
    pub fn skew(&self) -> Matrix3<f64> {
        let (a, b, c) = (self.v.x, self.v.y, self.v.z);
        Matrix3::new(0.0, c, -b, -c, 0.0, a, b, -a, 0.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { v: self.v * s }
    }
}

/// `exp((3/2) t V)` via the Rodrigues formula.
pub fn rotation(v: &VerticalVector, t: f64) -> Matrix3<f64> {
    let s = v.skew() * (1.5 * t);
    let theta = 1.5 * t * v.norm();
    let (a, b) = if theta.abs() < 1e-6 {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0 + t2 * t2 / 120.0, 0.5 - t2 / 24.0 + t2 * t2 / 720.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
    };
    Matrix3::identity() + s * a + s * s * b
}

/// Frame contractions determining the canonical curvature along one extremal.
///
/// `w` is the motion direction expressed in the `c` basis; it must be the last basis vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureInputs {
    pub d: usize,
    pub aba: Matrix3<f64>,
    pub abdota: Matrix3<f64>,
    pub abu: DMatrix<f64>,
    pub ubu: DMatrix<f64>,
    pub w: DVector<f64>,
    pub rho_a: f64,
}

impl CurvatureInputs {
    fn c_dim(&self) -> usize {
        4 * self.d - 3
    }

    /// Dimension, symmetry and trace consistency checks against `v`.
    pub fn validate(&self, v: &VerticalVector) -> Result<()> {
        if self.d < 1 {
            return Err(Error::InvalidInput("quaternionic dimension d must be ≥ 1".into()));
        }
        let c = self.c_dim();
        if self.abu.nrows() != 3 || self.abu.ncols() != c {
            return Err(Error::Dimension(format!("ABU must be 3x{c}")));
        }
        if self.ubu.nrows() != c || self.ubu.ncols() != c || self.w.len() != c {
            return Err(Error::Dimension(format!("UBU must be {c}x{c} and w of length {c}")));
        }
        let aba = DMatrix::from_column_slice(3, 3, self.aba.as_slice());
        let abdota = DMatrix::from_column_slice(3, 3, self.abdota.as_slice());
        if asymmetry(&aba) > 1e-10 || asymmetry(&abdota) > 1e-10 || asymmetry(&self.ubu) > 1e-10 {
            return Err(Error::InvalidInput("ABA, ABdotA and UBU must be symmetric".into()));
        }
        if (self.w.norm() - 1.0).abs() > 1e-10 || (self.w[c - 1] - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput(
                "w must be the last basis vector of the c block".into(),
            ));
        }
        if (&self.ubu * &self.w).amax() > 1e-10 || (&self.abu * &self.w).amax() > 1e-10 {
            return Err(Error::InvalidInput(
                "the motion direction must lie in the kernel of UBU and ABU".into(),
            ));
        }
        let checks = [
            ("tr ABA", self.aba.trace(), 12.0),
            ("tr UBU", self.ubu.trace(), (4 * self.d - 4) as f64),
            (
                "tr(V ABA Vᵀ) − 6‖v‖²",
                (v.skew() * self.aba * v.skew().transpose()).trace() - 6.0 * v.norm_squared(),
                self.rho_a,
            ),
        ];
        for (what, got, want) in checks {
            if (got - want).abs() > 1e-9 * want.abs().max(1.0) {
                return Err(Error::InvalidInput(format!("{what} = {got}, expected {want}")));
            }
        }
        Ok(())
    }
}

/// Canonical Ricci curvatures `(𝔯ic^a, 𝔯ic^b, 𝔯ic^c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicciScalars {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

pub fn ricci_scalars(v: &VerticalVector, rho_a: f64, d: usize) -> RicciScalars {
    let s = v.norm_squared();
    RicciScalars {
        a: 3.0 * (0.75 * rho_a - 3.5 * s - 15.0 / 8.0 * s * s),
        b: 3.0 * (4.0 + 5.0 * s),
        c: (4.0 * d as f64 - 4.0) * (1.0 + s),
    }
}

/// Inputs for the round sphere `S^{4d+3}` (sectional curvature 1).
pub fn qhf_curvature_inputs(d: usize, v: &VerticalVector) -> CurvatureInputs {
    let c = 4 * d - 3;
    let mut w = DVector::zeros(c);
    w[c - 1] = 1.0;
    let ubu = DMatrix::identity(c, c) - &w * w.transpose();
    CurvatureInputs {
        d,
        aba: Matrix3::identity() * 4.0,
        abdota: Matrix3::zeros(),
        abu: DMatrix::zeros(3, c),
        ubu,
        w,
        rho_a: 2.0 * v.norm_squared(),
    }
}

/// The canonical curvature matrix `R(t)` as a function of time.
#[derive(Debug, Clone)]
pub struct CurvatureBlocks {
    v: VerticalVector,
    inputs: CurvatureInputs,
    dims: FatDims,
    // Conjugated constant parts: R_μν(t) = E(t) X_μν E(t)ᵀ (or E(t) X for the c-couplings).
    xaa: Matrix3<f64>,
    xab: Matrix3<f64>,
    xbb: Matrix3<f64>,
    xac: DMatrix<f64>,
    rcc: DMatrix<f64>,
}

pub fn curvature_blocks(v: &VerticalVector, inputs: CurvatureInputs) -> Result<CurvatureBlocks> {
    inputs.validate(v)?;
    let dims = FatDims::qhf(inputs.d)?;
    let vv = v.skew();
    let vt = vv.transpose();
    let v2 = vv * vv;
    let s = v.norm_squared();
    let x = inputs.aba;
    let xd = inputs.abdota;
    let xaa = (xd * vv + vt * xd) * 0.75
        + (x * v2 + v2 * x) * 0.375
        + vv * x * vt * 3.0
        + v2 * (12.0 + 45.0 / 16.0 * s);
    let xab = (vv * x + x * vv) * 0.75 + vv * (1.5 * s - 4.0);
    let xbb = x + Matrix3::identity() * (4.0 * s) - v2 * 1.5;
    let vd = DMatrix::from_column_slice(3, 3, vv.as_slice());
    let xac = vd * &inputs.abu * 1.5;
    let c = inputs.ubu.nrows();
    let rcc = &inputs.ubu + (DMatrix::identity(c, c) - &inputs.w * inputs.w.transpose()) * s;
    Ok(CurvatureBlocks {
        v: *v,
        inputs,
        dims,
        xaa,
        xab,
        xbb,
        xac,
        rcc,
    })
}

/// The six independent blocks at one time.
#[derive(Debug, Clone)]
pub struct BlocksAt {
    pub aa: Matrix3<f64>,
    pub ab: Matrix3<f64>,
    pub ac: DMatrix<f64>,
    pub bb: Matrix3<f64>,
    pub bc: DMatrix<f64>,
    pub cc: DMatrix<f64>,
}

fn to_dyn(m: &Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(3, 3, m.as_slice())
}

impl CurvatureBlocks {
    pub fn dims(&self) -> FatDims {
        self.dims
    }

    pub fn vertical(&self) -> VerticalVector {
        self.v
    }

    pub fn inputs(&self) -> &CurvatureInputs {
        &self.inputs
    }

    pub fn blocks_at(&self, t: f64) -> BlocksAt {
        let e = rotation(&self.v, t);
        let et = e.transpose();
        let ed = to_dyn(&e);
        BlocksAt {
            aa: e * self.xaa * et,
            ab: e * self.xab * et,
            ac: &ed * &self.xac,
            bb: e * self.xbb * et,
            bc: &ed * &self.inputs.abu,
            cc: self.rcc.clone(),
        }
    }

    /// Full `n × n` matrix in the `(a, b, c)` layout.
    pub fn at(&self, t: f64) -> BlockMatrix {
        let b = self.blocks_at(t);
        let mut m = BlockMatrix::zeros(self.dims);
        m.set_block(Block::A, Block::A, &to_dyn(&b.aa)).unwrap();
        m.set_block(Block::A, Block::B, &to_dyn(&b.ab)).unwrap();
        m.set_block(Block::B, Block::A, &to_dyn(&b.ab.transpose())).unwrap();
        m.set_block(Block::A, Block::C, &b.ac).unwrap();
        m.set_block(Block::C, Block::A, &b.ac.transpose()).unwrap();
        m.set_block(Block::B, Block::B, &to_dyn(&b.bb)).unwrap();
        m.set_block(Block::B, Block::C, &b.bc).unwrap();
        m.set_block(Block::C, Block::B, &b.bc.transpose()).unwrap();
        m.set_block(Block::C, Block::C, &b.cc).unwrap();
        m
    }

    /// Partial traces of `R(t)`: `tr R_aa`, `tr R_bb`, `tr R_cc` (the motion entry is zero).
    pub fn traces(&self, t: f64) -> RicciScalars {
        let b = self.blocks_at(t);
        RicciScalars {
            a: b.aa.trace(),
            b: b.bb.trace(),
            c: b.cc.trace(),
        }
    }
}

/// `Z_I = (v_J φ_K − v_K φ_J) γ̇` and cyclic permutations, from the three vectors `φ_α γ̇`.
pub fn z_vectors(v: &VerticalVector, phi: &[DVector<f64>; 3]) -> [DVector<f64>; 3] {
    let c = v.components();
    [
        &phi[2] * c.y - &phi[1] * c.z,
        &phi[0] * c.z - &phi[2] * c.x,
        &phi[1] * c.x - &phi[0] * c.y,
    ]
}
