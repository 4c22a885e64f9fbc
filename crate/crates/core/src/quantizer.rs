//! Left and reverse quantization of tabulated symbols on the periodic lattice.
//!
//! Left: `(Pu)(x_i) = (2L)^{-1} Σ_j e^{i x_i ξ_j} p(x_i, ξ_j) û_j`.
//! Reverse: `w_j = (2L/N) Σ_i e^{-i ξ_j x_i} p(x_i, ξ_j) u_i`, then inverse transform.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{PevoError, Result};
use crate::grid::{Grid, StateVector};
use crate::linalg::{matmul, CMat};
use crate::symbols::SymbolGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Reverse,
}

/// Dense realization of an operator acting on sample vectors.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub entries: CMat,
    pub grid: Grid,
    pub label: String,
}

/// JSON sidecar written next to a binary matrix dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSidecar {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    pub h: f64,
    pub label: String,
    pub layout: String,
}

impl OperatorMatrix {
    pub fn new(entries: CMat, grid: &Grid, label: impl Into<String>) -> Result<Self> {
        if entries.nrows() != grid.n() || entries.ncols() != grid.n() {
            return Err(PevoError::GridMismatch);
        }
        Ok(Self { entries, grid: grid.clone(), label: label.into() })
    }

    pub fn identity(grid: &Grid) -> Self {
        Self { entries: CMat::identity(grid.n(), grid.n()), grid: grid.clone(), label: "identity".into() }
    }

    pub fn apply(&self, u: &StateVector) -> Result<StateVector> {
        if u.grid() != &self.grid {
            return Err(PevoError::GridMismatch);
        }
        let v = &self.entries * crate::linalg::CVec::from_column_slice(u.values());
        StateVector::new(&self.grid, v.as_slice().to_vec())
    }

    /// `self · other`.
    pub fn compose(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        if self.grid != other.grid {
            return Err(PevoError::GridMismatch);
        }
        Ok(Self {
            entries: matmul(&self.entries, &other.entries),
            grid: self.grid.clone(),
            label: format!("{}*{}", self.label, other.label),
        })
    }

    /// Flat row-major complex128 (re, im little-endian f64 pairs) plus a JSON sidecar.
    pub fn write_binary(&self, bin_path: &Path, sidecar_path: &Path) -> Result<()> {
        let n = self.grid.n();
        let mut buf = Vec::with_capacity(16 * n * n);
        for i in 0..n {
            for k in 0..n {
                let z = self.entries[(i, k)];
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        std::fs::File::create(bin_path)?.write_all(&buf)?;
        let side = MatrixSidecar {
            n,
            half_width: self.grid.half_width(),
            h: self.grid.h(),
            label: self.label.clone(),
            layout: "row-major complex128 little-endian".into(),
        };
        std::fs::write(sidecar_path, serde_json::to_string_pretty(&side)?)?;
        Ok(())
    }

    /// Inverse of [`OperatorMatrix::write_binary`].
    pub fn read_binary(bin_path: &Path, sidecar_path: &Path) -> Result<Self> {
        let side: MatrixSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path)?)?;
        let grid = Grid::new(side.half_width, side.n, side.h)?;
        let bytes = std::fs::read(bin_path)?;
        let n = side.n;
        if bytes.len() != 16 * n * n {
            return Err(PevoError::InvalidConfig("matrix dump has the wrong size".into()));
        }
        let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let entries = CMat::from_fn(n, n, |i, k| {
            let o = 16 * (i * n + k);
            C64::new(f(o), f(o + 8))
        });
        Ok(Self { entries, grid, label: side.label })
    }
}

fn check(sg: &SymbolGrid, u: &StateVector) -> Result<()> {
    if &sg.grid != u.grid() {
        return Err(PevoError::GridMismatch);
    }
    Ok(())
}

/// Left quantization by the direct double sum.
pub fn apply_left(sg: &SymbolGrid, u: &StateVector) -> Result<StateVector> {
    check(sg, u)?;
    let g = u.grid();
    let (x, xi) = (g.x_nodes(), g.xi_nodes());
    let spec = u.spectrum();
    let s = 1.0 / (2.0 * g.half_width());
    let out = (0..g.n())
        .map(|i| {
            (0..g.n())
                .map(|j| C64::from_polar(1.0, x[i] * xi[j]) * sg.get(i, j) * spec[j])
                .sum::<C64>()
                * s
        })
        .collect();
    StateVector::new(g, out)
}

/// Reverse quantization by the direct double sum.
pub fn apply_reverse(sg: &SymbolGrid, u: &StateVector) -> Result<StateVector> {
    check(sg, u)?;
    let g = u.grid();
    let (x, xi) = (g.x_nodes(), g.xi_nodes());
    let v = u.values();
    let s = g.dx();
    let w: Vec<C64> = (0..g.n())
        .map(|j| {
            (0..g.n())
                .map(|i| C64::from_polar(1.0, -xi[j] * x[i]) * sg.get(i, j) * v[i])
                .sum::<C64>()
                * s
        })
        .collect();
    StateVector::new(g, g.inverse(&w))
}

/// `û_j ↦ m(ξ_j) û_j`.
pub fn fourier_multiplier(m: impl Fn(f64) -> C64, u: &StateVector) -> Result<StateVector> {
    let g = u.grid();
    let mv: Vec<C64> = g.xi_nodes().iter().map(|&xi| m(xi)).collect();
    if mv.iter().any(|z| !z.is_finite()) {
        return Err(PevoError::NonFinite { context: "Fourier multiplier".into() });
    }
    let spec: Vec<C64> = u.spectrum().iter().zip(&mv).map(|(a, b)| a * b).collect();
    StateVector::from_spectrum(g, spec)
}

/// Dense matrix of a quantized symbol, assembled with one FFT per row/column.
pub fn operator_matrix(sg: &SymbolGrid, side: Side) -> OperatorMatrix {
    let g = &sg.grid;
    let n = g.n();
    let (x, xi) = (g.x_nodes(), g.xi_nodes());
    let inv_n = 1.0 / n as f64;
    let mut a = CMat::zeros(n, n);
    match side {
        Side::Left => {
            for i in 0..n {
                let d: Vec<C64> = (0..n).map(|j| sg.get(i, j) * C64::from_polar(1.0, xi[j] * x[i])).collect();
                let row = g.kernel_inv_conj(&d);
                for k in 0..n {
                    a[(i, k)] = row[k] * inv_n;
                }
            }
        }
        Side::Reverse => {
            for i in 0..n {
                let d: Vec<C64> = (0..n).map(|j| sg.get(i, j) * C64::from_polar(1.0, -xi[j] * x[i])).collect();
                let col = g.kernel_inv(&d);
                for k in 0..n {
                    a[(k, i)] = col[k] * inv_n;
                }
            }
        }
    }
    let label = match side {
        Side::Left => "op_left",
        Side::Reverse => "op_reverse",
    };
    OperatorMatrix { entries: a, grid: g.clone(), label: label.into() }
}

/// Dense matrix of the multiplier `m(ξ_j)`.
pub fn multiplier_matrix(grid: &Grid, m: &[C64]) -> OperatorMatrix {
    let n = grid.n();
    let sg = SymbolGrid {
        table: CMat::from_fn(n, n, |_, j| m[j]),
        grid: grid.clone(),
        xi_order: 0.0,
        x_order: 0.0,
    };
    let mut op = operator_matrix(&sg, Side::Left);
    op.label = "multiplier".into();
    op
}

/// Exact symbol of any matrix: `σ(x_i, ξ_j) = e^{-i x_i ξ_j} (A e_{ξ_j})(x_i)`.
///
/// Inverts [`operator_matrix`] with [`Side::Left`] exactly.
pub fn extract_symbol(op: &OperatorMatrix) -> SymbolGrid {
    let g = &op.grid;
    let n = g.n();
    let (x, xi) = (g.x_nodes(), g.xi_nodes());
    let mut t = CMat::zeros(n, n);
    for i in 0..n {
        let row: Vec<C64> = (0..n).map(|k| op.entries[(i, k)]).collect();
        let s = g.kernel_fwd_conj(&row);
        for j in 0..n {
            t[(i, j)] = s[j] * C64::from_polar(1.0, -x[i] * xi[j]);
        }
    }
    SymbolGrid { table: t, grid: g.clone(), xi_order: f64::NAN, x_order: f64::NAN }
}
