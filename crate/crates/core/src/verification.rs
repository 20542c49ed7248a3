//! Independent oracles: dense assembly, generalized eigen-extrema,
//! finite-difference derivatives and fine-step reference trajectories.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::bathymetry::Bathymetry;
use crate::error::{Error, Result};
use crate::models::{Model, ModelState};
use crate::operators::{self, CoercivityNorm, OperatorKind};
use crate::spectral::{Field, Grid, VecField};
use crate::timeloop::{self, Scheme};

/// Largest dense matrix the oracles will build.
pub const DENSE_SIZE_LIMIT: usize = 4096;

/// Operators that can be assembled densely.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenseKind {
    Identity,
    /// The operator as applied by a handle (`I + mu T_b`, `h_b B`, `h_b A`).
    Operator(OperatorKind),
    /// The symmetric form of the operator.
    Weighted(OperatorKind),
    /// Gram matrix of `|v|^2 + mu |div v|^2`.
    X0Gram,
    /// Gram matrix of `|v|_{H^1}^2`.
    H1Gram,
}

/// A matrix acting on flattened vector fields (components back to back).
#[derive(Clone, Debug)]
pub struct DenseOperator {
    pub kind: DenseKind,
    pub matrix: DMatrix<f64>,
}

impl DenseOperator {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, v: &VecField) -> Result<VecField> {
        let flat = v.to_flat();
        if flat.len() != self.size() {
            return Err(Error::GridMismatch);
        }
        let out = &self.matrix * nalgebra::DVector::from_vec(flat);
        VecField::from_flat(v.grid(), out.as_slice())
    }

    /// `max |M - M^T|`
    pub fn asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }
}

/// Assembles the matrix of a linear map on vector fields, column by column.
pub fn assemble_with(grid: &Grid, limit: usize, apply: impl Fn(&VecField) -> VecField) -> Result<DMatrix<f64>> {
    let size = grid.dim() * grid.len();
    if size > limit {
        return Err(Error::SizeLimit { size, limit });
    }
    let mut m = DMatrix::zeros(size, size);
    let mut basis = vec![0.0; size];
    for j in 0..size {
        basis[j] = 1.0;
        let e = VecField::from_flat(grid, &basis)?;
        basis[j] = 0.0;
        let col = apply(&e).to_flat();
        m.column_mut(j).copy_from_slice(&col);
    }
    Ok(m)
}

pub fn assemble_dense(kind: DenseKind, mu: f64, bath: &Bathymetry) -> Result<DenseOperator> {
    let grid = bath.grid();
    let matrix = match kind {
        DenseKind::Identity => {
            let size = grid.dim() * grid.len();
            if size > DENSE_SIZE_LIMIT {
                return Err(Error::SizeLimit { size, limit: DENSE_SIZE_LIMIT });
            }
            DMatrix::identity(size, size)
        }
        DenseKind::Operator(op) => match op {
            OperatorKind::IPlusMuTb => assemble_with(grid, DENSE_SIZE_LIMIT, |v| {
                v.axpy(mu, &operators::apply_tb(v, bath))
            })?,
            _ => assemble_with(grid, DENSE_SIZE_LIMIT, |v| operators::apply_weighted(op, v, mu, bath))?,
        },
        DenseKind::Weighted(op) => {
            assemble_with(grid, DENSE_SIZE_LIMIT, |v| operators::apply_weighted(op, v, mu, bath))?
        }
        DenseKind::X0Gram => assemble_with(grid, DENSE_SIZE_LIMIT, |v| {
            operators::gram_apply(CoercivityNorm::X0, v, mu)
        })?,
        DenseKind::H1Gram => assemble_with(grid, DENSE_SIZE_LIMIT, |v| {
            operators::gram_apply(CoercivityNorm::H1, v, mu)
        })?,
    };
    Ok(DenseOperator { kind, matrix })
}

/// Extreme values of `(Mv, v) / (Gv, v)` for symmetric `M` and SPD `G`.
pub fn generalized_extrema(m: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<(f64, f64)> {
    if m.shape() != g.shape() || !m.is_square() {
        return Err(Error::InvalidArgument("matrix shapes differ".into()));
    }
    let g_sym = (g + g.transpose()) * 0.5;
    let chol = Cholesky::new(g_sym).ok_or(Error::NotSpd)?;
    let l = chol.l();
    let m_sym = (m + m.transpose()) * 0.5;
    // whitened matrix L^{-1} M L^{-T}
    let x = l.solve_lower_triangular(&m_sym).ok_or(Error::NotSpd)?;
    let c = l.solve_lower_triangular(&x.transpose()).ok_or(Error::NotSpd)?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let lo = eig.eigenvalues.min();
    let hi = eig.eigenvalues.max();
    Ok((lo, hi))
}

pub fn eig_extrema(m: &DenseOperator, g: &DenseOperator) -> Result<(f64, f64)> {
    generalized_extrema(&m.matrix, &g.matrix)
}

/// Fourth-order centered finite difference of order 1 or 2 along `axis`,
/// with the transverse derivative scaled by `gamma` to match `grad_gamma`.
pub fn fd_partial(f: &Field, axis: usize, order: u32) -> Result<Field> {
    let grid = f.grid();
    if axis >= grid.dim() {
        return Err(Error::InvalidArgument(format!("axis {axis} out of range")));
    }
    let n = grid.n();
    let h = grid.spacing(axis);
    let scale = if axis == 1 { grid.gamma() } else { 1.0 };
    let (weights, denom): ([f64; 5], f64) = match order {
        1 => ([1.0, -8.0, 0.0, 8.0, -1.0], 12.0 * h),
        2 => ([-1.0, 16.0, -30.0, 16.0, -1.0], 12.0 * h * h),
        _ => return Err(Error::InvalidArgument(format!("finite differences of order {order} are not provided"))),
    };
    let factor = scale.powi(order as i32) / denom;
    let vals = f.values();
    let out = (0..grid.len())
        .map(|idx| {
            let (ix, iy) = (idx % n, idx / n);
            weights
                .iter()
                .enumerate()
                .map(|(j, w)| {
                    let off = (j as isize - 2).rem_euclid(n as isize) as usize;
                    let nb = if axis == 0 {
                        iy * n + (ix + off) % n
                    } else {
                        ((iy + off) % n) * n + ix
                    };
                    w * vals[nb]
                })
                .sum::<f64>()
                * factor
        })
        .collect();
    Field::from_vec(grid, out)
}

/// Fourth-order finite difference along x.
pub fn fd_derivative(f: &Field, order: u32) -> Result<Field> {
    fd_partial(f, 0, order)
}

/// Fine-step RK4 integration returning the states at `0, dt_out, 2 dt_out, ...` up to `t_end`.
pub fn reference_trajectory(
    model: &Model,
    initial: &ModelState,
    t_end: f64,
    dt_fine: f64,
    dt_out: f64,
) -> Result<Vec<ModelState>> {
    let stride = (dt_out / dt_fine).round().max(1.0) as usize;
    let steps = (t_end / dt_fine).round() as usize;
    let mut state = initial.clone();
    let mut out = vec![state.clone()];
    for i in 1..=steps {
        state = timeloop::step(model, &state, dt_fine, Scheme::Rk4, 0.0)?;
        if i % stride == 0 {
            out.push(state.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bathymetry::Profile;
    use crate::spectral::grad_gamma;
    use std::f64::consts::PI;

    #[test]
    fn identity_and_sizes() {
        let g = Grid::line(16, 1.0).unwrap();
        let flat = Bathymetry::flat(&g);
        let id = assemble_dense(DenseKind::Identity, 0.0, &flat).unwrap();
        assert_eq!(id.matrix, DMatrix::identity(16, 16));
        let (lo, hi) = eig_extrema(&id, &id).unwrap();
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 1.0).abs() < 1e-14);

        let big = Grid::square(64, 1.0, 1.0).unwrap();
        let flat = Bathymetry::flat(&big);
        assert!(matches!(
            assemble_dense(DenseKind::Identity, 0.0, &flat),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn flat_operator_is_circulant_with_expected_symbol() {
        let n = 16;
        let g = Grid::line(n, 2.0 * PI).unwrap();
        let flat = Bathymetry::flat(&g);
        let mu = 0.2;
        let m = assemble_dense(DenseKind::Operator(OperatorKind::IPlusMuTb), mu, &flat).unwrap();
        // circulant: every row is a shift of the first
        for i in 0..n {
            for j in 0..n {
                assert!((m.matrix[(i, j)] - m.matrix[(0, (j + n - i) % n)]).abs() < 1e-13);
            }
        }
        // eigenvalues of a symmetric circulant are the DFT of its first row
        for k in 0..n {
            let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
            let lam: f64 = (0..n)
                .map(|j| m.matrix[(0, j)] * (2.0 * PI * (k * j) as f64 / n as f64).cos())
                .sum();
            let kk = if k == n / 2 { 0.0 } else { kk };
            assert!((lam - (1.0 + mu * kk * kk / 3.0)).abs() < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn weighted_matrices_are_symmetric_and_match_matrix_free() {
        let g = Grid::line(32, 20.0).unwrap();
        let bath = Bathymetry::build(&Profile::GaussianBump { center: None, width: 3.0, height: 1.0 }, 0.5, &g)
            .unwrap();
        for kind in [OperatorKind::IPlusMuTb, OperatorKind::HbA, OperatorKind::HbB] {
            let m = assemble_dense(DenseKind::Weighted(kind), 0.1, &bath).unwrap();
            assert!(m.asymmetry() <= 1e-12, "{kind}: {}", m.asymmetry());
            let v = VecField::from_components(vec![Field::from_fn(&g, |x, _| (x * 0.7).sin() + 0.1 * x.cos())])
                .unwrap();
            let direct = operators::apply_weighted(kind, &v, 0.1, &bath);
            assert!((&m.apply(&v).unwrap() - &direct).max_abs() < 1e-12);
        }
    }

    #[test]
    fn not_spd_gram_is_rejected() {
        let m = DMatrix::identity(3, 3);
        let g = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0, 1.0]));
        assert!(matches!(generalized_extrema(&m, &g), Err(Error::NotSpd)));
    }

    #[test]
    fn finite_differences() {
        let g = Grid::line(64, 2.0 * PI).unwrap();
        let c = Field::constant(&g, 2.0);
        assert!(fd_derivative(&c, 1).unwrap().max_abs() < 1e-12);
        let mut errs = Vec::new();
        for n in [32, 64, 128] {
            let g = Grid::line(n, 2.0 * PI).unwrap();
            let f = Field::from_fn(&g, |x, _| (2.0 * x).sin());
            let d = fd_derivative(&f, 1).unwrap();
            let exact = Field::from_fn(&g, |x, _| 2.0 * (2.0 * x).cos());
            errs.push((&d - &exact).max_abs());
        }
        for w in errs.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!(rate > 3.8, "rate {rate}");
        }
        // spectral and FD agree at truncation order
        let g = Grid::square(32, 2.0 * PI, 0.5).unwrap();
        let f = Field::from_fn(&g, |x, y| (x + 2.0 * y).cos());
        let spec = grad_gamma(&f);
        let fd = fd_partial(&f, 1, 1).unwrap();
        let h = g.spacing(1);
        assert!((&fd - spec.component(1)).max_abs() < 0.5 * 32.0 * h.powi(4));
        assert!(fd_derivative(&f, 3).is_err());
    }
}
