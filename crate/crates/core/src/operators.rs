//! The bathymetry-dependent elliptic operators and their inverses.
//!
//! Three operators act on velocity fields:
//!
//! ```text
//! T_b v = -(1/(3 h_b)) grad(h_b^3 div v)
//!         + (beta/(2 h_b)) [grad(h_b^2 grad b . v) - h_b^2 grad b div v]
//!         + beta^2 grad b (grad b . v)
//! A v   = v - mu grad((1/h_b) div(h_b v))
//! B v   = v + mu T_b v - mu grad((1/h_b) div(h_b v)) - mu (1/h_b) perp_grad(perp_div v)
//! ```
//!
//! Multiplying by `h_b` makes each of them symmetric for the grid inner product.
//! Products with the (fixed) coefficient fields are collocated pointwise, which
//! keeps that symmetry exact at the discrete level; the spectral gradient and
//! divergence are exact negative adjoints of each other.

use std::fmt;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bathymetry::Bathymetry;
use crate::error::{Error, Result};
use crate::spectral::{div_gamma, grad_gamma, perp_div, perp_grad, sobolev_norm_vec, xs_norm, Field, Grid, VecField};
use crate::verification;

/// Relative residual targeted by the iterative solver.
pub const CG_TOLERANCE: f64 = 1e-12;
/// Residual above which an unconverged iterative solve is reported as divergent.
pub const CG_ACCEPT: f64 = 1e-10;
pub const CG_MAX_ITERATIONS: usize = 500;
/// Largest system (`d * n^d` unknowns) factorized densely by default.
pub const DENSE_LIMIT: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// `I + mu T_b`; the symmetric form is `h_b (I + mu T_b)`.
    IPlusMuTb,
    /// `h_b B`
    HbB,
    /// `h_b A`
    HbA,
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperatorKind::IPlusMuTb => "I+muTb",
            OperatorKind::HbB => "hbB",
            OperatorKind::HbA => "hbA",
        })
    }
}

/// `h_b T_b v`.
fn tb_weighted(v: &VecField, bath: &Bathymetry) -> VecField {
    let h = bath.depth();
    let beta = bath.beta();
    let d = div_gamma(v);
    let h3d = d.zip_with(h, |d, h| h * h * h * d);
    let mut out = grad_gamma(&h3d).scale(-1.0 / 3.0);
    if beta != 0.0 {
        let gb = bath.grad_bottom();
        let s = gb.dot(v);
        let h2 = h.mul(h);
        let first = grad_gamma(&s.mul(&h2));
        let second = gb.mul_scalar(&h2.mul(&d));
        out = out.axpy(0.5 * beta, &(&first - &second));
        out = out.axpy(beta * beta, &gb.mul_scalar(&h.mul(&s)));
    }
    out
}

/// `-h_b grad((1/h_b) div(h_b v))`.
fn a_weighted(v: &VecField, bath: &Bathymetry) -> VecField {
    let h = bath.depth();
    let inner = div_gamma(&v.mul_scalar(h)).zip_with(h, |x, h| x / h);
    grad_gamma(&inner).mul_scalar(h).scale(-1.0)
}

/// `-perp_grad(perp_div v)`; zero in one dimension.
fn perp_weighted(v: &VecField) -> VecField {
    perp_grad(&perp_div(v)).scale(-1.0)
}

fn divide_by_depth(v: &VecField, bath: &Bathymetry) -> VecField {
    let h = bath.depth();
    v.map_components(|c| c.zip_with(h, |x, h| x / h))
}

/// `T_b v`.
pub fn apply_tb(v: &VecField, bath: &Bathymetry) -> VecField {
    divide_by_depth(&tb_weighted(v, bath), bath)
}

/// `A v = v - mu grad((1/h_b) div(h_b v))`.
pub fn apply_a(v: &VecField, mu: f64, bath: &Bathymetry) -> VecField {
    v.axpy(mu, &divide_by_depth(&a_weighted(v, bath), bath))
}

/// `B v`.
pub fn apply_b(v: &VecField, mu: f64, bath: &Bathymetry) -> VecField {
    v.axpy(mu, &divide_by_depth(&b_extra_weighted(v, bath), bath))
}

/// `h_b (B - I) / mu`.
fn b_extra_weighted(v: &VecField, bath: &Bathymetry) -> VecField {
    let sum = &tb_weighted(v, bath) + &a_weighted(v, bath);
    &sum + &perp_weighted(v)
}

/// The symmetric form of `kind`: `h_b (I + mu T_b)`, `h_b B` or `h_b A`.
pub fn apply_weighted(kind: OperatorKind, v: &VecField, mu: f64, bath: &Bathymetry) -> VecField {
    let base = v.mul_scalar(bath.depth());
    if mu == 0.0 {
        return base;
    }
    let extra = match kind {
        OperatorKind::IPlusMuTb => tb_weighted(v, bath),
        OperatorKind::HbA => a_weighted(v, bath),
        OperatorKind::HbB => b_extra_weighted(v, bath),
    };
    base.axpy(mu, &extra)
}

/// Which inversion strategy a handle uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStrategy {
    /// Exact Fourier inverse for flat bottoms, dense below [`DENSE_LIMIT`], otherwise iterative.
    Auto,
    Spectral,
    Dense,
    Iterative,
}

enum Solver {
    /// `mu = 0`: the operator is multiplication by 1 or by `h_b`.
    Pointwise,
    Spectral(Symbol),
    Dense(Cholesky<f64, Dyn>),
    Iterative(Symbol),
}

/// The flat-bottom symbol `a I + b xi xi^T + c eta eta^T` with
/// `eta = (-gamma k_y, k_x)`, inverted mode by mode.
#[derive(Clone, Copy, Debug)]
struct Symbol {
    a: f64,
    b: f64,
    c: f64,
}

impl Symbol {
    /// Symbol of the weighted form over a flat bottom of depth `depth`.
    fn flat(kind: OperatorKind, mu: f64, depth: f64) -> Self {
        let c3 = depth * depth * depth;
        match kind {
            OperatorKind::IPlusMuTb => Symbol { a: depth, b: mu * c3 / 3.0, c: 0.0 },
            OperatorKind::HbA => Symbol { a: depth, b: mu * depth, c: 0.0 },
            OperatorKind::HbB => Symbol { a: depth, b: mu * (c3 / 3.0 + depth), c: mu },
        }
    }

    fn solve(&self, rhs: &VecField) -> VecField {
        let grid = rhs.grid();
        let specs: Vec<Vec<Complex64>> = rhs.components().iter().map(|c| grid.forward(c.values())).collect();
        let mut out = specs.clone();
        if grid.dim() == 1 {
            for (i, kx, _) in grid.odd_symbols() {
                out[0][i] = specs[0][i] / (self.a + self.b * kx * kx);
            }
        } else {
            for (i, kx, ky) in grid.odd_symbols() {
                let k2 = kx * kx + ky * ky;
                let (u, w) = (specs[0][i], specs[1][i]);
                if k2 == 0.0 {
                    out[0][i] = u / self.a;
                    out[1][i] = w / self.a;
                    continue;
                }
                // split into the xi and eta directions, which diagonalize the symbol
                let along = (u * kx + w * ky) / k2;
                let across = (-u * ky + w * kx) / k2;
                let along = along / (self.a + self.b * k2);
                let across = across / (self.a + self.c * k2);
                out[0][i] = along * kx - across * ky;
                out[1][i] = along * ky + across * kx;
            }
        }
        let comps = out
            .into_iter()
            .map(|s| Field::from_vec(grid, grid.inverse(s)).expect("length preserved"))
            .collect();
        VecField::from_components(comps).expect("grid preserved")
    }
}

/// Outcome of one iterative solve.
#[derive(Clone, Copy, Debug)]
pub struct CgOutcome {
    pub iterations: usize,
    pub residual: f64,
}

/// Preconditioned conjugate gradients for the symmetric positive definite `apply`.
pub fn conjugate_gradient(
    apply: impl Fn(&VecField) -> VecField,
    precondition: impl Fn(&VecField) -> VecField,
    rhs: &VecField,
    tol: f64,
    max_iterations: usize,
) -> (VecField, CgOutcome) {
    let rhs_norm = rhs.norm_l2();
    let mut x = VecField::zeros(rhs.grid());
    if rhs_norm == 0.0 {
        return (x, CgOutcome { iterations: 0, residual: 0.0 });
    }
    let mut r = rhs.clone();
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = r.inner(&z);
    let mut residual = 1.0;
    for it in 0..max_iterations {
        let ap = apply(&p);
        let alpha = rz / p.inner(&ap);
        x = x.axpy(alpha, &p);
        r = r.axpy(-alpha, &ap);
        residual = r.norm_l2() / rhs_norm;
        if residual <= tol {
            return (x, CgOutcome { iterations: it + 1, residual });
        }
        z = precondition(&r);
        let rz_next = r.inner(&z);
        p = z.axpy(rz_next / rz, &p);
        rz = rz_next;
    }
    (x, CgOutcome { iterations: max_iterations, residual })
}

/// A fixed elliptic operator with its inverse prepared once.
pub struct OperatorHandle {
    kind: OperatorKind,
    mu: f64,
    bath: Bathymetry,
    solver: Solver,
}

impl fmt::Debug for OperatorHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorHandle")
            .field("kind", &self.kind)
            .field("mu", &self.mu)
            .field("strategy", &self.strategy_name())
            .finish()
    }
}

impl OperatorHandle {
    pub fn new(kind: OperatorKind, mu: f64, bath: &Bathymetry) -> Result<Self> {
        Self::with_strategy(kind, mu, bath, SolverStrategy::Auto)
    }

    pub fn with_strategy(kind: OperatorKind, mu: f64, bath: &Bathymetry, strategy: SolverStrategy) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::InvalidArgument(format!("mu must be >= 0, got {mu}")));
        }
        let grid = bath.grid();
        let size = grid.dim() * grid.len();
        let solver = match strategy {
            _ if mu == 0.0 => Solver::Pointwise,
            SolverStrategy::Auto if bath.is_flat() => Solver::Spectral(Symbol::flat(kind, mu, 1.0)),
            SolverStrategy::Auto if size <= DENSE_LIMIT => Self::factorize(kind, mu, bath)?,
            SolverStrategy::Auto | SolverStrategy::Iterative => {
                Solver::Iterative(Symbol::flat(kind, mu, bath.depth().mean()))
            }
            SolverStrategy::Spectral => {
                if !bath.is_flat() {
                    return Err(Error::InvalidArgument(
                        "the Fourier inverse is exact only over a flat bottom".into(),
                    ));
                }
                Solver::Spectral(Symbol::flat(kind, mu, 1.0))
            }
            SolverStrategy::Dense => Self::factorize(kind, mu, bath)?,
        };
        Ok(Self {
            kind,
            mu,
            bath: bath.clone(),
            solver,
        })
    }

    fn factorize(kind: OperatorKind, mu: f64, bath: &Bathymetry) -> Result<Solver> {
        let grid = bath.grid();
        let m = verification::assemble_with(grid, verification::DENSE_SIZE_LIMIT, |v| {
            apply_weighted(kind, v, mu, bath)
        })?;
        let sym = (&m + m.transpose()) * 0.5;
        Cholesky::new(sym).map(Solver::Dense).ok_or(Error::NotSpd)
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn bathymetry(&self) -> &Bathymetry {
        &self.bath
    }

    pub fn grid(&self) -> &Grid {
        self.bath.grid()
    }

    pub fn strategy_name(&self) -> &'static str {
        match self.solver {
            Solver::Pointwise => "pointwise",
            Solver::Spectral(_) => "spectral",
            Solver::Dense(_) => "dense",
            Solver::Iterative(_) => "iterative",
        }
    }

    /// The operator itself: `(I + mu T_b) v`, `h_b B v` or `h_b A v`.
    pub fn apply(&self, v: &VecField) -> VecField {
        match self.kind {
            OperatorKind::IPlusMuTb => v.axpy(self.mu, &apply_tb(v, &self.bath)),
            _ => self.apply_weighted(v),
        }
    }

    /// The symmetric positive definite form.
    pub fn apply_weighted(&self, v: &VecField) -> VecField {
        apply_weighted(self.kind, v, self.mu, &self.bath)
    }

    /// Inverse of [`Self::apply`].
    pub fn solve(&self, rhs: &VecField) -> Result<VecField> {
        if rhs.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        if !rhs.is_finite() {
            return Err(Error::Corrupted("elliptic right-hand side"));
        }
        if self.kind != OperatorKind::IPlusMuTb {
            return self.solve_weighted(rhs);
        }
        match self.solver {
            Solver::Pointwise => Ok(rhs.clone()),
            Solver::Spectral(sym) => Ok(sym.solve(rhs)),
            _ => self.solve_weighted(&rhs.mul_scalar(self.bath.depth())),
        }
    }

    /// Inverse of [`Self::apply_weighted`].
    pub fn solve_weighted(&self, rhs: &VecField) -> Result<VecField> {
        match &self.solver {
            Solver::Pointwise => Ok(divide_by_depth(rhs, &self.bath)),
            Solver::Spectral(sym) => Ok(sym.solve(rhs)),
            Solver::Dense(chol) => {
                let b = DVector::from_vec(rhs.to_flat());
                let x = chol.solve(&b);
                VecField::from_flat(rhs.grid(), x.as_slice())
            }
            Solver::Iterative(sym) => {
                let (x, outcome) =
                    conjugate_gradient(|v| self.apply_weighted(v), |r| sym.solve(r), rhs, CG_TOLERANCE, CG_MAX_ITERATIONS);
                if outcome.residual > CG_ACCEPT || !outcome.residual.is_finite() {
                    return Err(Error::SolverDivergence {
                        iterations: outcome.iterations,
                        residual: outcome.residual,
                    });
                }
                Ok(x)
            }
        }
    }
}

fn require_kind(handle: &OperatorHandle, kind: OperatorKind) -> Result<()> {
    if handle.kind() != kind {
        return Err(Error::InvalidArgument(format!(
            "handle is for {}, expected {kind}",
            handle.kind()
        )));
    }
    Ok(())
}

/// Solves `(I + mu T_b) v = rhs`.
pub fn solve_i_plus_mu_tb(rhs: &VecField, handle: &OperatorHandle) -> Result<VecField> {
    require_kind(handle, OperatorKind::IPlusMuTb)?;
    handle.solve(rhs)
}

/// Solves `h_b B v = rhs`.
pub fn solve_hb_b(rhs: &VecField, handle: &OperatorHandle) -> Result<VecField> {
    require_kind(handle, OperatorKind::HbB)?;
    handle.solve(rhs)
}

/// Solves `h_b A v = rhs`.
pub fn solve_hb_a(rhs: &VecField, handle: &OperatorHandle) -> Result<VecField> {
    require_kind(handle, OperatorKind::HbA)?;
    handle.solve(rhs)
}

/// Norm against which a weighted form is shown to be coercive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoercivityNorm {
    /// `|v|^2 + mu |div v|^2`
    X0,
    /// `|v|_{H^1}^2`
    H1,
}

impl CoercivityNorm {
    pub fn for_kind(kind: OperatorKind) -> Self {
        match kind {
            OperatorKind::HbB => CoercivityNorm::H1,
            _ => CoercivityNorm::X0,
        }
    }

    pub fn norm_sq(&self, v: &VecField, mu: f64) -> f64 {
        match self {
            CoercivityNorm::X0 => xs_norm(v, 0.0, mu).powi(2),
            CoercivityNorm::H1 => sobolev_norm_vec(v, 1.0).powi(2),
        }
    }
}

/// Symmetry, coercivity and inversion certificate for one handle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoercivityReport {
    pub kind: OperatorKind,
    pub norm: CoercivityNorm,
    pub dim: usize,
    pub n: usize,
    pub mu: f64,
    pub beta: f64,
    pub h_min: f64,
    pub solver: String,
    pub trials: usize,
    /// Extreme Rayleigh quotients over random fields.
    pub sampled_min: f64,
    pub sampled_max: f64,
    /// Extreme generalized eigenvalues, when the grid is small enough for a dense solve.
    pub dense_min: Option<f64>,
    pub dense_max: Option<f64>,
    /// `max |(Mv, w) - (v, Mw)| / (|v| |w|)` over random pairs.
    pub symmetry_residual: f64,
    /// `max |apply(solve(r)) - r| / |r|` over random right-hand sides.
    pub inverse_residual: f64,
}

impl CoercivityReport {
    /// Smallest available quotient (dense when present).
    pub fn min_quotient(&self) -> f64 {
        self.dense_min.unwrap_or(self.sampled_min).min(self.sampled_min)
    }

    pub fn is_coercive(&self) -> bool {
        self.min_quotient() > 0.0
    }
}

/// Random field with components uniform in `[-1, 1)`.
pub fn random_vec_field(grid: &Grid, rng: &mut impl Rng) -> VecField {
    let flat: Vec<f64> = (0..grid.len() * grid.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    VecField::from_flat(grid, &flat).expect("length matches grid")
}

/// Grids small enough for the dense eigen-oracle.
pub fn dense_audit_feasible(grid: &Grid) -> bool {
    match grid.dim() {
        1 => grid.n() <= 64,
        _ => grid.n() <= 16,
    }
}

pub fn coercivity_report(handle: &OperatorHandle, trials: usize, seed: u64) -> Result<CoercivityReport> {
    let grid = handle.grid().clone();
    let mu = handle.mu();
    let norm = CoercivityNorm::for_kind(handle.kind());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampled_min = f64::INFINITY;
    let mut sampled_max = f64::NEG_INFINITY;
    let mut symmetry_residual = 0.0_f64;
    let mut inverse_residual = 0.0_f64;
    for _ in 0..trials.max(1) {
        let v = random_vec_field(&grid, &mut rng);
        let w = random_vec_field(&grid, &mut rng);
        let mv = handle.apply_weighted(&v);
        let mw = handle.apply_weighted(&w);
        let q = mv.inner(&v) / norm.norm_sq(&v, mu);
        sampled_min = sampled_min.min(q);
        sampled_max = sampled_max.max(q);
        let asym = (mv.inner(&w) - v.inner(&mw)).abs() / (v.norm_l2() * w.norm_l2());
        symmetry_residual = symmetry_residual.max(asym);
        let x = handle.solve(&w)?;
        let back = handle.apply(&x);
        inverse_residual = inverse_residual.max((&back - &w).norm_l2() / w.norm_l2());
    }
    let (dense_min, dense_max) = if dense_audit_feasible(&grid) {
        let m = verification::assemble_with(&grid, verification::DENSE_SIZE_LIMIT, |v| handle.apply_weighted(v))?;
        let g = verification::assemble_with(&grid, verification::DENSE_SIZE_LIMIT, |v| gram_apply(norm, v, mu))?;
        let (lo, hi) = verification::generalized_extrema(&m, &g)?;
        (Some(lo), Some(hi))
    } else {
        (None, None)
    };
    let report = CoercivityReport {
        kind: handle.kind(),
        norm,
        dim: grid.dim(),
        n: grid.n(),
        mu,
        beta: handle.bathymetry().beta(),
        h_min: handle.bathymetry().h_min(),
        solver: handle.strategy_name().to_string(),
        trials,
        sampled_min,
        sampled_max,
        dense_min,
        dense_max,
        symmetry_residual,
        inverse_residual,
    };
    log::info!(
        target: "peregrine::operators",
        "coercivity {} vs {:?}: min {:.6e} max {:.6e}",
        report.kind,
        report.norm,
        report.min_quotient(),
        report.dense_max.unwrap_or(report.sampled_max)
    );
    Ok(report)
}

/// Gram operator of the coercivity norm: `G` with `(Gv, v) = |v|^2`.
pub(crate) fn gram_apply(norm: CoercivityNorm, v: &VecField, mu: f64) -> VecField {
    match norm {
        CoercivityNorm::X0 => v.axpy(-mu, &grad_gamma(&div_gamma(v))),
        CoercivityNorm::H1 => v.map_components(|c| crate::spectral::lambda_s(c, 2.0)),
    }
}

/// Measures `sup sqrt(mu) |(h_b A)^{-1} grad g|_{X^N} / |g|_{H^N}` over random smooth `g`.
pub fn gradient_control_constant(handle: &OperatorHandle, trials: usize, order: f64, seed: u64) -> Result<f64> {
    require_kind(handle, OperatorKind::HbA)?;
    let grid = handle.grid();
    let mu = handle.mu();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..trials.max(1) {
        let raw = Field::from_vec(grid, (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
        // smooth the sample so that high norms are meaningful
        let g = crate::spectral::lambda_s(&raw, -(order + 2.0));
        let v = handle.solve(&grad_gamma(&g))?;
        let ratio = mu.sqrt() * xs_norm(&v, order, mu) / crate::spectral::sobolev_norm(&g, order);
        worst = worst.max(ratio);
    }
    log::info!(target: "peregrine::operators", "gradient control constant at N = {order}: {worst:.4e}");
    Ok(worst)
}

/// Builds a [`DMatrix`] from one handle's symmetric form; exposed for oracles.
pub fn dense_weighted(handle: &OperatorHandle) -> Result<DMatrix<f64>> {
    verification::assemble_with(handle.grid(), verification::DENSE_SIZE_LIMIT, |v| handle.apply_weighted(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bathymetry::Profile;
    use std::f64::consts::PI;

    fn bump_1d(n: usize, beta: f64) -> Bathymetry {
        let g = Grid::line(n, 20.0).unwrap();
        Bathymetry::build(&Profile::GaussianBump { center: None, width: 3.0, height: 1.0 }, beta, &g).unwrap()
    }

    fn bump_2d(n: usize, beta: f64) -> Bathymetry {
        let g = Grid::new(2, n, &[12.0, 12.0], 0.8).unwrap();
        Bathymetry::build(&Profile::GaussianBump { center: None, width: 2.5, height: 1.0 }, beta, &g).unwrap()
    }

    fn mode(g: &Grid, k: f64) -> VecField {
        VecField::from_components(vec![Field::from_fn(g, |x, _| (k * x).sin())]).unwrap()
    }

    #[test]
    fn flat_tb_is_third_of_minus_grad_div() {
        let g = Grid::line(32, 2.0 * PI).unwrap();
        let flat = Bathymetry::flat(&g);
        let v = mode(&g, 3.0);
        let t = apply_tb(&v, &flat);
        assert!((&t - &v.scale(3.0)).max_abs() < 1e-12);
        let c = VecField::from_components(vec![Field::constant(&g, 1.7)]).unwrap();
        assert!(apply_tb(&c, &flat).max_abs() < 1e-14);
    }

    #[test]
    fn flat_symbols_of_a_and_b() {
        let g = Grid::line(32, 2.0 * PI).unwrap();
        let flat = Bathymetry::flat(&g);
        let (mu, k) = (0.3, 2.0);
        let v = mode(&g, k);
        let a = apply_a(&v, mu, &flat);
        assert!((&a - &v.scale(1.0 + mu * k * k)).max_abs() < 1e-12);
        let b = apply_b(&v, mu, &flat);
        assert!((&b - &v.scale(1.0 + mu * k * k / 3.0 + mu * k * k)).max_abs() < 1e-12);
        let bump = bump_1d(32, 0.5);
        let r = random_vec_field(bump.grid(), &mut ChaCha8Rng::seed_from_u64(1));
        assert!((&apply_a(&r, 0.0, &bump) - &r).max_abs() == 0.0);
        assert!((&apply_b(&r, 0.0, &bump) - &r).max_abs() == 0.0);
    }

    #[test]
    fn weighted_forms_are_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for bath in [bump_1d(64, 0.7), bump_2d(16, 0.5)] {
            for kind in [OperatorKind::IPlusMuTb, OperatorKind::HbA, OperatorKind::HbB] {
                for _ in 0..5 {
                    let v = random_vec_field(bath.grid(), &mut rng);
                    let w = random_vec_field(bath.grid(), &mut rng);
                    let mv = apply_weighted(kind, &v, 0.2, &bath);
                    let mw = apply_weighted(kind, &w, 0.2, &bath);
                    let res = (mv.inner(&w) - v.inner(&mw)).abs() / (v.norm_l2() * w.norm_l2());
                    assert!(res < 1e-12, "{kind}: {res}");
                }
            }
        }
    }

    #[test]
    fn flat_inverse_divides_by_symbol() {
        let g = Grid::line(32, 2.0 * PI).unwrap();
        let flat = Bathymetry::flat(&g);
        let (mu, k) = (0.2, 4.0);
        let v = mode(&g, k);
        let h = OperatorHandle::new(OperatorKind::IPlusMuTb, mu, &flat).unwrap();
        assert_eq!(h.strategy_name(), "spectral");
        let x = solve_i_plus_mu_tb(&v, &h).unwrap();
        assert!((&x - &v.scale(1.0 / (1.0 + mu * k * k / 3.0))).max_abs() < 1e-13);
        let h = OperatorHandle::new(OperatorKind::HbB, mu, &flat).unwrap();
        let x = solve_hb_b(&v, &h).unwrap();
        assert!((&x - &v.scale(1.0 / (1.0 + mu * k * k / 3.0 + mu * k * k))).max_abs() < 1e-13);
        assert!(solve_hb_a(&v, &h).is_err());
    }

    #[test]
    fn zero_mu_inverses() {
        let bath = bump_1d(32, 0.5);
        let r = random_vec_field(bath.grid(), &mut ChaCha8Rng::seed_from_u64(4));
        let h = OperatorHandle::new(OperatorKind::IPlusMuTb, 0.0, &bath).unwrap();
        assert!((&h.solve(&r).unwrap() - &r).max_abs() == 0.0);
        for kind in [OperatorKind::HbA, OperatorKind::HbB] {
            let h = OperatorHandle::new(kind, 0.0, &bath).unwrap();
            let x = h.solve(&r).unwrap();
            let expect = divide_by_depth(&r, &bath);
            assert!((&x - &expect).max_abs() < 1e-15);
        }
    }

    #[test]
    fn all_strategies_invert() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for bath in [bump_1d(64, 0.8), bump_2d(16, 0.5)] {
            for kind in [OperatorKind::IPlusMuTb, OperatorKind::HbA, OperatorKind::HbB] {
                let dense = OperatorHandle::with_strategy(kind, 0.1, &bath, SolverStrategy::Dense).unwrap();
                let cg = OperatorHandle::with_strategy(kind, 0.1, &bath, SolverStrategy::Iterative).unwrap();
                let r = random_vec_field(bath.grid(), &mut rng);
                let xd = dense.solve(&r).unwrap();
                let xc = cg.solve(&r).unwrap();
                let scale = r.norm_l2();
                assert!((&dense.apply(&xd) - &r).norm_l2() / scale < 1e-10, "{kind} dense");
                assert!((&cg.apply(&xc) - &r).norm_l2() / scale < 1e-9, "{kind} cg");
                assert!((&xd - &xc).norm_l2() / xd.norm_l2() < 1e-9, "{kind} agree");
            }
        }
    }

    #[test]
    fn spectral_strategy_requires_flat_bottom() {
        let bath = bump_1d(32, 0.5);
        assert!(OperatorHandle::with_strategy(OperatorKind::HbA, 0.1, &bath, SolverStrategy::Spectral).is_err());
    }

    #[test]
    fn inverse_of_weighted_gradient_is_curl_free() {
        let bath = bump_2d(16, 0.5);
        let h = OperatorHandle::new(OperatorKind::HbA, 0.1, &bath).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let f = Field::from_vec(bath.grid(), (0..bath.grid().len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap();
        let rhs = grad_gamma(&f).mul_scalar(bath.depth());
        let v = h.solve(&rhs).unwrap();
        assert!(perp_div(&v).max_abs() <= 1e-10 * v.max_abs().max(1.0));
    }

    #[test]
    fn coercivity_on_flat_bottom_matches_symbols() {
        let g = Grid::line(32, 2.0 * PI).unwrap();
        let flat = Bathymetry::flat(&g);
        let h = OperatorHandle::new(OperatorKind::IPlusMuTb, 0.0, &flat).unwrap();
        let rep = coercivity_report(&h, 5, 0).unwrap();
        assert!((rep.dense_min.unwrap() - 1.0).abs() < 1e-12);
        assert!((rep.dense_max.unwrap() - 1.0).abs() < 1e-12);

        // quotient per mode is (1 + mu k^2/3) / (1 + mu k^2); extremes at k = 0 and k = 15
        let mu = 0.1;
        let h = OperatorHandle::new(OperatorKind::IPlusMuTb, mu, &flat).unwrap();
        let rep = coercivity_report(&h, 5, 0).unwrap();
        let kmax: f64 = 15.0;
        let expect = (1.0 + mu * kmax * kmax / 3.0) / (1.0 + mu * kmax * kmax);
        assert!((rep.dense_min.unwrap() - expect).abs() < 1e-10);
        assert!((rep.dense_max.unwrap() - 1.0).abs() < 1e-10);
        assert!(rep.sampled_min >= rep.dense_min.unwrap() - 1e-12);
    }

    #[test]
    fn coercivity_over_bump() {
        for bath in [bump_1d(32, 0.5), bump_2d(16, 0.5)] {
            for kind in [OperatorKind::IPlusMuTb, OperatorKind::HbB, OperatorKind::HbA] {
                let h = OperatorHandle::new(kind, 0.1, &bath).unwrap();
                let rep = coercivity_report(&h, 10, 3).unwrap();
                assert!(rep.is_coercive(), "{kind}");
                assert!(rep.symmetry_residual < 1e-12);
                assert!(rep.inverse_residual < 1e-10);
                let json = serde_json::to_string(&rep).unwrap();
                let back: CoercivityReport = serde_json::from_str(&json).unwrap();
                assert_eq!(back, rep);
            }
        }
    }

    #[test]
    fn gradient_control_is_finite() {
        let bath = bump_1d(64, 0.5);
        let h = OperatorHandle::new(OperatorKind::HbA, 0.1, &bath).unwrap();
        let c = gradient_control_constant(&h, 5, 2.0, 1).unwrap();
        assert!(c.is_finite() && c > 0.0);
    }
}
