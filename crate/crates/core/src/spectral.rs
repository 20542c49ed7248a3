//! Periodic grids and Fourier-multiplier calculus.
//!
//! Every derivative in the crate is a Fourier multiplier on the torus
//! `[0, L_1) x ... x [0, L_d)`. The twisted gradient scales the transverse
//! derivative by `gamma`:
//!
//! ```text
//! grad_gamma f = (d_x f, gamma d_y f)        div_gamma v = d_x v_1 + gamma d_y v_2
//! perp_grad f  = (-gamma d_y f, d_x f)       perp_div v  = -gamma d_y v_1 + d_x v_2
//! ```
//!
//! Odd symbols (first derivatives) vanish on the Nyquist index so that the
//! discrete `grad_gamma` is exactly minus the adjoint of `div_gamma` for the
//! grid inner product. Even symbols (`Lambda^s`, Sobolev weights) use the
//! full wavenumber.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

struct Plan {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Plan {
    fn new(planner: &mut FftPlanner<f64>, len: usize) -> Self {
        Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }
}

struct GridInner {
    dim: usize,
    n: usize,
    lengths: Vec<f64>,
    gamma: f64,
    /// Wavenumbers per axis, full (even) and Nyquist-zeroed (odd).
    k_even: [Vec<f64>; 2],
    k_odd: [Vec<f64>; 2],
    plan: Plan,
    padded: Plan,
}

/// A periodic sampling lattice with `n` points per axis in dimension 1 or 2.
///
/// Cloning is cheap; FFT plans are shared.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.inner.dim)
            .field("n", &self.inner.n)
            .field("lengths", &self.inner.lengths)
            .field("gamma", &self.inner.gamma)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.dim == other.inner.dim
                && self.inner.n == other.inner.n
                && self.inner.lengths == other.inner.lengths
                && self.inner.gamma == other.inner.gamma)
    }
}

fn wavenumbers(n: usize, length: f64) -> (Vec<f64>, Vec<f64>) {
    let scale = 2.0 * PI / length;
    let even: Vec<f64> = (0..n)
        .map(|i| {
            let m = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
            m * scale
        })
        .collect();
    let mut odd = even.clone();
    odd[n / 2] = 0.0;
    (even, odd)
}

impl Grid {
    /// Builds a grid. `lengths` holds one domain length per axis.
    pub fn new(dim: usize, n: usize, lengths: &[f64], gamma: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 8, got {n}"
            )));
        }
        if lengths.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} domain lengths, got {}",
                lengths.len()
            )));
        }
        if lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidGrid("domain lengths must be positive".into()));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidGrid(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        let (kx, kx_odd) = wavenumbers(n, lengths[0]);
        let (ky, ky_odd) = if dim == 2 {
            wavenumbers(n, lengths[1])
        } else {
            (vec![0.0], vec![0.0])
        };
        let mut planner = FftPlanner::new();
        let plan = Plan::new(&mut planner, n);
        let padded = Plan::new(&mut planner, 3 * n / 2);
        Ok(Self {
            inner: Arc::new(GridInner {
                dim,
                n,
                lengths: lengths.to_vec(),
                gamma,
                k_even: [kx, ky],
                k_odd: [kx_odd, ky_odd],
                plan,
                padded,
            }),
        })
    }

    pub fn line(n: usize, length: f64) -> Result<Self> {
        Self::new(1, n, &[length], 1.0)
    }

    pub fn square(n: usize, length: f64, gamma: f64) -> Result<Self> {
        Self::new(2, n, &[length, length], gamma)
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn lengths(&self) -> &[f64] {
        &self.inner.lengths
    }

    pub fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    /// Total number of nodes, `n^d`.
    pub fn len(&self) -> usize {
        self.inner.n.pow(self.inner.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn ny(&self) -> usize {
        if self.inner.dim == 2 {
            self.inner.n
        } else {
            1
        }
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.inner.lengths[axis] / self.inner.n as f64
    }

    /// Quadrature weight of one node.
    pub fn cell_volume(&self) -> f64 {
        (0..self.inner.dim).map(|a| self.spacing(a)).product()
    }

    /// Coordinates of node `idx` (x first). Row-major with x fastest.
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let n = self.inner.n;
        let (ix, iy) = (idx % n, idx / n);
        let y = if self.inner.dim == 2 {
            iy as f64 * self.spacing(1)
        } else {
            0.0
        };
        [ix as f64 * self.spacing(0), y]
    }

    /// Largest `|xi^gamma|` represented on the grid.
    pub fn max_wavenumber(&self) -> f64 {
        let kx = PI / self.spacing(0);
        if self.inner.dim == 2 {
            let ky = self.inner.gamma * PI / self.spacing(1);
            (kx * kx + ky * ky).sqrt()
        } else {
            kx
        }
    }

    /// Iterates over `(index, xi_x, xi_y)` with even (full) symbols, `xi_y` already twisted.
    fn even_symbols(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        let n = self.inner.n;
        let g = self.inner.gamma;
        (0..self.ny()).flat_map(move |iy| {
            (0..n).map(move |ix| (iy * n + ix, self.inner.k_even[0][ix], g * self.inner.k_even[1][iy]))
        })
    }

    /// Same as [`Self::even_symbols`] with the Nyquist index of each axis zeroed.
    pub(crate) fn odd_symbols(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        let n = self.inner.n;
        let g = self.inner.gamma;
        (0..self.ny()).flat_map(move |iy| {
            (0..n).map(move |ix| (iy * n + ix, self.inner.k_odd[0][ix], g * self.inner.k_odd[1][iy]))
        })
    }

    /// Unnormalised forward DFT of real samples.
    pub(crate) fn forward(&self, samples: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform(&mut buf, &self.inner.plan, true);
        buf
    }

    /// Inverse DFT (normalised), keeping the real part.
    pub(crate) fn inverse(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut spec, &self.inner.plan, false);
        let scale = 1.0 / self.len() as f64;
        spec.into_iter().map(|c| c.re * scale).collect()
    }

    fn transform(&self, buf: &mut [Complex64], plan: &Plan, forward: bool) {
        let fft = if forward { &plan.forward } else { &plan.inverse };
        let m = plan.len;
        // rows (x direction) in one batched call
        fft.process(buf);
        if self.inner.dim == 2 {
            let mut t = transpose(buf, m);
            fft.process(&mut t);
            buf.copy_from_slice(&transpose(&t, m));
        }
    }

    /// Applies a complex symbol `sym(xi_x, gamma*xi_y)` to real samples.
    fn apply_symbol(&self, samples: &[f64], odd: bool, sym: impl Fn(f64, f64) -> Complex64) -> Vec<f64> {
        let mut spec = self.forward(samples);
        self.scale_spectrum(&mut spec, odd, sym);
        self.inverse(spec)
    }

    fn scale_spectrum(&self, spec: &mut [Complex64], odd: bool, sym: impl Fn(f64, f64) -> Complex64) {
        if odd {
            for (i, kx, ky) in self.odd_symbols() {
                spec[i] *= sym(kx, ky);
            }
        } else {
            for (i, kx, ky) in self.even_symbols() {
                spec[i] *= sym(kx, ky);
            }
        }
    }

    /// `(padded index, weight)` pairs receiving grid index `i` along one axis.
    fn pad_targets(&self, i: usize) -> [(usize, f64); 2] {
        let n = self.inner.n;
        let m = self.inner.padded.len;
        if i == n / 2 {
            [(n / 2, 0.5), (m - n / 2, 0.5)]
        } else if i < n / 2 {
            [(i, 1.0), (usize::MAX, 0.0)]
        } else {
            [(m - (n - i), 1.0), (usize::MAX, 0.0)]
        }
    }

    fn pad(&self, spec: &[Complex64]) -> Vec<Complex64> {
        let n = self.inner.n;
        let m = self.inner.padded.len;
        let my = if self.inner.dim == 2 { m } else { 1 };
        let mut out = vec![Complex64::new(0.0, 0.0); m * my];
        for iy in 0..self.ny() {
            let ty = if self.inner.dim == 2 {
                self.pad_targets(iy)
            } else {
                [(0, 1.0), (usize::MAX, 0.0)]
            };
            for ix in 0..n {
                let tx = self.pad_targets(ix);
                let c = spec[iy * n + ix];
                for &(py, wy) in ty.iter().filter(|t| t.0 != usize::MAX) {
                    for &(px, wx) in tx.iter().filter(|t| t.0 != usize::MAX) {
                        out[py * m + px] += c * (wx * wy);
                    }
                }
            }
        }
        out
    }

    fn truncate(&self, padded: &[Complex64]) -> Vec<Complex64> {
        let n = self.inner.n;
        let m = self.inner.padded.len;
        let mut out = vec![Complex64::new(0.0, 0.0); self.len()];
        for iy in 0..self.ny() {
            let ty = if self.inner.dim == 2 {
                self.pad_targets(iy)
            } else {
                [(0, 1.0), (usize::MAX, 0.0)]
            };
            for ix in 0..n {
                let tx = self.pad_targets(ix);
                let mut acc = Complex64::new(0.0, 0.0);
                for &(py, _) in ty.iter().filter(|t| t.0 != usize::MAX) {
                    for &(px, _) in tx.iter().filter(|t| t.0 != usize::MAX) {
                        acc += padded[py * m + px];
                    }
                }
                out[iy * n + ix] = acc;
            }
        }
        out
    }

    /// Pointwise product of two band-limited grid functions, dealiased by
    /// zero padding to `3n/2` points per axis (the 2/3 rule).
    pub(crate) fn dealiased_product(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let m = self.inner.padded.len;
        let padded_len = if self.inner.dim == 2 { m * m } else { m };
        let upsample = |x: &[f64]| {
            let mut p = self.pad(&self.forward(x));
            self.transform(&mut p, &self.inner.padded, false);
            // samples of the trigonometric interpolant: normalise by the coarse size
            let scale = 1.0 / self.len() as f64;
            p.into_iter().map(|c| c.re * scale).collect::<Vec<f64>>()
        };
        let pa = upsample(a);
        let pb = upsample(b);
        let mut prod: Vec<Complex64> = pa
            .iter()
            .zip(&pb)
            .map(|(x, y)| Complex64::new(x * y, 0.0))
            .collect();
        self.transform(&mut prod, &self.inner.padded, true);
        let ratio = self.len() as f64 / padded_len as f64;
        let spec: Vec<Complex64> = self.truncate(&prod).into_iter().map(|c| c * ratio).collect();
        self.inverse(spec)
    }
}

fn transpose(buf: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); buf.len()];
    for r in 0..n {
        for c in 0..n {
            out[c * n + r] = buf[r * n + c];
        }
    }
    out
}

/// A real-valued grid function.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Grid,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            data: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self {
            grid: grid.clone(),
            data: vec![value; grid.len()],
        }
    }

    pub fn from_vec(grid: &Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.len(),
                data.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            data,
        })
    }

    /// Samples `f(x, y)` at every node (`y = 0` in one dimension).
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let data = (0..grid.len())
            .map(|i| {
                let [x, y] = grid.coords(i);
                f(x, y)
            })
            .collect();
        Self {
            grid: grid.clone(),
            data,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<f64> {
        self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Pointwise combination. Panics when the grids differ.
    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Self {
        assert!(self.grid == other.grid, "grid mismatch");
        Self {
            grid: self.grid.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// `self + a * other`
    pub fn axpy(&self, a: f64, other: &Field) -> Self {
        self.zip_with(other, |x, y| x + a * y)
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|x| a * x)
    }

    /// Pointwise (collocation) product.
    pub fn mul(&self, other: &Field) -> Self {
        self.zip_with(other, |a, b| a * b)
    }

    /// Pointwise product with 2/3-rule dealiasing.
    pub fn dealiased_mul(&self, other: &Field) -> Self {
        assert!(self.grid == other.grid, "grid mismatch");
        Self {
            grid: self.grid.clone(),
            data: self.grid.dealiased_product(&self.data, &other.data),
        }
    }

    pub fn inner(&self, other: &Field) -> f64 {
        assert!(self.grid == other.grid, "grid mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell_volume()
    }

    /// Discrete `L^2` norm.
    pub fn norm_l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Cyclic shift by `shift` nodes along x.
    pub fn shift_x(&self, shift: usize) -> Self {
        let n = self.grid.n();
        let mut data = vec![0.0; self.data.len()];
        for (row_in, row_out) in self.data.chunks(n).zip(data.chunks_mut(n)) {
            for i in 0..n {
                row_out[(i + shift) % n] = row_in[i];
            }
        }
        Self {
            grid: self.grid.clone(),
            data,
        }
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, rhs: f64) -> Field {
        self.scale(rhs)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.scale(-1.0)
    }
}

/// A `d`-component vector field sharing one grid.
#[derive(Clone, Debug)]
pub struct VecField {
    grid: Grid,
    comps: Vec<Field>,
}

impl VecField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            comps: (0..grid.dim()).map(|_| Field::zeros(grid)).collect(),
        }
    }

    pub fn from_components(comps: Vec<Field>) -> Result<Self> {
        let grid = comps
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty vector field".into()))?
            .grid()
            .clone();
        if comps.len() != grid.dim() {
            return Err(Error::InvalidArgument(format!(
                "expected {} components, got {}",
                grid.dim(),
                comps.len()
            )));
        }
        if comps.iter().any(|c| c.grid() != &grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, comps })
    }

    /// Builds from one flat buffer holding the components back to back.
    pub fn from_flat(grid: &Grid, flat: &[f64]) -> Result<Self> {
        let len = grid.len();
        if flat.len() != len * grid.dim() {
            return Err(Error::InvalidArgument(format!(
                "expected {} values, got {}",
                len * grid.dim(),
                flat.len()
            )));
        }
        let comps = flat
            .chunks(len)
            .map(|c| Field::from_vec(grid, c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: grid.clone(),
            comps,
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.comps.iter().flat_map(|c| c.values().iter().copied()).collect()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> &[Field] {
        &self.comps
    }

    pub fn component(&self, i: usize) -> &Field {
        &self.comps[i]
    }

    pub fn map_components(&self, f: impl Fn(&Field) -> Field) -> Self {
        Self {
            grid: self.grid.clone(),
            comps: self.comps.iter().map(f).collect(),
        }
    }

    pub fn zip_components(&self, other: &VecField, f: impl Fn(&Field, &Field) -> Field) -> Self {
        assert!(self.grid == other.grid, "grid mismatch");
        Self {
            grid: self.grid.clone(),
            comps: self.comps.iter().zip(&other.comps).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn axpy(&self, a: f64, other: &VecField) -> Self {
        self.zip_components(other, |x, y| x.axpy(a, y))
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map_components(|c| c.scale(a))
    }

    /// Multiplies every component by a scalar field (collocation).
    pub fn mul_scalar(&self, s: &Field) -> Self {
        self.map_components(|c| c.mul(s))
    }

    /// Pointwise dot product with another vector field (collocation).
    pub fn dot(&self, other: &VecField) -> Field {
        let mut acc = Field::zeros(&self.grid);
        for (a, b) in self.comps.iter().zip(&other.comps) {
            acc = acc.zip_with(&a.mul(b), |x, y| x + y);
        }
        acc
    }

    pub fn inner(&self, other: &VecField) -> f64 {
        self.comps.iter().zip(&other.comps).map(|(a, b)| a.inner(b)).sum()
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().fold(0.0_f64, |m, c| m.max(c.max_abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(Field::is_finite)
    }

    pub fn shift_x(&self, shift: usize) -> Self {
        self.map_components(|c| c.shift_x(shift))
    }
}

impl Add for &VecField {
    type Output = VecField;
    fn add(self, rhs: &VecField) -> VecField {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &VecField {
    type Output = VecField;
    fn sub(self, rhs: &VecField) -> VecField {
        self.axpy(-1.0, rhs)
    }
}

/// Twisted gradient `(d_x f, gamma d_y f)`.
pub fn grad_gamma(f: &Field) -> VecField {
    let grid = f.grid();
    let spec = grid.forward(f.values());
    let mut comps = Vec::with_capacity(grid.dim());
    for axis in 0..grid.dim() {
        let mut s = spec.clone();
        grid.scale_spectrum(&mut s, true, |kx, ky| I * if axis == 0 { kx } else { ky });
        comps.push(Field {
            grid: grid.clone(),
            data: grid.inverse(s),
        });
    }
    VecField {
        grid: grid.clone(),
        comps,
    }
}

/// Twisted divergence `d_x v_1 + gamma d_y v_2`.
pub fn div_gamma(v: &VecField) -> Field {
    let grid = v.grid();
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (axis, c) in v.components().iter().enumerate() {
        let mut s = grid.forward(c.values());
        grid.scale_spectrum(&mut s, true, |kx, ky| I * if axis == 0 { kx } else { ky });
        for (a, b) in acc.iter_mut().zip(s) {
            *a += b;
        }
    }
    Field {
        grid: grid.clone(),
        data: grid.inverse(acc),
    }
}

/// Orthogonal gradient `(-gamma d_y f, d_x f)`; identically zero when `d = 1`.
pub fn perp_grad(f: &Field) -> VecField {
    let grid = f.grid();
    if grid.dim() == 1 {
        return VecField::zeros(grid);
    }
    let g = grad_gamma(f);
    VecField {
        grid: grid.clone(),
        comps: vec![g.comps[1].scale(-1.0), g.comps[0].clone()],
    }
}

/// Orthogonal divergence `-gamma d_y v_1 + d_x v_2`; identically zero when `d = 1`.
pub fn perp_div(v: &VecField) -> Field {
    let grid = v.grid();
    if grid.dim() == 1 {
        return Field::zeros(grid);
    }
    let rotated = VecField {
        grid: grid.clone(),
        comps: vec![v.comps[1].clone(), v.comps[0].scale(-1.0)],
    };
    div_gamma(&rotated)
}

/// Twisted Laplacian `div_gamma(grad_gamma f)`.
pub fn laplacian_gamma(f: &Field) -> Field {
    let grid = f.grid();
    Field {
        grid: grid.clone(),
        data: grid.apply_symbol(f.values(), true, |kx, ky| Complex64::new(-(kx * kx + ky * ky), 0.0)),
    }
}

/// `Lambda^s = (1 + |xi^gamma|^2)^(s/2)`.
pub fn lambda_s(f: &Field, s: f64) -> Field {
    let grid = f.grid();
    Field {
        grid: grid.clone(),
        data: grid.apply_symbol(f.values(), false, |kx, ky| {
            Complex64::new((1.0 + kx * kx + ky * ky).powf(0.5 * s), 0.0)
        }),
    }
}

/// `(1 - delta Delta_gamma)^power` with `Delta_gamma = div_gamma grad_gamma`.
pub fn mollify(f: &Field, delta: f64, power: i32) -> Result<Field> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("mollifier delta must be >= 0, got {delta}")));
    }
    if !matches!(power, -2 | -1 | 1 | 2) {
        return Err(Error::InvalidArgument(format!(
            "mollifier power must be one of -2, -1, 1, 2; got {power}"
        )));
    }
    if delta == 0.0 {
        return Ok(f.clone());
    }
    let grid = f.grid();
    Ok(Field {
        grid: grid.clone(),
        data: grid.apply_symbol(f.values(), true, |kx, ky| {
            Complex64::new((1.0 + delta * (kx * kx + ky * ky)).powi(power), 0.0)
        }),
    })
}

pub fn mollify_vec(v: &VecField, delta: f64, power: i32) -> Result<VecField> {
    let comps = v
        .components()
        .iter()
        .map(|c| mollify(c, delta, power))
        .collect::<Result<Vec<_>>>()?;
    Ok(VecField {
        grid: v.grid().clone(),
        comps,
    })
}

/// Squared `H^s` norm via Parseval with the `(1 + |xi^gamma|^2)^s` weight.
pub fn sobolev_norm_sq(f: &Field, s: f64) -> f64 {
    let grid = f.grid();
    let spec = grid.forward(f.values());
    let sum: f64 = grid
        .even_symbols()
        .map(|(i, kx, ky)| (1.0 + kx * kx + ky * ky).powf(s) * spec[i].norm_sqr())
        .sum();
    sum * grid.cell_volume() / grid.len() as f64
}

pub fn sobolev_norm(f: &Field, s: f64) -> f64 {
    sobolev_norm_sq(f, s).sqrt()
}

/// `H^s` norm of a vector field (sum over components).
pub fn sobolev_norm_vec(v: &VecField, s: f64) -> f64 {
    v.components().iter().map(|c| sobolev_norm_sq(c, s)).sum::<f64>().sqrt()
}

/// `|v|_{X^s}^2 = |v|_{H^s}^2 + mu |div_gamma v|_{H^s}^2`.
pub fn xs_norm(v: &VecField, s: f64, mu: f64) -> f64 {
    let base: f64 = v.components().iter().map(|c| sobolev_norm_sq(c, s)).sum();
    (base + mu * sobolev_norm_sq(&div_gamma(v), s)).sqrt()
}

/// Signed projection of `f` onto `cos(k x)` along the first axis, averaged
/// over the transverse direction: the coefficient `a` in `f ~ a cos(kx) + ...`.
pub fn cosine_amplitude(f: &Field, k: f64) -> f64 {
    let grid = f.grid();
    let vol = grid.lengths().iter().product::<f64>();
    let proj: f64 = (0..grid.len())
        .map(|i| f.values()[i] * (k * grid.coords(i)[0]).cos())
        .sum::<f64>()
        * grid.cell_volume();
    2.0 * proj / vol
}
