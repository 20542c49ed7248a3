//! Bottom profiles, the still-water column `h_b = 1 - beta b`, and the
//! logarithmic surface variable `q = (1/eps) ln(1 + eps zeta / h_b)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{grad_gamma, Field, Grid, VecField};

/// Below this value of `1 + eps zeta / h_b` the q-transforms log a warning.
pub const ADMISSIBILITY_MARGIN: f64 = 0.1;

/// A named bottom shape. Positions are absolute coordinates in the domain;
/// a missing center means the middle of the domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Profile {
    Flat,
    GaussianBump {
        #[serde(default)]
        center: Option<[f64; 2]>,
        width: f64,
        height: f64,
    },
    /// `amplitude * cos(2 pi k x / L_x)`
    Sinusoidal { k: u32, amplitude: f64 },
    TwoBumps {
        centers: [[f64; 2]; 2],
        widths: [f64; 2],
        heights: [f64; 2],
    },
    /// Explicit samples supplied through [`Bathymetry::from_samples`].
    #[serde(skip)]
    Custom,
}

fn gaussian(grid: &Grid, center: [f64; 2], width: f64, height: f64) -> Field {
    Field::from_fn(grid, |x, y| {
        let dx = x - center[0];
        let dy = if grid.dim() == 2 { y - center[1] } else { 0.0 };
        height * (-(dx * dx + dy * dy) / (width * width)).exp()
    })
}

fn domain_center(grid: &Grid) -> [f64; 2] {
    let l = grid.lengths();
    [0.5 * l[0], if l.len() > 1 { 0.5 * l[1] } else { 0.0 }]
}

impl Profile {
    /// Samples the profile `b` on `grid`.
    pub fn sample(&self, grid: &Grid) -> Result<Field> {
        match *self {
            Profile::Flat => Ok(Field::zeros(grid)),
            Profile::GaussianBump { center, width, height } => {
                if !(width > 0.0) {
                    return Err(Error::InvalidArgument(format!("bump width must be positive, got {width}")));
                }
                Ok(gaussian(grid, center.unwrap_or_else(|| domain_center(grid)), width, height))
            }
            Profile::Sinusoidal { k, amplitude } => {
                let wave = 2.0 * std::f64::consts::PI * k as f64 / grid.lengths()[0];
                Ok(Field::from_fn(grid, |x, _| amplitude * (wave * x).cos()))
            }
            Profile::TwoBumps { centers, widths, heights } => {
                if widths.iter().any(|w| !(*w > 0.0)) {
                    return Err(Error::InvalidArgument("bump widths must be positive".into()));
                }
                let a = gaussian(grid, centers[0], widths[0], heights[0]);
                let b = gaussian(grid, centers[1], widths[1], heights[1]);
                Ok(&a + &b)
            }
            Profile::Custom => Err(Error::InvalidArgument(
                "a custom bottom has no closed form; build it from samples".into(),
            )),
        }
    }
}

/// A fixed bottom together with the derived fields every operator needs.
#[derive(Clone, Debug)]
pub struct Bathymetry {
    profile: Profile,
    beta: f64,
    b: Field,
    h_b: Field,
    grad_b: VecField,
    h_min: f64,
}

impl Bathymetry {
    pub fn build(profile: &Profile, beta: f64, grid: &Grid) -> Result<Self> {
        let b = profile.sample(grid)?;
        Self::from_field(profile.clone(), b, beta)
    }

    /// Flat bottom (`h_b = 1`).
    pub fn flat(grid: &Grid) -> Self {
        Self::build(&Profile::Flat, 0.0, grid).expect("flat bottom is always admissible")
    }

    /// Builds from explicit samples of `b`.
    pub fn from_samples(b: Field, beta: f64) -> Result<Self> {
        Self::from_field(Profile::Custom, b, beta)
    }

    fn from_field(profile: Profile, b: Field, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidArgument(format!("beta must lie in [0, 1], got {beta}")));
        }
        if !b.is_finite() {
            return Err(Error::Corrupted("bottom profile"));
        }
        let h_b = b.map(|x| 1.0 - beta * x);
        let h_min = h_b.min();
        if h_min <= 0.0 {
            return Err(Error::NonpositiveDepth { h_min });
        }
        let grad_b = grad_gamma(&b);
        Ok(Self {
            profile,
            beta,
            b,
            h_b,
            grad_b,
            h_min,
        })
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn grid(&self) -> &Grid {
        self.b.grid()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn bottom(&self) -> &Field {
        &self.b
    }

    /// Still-water depth `1 - beta b`.
    pub fn depth(&self) -> &Field {
        &self.h_b
    }

    pub fn grad_bottom(&self) -> &VecField {
        &self.grad_b
    }

    /// `grad_gamma h_b = -beta grad_gamma b`.
    pub fn grad_depth(&self) -> VecField {
        self.grad_b.scale(-self.beta)
    }

    /// Minimum of `h_b` over the grid nodes.
    pub fn h_min(&self) -> f64 {
        self.h_min
    }

    pub fn h_max(&self) -> f64 {
        self.h_b.max()
    }

    pub fn is_flat(&self) -> bool {
        self.beta == 0.0 || self.b.max_abs() == 0.0
    }
}

/// Total water height together with its minimum.
#[derive(Clone, Debug)]
pub struct WaterColumn {
    pub height: Field,
    pub min_height: f64,
}

impl WaterColumn {
    pub fn is_dry(&self) -> bool {
        self.min_height <= 0.0
    }

    /// Converts a dry column into [`Error::DryState`].
    pub fn require_wet(self) -> Result<Field> {
        if self.is_dry() {
            Err(Error::DryState { min_h: self.min_height })
        } else {
            Ok(self.height)
        }
    }
}

/// `h = 1 + eps zeta - beta b`. Never fails; check [`WaterColumn::is_dry`].
pub fn water_height(zeta: &Field, eps: f64, bath: &Bathymetry) -> WaterColumn {
    let height = bath.depth().axpy(eps, zeta);
    let min_height = height.min();
    WaterColumn { height, min_height }
}

/// Pointwise `eps zeta / h_b`, checked against the log domain.
fn relative_elevation(zeta: &Field, eps: f64, bath: &Bathymetry) -> Result<Field> {
    let x = zeta.zip_with(bath.depth(), |z, h| eps * z / h);
    let min_arg = 1.0 + x.min();
    if !(min_arg > 0.0) {
        return Err(Error::LogDomain { min_arg });
    }
    if min_arg < ADMISSIBILITY_MARGIN {
        log::warn!(
            target: "peregrine::admissibility",
            "min(1 + eps*zeta/h_b) = {min_arg:.4} is below the margin {ADMISSIBILITY_MARGIN}"
        );
    }
    Ok(x)
}

/// `q = (1/eps) ln(1 + eps zeta / h_b)`, with the `eps = 0` limit `zeta / h_b`.
pub fn zeta_to_q(zeta: &Field, eps: f64, bath: &Bathymetry) -> Result<Field> {
    if eps == 0.0 {
        return Ok(zeta.zip_with(bath.depth(), |z, h| z / h));
    }
    let x = relative_elevation(zeta, eps, bath)?;
    Ok(x.map(|x| x.ln_1p() / eps))
}

/// `zeta = (h_b / eps)(exp(eps q) - 1)`, with the `eps = 0` limit `h_b q`.
pub fn q_to_zeta(q: &Field, eps: f64, bath: &Bathymetry) -> Field {
    if eps == 0.0 {
        return q.mul(bath.depth());
    }
    q.zip_with(bath.depth(), |q, h| h * (eps * q).exp_m1() / eps)
}

/// `ln(1 + x) / x`, continuous at 0.
fn log_ratio(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        1.0 - x / 2.0 + x * x / 3.0 - x * x * x / 4.0
    } else {
        x.ln_1p() / x
    }
}

/// `Q(zeta) = int_0^1 dt / (h_b + t eps zeta)`, so that `q = Q(zeta) zeta`.
pub fn q_positivity_factor(zeta: &Field, eps: f64, bath: &Bathymetry) -> Result<Field> {
    let x = if eps == 0.0 {
        Field::zeros(zeta.grid())
    } else {
        relative_elevation(zeta, eps, bath)?
    };
    let factor = x.zip_with(bath.depth(), |x, h| log_ratio(x) / h);
    debug_assert!(factor.min() > 0.0);
    Ok(factor)
}
