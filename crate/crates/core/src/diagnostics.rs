//! Energies, norms, frequency and order estimation, shock-time prediction.

use serde::{Deserialize, Serialize};

use crate::bathymetry::Bathymetry;
use crate::error::{Error, Result};
use crate::models::{Model, ModelKind, ModelState};
use crate::operators::{apply_weighted, OperatorKind};
use crate::spectral::{cosine_amplitude, div_gamma, grad_gamma, sobolev_norm, sobolev_norm_sq, Field, VecField};
use crate::timeloop::Trajectory;

/// Sobolev index of the monitored `E^N` energy.
pub const DEFAULT_ENERGY_ORDER: u32 = 3;

/// `1/2 |zeta|^2 + 1/2 (h_b (I + mu T_b) V, V)`.
pub fn energy_bp(zeta: &Field, velocity: &VecField, mu: f64, bath: &Bathymetry) -> f64 {
    let w = apply_weighted(OperatorKind::IPlusMuTb, velocity, mu, bath);
    0.5 * zeta.inner(zeta) + 0.5 * w.inner(velocity)
}

/// `|grad_gamma f|_{H^s}` (all partial derivatives).
fn gradient_norm_sq(f: &Field, s: f64) -> f64 {
    grad_gamma(f).components().iter().map(|c| sobolev_norm_sq(c, s)).sum()
}

/// `E^N = |zeta|_{H^N} + sqrt(mu)|grad zeta|_{H^N} + |V|_{H^N} + sqrt(mu)|grad V|_{H^N}`,
/// where `grad V` is the full differential.
pub fn energy_en(zeta: &Field, velocity: &VecField, mu: f64, order: u32) -> f64 {
    let s = order as f64;
    let v_sq: f64 = velocity.components().iter().map(|c| sobolev_norm_sq(c, s)).sum();
    let dv_sq: f64 = velocity.components().iter().map(|c| gradient_norm_sq(c, s)).sum();
    sobolev_norm(zeta, s) + mu.sqrt() * gradient_norm_sq(zeta, s).sqrt() + v_sq.sqrt() + mu.sqrt() * dv_sq.sqrt()
}

/// `mu |div V|_{H^s}^2 + |zeta|_{H^s}^2 + |V|_{H^s}^2`.
pub fn energy_theorem(zeta: &Field, velocity: &VecField, mu: f64, s: f64) -> f64 {
    let v_sq: f64 = velocity.components().iter().map(|c| sobolev_norm_sq(c, s)).sum();
    mu * sobolev_norm_sq(&div_gamma(velocity), s) + sobolev_norm_sq(zeta, s) + v_sq
}

/// `(sup |U|, sup |grad U|)` over the prognostic unknowns, on the grid.
pub fn w1_inf(_model: &Model, state: &ModelState) -> (f64, f64) {
    let mut sup_u = state.surface.max_abs();
    let mut sup_grad = grad_gamma(&state.surface).max_abs();
    if let Some(v) = &state.velocity {
        sup_u = sup_u.max(v.max_abs());
        for c in v.components() {
            sup_grad = sup_grad.max(grad_gamma(c).max_abs());
        }
    }
    (sup_u, sup_grad)
}

fn default_energy_order() -> u32 {
    DEFAULT_ENERGY_ORDER
}

fn default_theorem_order() -> f64 {
    DEFAULT_ENERGY_ORDER as f64
}

/// What each diagnostics record contains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsOptions {
    #[serde(default = "default_energy_order")]
    pub energy_order: u32,
    #[serde(default = "default_theorem_order")]
    pub theorem_order: f64,
    /// Wavenumbers whose `cos(k x)` projection of the elevation is recorded.
    #[serde(default)]
    pub modes: Vec<f64>,
}

impl Default for DiagnosticsOptions {
    fn default() -> Self {
        Self {
            energy_order: DEFAULT_ENERGY_ORDER,
            theorem_order: DEFAULT_ENERGY_ORDER as f64,
            modes: Vec::new(),
        }
    }
}

/// One row of diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub en: f64,
    pub e_bp: f64,
    pub e_thm: f64,
    pub sup_u: f64,
    pub sup_grad_u: f64,
    pub mode_amplitudes: Vec<f64>,
}

pub const CSV_COLUMNS: [&str; 6] = ["t", "EN", "E_bp", "E_thm", "sup_U", "sup_gradU"];

impl DiagnosticsRecord {
    /// Header line; one `mode_<k>` column per recorded wavenumber.
    pub fn csv_header(modes: &[f64]) -> String {
        let mut cols: Vec<String> = CSV_COLUMNS.iter().map(|c| c.to_string()).collect();
        cols.extend(modes.iter().map(|k| format!("mode_{k}")));
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cols: Vec<String> = [self.time, self.en, self.e_bp, self.e_thm, self.sup_u, self.sup_grad_u]
            .iter()
            .map(|x| format!("{x:e}"))
            .collect();
        cols.extend(self.mode_amplitudes.iter().map(|x| format!("{x:e}")));
        cols.join(",")
    }
}

/// Diagnostics of `state` in terms of the elevation `zeta` and velocity.
pub fn record(model: &Model, state: &ModelState, opts: &DiagnosticsOptions) -> DiagnosticsRecord {
    let zeta = model.elevation(state);
    let velocity = state
        .velocity
        .clone()
        .unwrap_or_else(|| VecField::zeros(state.grid()));
    let mu = match model.kind() {
        ModelKind::ShallowWater | ModelKind::Burgers => 0.0,
        _ => model.params().mu,
    };
    let (sup_u, sup_grad_u) = w1_inf(model, state);
    DiagnosticsRecord {
        time: state.time,
        en: energy_en(&zeta, &velocity, mu, opts.energy_order),
        e_bp: energy_bp(&zeta, &velocity, mu, model.bathymetry()),
        e_thm: energy_theorem(&zeta, &velocity, mu, opts.theorem_order),
        sup_u,
        sup_grad_u,
        mode_amplitudes: opts.modes.iter().map(|&k| cosine_amplitude(&zeta, k)).collect(),
    }
}

/// Linear dispersion relation `omega(k) = |k| / sqrt(1 + mu k^2 / 3)`.
pub fn bp_dispersion(k: f64, mu: f64) -> f64 {
    k.abs() / (1.0 + mu * k * k / 3.0).sqrt()
}

/// Result of a frequency fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyFit {
    pub omega: f64,
    pub crossings: usize,
    pub periods: f64,
}

/// Angular frequency of an oscillating signal from its zero crossings.
///
/// Crossings are located by linear interpolation and their times are
/// fitted by least squares against the crossing index (spacing `pi/omega`).
/// At least three full periods (six crossings) are required.
pub fn measure_frequency(times: &[f64], signal: &[f64]) -> Result<FrequencyFit> {
    if times.len() != signal.len() {
        return Err(Error::InvalidArgument("times and signal differ in length".into()));
    }
    let mut crossings = Vec::new();
    for i in 1..signal.len() {
        let (a, b) = (signal[i - 1], signal[i]);
        if a == 0.0 && i > 1 {
            continue;
        }
        if (a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0) {
            if b == 0.0 {
                crossings.push(times[i]);
            } else {
                let frac = a / (a - b);
                crossings.push(times[i - 1] + frac * (times[i] - times[i - 1]));
            }
        }
    }
    if crossings.len() < 6 {
        return Err(Error::InsufficientSamples(format!(
            "{} zero crossings found, at least 6 (three periods) are needed",
            crossings.len()
        )));
    }
    let xs: Vec<f64> = (0..crossings.len()).map(|i| i as f64).collect();
    let (slope, _) = least_squares(&xs, &crossings);
    let omega = std::f64::consts::PI / slope;
    Ok(FrequencyFit {
        omega,
        crossings: crossings.len(),
        periods: (crossings.len() - 1) as f64 / 2.0,
    })
}

/// Frequency of the `cos(k x)` component recorded in `traj`.
pub fn measure_dispersion(traj: &Trajectory, k: f64) -> Result<FrequencyFit> {
    let series = traj
        .mode_series(k)
        .ok_or_else(|| Error::InvalidArgument(format!("mode {k} was not recorded")))?;
    measure_frequency(&traj.times(), &series)
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Errors below this are treated as round-off.
pub const NOISE_FLOOR: f64 = 1e-13;

/// Least-squares slope of `log(error)` against `log(parameter)`.
pub fn estimate_order(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit(format!("{} points given, at least 3 needed", points.len())));
    }
    if points.iter().any(|&(p, _)| !(p > 0.0)) {
        return Err(Error::DegenerateFit("parameters must be positive".into()));
    }
    let ratio = points[1].0 / points[0].0;
    if (ratio - 1.0).abs() < 1e-12
        || points
            .windows(2)
            .any(|w| ((w[1].0 / w[0].0) / ratio - 1.0).abs() > 1e-6)
    {
        return Err(Error::DegenerateFit("parameters are not in geometric progression".into()));
    }
    if points.iter().any(|&(_, e)| !(e > NOISE_FLOOR) || !e.is_finite()) {
        return Err(Error::DegenerateFit("errors are at the round-off floor".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    Ok(least_squares(&xs, &ys).0)
}

/// Characteristic crossing time `-1 / (eps min u0')`.
pub fn burgers_shock_time(u0: &Field, eps: f64) -> Result<f64> {
    if u0.grid().dim() != 1 {
        return Err(Error::InvalidArgument("Burgers is one-dimensional".into()));
    }
    let slope = grad_gamma(u0).component(0).min();
    if !(slope < 0.0) || eps <= 0.0 {
        return Err(Error::NoShock);
    }
    Ok(-1.0 / (eps * slope))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bathymetry::Profile;
    use crate::operators::random_vec_field;
    use crate::spectral::Grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn energies_vanish_at_rest() {
        let g = Grid::line(32, 2.0 * PI).unwrap();
        let flat = Bathymetry::flat(&g);
        let z = Field::zeros(&g);
        let v = VecField::zeros(&g);
        assert_eq!(energy_bp(&z, &v, 0.1, &flat), 0.0);
        assert_eq!(energy_en(&z, &v, 0.1, 3), 0.0);
        assert_eq!(energy_theorem(&z, &v, 0.1, 2.0), 0.0);
    }

    #[test]
    fn energy_reductions() {
        let g = Grid::line(64, 2.0 * PI).unwrap();
        let flat = Bathymetry::flat(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = Field::from_vec(&g, (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let v = random_vec_field(&g, &mut rng);
        let e = energy_bp(&z, &v, 0.0, &flat);
        assert!((e - 0.5 * (z.inner(&z) + v.inner(&v))).abs() < 1e-12);
        let en = energy_en(&z, &v, 0.0, 2);
        assert!((en - sobolev_norm(&z, 2.0) - crate::spectral::sobolev_norm_vec(&v, 2.0)).abs() < 1e-12);

        // zeta = sin x, N = 0, mu = 1: |sin|_2 + |cos|_2 = 2 sqrt(pi)
        let s = Field::from_fn(&g, |x, _| x.sin());
        let en = energy_en(&s, &VecField::zeros(&g), 1.0, 0);
        assert!((en - 2.0 * PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn theorem_energy_matches_direct_parseval() {
        // direct evaluation with an explicit DFT sum
        let n = 16;
        let g = Grid::line(n, 2.0 * PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = 1.5;
        let mu = 0.3;
        let norm = |f: &[f64], deriv: bool| -> f64 {
            let mut acc = 0.0;
            for m in 0..n {
                let k = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
                let (mut re, mut im) = (0.0, 0.0);
                for (j, x) in f.iter().enumerate() {
                    let ph = -2.0 * PI * (m * j) as f64 / n as f64;
                    re += x * ph.cos();
                    im += x * ph.sin();
                }
                let mut w = (1.0 + k * k).powf(s);
                if deriv {
                    w *= if m == n / 2 { 0.0 } else { k * k };
                }
                acc += w * (re * re + im * im);
            }
            acc * (2.0 * PI / n as f64) / n as f64
        };
        let expect = mu * norm(&v, true) + norm(&z, false) + norm(&v, false);
        let zf = Field::from_vec(&g, z).unwrap();
        let vf = VecField::from_components(vec![Field::from_vec(&g, v).unwrap()]).unwrap();
        assert!((energy_theorem(&zf, &vf, mu, s) - expect).abs() < 1e-10 * expect);
    }

    #[test]
    fn bp_energy_is_positive() {
        let g = Grid::line(32, 20.0).unwrap();
        let bath = Bathymetry::build(&Profile::GaussianBump { center: None, width: 3.0, height: 1.0 }, 0.8, &g)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let z = Field::from_vec(&g, (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let v = random_vec_field(&g, &mut rng);
            assert!(energy_bp(&z, &v, 0.5, &bath) > 0.0);
        }
    }

    #[test]
    fn frequency_of_sampled_cosine() {
        let omega = 0.983739;
        let times: Vec<f64> = (0..2000).map(|i| i as f64 * 0.01).collect();
        let sig: Vec<f64> = times.iter().map(|t| (omega * t).cos()).collect();
        let fit = measure_frequency(&times, &sig).unwrap();
        assert!((fit.omega - omega).abs() < 1e-6);
        let short: Vec<f64> = times[..500].to_vec();
        assert!(matches!(
            measure_frequency(&short, &sig[..500]),
            Err(Error::InsufficientSamples(_))
        ));
    }

    #[test]
    fn dispersion_formula() {
        assert_eq!(bp_dispersion(2.0, 0.0), 2.0);
        assert!((bp_dispersion(1.0, 0.1) - 0.983_739_2).abs() < 1e-6);
        assert!((bp_dispersion(3.0, 0.1) - 3.0 / 1.3_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn order_estimation() {
        let mus = [0.08, 0.04, 0.02];
        let quad: Vec<(f64, f64)> = mus.iter().map(|&m| (m, 3.0 * m * m)).collect();
        assert!((estimate_order(&quad).unwrap() - 2.0).abs() < 1e-12);
        let lin: Vec<(f64, f64)> = mus.iter().map(|&m| (m, 0.5 * m)).collect();
        assert!((estimate_order(&lin).unwrap() - 1.0).abs() < 1e-12);
        assert!(estimate_order(&lin[..2]).is_err());
        let floor: Vec<(f64, f64)> = mus.iter().map(|&m| (m, 1e-16)).collect();
        assert!(estimate_order(&floor).is_err());
        let uneven = [(0.08, 1.0), (0.04, 0.5), (0.03, 0.3)];
        assert!(estimate_order(&uneven).is_err());
    }

    #[test]
    fn shock_time() {
        let g = Grid::line(128, 2.0 * PI).unwrap();
        let u0 = Field::from_fn(&g, |x, _| -x.sin());
        assert!((burgers_shock_time(&u0, 0.1).unwrap() - 10.0).abs() < 1e-10);
        // strictly increasing data is impossible on a torus; a constant has no negative slope
        assert!(matches!(burgers_shock_time(&Field::constant(&g, 1.0), 0.1), Err(Error::NoShock)));
    }

    #[test]
    fn csv_layout() {
        assert_eq!(DiagnosticsRecord::csv_header(&[]), "t,EN,E_bp,E_thm,sup_U,sup_gradU");
        assert_eq!(DiagnosticsRecord::csv_header(&[1.0, 2.0]), "t,EN,E_bp,E_thm,sup_U,sup_gradU,mode_1,mode_2");
        let r = DiagnosticsRecord {
            time: 0.5,
            en: 1.0,
            e_bp: 2.0,
            e_thm: 3.0,
            sup_u: 4.0,
            sup_grad_u: 5.0,
            mode_amplitudes: vec![0.25],
        };
        assert_eq!(r.csv_row().split(',').count(), 7);
    }
}
