//! Analytic scalar fields used as sources and background permeabilities.

use core::f64::consts::PI;

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Constant(f64),
    /// `amplitude · cos(π x / extent)` along the first axis.
    Cos1d {
        amplitude: f64,
        extent: f64,
    },
    /// Difference of two isotropic Gaussians of width `sigma`.
    Dipole2d {
        amplitude: f64,
        sigma: f64,
        plus: [f64; 2],
        minus: [f64; 2],
    },
    /// `amplitude (1 − ρ²/σ²) exp(−ρ²/σ²)` around `center`; integrates to
    /// zero over the plane, positive inside `ρ < σ` and negative outside.
    RadialHat {
        amplitude: f64,
        sigma: f64,
        center: [f64; 2],
    },
    /// `base + slope · x_axis`.
    Ramp {
        base: f64,
        slope: f64,
        axis: usize,
    },
}

impl Profile {
    /// Value at `x`; missing trailing coordinates read as 0.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let at = |k: usize| x.get(k).copied().unwrap_or(0.0);
        match *self {
            Profile::Constant(v) => v,
            Profile::Cos1d { amplitude, extent } => amplitude * math::cos(PI * at(0) / extent),
            Profile::Dipole2d {
                amplitude,
                sigma,
                plus,
                minus,
            } => {
                let g = |c: [f64; 2]| {
                    let (dx, dy) = (at(0) - c[0], at(1) - c[1]);
                    math::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma))
                };
                amplitude * (g(plus) - g(minus))
            }
            Profile::RadialHat { center, .. } => {
                let rho = math::hypot(at(0) - center[0], at(1) - center[1]);
                self.radial(rho).unwrap_or(0.0)
            }
            Profile::Ramp { base, slope, axis } => base + slope * at(axis),
        }
    }

    /// Radial form for rotation-invariant profiles.
    pub fn radial(&self, rho: f64) -> Option<f64> {
        match *self {
            Profile::Constant(v) => Some(v),
            Profile::RadialHat {
                amplitude, sigma, ..
            } => {
                let t = rho * rho / (sigma * sigma);
                Some(amplitude * (1.0 - t) * math::exp(-t))
            }
            _ => None,
        }
    }

    /// Center of rotation for radial profiles.
    pub fn center(&self) -> Option<[f64; 2]> {
        match *self {
            Profile::RadialHat { center, .. } => Some(center),
            _ => None,
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, 8 points.
pub(crate) const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// `∫_a^b f` by 8-point Gauss–Legendre on `panels` equal subintervals.
pub(crate) fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let w = (b - a) / panels as f64;
    math::sum((0..panels).flat_map(|p| {
        let mid = a + (p as f64 + 0.5) * w;
        let f = &f;
        GL8.iter()
            .map(move |&(x, wt)| 0.5 * w * wt * f(mid + 0.5 * w * x))
    }))
}
