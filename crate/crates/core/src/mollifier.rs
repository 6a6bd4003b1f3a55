//! Mollifiers: the normalized bump profile and its `eps`-scalings
//! `phi_eps(x) = eps^-n phi(x / eps)`.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::bump;
use crate::error::{Error, Result};
use crate::grid::{check_dim, quadrature, BoxDomain, Grid, GridFunction, Region};
use crate::weakdiff::MultiIndex;

/// Cells per axis used by [`MollifierProfile::bump`] to fix the normalization.
pub const DEFAULT_NORMALIZATION_RESOLUTION: usize = 256;

/// Smallest resolution that resolves the bump for normalization.
pub const MIN_NORMALIZATION_RESOLUTION: usize = 32;

/// `phi(x) = C exp(1 / (|x|^2 - 1))` for `|x| < 1`, zero otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierProfile {
    dim: usize,
    normalization: f64,
}

fn normalization_cache() -> &'static Mutex<HashMap<(usize, usize), f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), f64>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Trapezoid mass of the unnormalized bump over `[-1, 1]^n`.
fn unnormalized_mass(n: usize, resolution: usize) -> Result<f64> {
    let grid = Grid::uniform(BoxDomain::centered(n, 1.0)?, resolution)?;
    let f = GridFunction::from_fn(&grid, bump::value);
    quadrature(&f, &Region::full(&grid))
}

/// Standard bump in dimension `n`, normalized to unit mass by trapezoid
/// quadrature at `resolution` cells per axis. Results are cached per
/// `(n, resolution)`.
pub fn standard_bump(n: usize, resolution: usize) -> Result<MollifierProfile> {
    check_dim(n)?;
    if resolution < MIN_NORMALIZATION_RESOLUTION {
        return Err(Error::CoarseNormalization(resolution));
    }
    let key = (n, resolution);
    if let Some(&c) = normalization_cache().lock().unwrap().get(&key) {
        return Ok(MollifierProfile { dim: n, normalization: c });
    }
    let c = 1.0 / unnormalized_mass(n, resolution)?;
    normalization_cache().lock().unwrap().insert(key, c);
    Ok(MollifierProfile { dim: n, normalization: c })
}

impl MollifierProfile {
    /// The standard bump at the default normalization resolution.
    pub fn bump(n: usize) -> Result<Self> {
        standard_bump(n, DEFAULT_NORMALIZATION_RESOLUTION)
    }

    /// A bump with an explicit constant `C`; mainly for checking that broken
    /// normalizations are detected.
    pub fn with_normalization(n: usize, normalization: f64) -> Result<Self> {
        check_dim(n)?;
        Ok(Self { dim: n, normalization })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.normalization * bump::value(x)
    }

    pub fn derivative(&self, alpha: &MultiIndex, x: &[f64]) -> f64 {
        self.normalization * bump::derivative(alpha.as_slice(), x)
    }

    pub fn scale(&self, eps: f64) -> Result<Mollifier> {
        scale(self, eps)
    }
}

/// `phi_eps(x) = eps^-n phi(x / eps)`, supported in the closed `eps`-ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mollifier {
    profile: MollifierProfile,
    eps: f64,
}

pub fn scale(profile: &MollifierProfile, eps: f64) -> Result<Mollifier> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidEpsilon(eps));
    }
    Ok(Mollifier { profile: *profile, eps })
}

impl Mollifier {
    pub fn profile(&self) -> &MollifierProfile {
        &self.profile
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn dim(&self) -> usize {
        self.profile.dim
    }

    pub fn support_radius(&self) -> f64 {
        self.eps
    }

    fn scaled_point(&self, x: &[f64]) -> [f64; 3] {
        let mut z = [0.0; 3];
        for (zi, xi) in z.iter_mut().zip(x) {
            *zi = xi / self.eps;
        }
        z
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let z = self.scaled_point(x);
        self.profile.value(&z[..n]) / self.eps.powi(n as i32)
    }

    /// `d^alpha phi_eps(x) = eps^(-n-|alpha|) (d^alpha phi)(x / eps)`.
    pub fn derivative(&self, alpha: &MultiIndex, x: &[f64]) -> f64 {
        let n = self.dim();
        let z = self.scaled_point(x);
        let power = n as i32 + alpha.order() as i32;
        self.profile.derivative(alpha, &z[..n]) / self.eps.powi(power)
    }
}

/// Outcome of checking the defining properties of a mollifier on a sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitReport {
    pub nonneg: bool,
    pub support_ok: bool,
    pub mass_error: f64,
    /// `c_bounds[k]` is the largest sampled `|d^alpha phi_eps|` over `|alpha| = k`.
    pub c_bounds: Vec<f64>,
    pub tol: f64,
}

impl UnitReport {
    pub fn passed(&self) -> bool {
        self.nonneg && self.support_ok && self.mass_error <= self.tol
    }
}

/// Samples `m` on `[-eps, eps]^n` at `grid_resolution` cells per axis and
/// checks nonnegativity, exact support containment and unit mass.
pub fn verify_unit(m: &Mollifier, grid_resolution: usize, tol: f64) -> Result<UnitReport> {
    let n = m.dim();
    let grid = Grid::uniform(BoxDomain::centered(n, m.eps())?, grid_resolution)?;
    let samples = GridFunction::from_fn(&grid, |x| m.value(x));
    let nonneg = samples.values().iter().all(|&v| v >= 0.0);
    let support_ok = (0..grid.node_count()).all(|k| {
        let x = grid.coord(k);
        let r = x[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
        r <= m.eps() || samples.value(k) == 0.0
    });
    let mass_error = (quadrature(&samples, &Region::full(&grid))? - 1.0).abs();
    let c_bounds = (0..=2)
        .map(|k| {
            MultiIndex::all_of_order(n, k)
                .iter()
                .flat_map(|alpha| grid.nodes().map(move |x| m.derivative(alpha, &x[..n]).abs()))
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(UnitReport { nonneg, support_ok, mass_error, c_bounds, tol })
}
