//! The convolution action `f -> f_eps = phi_eps * f`, orbits of that action,
//! convergence studies, and the composition check for two mollifiers.
//!
//! `f_eps` is only evaluated at nodes farther than `eps` from the boundary,
//! so the kernel ball never leaves the box and `f` is never extended.

use std::io::Write;

use rayon::prelude::*;

use crate::csv::number;
use crate::error::{Error, Result};
use crate::grid::{
    check_exponent, interior_region, lp_norm, quadrature, BoxDomain, Grid, GridFunction, Region,
    MAX_DIM,
};
use crate::mollifier::{Mollifier, MollifierProfile};
use crate::weakdiff::MultiIndex;

/// A sampled convolution kernel on the integer offsets of a grid.
///
/// Weights already include the cell volume, so applying the stencil is a
/// plain weighted sum over neighbours.
#[derive(Debug, Clone)]
pub(crate) struct Stencil {
    offsets: Vec<[isize; MAX_DIM]>,
    flat: Vec<isize>,
    weights: Vec<f64>,
}

impl Stencil {
    /// Samples `kernel` on the offsets `z = k h` with `|z_i| < eps`, then
    /// corrects the weights so that the discrete moments
    /// `sum w(z) (-z)^beta / beta!` equal `delta(beta, alpha)` for every
    /// `|beta| <= |alpha|`. For `alpha = 0` this is a rescaling to unit mass;
    /// in general the stencil reproduces `d^alpha` exactly on polynomials of
    /// degree `|alpha|`.
    pub(crate) fn build(grid: &Grid, eps: f64, alpha: &MultiIndex, kernel: impl Fn(&[f64]) -> f64) -> Self {
        let n = grid.dim();
        let h = grid.spacing();
        let reach: Vec<isize> = (0..n)
            .map(|i| {
                let mut k = (eps / h[i]).floor() as isize;
                while k > 0 && k as f64 * h[i] >= eps {
                    k -= 1;
                }
                k
            })
            .collect();
        let cell = grid.cell_volume();
        let strides = grid.strides();
        let mut st = Stencil { offsets: Vec::new(), flat: Vec::new(), weights: Vec::new() };
        let mut k = [0isize; MAX_DIM];
        for (i, r) in reach.iter().enumerate() {
            k[i] = -r;
        }
        loop {
            let mut z = [0.0; MAX_DIM];
            for i in 0..n {
                z[i] = k[i] as f64 * h[i];
            }
            let w = kernel(&z[..n]);
            if w != 0.0 {
                st.offsets.push(k);
                st.flat.push((0..n).map(|i| k[i] * strides[i] as isize).sum());
                st.weights.push(w * cell);
            }
            // odometer over the offset box
            let mut axis = n;
            loop {
                if axis == 0 {
                    st.normalize(grid, eps, alpha);
                    return st;
                }
                axis -= 1;
                if k[axis] < reach[axis] {
                    k[axis] += 1;
                    break;
                }
                k[axis] = -reach[axis];
            }
        }
    }

    fn normalize(&mut self, grid: &Grid, eps: f64, alpha: &MultiIndex) {
        if alpha.order() == 0 {
            let mass: f64 = self.weights.iter().sum();
            if mass != 0.0 && mass.is_finite() {
                for w in &mut self.weights {
                    *w /= mass;
                }
            }
            return;
        }
        // Add `c(z) sum_g lambda_g zeta^g` with `zeta = -z / eps` and `c` the
        // bump, choosing lambda so every moment of order <= |alpha| is exact.
        let n = grid.dim();
        let h = grid.spacing();
        let basis = MultiIndex::all_up_to(n, alpha.order());
        let zetas: Vec<[f64; MAX_DIM]> = self
            .offsets
            .iter()
            .map(|k| {
                let mut zeta = [0.0; MAX_DIM];
                for i in 0..n {
                    zeta[i] = -(k[i] as f64) * h[i] / eps;
                }
                zeta
            })
            .collect();
        let mono = |zeta: &[f64; MAX_DIM], b: &MultiIndex| -> f64 {
            b.as_slice().iter().enumerate().map(|(i, &e)| zeta[i].powi(e as i32)).product()
        };
        let c: Vec<f64> = zetas.iter().map(|zeta| crate::bump::value(&zeta[..n])).collect();
        let m = basis.len();
        let mut matrix = vec![vec![0.0; m]; m];
        let mut rhs = vec![0.0; m];
        for (r, b) in basis.iter().enumerate() {
            let factorial: f64 = b.as_slice().iter().map(|&e| (1..=e).product::<u32>() as f64).product();
            let target = if b == alpha { factorial / eps.powi(b.order() as i32) } else { 0.0 };
            let current: f64 = zetas.iter().zip(&self.weights).map(|(zeta, w)| w * mono(zeta, b)).sum();
            rhs[r] = target - current;
            for (col, g) in basis.iter().enumerate() {
                matrix[r][col] = zetas.iter().zip(&c).map(|(zeta, cz)| cz * mono(zeta, b) * mono(zeta, g)).sum();
            }
        }
        if let Some(lambda) = solve(matrix, rhs) {
            for ((w, zeta), cz) in self.weights.iter_mut().zip(&zetas).zip(&c) {
                *w += cz * basis.iter().zip(&lambda).map(|(g, l)| l * mono(zeta, g)).sum::<f64>();
            }
        }
    }

    /// `sum_z w(z) f(x - z)` at every node of `region`; zero elsewhere.
    /// Every region node must keep the whole stencil inside the grid.
    pub(crate) fn apply(&self, f: &GridFunction, region: &Region) -> GridFunction {
        let vals = f.values();
        let out: Vec<f64> = (0..vals.len())
            .into_par_iter()
            .map(|node| {
                if !region.contains(node) {
                    return 0.0;
                }
                self.flat
                    .iter()
                    .zip(&self.weights)
                    .map(|(&d, &w)| w * vals[(node as isize - d) as usize])
                    .sum()
            })
            .collect();
        GridFunction::from_parts(f.grid().clone(), out)
    }

    /// As [`Stencil::apply`] at every node, treating `f` as zero outside the grid.
    pub(crate) fn apply_zero_extended(&self, f: &GridFunction) -> GridFunction {
        let grid = f.grid();
        let n = grid.dim();
        let res = grid.resolution();
        let vals = f.values();
        let out: Vec<f64> = (0..vals.len())
            .into_par_iter()
            .map(|node| {
                let idx = grid.node_multi(node);
                self.offsets
                    .iter()
                    .zip(&self.flat)
                    .zip(&self.weights)
                    .filter(|((k, _), _)| {
                        (0..n).all(|i| {
                            let j = idx[i] as isize - k[i];
                            j >= 0 && j <= res[i] as isize
                        })
                    })
                    .map(|((_, &d), &w)| w * vals[(node as isize - d) as usize])
                    .sum()
            })
            .collect();
        GridFunction::from_parts(grid.clone(), out)
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let m = b.len();
    for col in 0..m {
        let pivot = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col] == 0.0 || !a[pivot][col].is_finite() {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..m {
            let factor = a[row][col] / a[col][col];
            let (upper, lower) = a.split_at_mut(row);
            for (x, p) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *x -= factor * p;
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; m];
    for row in (0..m).rev() {
        let tail: f64 = (row + 1..m).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

fn check_kernel_dim(f: &GridFunction, m: &Mollifier) -> Result<()> {
    if m.dim() == f.grid().dim() {
        Ok(())
    } else {
        Err(Error::Length { expected: f.grid().dim(), got: m.dim() })
    }
}

/// Convolves `f` against `kernel` (supported in the `eps`-ball) on the
/// interior region of `eps`.
pub(crate) fn convolve_interior(
    f: &GridFunction,
    eps: f64,
    alpha: &MultiIndex,
    kernel: impl Fn(&[f64]) -> f64,
) -> Result<(GridFunction, Region)> {
    let region = interior_region(f.grid(), eps);
    if region.is_empty() {
        return Err(Error::EmptyInterior { eps });
    }
    let stencil = Stencil::build(f.grid(), eps, alpha, kernel);
    Ok((stencil.apply(f, &region), region))
}

/// `f_eps(x) = int phi_eps(x - y) f(y) dy` at every node of
/// `interior_region(grid, eps)`. Values outside the returned region are zero
/// and carry no meaning.
pub fn mollify(f: &GridFunction, m: &Mollifier) -> Result<(GridFunction, Region)> {
    check_kernel_dim(f, m)?;
    let identity = MultiIndex::zero(m.dim());
    convolve_interior(f, m.eps(), &identity, |z| m.value(z))
}

/// `phi_eps * f` at every node with `f` extended by zero outside the box.
pub fn mollify_zero_extended(f: &GridFunction, m: &Mollifier) -> Result<GridFunction> {
    check_kernel_dim(f, m)?;
    let identity = MultiIndex::zero(m.dim());
    Ok(Stencil::build(f.grid(), m.eps(), &identity, |z| m.value(z)).apply_zero_extended(f))
}

pub(crate) fn check_ladder(eps_list: &[f64]) -> Result<()> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Less)) {
        return Err(Error::EpsLadder);
    }
    if let Some(&bad) = eps_list.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidEpsilon(bad));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitEntry {
    pub eps: f64,
    pub values: GridFunction,
    pub region: Region,
}

/// The net `(f_eps)` for a strictly decreasing ladder of `eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitNet {
    pub base: GridFunction,
    pub profile: MollifierProfile,
    pub entries: Vec<OrbitEntry>,
}

pub fn orbit(f: &GridFunction, profile: &MollifierProfile, eps_list: &[f64]) -> Result<OrbitNet> {
    check_ladder(eps_list)?;
    let entries = eps_list
        .par_iter()
        .map(|&eps| {
            let (values, region) = mollify(f, &profile.scale(eps)?)?;
            Ok(OrbitEntry { eps, values, region })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OrbitNet { base: f.clone(), profile: *profile, entries })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub error: f64,
    /// `error(previous row) / error(this row)`; absent on the first row.
    pub ratio: Option<f64>,
}

/// `||f_eps - f||_{L^p(region)}` along an `eps` ladder, on one fixed region.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub p: f64,
    pub region: Region,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error).collect()
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.ratio).collect()
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].error < w[0].error)
    }

    /// CSV with header `eps,error,ratio`; the first ratio is empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "eps,error,ratio")?;
        for r in &self.rows {
            let ratio = r.ratio.map(number).unwrap_or_default();
            writeln!(w, "{},{},{}", number(r.eps), number(r.error), ratio)?;
        }
        Ok(())
    }
}

/// Errors are measured on the interior region of the largest `eps`, which is
/// contained in the region of every smaller `eps`.
pub fn convergence_study(
    f: &GridFunction,
    profile: &MollifierProfile,
    p: f64,
    eps_list: &[f64],
) -> Result<ConvergenceTable> {
    check_exponent(p)?;
    check_ladder(eps_list)?;
    let region = interior_region(f.grid(), eps_list[0]);
    if region.is_empty() {
        return Err(Error::EmptyInterior { eps: eps_list[0] });
    }
    let net = orbit(f, profile, eps_list)?;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(net.entries.len());
    for e in &net.entries {
        let error = lp_norm(&e.values.sub(f)?, p, &region)?;
        let ratio = rows.last().map(|prev| prev.error / error);
        rows.push(ConvergenceRow { eps: e.eps, error, ratio });
    }
    Ok(ConvergenceTable { p, region, rows })
}

/// The sampled convolution `a * b` of two mollifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelReport {
    pub support_radius: f64,
    pub mass: f64,
    pub kernel: GridFunction,
}

impl KernelReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "support_radius,mass")?;
        writeln!(w, "{},{}", number(self.support_radius), number(self.mass))
    }
}

/// Samples `a * b` on `[-(eps_a + eps_b), eps_a + eps_b]^n`. The resolution is
/// rounded up to an even number so the origin is a node and the grid is
/// closed under `x -> -x`.
pub fn compose(a: &Mollifier, b: &Mollifier, grid_resolution: usize) -> Result<KernelReport> {
    if a.dim() != b.dim() {
        return Err(Error::Length { expected: a.dim(), got: b.dim() });
    }
    let n = a.dim();
    let res = grid_resolution.max(2).next_multiple_of(2);
    let half = (res / 2) as isize;
    let radius = a.eps() + b.eps();
    let grid = Grid::uniform(BoxDomain::centered(n, radius)?, res)?;
    let h = grid.spacing()[0];

    // coordinates from integer offsets keep x - y exact on the lattice
    let centered = |node: usize| -> [isize; MAX_DIM] {
        let idx = grid.node_multi(node);
        let mut c = [0isize; MAX_DIM];
        for i in 0..n {
            c[i] = idx[i] as isize - half;
        }
        c
    };
    let point = |c: &[isize; MAX_DIM]| -> [f64; MAX_DIM] {
        let mut x = [0.0; MAX_DIM];
        for i in 0..n {
            x[i] = c[i] as f64 * h;
        }
        x
    };
    let b_support: Vec<([isize; MAX_DIM], f64)> = (0..grid.node_count())
        .filter_map(|node| {
            let c = centered(node);
            let v = b.value(&point(&c)[..n]) * grid.weight(node);
            (v != 0.0).then_some((c, v))
        })
        .collect();
    let values: Vec<f64> = (0..grid.node_count())
        .into_par_iter()
        .map(|node| {
            let cx = centered(node);
            b_support
                .iter()
                .map(|(cy, wb)| {
                    let mut d = [0isize; MAX_DIM];
                    for i in 0..n {
                        d[i] = cx[i] - cy[i];
                    }
                    a.value(&point(&d)[..n]) * wb
                })
                .sum()
        })
        .collect();
    let kernel = GridFunction::new(grid.clone(), values)?;
    let support_radius = (0..grid.node_count())
        .filter(|&k| kernel.value(k).abs() > 0.0)
        .map(|k| point(&centered(k))[..n].iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let mass = quadrature(&kernel, &Region::full(&grid))?;
    Ok(KernelReport { support_radius, mass, kernel })
}
