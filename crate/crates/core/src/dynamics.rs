//! Dynamical checks on top of the convolution action: the frozen-derivative
//! Newton net, invertibility of mollified derivatives, the exponential flow
//! law, distributional limits of orbits, and pairings of vector-valued
//! sections.

use std::io::Write;

use crate::convolution::{mollify, OrbitNet};
use crate::csv::number;
use crate::error::{Error, Result};
use crate::grid::{quadrature, Grid, GridFunction, Region};
use crate::mollifier::MollifierProfile;
use crate::weakdiff::{mollified_derivative, pair, MultiIndex, TestFunction};

/// Iterates of `x_{k+1} = x_k + (y - f(x_k)) / Df(a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonTrace {
    pub anchor: f64,
    pub slope: f64,
    pub target: f64,
    pub iterates: Vec<f64>,
    pub residuals: Vec<f64>,
    pub converged: bool,
}

impl NewtonTrace {
    pub fn last(&self) -> f64 {
        *self.iterates.last().expect("trace holds x0")
    }

    /// CSV with header `iter,x,residual`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iter,x,residual")?;
        for (k, (x, r)) in self.iterates.iter().zip(&self.residuals).enumerate() {
            writeln!(w, "{},{},{}", k, number(*x), number(*r))?;
        }
        Ok(())
    }
}

/// Chord iteration with the derivative frozen at the anchor `a`.
///
/// Stops once `|f(x_k) - y| <= tol` or after `max_iter` updates. A zero or
/// non-finite `df_a` is rejected, as is any non-finite iterate.
pub fn newton_net(
    f: impl Fn(f64) -> f64,
    anchor: f64,
    df_a: f64,
    y: f64,
    x0: f64,
    max_iter: usize,
    tol: f64,
) -> Result<NewtonTrace> {
    if df_a == 0.0 || !df_a.is_finite() {
        return Err(Error::SingularDerivative);
    }
    let mut x = x0;
    let mut iterates = vec![x];
    let mut residuals = Vec::new();
    for k in 0..=max_iter {
        let fx = f(x);
        if !fx.is_finite() || !x.is_finite() {
            return Err(Error::NonFiniteIterate { iteration: k });
        }
        let r = (fx - y).abs();
        residuals.push(r);
        if r <= tol {
            return Ok(NewtonTrace { anchor, slope: df_a, target: y, iterates, residuals, converged: true });
        }
        if k == max_iter {
            break;
        }
        x += (y - fx) / df_a;
        iterates.push(x);
    }
    Ok(NewtonTrace { anchor, slope: df_a, target: y, iterates, residuals, converged: false })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertibilityReport {
    /// `min |u|` over the region, when a weak derivative was supplied.
    pub min_abs_df: Option<f64>,
    pub min_abs_df_eps: f64,
    pub invertible: bool,
}

/// Checks that `D(f_eps)` stays away from zero without changing sign on the
/// interior region of `eps` (1-D only).
pub fn invertibility_check(
    f: &GridFunction,
    u: Option<&GridFunction>,
    profile: &MollifierProfile,
    eps: f64,
) -> Result<InvertibilityReport> {
    if f.grid().dim() != 1 {
        return Err(Error::Dimension(f.grid().dim()));
    }
    let (df, region) = mollified_derivative(f, profile, &MultiIndex::unit(1, 0), eps)?;
    let vals: Vec<f64> = region.nodes().map(|k| df.value(k)).collect();
    let min_abs_df_eps = vals.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    let all_pos = vals.iter().all(|&v| v > 0.0);
    let all_neg = vals.iter().all(|&v| v < 0.0);
    let min_abs_df = match u {
        Some(u) => {
            f.same_grid(u)?;
            Some(region.nodes().map(|k| u.value(k).abs()).fold(f64::INFINITY, f64::min))
        }
        None => None,
    };
    Ok(InvertibilityReport { min_abs_df, min_abs_df_eps, invertible: min_abs_df_eps > 0.0 && (all_pos || all_neg) })
}

/// Step used for the RK4 cross-check of the flow.
pub const RK4_STEP: f64 = 1e-3;

/// The flow `phi_t(x) = x e^{kt}` of `x' = kx`, checked against the group
/// law and a numerical integration.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowCheck {
    pub k: f64,
    pub x0: f64,
    pub s: f64,
    pub t: f64,
    /// `phi_{s+t}(x0)`
    pub lhs: f64,
    /// `phi_t(phi_s(x0))`
    pub rhs: f64,
    pub residual: f64,
    /// RK4 solution of `x' = kx` from `x0` over time `s + t`.
    pub rk4: f64,
    pub rk4_error: f64,
}

impl FlowCheck {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,x0,s,t,lhs,rhs,residual,rk4,rk4_error")?;
        let cols = [self.k, self.x0, self.s, self.t, self.lhs, self.rhs, self.residual, self.rk4, self.rk4_error];
        writeln!(w, "{}", cols.iter().map(|&v| number(v)).collect::<Vec<_>>().join(","))
    }
}

fn flow(k: f64, t: f64, x: f64) -> f64 {
    x * (k * t).exp()
}

fn rk4(k: f64, x0: f64, duration: f64) -> f64 {
    let steps = (duration.abs() / RK4_STEP).ceil().max(1.0) as usize;
    let h = duration / steps as f64;
    let rhs = |x: f64| k * x;
    let mut x = x0;
    for _ in 0..steps {
        let k1 = rhs(x);
        let k2 = rhs(x + 0.5 * h * k1);
        let k3 = rhs(x + 0.5 * h * k2);
        let k4 = rhs(x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    x
}

pub fn exponential_flow(k: f64, x0: f64, s: f64, t: f64) -> FlowCheck {
    let lhs = flow(k, s + t, x0);
    let rhs = flow(k, t, flow(k, s, x0));
    let numeric = rk4(k, x0, s + t);
    FlowCheck { k, x0, s, t, lhs, rhs, residual: (lhs - rhs).abs(), rk4: numeric, rk4_error: (numeric - lhs).abs() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShadowReport {
    pub pairings: Vec<(f64, f64)>,
    pub extrapolated_limit: f64,
}

/// Pairs every entry of an orbit with `v` and extrapolates the last two
/// pairings to `eps -> 0`, modelling the error as linear in `eps`.
pub fn distributional_shadow(net: &OrbitNet, v: &TestFunction) -> Result<ShadowReport> {
    distributional_shadow_with_order(net, v, 1)
}

/// As [`distributional_shadow`] with the error modelled as `C eps^order`.
/// The bump is even, so `<f_eps, v> = <f, phi_eps * v>` has an `O(eps^2)`
/// error and `order = 2` removes its leading term.
pub fn distributional_shadow_with_order(net: &OrbitNet, v: &TestFunction, order: u32) -> Result<ShadowReport> {
    if net.entries.is_empty() {
        return Err(Error::EpsLadder);
    }
    if order == 0 {
        return Err(Error::ExtrapolationOrder(order));
    }
    let grid = net.base.grid();
    let n = grid.dim();
    for e in &net.entries {
        let escapes = (0..grid.node_count()).any(|k| !e.region.contains(k) && v.value(&grid.coord(k)[..n]) != 0.0);
        if escapes {
            return Err(Error::SupportEscapes);
        }
    }
    let pairings = net
        .entries
        .iter()
        .map(|e| Ok((e.eps, pair(&e.values, v)?)))
        .collect::<Result<Vec<_>>>()?;
    let extrapolated_limit = match pairings.as_slice() {
        [.., (e1, p1), (e2, p2)] => {
            let (a, b) = (e1.powi(order as i32), e2.powi(order as i32));
            (a * p2 - b * p1) / (a - b)
        }
        [(_, p)] => *p,
        [] => unreachable!(),
    };
    Ok(ShadowReport { pairings, extrapolated_limit })
}

/// Samples of an `R^m`-valued function, `m` values per node.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorGridFunction {
    grid: Grid,
    width: usize,
    values: Vec<f64>,
}

impl VectorGridFunction {
    pub fn from_fn(grid: &Grid, width: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let n = grid.dim();
        let mut values = Vec::with_capacity(grid.node_count() * width);
        for k in 0..grid.node_count() {
            let v = f(&grid.coord(k)[..n]);
            if v.len() != width {
                return Err(Error::VectorLength(width, v.len()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { node: k });
            }
            values.extend(v);
        }
        Ok(Self { grid: grid.clone(), width, values })
    }

    pub fn from_components(components: &[GridFunction]) -> Result<Self> {
        let first = components.first().ok_or(Error::VectorLength(1, 0))?;
        let grid = first.grid().clone();
        if components.iter().any(|c| c.grid() != &grid) {
            return Err(Error::GridMismatch);
        }
        let width = components.len();
        let values = (0..grid.node_count()).flat_map(|k| components.iter().map(move |c| c.value(k))).collect();
        Ok(Self { grid, width, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn at(&self, node: usize) -> &[f64] {
        &self.values[node * self.width..(node + 1) * self.width]
    }
}

/// `int_region <f(a), g(a)> da`.
pub fn section_pairing(f: &VectorGridFunction, g: &VectorGridFunction, region: &Region) -> Result<f64> {
    if f.grid != g.grid || region.grid() != &f.grid {
        return Err(Error::GridMismatch);
    }
    if f.width != g.width {
        return Err(Error::VectorLength(f.width, g.width));
    }
    let dots: Vec<f64> = (0..f.grid.node_count())
        .map(|k| f.at(k).iter().zip(g.at(k)).map(|(a, b)| a * b).sum())
        .collect();
    quadrature(&GridFunction::new(f.grid.clone(), dots)?, region)
}

/// Mollifies each component of a vector field.
pub fn mollify_sections(f: &VectorGridFunction, profile: &MollifierProfile, eps: f64) -> Result<(VectorGridFunction, Region)> {
    let m = profile.scale(eps)?;
    let mut comps = Vec::with_capacity(f.width);
    let mut region = None;
    for c in 0..f.width {
        let comp = GridFunction::new(f.grid.clone(), (0..f.grid.node_count()).map(|k| f.at(k)[c]).collect())?;
        let (ce, r) = mollify(&comp, &m)?;
        comps.push(ce);
        region = Some(r);
    }
    Ok((VectorGridFunction::from_components(&comps)?, region.expect("width >= 1")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convolution::orbit;
    use crate::grid::BoxDomain;

    fn unit_grid(cells: usize) -> Grid {
        Grid::uniform(BoxDomain::unit(1).unwrap(), cells).unwrap()
    }

    #[test]
    fn identity_converges_in_one_step() {
        let t = newton_net(|x| x, 0.0, 1.0, 3.7, -10.0, 10, 1e-12).unwrap();
        assert!(t.converged);
        assert_eq!(t.iterates.len(), 2);
        assert!((t.last() - 3.7).abs() < 1e-12);
    }

    #[test]
    fn square_root_of_two() {
        let t = newton_net(|x| x * x, 1.5, 3.0, 2.0, 1.5, 60, 1e-10).unwrap();
        assert!(t.converged);
        assert!(t.iterates.len() <= 61);
        assert!((t.last() - 2f64.sqrt()).abs() <= 1e-10);
        // fixed point of the net
        let step = (2.0 - t.last() * t.last()) / 3.0;
        assert!(step.abs() <= 1e-10 / 3.0);
    }

    #[test]
    fn wrong_sign_diverges() {
        let t = newton_net(|x| x * x, 1.5, -3.0, 2.0, 1.5, 8, 1e-10).unwrap();
        assert!(!t.converged);
        assert!(t.last() > 100.0);
        assert!(matches!(
            newton_net(|x| x * x, 1.5, -3.0, 2.0, 1.5, 60, 1e-10),
            Err(Error::NonFiniteIterate { .. })
        ));
    }

    #[test]
    fn zero_slope_rejected() {
        assert_eq!(newton_net(|x| x, 0.0, 0.0, 1.0, 0.0, 5, 1e-9), Err(Error::SingularDerivative));
    }

    #[test]
    fn newton_csv() {
        let t = newton_net(|x| x, 0.0, 1.0, 1.0, 0.0, 5, 1e-12).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    }

    #[test]
    fn invertibility_examples() {
        let g = unit_grid(400);
        let p = MollifierProfile::bump(1).unwrap();
        let id = GridFunction::from_fn(&g, |x| x[0]);
        let r = invertibility_check(&id, None, &p, 0.1).unwrap();
        assert!(r.invertible && (r.min_abs_df_eps - 1.0).abs() < 1e-9);

        let tau = 2.0 * std::f64::consts::PI;
        let mono = GridFunction::from_fn(&g, |x| x[0] + 0.1 * (tau * x[0]).sin());
        let du = GridFunction::from_fn(&g, |x| 1.0 + 0.1 * tau * (tau * x[0]).cos());
        let m = 1.0 - 0.1 * tau;
        let r = invertibility_check(&mono, Some(&du), &p, 0.1).unwrap();
        assert!(r.invertible && r.min_abs_df_eps >= m - 1e-3);
        assert!(r.min_abs_df.unwrap() >= m - 1e-9);

        let crit = GridFunction::from_fn(&g, |x| (x[0] - 0.5).powi(2));
        assert!(!invertibility_check(&crit, None, &p, 0.1).unwrap().invertible);
    }

    #[test]
    fn flow_examples() {
        let c = exponential_flow(0.7, 2.0, 1.3, 0.0);
        assert_eq!(c.residual, 0.0);
        let c = exponential_flow(1.0, 1.0, 0.5, 0.5);
        assert!((c.lhs - std::f64::consts::E).abs() < 1e-15);
        assert!(c.residual <= 1e-12);
        let c = exponential_flow(1.0, 1.0, 0.0, 1.0);
        assert!(c.rk4_error <= 1e-8);
    }

    #[test]
    fn shadow_of_smooth_orbit() {
        let g = unit_grid(800);
        let p = MollifierProfile::bump(1).unwrap();
        let f = GridFunction::from_fn(&g, |x| (3.0 * x[0]).sin() + x[0] * x[0]);
        let net = orbit(&f, &p, &[0.2, 0.1, 0.05, 0.025]).unwrap();
        let v = TestFunction::bump(vec![0.45], 0.2).unwrap();
        let direct = pair(&f, &v).unwrap();
        let linear = distributional_shadow(&net, &v).unwrap();
        assert!((linear.extrapolated_limit - direct).abs() < 1e-3);
        let quadratic = distributional_shadow_with_order(&net, &v, 2).unwrap();
        assert!((quadratic.extrapolated_limit - direct).abs() < 1e-6);

        let zero = TestFunction::zero(1).unwrap();
        let s = distributional_shadow(&net, &zero).unwrap();
        assert!(s.pairings.iter().all(|(_, v)| *v == 0.0));

        let wide = TestFunction::bump(vec![0.5], 0.35).unwrap();
        assert_eq!(distributional_shadow(&net, &wide), Err(Error::SupportEscapes));
    }

    #[test]
    fn section_pairing_examples() {
        let g = unit_grid(1000);
        let full = Region::full(&g);
        let e1 = VectorGridFunction::from_fn(&g, 2, |_| vec![1.0, 0.0]).unwrap();
        let e2 = VectorGridFunction::from_fn(&g, 2, |_| vec![0.0, 1.0]).unwrap();
        assert_eq!(section_pairing(&e1, &e2, &full).unwrap(), 0.0);
        assert!((section_pairing(&e1, &e1, &full).unwrap() - 1.0).abs() < 1e-14);
        let f = VectorGridFunction::from_fn(&g, 2, |a| vec![a[0], 1.0]).unwrap();
        let h = VectorGridFunction::from_fn(&g, 2, |a| vec![1.0, a[0]]).unwrap();
        assert!((section_pairing(&f, &h, &full).unwrap() - 1.0).abs() < 1e-6);
        let three = VectorGridFunction::from_fn(&g, 3, |_| vec![0.0; 3]).unwrap();
        assert_eq!(section_pairing(&f, &three, &full), Err(Error::VectorLength(2, 3)));
    }
}
