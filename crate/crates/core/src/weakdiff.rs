//! Weak derivatives, checked rather than solved for.
//!
//! A candidate `u` is the weak `alpha`-derivative of `f` when
//! `int phi u = (-1)^|alpha| int f d^alpha phi` for every compactly supported
//! smooth `phi`. This module evaluates that identity over a finite family of
//! [`TestFunction`]s and reports the residuals. It also computes derivatives of
//! mollified functions by convolving against the differentiated kernel, and
//! the residual between the two routes `d^alpha (phi_eps * f)` and
//! `phi_eps * (d^alpha f)`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::bump;
use crate::convolution::{convolve_interior, mollify};
use crate::csv::number;
use crate::error::{Error, Result};
use crate::grid::{check_dim, lp_norm, quadrature, BoxDomain, GridFunction, Region, MAX_DIM};
use crate::mollifier::MollifierProfile;

/// Highest derivative order with closed-form kernels and test functions.
pub const MAX_ORDER: u32 = 2;

/// `alpha = (alpha_1, ..., alpha_n)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(alpha: Vec<u32>) -> Result<Self> {
        check_dim(alpha.len())?;
        Ok(Self(alpha))
    }

    /// The identity operator.
    pub fn zero(n: usize) -> Self {
        Self(vec![0; n])
    }

    /// First derivative along `axis`.
    pub fn unit(n: usize, axis: usize) -> Self {
        let mut a = vec![0; n];
        a[axis] = 1;
        Self(a)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `|alpha| = sum alpha_i`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    /// All multi-indices of dimension `n` and order exactly `k`, in
    /// lexicographically decreasing order.
    pub fn all_of_order(n: usize, k: u32) -> Vec<MultiIndex> {
        fn fill(prefix: &mut Vec<u32>, n: usize, left: u32, out: &mut Vec<MultiIndex>) {
            if prefix.len() + 1 == n {
                prefix.push(left);
                out.push(MultiIndex(prefix.clone()));
                prefix.pop();
                return;
            }
            for a in (0..=left).rev() {
                prefix.push(a);
                fill(prefix, n, left - a, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        if n > 0 {
            fill(&mut Vec::with_capacity(n), n, k, &mut out);
        }
        out
    }

    /// All multi-indices with `|alpha| <= k`, by increasing order.
    pub fn all_up_to(n: usize, k: u32) -> Vec<MultiIndex> {
        (0..=k).flat_map(|j| Self::all_of_order(n, j)).collect()
    }

    /// True when `self <= other` componentwise.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    fn check_for(&self, n: usize) -> Result<()> {
        if self.dim() != n {
            return Err(Error::MultiIndexLength { expected: n, got: self.dim() });
        }
        if self.order() > MAX_ORDER {
            return Err(Error::OrderTooHigh(self.order()));
        }
        Ok(())
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl FromStr for MultiIndex {
    type Err = Error;

    /// Accepts `1,0`, `(1,0)` or `1`.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let parts = inner
            .split(',')
            .map(|p| {
                p.trim().parse::<u32>().map_err(|_| Error::BadMultiIndex(s.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        MultiIndex::new(parts)
    }
}

/// `A * z^beta * e * exp(1 / (|z|^2 - 1))` with `z = (x - center) / radius`:
/// a bump of peak `A`, optionally times a monomial, supported in the open
/// ball of the given radius.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    center: Vec<f64>,
    radius: f64,
    amplitude: f64,
    monomial: Vec<u32>,
}

fn falling(b: u32, g: u32) -> f64 {
    ((b - g + 1)..=b).map(f64::from).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    falling(n, k) / (1..=k).map(f64::from).product::<f64>()
}

impl TestFunction {
    pub fn bump(center: Vec<f64>, radius: f64) -> Result<Self> {
        check_dim(center.len())?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidEpsilon(radius));
        }
        let n = center.len();
        Ok(Self { center, radius, amplitude: 1.0, monomial: vec![0; n] })
    }

    /// The zero test function in dimension `n` (support: a tiny ball at the
    /// origin of the unit cube's center).
    pub fn zero(n: usize) -> Result<Self> {
        Ok(Self::bump(vec![0.5; n], 0.1)?.with_amplitude(0.0))
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_monomial(mut self, beta: Vec<u32>) -> Result<Self> {
        if beta.len() != self.center.len() {
            return Err(Error::MultiIndexLength { expected: self.center.len(), got: beta.len() });
        }
        self.monomial = beta;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Closed bounding box of the support.
    pub fn support_box(&self) -> (Vec<f64>, Vec<f64>) {
        let lo = self.center.iter().map(|c| c - self.radius).collect();
        let hi = self.center.iter().map(|c| c + self.radius).collect();
        (lo, hi)
    }

    /// True when the support box lies strictly inside `bbox`.
    pub fn fits_in(&self, bbox: &BoxDomain) -> bool {
        let (lo, hi) = self.support_box();
        bbox.dim() == self.dim()
            && (0..self.dim()).all(|i| lo[i] > bbox.lo()[i] && hi[i] < bbox.hi()[i])
    }

    fn local(&self, x: &[f64]) -> [f64; MAX_DIM] {
        let mut z = [0.0; MAX_DIM];
        for i in 0..self.dim() {
            z[i] = (x[i] - self.center[i]) / self.radius;
        }
        z
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let z = self.local(x);
        let z = &z[..self.dim()];
        let mono: f64 = z.iter().zip(&self.monomial).map(|(zi, &b)| zi.powi(b as i32)).product();
        self.amplitude * std::f64::consts::E * mono * bump::value(z)
    }

    /// `d^alpha` by the Leibniz rule over the monomial and bump factors.
    pub fn derivative(&self, alpha: &MultiIndex, x: &[f64]) -> f64 {
        let n = self.dim();
        let z = self.local(x);
        let z = &z[..n];
        if z.iter().map(|v| v * v).sum::<f64>() >= 1.0 {
            return 0.0;
        }
        let a = alpha.as_slice();
        let mut total = 0.0;
        // every gamma <= alpha
        let mut gamma = vec![0u32; n];
        loop {
            let mut mono = 1.0;
            let mut coef = 1.0;
            for i in 0..n {
                if gamma[i] > self.monomial[i] {
                    mono = 0.0;
                    break;
                }
                mono *= falling(self.monomial[i], gamma[i]) * z[i].powi((self.monomial[i] - gamma[i]) as i32);
                coef *= binomial(a[i], gamma[i]);
            }
            if mono != 0.0 {
                let rest: Vec<u32> = (0..n).map(|i| a[i] - gamma[i]).collect();
                total += coef * mono * bump::derivative(&rest, z);
            }
            let mut axis = n;
            loop {
                if axis == 0 {
                    let scale = self.radius.powi(-(alpha.order() as i32));
                    return self.amplitude * std::f64::consts::E * scale * total;
                }
                axis -= 1;
                if gamma[axis] < a[axis] {
                    gamma[axis] += 1;
                    break;
                }
                gamma[axis] = 0;
            }
        }
    }

    /// A deterministic family of `count` test functions inside `bbox`:
    /// translated and dilated bumps, some multiplied by monomials of degree
    /// one or two.
    pub fn catalog(bbox: &BoxDomain, count: usize) -> Vec<TestFunction> {
        const CENTERS: [f64; 12] = [0.50, 0.40, 0.60, 0.45, 0.55, 0.35, 0.65, 0.50, 0.30, 0.70, 0.42, 0.58];
        const RADII: [f64; 12] = [0.30, 0.20, 0.20, 0.25, 0.25, 0.15, 0.15, 0.12, 0.18, 0.18, 0.10, 0.10];
        const DEGREES: [u32; 12] = [0, 0, 1, 2, 1, 0, 2, 1, 0, 1, 2, 0];
        let n = bbox.dim();
        (0..count)
            .map(|i| {
                let slot = i % CENTERS.len();
                let center: Vec<f64> = (0..n)
                    .map(|a| bbox.lo()[a] + CENTERS[(slot + 3 * a) % CENTERS.len()] * bbox.width(a))
                    .collect();
                let room = (0..n)
                    .map(|a| (center[a] - bbox.lo()[a]).min(bbox.hi()[a] - center[a]))
                    .fold(f64::INFINITY, f64::min);
                // later cycles shrink so repeated slots stay distinct
                let shrink = 1.0 / (1 + i / CENTERS.len()) as f64;
                let radius = (RADII[slot] * bbox.min_width() * shrink).min(0.95 * room);
                let mut beta = vec![0u32; n];
                match DEGREES[slot] {
                    0 => {}
                    2 if n > 1 && slot % 2 == 1 => {
                        beta[0] = 1;
                        beta[1] = 1;
                    }
                    d => beta[slot % n] = d,
                }
                TestFunction { center, radius, amplitude: 1.0, monomial: beta }
            })
            .collect()
    }

    fn sample(&self, f: &GridFunction, g: impl Fn(&[f64]) -> f64) -> GridFunction {
        let grid = f.grid();
        let n = grid.dim();
        GridFunction::from_fn(grid, |x| if self.in_support_box(x) { g(&x[..n]) } else { 0.0 })
    }

    fn in_support_box(&self, x: &[f64]) -> bool {
        (0..self.dim()).all(|i| (x[i] - self.center[i]).abs() < self.radius)
    }
}

fn check_test_fits(f: &GridFunction, phi: &TestFunction) -> Result<()> {
    if phi.fits_in(f.grid().bbox()) {
        Ok(())
    } else {
        Err(Error::SupportEscapes)
    }
}

/// `<f, phi> = int f phi`, by trapezoid quadrature over the grid.
pub fn pair(f: &GridFunction, phi: &TestFunction) -> Result<f64> {
    check_test_fits(f, phi)?;
    let samples = phi.sample(f, |x| phi.value(x));
    quadrature(&f.mul(&samples)?, &Region::full(f.grid()))
}

fn pair_derivative(f: &GridFunction, phi: &TestFunction, alpha: &MultiIndex) -> Result<f64> {
    check_test_fits(f, phi)?;
    let samples = phi.sample(f, |x| phi.derivative(alpha, x));
    quadrature(&f.mul(&samples)?, &Region::full(f.grid()))
}

/// Residuals of the integration-by-parts identity, one per test function.
#[derive(Debug, Clone, PartialEq)]
pub struct PairingResidual {
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub tol: f64,
    pub verdict: bool,
}

impl PairingResidual {
    /// CSV with header `test_id,residual`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "test_id,residual")?;
        for (j, r) in self.residuals.iter().enumerate() {
            writeln!(w, "{},{}", j, number(*r))?;
        }
        Ok(())
    }
}

/// `r_j = |<u, phi_j> - (-1)^|alpha| <f, d^alpha phi_j>|`; the verdict holds
/// when every residual is at most `tol`.
pub fn verify_weak_derivative(
    f: &GridFunction,
    u: &GridFunction,
    alpha: &MultiIndex,
    tests: &[TestFunction],
    tol: f64,
) -> Result<PairingResidual> {
    f.same_grid(u)?;
    alpha.check_for(f.grid().dim())?;
    if tests.is_empty() {
        return Err(Error::NoTestFunctions);
    }
    let sign = if alpha.order().is_multiple_of(2) { 1.0 } else { -1.0 };
    let residuals = tests
        .par_iter()
        .map(|phi| Ok((pair(u, phi)? - sign * pair_derivative(f, phi, alpha)?).abs()))
        .collect::<Result<Vec<f64>>>()?;
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(PairingResidual { residuals, max_residual, tol, verdict: max_residual <= tol })
}

/// `d^alpha (phi_eps * f) = (d^alpha phi_eps) * f` on `interior_region(grid, eps)`,
/// using the closed-form kernel derivative.
pub fn mollified_derivative(
    f: &GridFunction,
    profile: &MollifierProfile,
    alpha: &MultiIndex,
    eps: f64,
) -> Result<(GridFunction, Region)> {
    alpha.check_for(f.grid().dim())?;
    if profile.dim() != f.grid().dim() {
        return Err(Error::Length { expected: f.grid().dim(), got: profile.dim() });
    }
    let m = profile.scale(eps)?;
    convolve_interior(f, eps, alpha, |z| m.derivative(alpha, z))
}

/// `||d^alpha (phi_eps * f) - phi_eps * u||_{L^p}` on the interior region of
/// `eps`, where `u` is the (already verified) weak derivative of `f`.
pub fn commutation_residual(
    f: &GridFunction,
    u: &GridFunction,
    profile: &MollifierProfile,
    alpha: &MultiIndex,
    eps: f64,
    p: f64,
) -> Result<f64> {
    f.same_grid(u)?;
    let (df_eps, region) = mollified_derivative(f, profile, alpha, eps)?;
    let (u_eps, u_region) = mollify(u, &profile.scale(eps)?)?;
    if region != u_region {
        return Err(Error::GridMismatch);
    }
    lp_norm(&df_eps.sub(&u_eps)?, p, &region)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    fn unit_grid(cells: usize) -> Grid {
        Grid::uniform(BoxDomain::unit(1).unwrap(), cells).unwrap()
    }

    fn sign(v: f64) -> f64 {
        if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        }
    }

    #[test]
    fn multi_index_enumeration() {
        assert_eq!(MultiIndex::all_of_order(2, 2).len(), 3);
        assert_eq!(MultiIndex::all_up_to(3, 2).len(), 10);
        assert_eq!(MultiIndex::all_of_order(1, 0), vec![MultiIndex::zero(1)]);
        assert_eq!("(1,0)".parse::<MultiIndex>().unwrap(), MultiIndex::unit(2, 0));
        assert_eq!("2".parse::<MultiIndex>().unwrap().order(), 2);
        assert_eq!(MultiIndex::unit(2, 1).to_string(), "(0,1)");
    }

    #[test]
    fn test_function_derivatives_match_differences() {
        let phi = TestFunction::bump(vec![0.4, 0.55], 0.3).unwrap().with_monomial(vec![1, 1]).unwrap();
        let x = [0.47, 0.5];
        let h = 1e-6;
        for axis in 0..2 {
            let a = MultiIndex::unit(2, axis);
            let mut xp = x;
            let mut xm = x;
            xp[axis] += h;
            xm[axis] -= h;
            let fd = (phi.value(&xp) - phi.value(&xm)) / (2.0 * h);
            assert!((phi.derivative(&a, &x) - fd).abs() < 1e-6);
            let mixed = MultiIndex::new(vec![1, 1]).unwrap();
            let other = MultiIndex::unit(2, 1 - axis);
            let fd2 = (phi.derivative(&other, &xp) - phi.derivative(&other, &xm)) / (2.0 * h);
            assert!((phi.derivative(&mixed, &x) - fd2).abs() < 1e-4);
        }
    }

    #[test]
    fn catalog_fits_and_varies() {
        for n in 1..=3 {
            let b = BoxDomain::unit(n).unwrap();
            let cat = TestFunction::catalog(&b, 16);
            assert_eq!(cat.len(), 16);
            assert!(cat.iter().all(|t| t.fits_in(&b)));
            for (i, a) in cat.iter().enumerate() {
                for c in &cat[i + 1..] {
                    assert_ne!(a, c);
                }
            }
        }
    }

    #[test]
    fn pair_examples() {
        let g = unit_grid(400);
        let phi = TestFunction::bump(vec![0.5], 0.3).unwrap();
        assert_eq!(pair(&GridFunction::zeros(&g), &phi).unwrap(), 0.0);

        let one = pair(&GridFunction::from_fn(&g, |_| 1.0), &phi).unwrap();
        let mass = quadrature(&GridFunction::from_fn(&g, |x| phi.value(x)), &Region::full(&g)).unwrap();
        assert!((one - mass).abs() < 1e-15);

        // refinement oracle at 1e4 cells
        let fine = unit_grid(10_000);
        let reference = pair(&GridFunction::from_fn(&fine, |x| x[0]), &phi).unwrap();
        let coarse = pair(&GridFunction::from_fn(&g, |x| x[0]), &phi).unwrap();
        assert!((coarse - reference).abs() < 1e-6);
    }

    #[test]
    fn pair_rejects_escaping_support() {
        let g = unit_grid(100);
        let phi = TestFunction::bump(vec![0.1], 0.2).unwrap();
        assert_eq!(pair(&GridFunction::zeros(&g), &phi), Err(Error::SupportEscapes));
    }

    #[test]
    fn smooth_weak_derivative_verified() {
        let g = unit_grid(400);
        let f = GridFunction::from_fn(&g, |x| (2.0 * PI * x[0]).sin());
        let u = GridFunction::from_fn(&g, |x| 2.0 * PI * (2.0 * PI * x[0]).cos());
        let tests = TestFunction::catalog(g.bbox(), 8);
        let r = verify_weak_derivative(&f, &u, &MultiIndex::unit(1, 0), &tests, 1e-4).unwrap();
        assert!(r.verdict, "{:?}", r.residuals);
    }

    #[test]
    fn kink_weak_derivative_verified() {
        let g = unit_grid(400);
        let f = GridFunction::from_fn(&g, |x| (x[0] - 0.5).abs());
        let u = GridFunction::from_fn(&g, |x| sign(x[0] - 0.5));
        let tests = TestFunction::catalog(g.bbox(), 8);
        let r = verify_weak_derivative(&f, &u, &MultiIndex::unit(1, 0), &tests, 1e-4).unwrap();
        assert!(r.verdict, "{:?}", r.residuals);
    }

    #[test]
    fn heaviside_has_no_weak_derivative() {
        let g = unit_grid(400);
        let f = GridFunction::from_fn(&g, |x| if x[0] >= 0.5 { 1.0 } else { 0.0 });
        let u = GridFunction::zeros(&g);
        let tests = TestFunction::catalog(g.bbox(), 8);
        let r = verify_weak_derivative(&f, &u, &MultiIndex::unit(1, 0), &tests, 1e-4).unwrap();
        assert!(!r.verdict);
        // the centered bump has phi(0.5) = 1
        assert!((r.residuals[0] - 1.0).abs() < 1e-2);
    }

    #[test]
    fn verify_errors() {
        let g = unit_grid(50);
        let f = GridFunction::zeros(&g);
        let tests = TestFunction::catalog(g.bbox(), 2);
        let third = MultiIndex::new(vec![3]).unwrap();
        assert_eq!(verify_weak_derivative(&f, &f, &third, &tests, 1.0), Err(Error::OrderTooHigh(3)));
        assert_eq!(
            verify_weak_derivative(&f, &f, &MultiIndex::unit(1, 0), &[], 1.0),
            Err(Error::NoTestFunctions)
        );
    }

    #[test]
    fn mollified_derivative_examples() {
        let g = unit_grid(400);
        let p = MollifierProfile::bump(1).unwrap();
        let d1 = MultiIndex::unit(1, 0);

        let c = GridFunction::from_fn(&g, |_| 3.0);
        let (dc, region) = mollified_derivative(&c, &p, &d1, 0.1).unwrap();
        assert!(region.nodes().all(|k| dc.value(k).abs() < 1e-8));

        let lin = GridFunction::from_fn(&g, |x| -2.5 * x[0] + 1.0);
        let (dl, region) = mollified_derivative(&lin, &p, &d1, 0.1).unwrap();
        assert!(region.nodes().all(|k| (dl.value(k) + 2.5).abs() < 1e-6));

        let kink = GridFunction::from_fn(&g, |x| (x[0] - 0.5).abs());
        let (dk, region) = mollified_derivative(&kink, &p, &d1, 0.1).unwrap();
        let vals: Vec<f64> = region.nodes().map(|k| dk.value(k)).collect();
        assert!(vals.iter().all(|v| (-1.0 - 1e-12..=1.0 + 1e-12).contains(v)));
        assert!(vals.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(dk.value(200).abs() < 1e-12);
    }

    #[test]
    fn commutation_smooth_and_affine() {
        let g = unit_grid(400);
        let p = MollifierProfile::bump(1).unwrap();
        let d1 = MultiIndex::unit(1, 0);
        let f = GridFunction::from_fn(&g, |x| (2.0 * PI * x[0]).sin());
        let u = GridFunction::from_fn(&g, |x| 2.0 * PI * (2.0 * PI * x[0]).cos());
        assert!(commutation_residual(&f, &u, &p, &d1, 0.1, 2.0).unwrap() <= 1e-3);

        let a = GridFunction::from_fn(&g, |x| 7.0 * x[0] - 1.0);
        let s = GridFunction::from_fn(&g, |_| 7.0);
        assert!(commutation_residual(&a, &s, &p, &d1, 0.1, 2.0).unwrap() <= 1e-8);
    }

    #[test]
    fn second_order_kernel_on_quadratic() {
        let g = unit_grid(200);
        let p = MollifierProfile::bump(1).unwrap();
        let f = GridFunction::from_fn(&g, |x| 1.5 * x[0] * x[0] - x[0]);
        let (d2, region) = mollified_derivative(&f, &p, &MultiIndex::new(vec![2]).unwrap(), 0.1).unwrap();
        assert!(region.nodes().all(|k| (d2.value(k) - 3.0).abs() < 1e-6));
    }
}
