//! Uniform tensor grids on boxes, sampled functions, and quadrature.
//!
//! A [`Grid`] discretizes a box `[lo_1, hi_1] x ... x [lo_n, hi_n]` (n <= 3)
//! with `resolution[i]` cells along axis `i`. Nodes are stored row-major: the
//! last axis varies fastest. Integrals use the tensorized trapezoid rule, which
//! is exact on affine functions.

use std::io::{BufRead, Write};

use crate::csv::number;
use crate::error::{Error, Result};

/// Maximum supported dimension.
pub const MAX_DIM: usize = 3;

/// An axis-aligned box `lo < hi` in R^n.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Length { expected: lo.len(), got: hi.len() });
        }
        check_dim(lo.len())?;
        for (axis, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            // also rejects NaN bounds
            if l.partial_cmp(&h) != Some(std::cmp::Ordering::Less) || !l.is_finite() || !h.is_finite() {
                return Err(Error::EmptyBox { axis, lo: l, hi: h });
            }
        }
        Ok(Self { lo, hi })
    }

    /// The unit cube `[0, 1]^n`.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n], vec![1.0; n])
    }

    /// The symmetric cube `[-r, r]^n`.
    pub fn centered(n: usize, r: f64) -> Result<Self> {
        Self::new(vec![-r; n], vec![r; n])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn min_width(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).fold(f64::INFINITY, f64::min)
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).product()
    }

    /// Distance from `x` to the box boundary (negative outside).
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        (0..self.dim())
            .map(|i| (x[i] - self.lo[i]).min(self.hi[i] - x[i]))
            .fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn check_dim(n: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&n) {
        Ok(())
    } else {
        Err(Error::Dimension(n))
    }
}

/// A uniform tensor grid over a [`BoxDomain`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    bbox: BoxDomain,
    resolution: Vec<usize>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(bbox: BoxDomain, resolution: &[usize]) -> Result<Self> {
        if resolution.len() != bbox.dim() {
            return Err(Error::Length { expected: bbox.dim(), got: resolution.len() });
        }
        if let Some(axis) = resolution.iter().position(|&r| r == 0) {
            return Err(Error::ZeroResolution { axis });
        }
        let spacing = (0..bbox.dim()).map(|i| bbox.width(i) / resolution[i] as f64).collect();
        let mut strides = vec![1; bbox.dim()];
        for i in (0..bbox.dim().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * (resolution[i + 1] + 1);
        }
        Ok(Self { bbox, resolution: resolution.to_vec(), spacing, strides })
    }

    /// Same resolution on every axis.
    pub fn uniform(bbox: BoxDomain, cells: usize) -> Result<Self> {
        let n = bbox.dim();
        Self::new(bbox, &vec![cells; n])
    }

    pub fn bbox(&self) -> &BoxDomain {
        &self.bbox
    }

    pub fn dim(&self) -> usize {
        self.bbox.dim()
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub(crate) fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn node_count(&self) -> usize {
        self.resolution.iter().map(|r| r + 1).product()
    }

    /// Volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Per-axis node indices of a flat node index.
    pub fn node_multi(&self, mut node: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for (i, &s) in self.strides.iter().enumerate() {
            idx[i] = node / s;
            node %= s;
        }
        idx
    }

    pub fn node_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Coordinates of a node; entries past `dim()` are zero.
    pub fn coord(&self, node: usize) -> [f64; MAX_DIM] {
        let idx = self.node_multi(node);
        let mut x = [0.0; MAX_DIM];
        for i in 0..self.dim() {
            x[i] = self.bbox.lo[i] + idx[i] as f64 * self.spacing[i];
        }
        x
    }

    /// Trapezoid weight of a node.
    pub fn weight(&self, node: usize) -> f64 {
        self.weight_factor(node) * self.cell_volume()
    }

    /// Trapezoid weight in units of the cell volume: a power of one half.
    pub(crate) fn weight_factor(&self, node: usize) -> f64 {
        let idx = self.node_multi(node);
        (0..self.dim())
            .filter(|&i| idx[i] == 0 || idx[i] == self.resolution[i])
            .fold(1.0, |w, _| 0.5 * w)
    }

    /// Distance of a node to the box boundary, computed in index space so the
    /// result is exactly symmetric about the box center.
    pub fn boundary_distance(&self, node: usize) -> f64 {
        let idx = self.node_multi(node);
        (0..self.dim())
            .map(|i| idx[i].min(self.resolution[i] - idx[i]) as f64 * self.spacing[i])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn nodes(&self) -> impl Iterator<Item = [f64; MAX_DIM]> + '_ {
        (0..self.node_count()).map(move |k| self.coord(k))
    }
}

/// Real values sampled at every node of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Length { expected: grid.node_count(), got: values.len() });
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every node.
    ///
    /// Panics if `f` returns a non-finite value; use [`GridFunction::try_from_fn`]
    /// for fallible sampling.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        Self::try_from_fn(grid, |x| Ok(f(x))).expect("sampled function must be finite")
    }

    pub fn try_from_fn(grid: &Grid, f: impl Fn(&[f64]) -> Result<f64>) -> Result<Self> {
        let n = grid.dim();
        let values = (0..grid.node_count())
            .map(|k| f(&grid.coord(k)[..n]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid.clone(), values)
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.node_count()] }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn value(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub(crate) fn from_parts(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.node_count());
        Self { grid, values }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_parts(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `a * self + b * other`.
    pub fn linear_combination(&self, a: f64, other: &GridFunction, b: f64) -> Result<Self> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Self::from_parts(self.grid.clone(), values))
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.linear_combination(1.0, other, -1.0)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &GridFunction) -> Result<Self> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| x * y).collect();
        Ok(Self::from_parts(self.grid.clone(), values))
    }

    /// Copy with one node replaced.
    pub fn with_value(&self, node: usize, v: f64) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::NonFinite { node });
        }
        let mut out = self.clone();
        out.values[node] = v;
        Ok(out)
    }

    pub(crate) fn same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Writes the function as CSV: a `# grid lo=.. hi=.. res=..` header, then
    /// one `coord..,value` row per node.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let g = &self.grid;
        let join = |v: &[f64]| v.iter().map(|&x| number(x)).collect::<Vec<_>>().join(",");
        let res = g.resolution.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(",");
        writeln!(w, "# grid lo={} hi={} res={}", join(g.bbox.lo()), join(g.bbox.hi()), res)?;
        for (k, v) in self.values.iter().enumerate() {
            let x = g.coord(k);
            for xi in &x[..g.dim()] {
                write!(w, "{},", number(*xi))?;
            }
            writeln!(w, "{}", number(*v))?;
        }
        Ok(())
    }

    /// Reads the format produced by [`GridFunction::write_csv`]. Additional
    /// `#` comment lines after the header are ignored.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let csv_err = |line: usize, message: &str| Error::Csv { line, message: message.into() };
        let mut lines = r.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| csv_err(1, "empty input"))?;
        let header = header.map_err(|e| csv_err(1, &e.to_string()))?;
        let rest = header
            .strip_prefix("# grid")
            .ok_or_else(|| csv_err(1, "expected '# grid' header"))?;
        let (mut lo, mut hi, mut res) = (None, None, None);
        for field in rest.split_whitespace() {
            let (key, val) = field.split_once('=').ok_or_else(|| csv_err(1, "expected key=value"))?;
            let floats = || -> Result<Vec<f64>> {
                val.split(',')
                    .map(|s| s.parse::<f64>().map_err(|_| csv_err(1, "bad number")))
                    .collect()
            };
            match key {
                "lo" => lo = Some(floats()?),
                "hi" => hi = Some(floats()?),
                "res" => {
                    res = Some(
                        val.split(',')
                            .map(|s| s.parse::<usize>().map_err(|_| csv_err(1, "bad resolution")))
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                _ => return Err(csv_err(1, "unknown header key")),
            }
        }
        let (lo, hi, res) = match (lo, hi, res) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => return Err(csv_err(1, "header needs lo, hi and res")),
        };
        let grid = Grid::new(BoxDomain::new(lo, hi)?, &res)?;
        let n = grid.dim();
        let mut values = Vec::with_capacity(grid.node_count());
        for (i, line) in lines {
            let line = line.map_err(|e| csv_err(i + 1, &e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != n + 1 {
                return Err(csv_err(i + 1, "wrong number of columns"));
            }
            let v = fields[n].trim().parse::<f64>().map_err(|_| csv_err(i + 1, "bad value"))?;
            values.push(v);
        }
        GridFunction::new(grid, values)
    }
}

/// A subset of grid nodes, typically a compactly contained subdomain.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    grid: Grid,
    mask: Vec<bool>,
}

impl Region {
    pub fn full(grid: &Grid) -> Self {
        Self { grid: grid.clone(), mask: vec![true; grid.node_count()] }
    }

    pub fn from_mask(grid: &Grid, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != grid.node_count() {
            return Err(Error::Length { expected: grid.node_count(), got: mask.len() });
        }
        Ok(Self { grid: grid.clone(), mask })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn contains(&self, node: usize) -> bool {
        self.mask[node]
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }

    /// Nodes in the region, in increasing order.
    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter_map(|(k, &m)| m.then_some(k))
    }

    pub fn is_subset_of(&self, other: &Region) -> bool {
        self.grid == other.grid && self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }

    pub fn intersect(&self, other: &Region) -> Result<Region> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let mask = self.mask.iter().zip(&other.mask).map(|(&a, &b)| a && b).collect();
        Ok(Region { grid: self.grid.clone(), mask })
    }

    fn check(&self, f: &GridFunction) -> Result<()> {
        if self.grid == f.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Trapezoid-rule integral of `f` over `region`; nodes outside the region
/// contribute zero.
pub fn quadrature(f: &GridFunction, region: &Region) -> Result<f64> {
    region.check(f)?;
    let sum: f64 = region.nodes().map(|k| f.grid.weight_factor(k) * f.values[k]).sum();
    Ok(sum * f.grid.cell_volume())
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

/// `L^p` norm over a region; `p = f64::INFINITY` gives the maximum of `|f|`
/// over the region nodes (zero on an empty region).
pub fn lp_norm(f: &GridFunction, p: f64, region: &Region) -> Result<f64> {
    check_exponent(p)?;
    region.check(f)?;
    if p.is_infinite() {
        return Ok(region.nodes().map(|k| f.values[k].abs()).fold(0.0, f64::max));
    }
    let sum: f64 = region.nodes().map(|k| f.grid.weight_factor(k) * f.values[k].abs().powf(p)).sum();
    Ok((sum * f.grid.cell_volume()).powf(1.0 / p))
}

/// Nodes whose distance to the box boundary exceeds `eps`.
pub fn interior_region(grid: &Grid, eps: f64) -> Region {
    let mask = (0..grid.node_count()).map(|k| grid.boundary_distance(k) > eps).collect();
    Region { grid: grid.clone(), mask }
}

/// Almost-everywhere comparison: returns the measure of `{|f - g| > tol}` and
/// whether it is at most one cell volume.
pub fn ae_equal(f: &GridFunction, g: &GridFunction, tol: f64) -> Result<(bool, f64)> {
    f.same_grid(g)?;
    let measure: f64 = (0..f.values.len())
        .filter(|&k| (f.values[k] - g.values[k]).abs() > tol)
        .map(|k| f.grid.weight(k))
        .sum();
    // one interior node carries exactly one cell volume
    let cell = f.grid.cell_volume();
    Ok((measure <= cell * (1.0 + 1e-12), measure))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(cells: usize) -> Grid {
        Grid::uniform(BoxDomain::unit(1).unwrap(), cells).unwrap()
    }

    #[test]
    fn make_grid_nodes() {
        let g = unit_grid(4);
        let xs: Vec<f64> = g.nodes().map(|x| x[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);

        let g2 = Grid::new(BoxDomain::unit(2).unwrap(), &[2, 2]).unwrap();
        assert_eq!(g2.node_count(), 9);
        assert_eq!(g2.coord(5)[..2], [0.5, 1.0]);
        assert_eq!(g2.node_index(&[1, 2]), 5);
    }

    #[test]
    fn make_grid_errors() {
        assert_eq!(
            Grid::uniform(BoxDomain::unit(1).unwrap(), 0),
            Err(Error::ZeroResolution { axis: 0 })
        );
        assert!(matches!(BoxDomain::new(vec![1.0], vec![1.0]), Err(Error::EmptyBox { .. })));
        assert!(matches!(BoxDomain::new(vec![0.0; 4], vec![1.0; 4]), Err(Error::Dimension(4))));
    }

    #[test]
    fn quadrature_examples() {
        let g = unit_grid(10);
        let full = Region::full(&g);
        assert_eq!(quadrature(&GridFunction::from_fn(&g, |_| 1.0), &full).unwrap(), 1.0);
        let lin = quadrature(&GridFunction::from_fn(&g, |x| x[0]), &full).unwrap();
        assert!((lin - 0.5).abs() < 1e-15);

        let g = unit_grid(100);
        let sq = quadrature(&GridFunction::from_fn(&g, |x| x[0] * x[0]), &Region::full(&g)).unwrap();
        assert!((sq - 1.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn quadrature_box_volume() {
        let b = BoxDomain::new(vec![-1.0, 0.0, 2.0], vec![1.0, 0.5, 5.0]).unwrap();
        let g = Grid::new(b, &[3, 5, 7]).unwrap();
        let one = GridFunction::from_fn(&g, |_| 1.0);
        assert!((quadrature(&one, &Region::full(&g)).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn quadrature_grid_mismatch() {
        let f = GridFunction::zeros(&unit_grid(4));
        assert_eq!(quadrature(&f, &Region::full(&unit_grid(5))), Err(Error::GridMismatch));
    }

    #[test]
    fn lp_norm_examples() {
        let g = unit_grid(200);
        let full = Region::full(&g);
        let c = GridFunction::from_fn(&g, |_| -2.0);
        assert!((lp_norm(&c, 3.0, &full).unwrap() - 2.0).abs() < 1e-12);
        let x = GridFunction::from_fn(&g, |x| x[0]);
        assert_eq!(lp_norm(&x, f64::INFINITY, &full).unwrap(), 1.0);
        assert!((lp_norm(&x, 2.0, &full).unwrap() - (1.0f64 / 3.0).sqrt()).abs() < 1e-4);
        assert_eq!(lp_norm(&x, 0.5, &full), Err(Error::InvalidExponent(0.5)));
    }

    #[test]
    fn interior_region_examples() {
        let g = unit_grid(10);
        let r0 = interior_region(&g, 0.0);
        assert!(!r0.contains(0) && !r0.contains(10));
        assert_eq!(r0.len(), 9);
        assert!(interior_region(&g, 0.5).is_empty());

        let nodes: Vec<usize> = interior_region(&g, 0.25).nodes().collect();
        // enumeration oracle: j*h > 0.25 and (10-j)*h > 0.25
        let oracle: Vec<usize> = (0..=10usize)
            .filter(|&j| j.min(10 - j) as f64 / 10.0 > 0.25)
            .collect();
        assert_eq!(nodes, oracle);
        assert_eq!(nodes, vec![3, 4, 5, 6, 7]);
    }

    #[test]
    fn ae_equal_examples() {
        let g = unit_grid(10);
        let f = GridFunction::from_fn(&g, |x| x[0]);
        assert_eq!(ae_equal(&f, &f, 1e-12).unwrap(), (true, 0.0));

        let spiked = f.with_value(4, 7.0).unwrap();
        let (eq, m) = ae_equal(&f, &spiked, 1e-12).unwrap();
        assert!(eq && m <= g.cell_volume() + 1e-15);

        let zero = GridFunction::zeros(&g);
        let one = GridFunction::from_fn(&g, |_| 1.0);
        let (eq, m) = ae_equal(&zero, &one, 0.5).unwrap();
        assert!(!eq);
        assert!((m - 1.0).abs() < 1e-14);
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid::new(BoxDomain::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap(), &[3, 2]).unwrap();
        let f = GridFunction::from_fn(&g, |x| (x[0] + 0.1) * x[1].sin());
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# grid lo="));
        assert_eq!(text.lines().count(), 1 + g.node_count());
        let back = GridFunction::read_csv(&buf[..]).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn csv_rejects_bad_header() {
        assert!(matches!(GridFunction::read_csv(&b"0,1\n"[..]), Err(Error::Csv { line: 1, .. })));
    }
}
