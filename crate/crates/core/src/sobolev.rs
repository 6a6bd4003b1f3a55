//! `W^{k,p}` norms and membership decisions backed by explicit evidence.

use std::collections::BTreeMap;
use std::io::Write;

use crate::convolution::{check_ladder, mollify, mollify_zero_extended};
use crate::csv::{field, number};
use crate::error::{Error, Result};
use crate::grid::{check_exponent, lp_norm, quadrature, Grid, GridFunction, Region};
use crate::mollifier::MollifierProfile;
use crate::weakdiff::{verify_weak_derivative, MultiIndex, TestFunction, MAX_ORDER};

/// Candidate derivatives `D_alpha f` keyed by multi-index; `alpha = 0` is `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeFamily {
    grid: Grid,
    members: BTreeMap<MultiIndex, GridFunction>,
}

impl DerivativeFamily {
    pub fn new(f: GridFunction) -> Self {
        let grid = f.grid().clone();
        let mut members = BTreeMap::new();
        members.insert(MultiIndex::zero(grid.dim()), f);
        Self { grid, members }
    }

    pub fn insert(&mut self, alpha: MultiIndex, g: GridFunction) -> Result<()> {
        if alpha.dim() != self.grid.dim() {
            return Err(Error::MultiIndexLength { expected: self.grid.dim(), got: alpha.dim() });
        }
        if g.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        self.members.insert(alpha, g);
        Ok(())
    }

    pub fn with(mut self, alpha: MultiIndex, g: GridFunction) -> Result<Self> {
        self.insert(alpha, g)?;
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn get(&self, alpha: &MultiIndex) -> Option<&GridFunction> {
        self.members.get(alpha)
    }

    pub fn base(&self) -> &GridFunction {
        &self.members[&MultiIndex::zero(self.grid.dim())]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &GridFunction)> {
        self.members.iter()
    }

    /// Errors unless every `|alpha| <= k` is present.
    pub fn check_complete(&self, k: u32) -> Result<()> {
        match MultiIndex::all_up_to(self.grid.dim(), k).into_iter().find(|a| !self.members.contains_key(a)) {
            Some(missing) => Err(Error::IncompleteFamily(missing.to_string())),
            None => Ok(()),
        }
    }

    pub fn restrict(&self, k: u32) -> Self {
        let members = self.members.iter().filter(|(a, _)| a.order() <= k).map(|(a, g)| (a.clone(), g.clone())).collect();
        Self { grid: self.grid.clone(), members }
    }

    pub fn scale(&self, c: f64) -> Self {
        let members = self.members.iter().map(|(a, g)| (a.clone(), g.scale(c))).collect();
        Self { grid: self.grid.clone(), members }
    }

    /// Mollifies every member; the result lives on the interior region of `eps`.
    pub fn mollified(&self, profile: &MollifierProfile, eps: f64) -> Result<(Self, Region)> {
        let m = profile.scale(eps)?;
        let mut members = BTreeMap::new();
        let mut region = None;
        for (a, g) in &self.members {
            let (ge, r) = mollify(g, &m)?;
            members.insert(a.clone(), ge);
            region = Some(r);
        }
        let region = region.expect("family always holds alpha = 0");
        Ok((Self { grid: self.grid.clone(), members }, region))
    }
}

/// `(sum_{|alpha| <= k} int |D_alpha f|^p)^(1/p)`, or `sum max |D_alpha f|` for
/// `p = inf`, over the whole grid.
pub fn sobolev_norm(fam: &DerivativeFamily, k: u32, p: f64) -> Result<f64> {
    sobolev_norm_on(fam, k, p, &Region::full(fam.grid()))
}

pub fn sobolev_norm_on(fam: &DerivativeFamily, k: u32, p: f64, region: &Region) -> Result<f64> {
    check_exponent(p)?;
    fam.check_complete(k)?;
    let alphas = MultiIndex::all_up_to(fam.grid.dim(), k);
    if p.is_infinite() {
        return alphas.iter().map(|a| lp_norm(&fam.members[a], p, region)).sum();
    }
    let mut total = 0.0;
    for a in &alphas {
        let g = fam.members[a].map(|v| v.abs().powf(p));
        total += quadrature(&g, region)?;
    }
    Ok(total.powf(1.0 / p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipRow {
    pub alpha: MultiIndex,
    /// Absent for `alpha = 0`, which needs no pairing check.
    pub pairing_residual: Option<f64>,
    pub lp_norm: f64,
    pub verdict: bool,
}

/// Evidence for or against `f in W^{k,p}` given candidate derivatives.
///
/// A negative verdict means no supplied candidate passed, not that no weak
/// derivative exists.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipReport {
    pub k: u32,
    pub p: f64,
    pub rows: Vec<MembershipRow>,
    pub member: bool,
    pub norm: Option<f64>,
}

impl MembershipReport {
    /// CSV with header `alpha,pairing_residual,lp_norm,verdict` and a final
    /// `summary` row carrying the largest residual, the norm and the verdict.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "alpha,pairing_residual,lp_norm,verdict")?;
        for r in &self.rows {
            let res = r.pairing_residual.map(number).unwrap_or_default();
            writeln!(w, "{},{},{},{}", field(&r.alpha.to_string()), res, number(r.lp_norm), r.verdict)?;
        }
        let worst = self.rows.iter().filter_map(|r| r.pairing_residual).fold(0.0, f64::max);
        let norm = self.norm.map(number).unwrap_or_default();
        writeln!(w, "summary,{},{},{}", number(worst), norm, self.member)
    }
}

pub fn membership_report(
    f: &GridFunction,
    candidates: &DerivativeFamily,
    k: u32,
    p: f64,
    tests: &[TestFunction],
    tol: f64,
) -> Result<MembershipReport> {
    check_exponent(p)?;
    if k > MAX_ORDER {
        return Err(Error::OrderTooHigh(k));
    }
    if candidates.grid() != f.grid() {
        return Err(Error::GridMismatch);
    }
    candidates.check_complete(k)?;
    let full = Region::full(f.grid());
    let mut rows = Vec::new();
    for alpha in MultiIndex::all_up_to(f.grid().dim(), k) {
        let g = if alpha.order() == 0 { f } else { &candidates.members[&alpha] };
        let norm = lp_norm(g, p, &full)?;
        let (residual, verified) = if alpha.order() == 0 {
            (None, true)
        } else {
            let r = verify_weak_derivative(f, g, &alpha, tests, tol)?;
            (Some(r.max_residual), r.verdict)
        };
        rows.push(MembershipRow { alpha, pairing_residual: residual, lp_norm: norm, verdict: verified && norm.is_finite() });
    }
    let member = rows.iter().all(|r| r.verdict);
    let norm = if member {
        let fam = candidates.clone().with(MultiIndex::zero(f.grid().dim()), f.clone())?;
        Some(sobolev_norm(&fam, k, p)?)
    } else {
        None
    };
    Ok(MembershipReport { k, p, rows, member, norm })
}

/// `max |f_eps|` on the boundary collar, per `eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTable {
    /// Distance from the support of `f` to the box boundary.
    pub support_distance: f64,
    pub collar_width: f64,
    pub rows: Vec<(f64, f64)>,
}

impl BoundaryTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "eps,collar_max")?;
        for (eps, m) in &self.rows {
            writeln!(w, "{},{}", number(*eps), number(*m))?;
        }
        Ok(())
    }
}

/// Mollifies a compactly supported `f` (extended by zero outside the box)
/// and records the largest `|f_eps|` over nodes within `collar_width` of the
/// boundary. The support must stay farther than every `eps` from the boundary.
pub fn boundary_vanish_check(
    f: &GridFunction,
    profile: &MollifierProfile,
    eps_list: &[f64],
    collar_width: f64,
) -> Result<BoundaryTable> {
    check_ladder(eps_list)?;
    let grid = f.grid();
    let support_distance = (0..grid.node_count())
        .filter(|&k| f.value(k) != 0.0)
        .map(|k| grid.boundary_distance(k))
        .fold(f64::INFINITY, f64::min);
    if support_distance <= eps_list[0] {
        return Err(Error::SupportNearBoundary { dist: support_distance, needed: eps_list[0] });
    }
    let collar: Vec<usize> = (0..grid.node_count()).filter(|&k| grid.boundary_distance(k) <= collar_width).collect();
    let rows = eps_list
        .iter()
        .map(|&eps| {
            let fe = mollify_zero_extended(f, &profile.scale(eps)?)?;
            Ok((eps, collar.iter().map(|&k| fe.value(k).abs()).fold(0.0, f64::max)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundaryTable { support_distance, collar_width, rows })
}
