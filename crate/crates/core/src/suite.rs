//! The built-in self-check: a fixed battery of numerical properties that
//! any correct build must satisfy. Run it with `sobolevkit suite`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::convolution::{compose, convergence_study, mollify, orbit};
use crate::dynamics::{distributional_shadow, exponential_flow, invertibility_check, newton_net};
use crate::error::{Error, Result};
use crate::expr::{eval, parse};
use crate::grid::{BoxDomain, Grid, GridFunction};
use crate::mollifier::{verify_unit, MollifierProfile};
use crate::sobolev::{sobolev_norm, DerivativeFamily};
use crate::weakdiff::{commutation_residual, verify_weak_derivative, MultiIndex, TestFunction};

/// Seed used by the randomized checks unless `SOBOLEVKIT_SEED` is set.
pub const DEFAULT_SEED: u64 = 0x5eed_2024;

type Check = fn(u64) -> Result<(bool, String)>;
type Sampler = Box<dyn Fn(&[f64]) -> f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Reads `SOBOLEVKIT_SEED`, falling back to [`DEFAULT_SEED`].
pub fn seed_from_env() -> u64 {
    std::env::var("SOBOLEVKIT_SEED").ok().and_then(|s| s.trim().parse().ok()).unwrap_or(DEFAULT_SEED)
}

/// Runs every check in order. A check that errors is reported as failed.
pub fn run(seed: u64) -> Vec<Outcome> {
    let checks: [(&'static str, Check); 12] = [
        ("mollifier unit", unit),
        ("approximate identity", approximate_identity),
        ("affine fixed", affine),
        ("commutation", commutation),
        ("weak derivative", weak_derivative),
        ("sobolev norm", sobolev),
        ("composition", composition),
        ("newton net", newton),
        ("invertibility", invertibility),
        ("flow", flow),
        ("shadow", shadow),
        ("parser", parser),
    ];
    checks
        .iter()
        .enumerate()
        .map(|(i, (name, check))| {
            let (passed, detail) = check(seed).unwrap_or_else(|e| (false, format!("error: {e}")));
            Outcome { id: i + 1, name, passed, detail }
        })
        .collect()
}

fn unit_grid(res: usize) -> Result<Grid> {
    Grid::uniform(BoxDomain::unit(1)?, res)
}

fn unit(_: u64) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for n in 1..=2 {
        let profile = MollifierProfile::bump(n)?;
        for eps in [1.0, 0.5, 0.1] {
            let r = verify_unit(&profile.scale(eps)?, 256, 1e-3)?;
            ok &= r.passed();
            worst = worst.max(r.mass_error);
        }
    }
    Ok((ok, format!("max |mass - 1| = {worst:.2e}")))
}

fn approximate_identity(_: u64) -> Result<(bool, String)> {
    let grid = unit_grid(2000)?;
    let profile = MollifierProfile::bump(1)?;
    let ladder = [0.2, 0.1, 0.05, 0.025];
    let bump = TestFunction::bump(vec![0.5], 0.4)?;
    let cases: [(&str, Sampler, bool); 3] = [
        ("sin", Box::new(|x: &[f64]| (2.0 * std::f64::consts::PI * x[0]).sin()), true),
        ("kink", Box::new(|x: &[f64]| (x[0] - 0.5).abs()), false),
        ("bump", Box::new(move |x: &[f64]| bump.value(x)), true),
    ];
    let mut ok = true;
    let mut ratio_range = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, f, smooth) in &cases {
        let g = GridFunction::from_fn(&grid, f);
        for p in [1.0, 2.0, f64::INFINITY] {
            let table = convergence_study(&g, &profile, p, &ladder)?;
            ok &= table.strictly_decreasing();
            if *smooth {
                for r in table.ratios() {
                    ratio_range = (ratio_range.0.min(r), ratio_range.1.max(r));
                    ok &= (2.5..=5.5).contains(&r);
                }
            }
        }
    }
    Ok((ok, format!("smooth ratios in [{:.3}, {:.3}]", ratio_range.0, ratio_range.1)))
}

fn affine(_: u64) -> Result<(bool, String)> {
    let grid = unit_grid(400)?;
    let f = GridFunction::from_fn(&grid, |x| 3.0 * x[0] + 1.0);
    let (fe, region) = mollify(&f, &MollifierProfile::bump(1)?.scale(0.1)?)?;
    let err = region.nodes().map(|k| (fe.value(k) - f.value(k)).abs()).fold(0.0, f64::max);
    Ok((err <= 1e-8, format!("max error {err:.2e}")))
}

fn kink_pair(res: usize) -> Result<(GridFunction, GridFunction)> {
    let grid = unit_grid(res)?;
    let f = GridFunction::from_fn(&grid, |x| (x[0] - 0.5).abs());
    let u = GridFunction::from_fn(&grid, |x| sign(x[0] - 0.5));
    Ok((f, u))
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn commutation(_: u64) -> Result<(bool, String)> {
    let profile = MollifierProfile::bump(1)?;
    let alpha = MultiIndex::unit(1, 0);
    let (f, u) = kink_pair(400)?;
    let r400 = commutation_residual(&f, &u, &profile, &alpha, 0.1, 2.0)?;
    let (f, u) = kink_pair(800)?;
    let r800 = commutation_residual(&f, &u, &profile, &alpha, 0.1, 2.0)?;
    let ok = r400 <= 1e-3 && r800 <= 0.6 * r400;
    Ok((ok, format!("residual {r400:.2e} at 400, {r800:.2e} at 800")))
}

fn weak_derivative(_: u64) -> Result<(bool, String)> {
    let grid = unit_grid(400)?;
    let tests = TestFunction::catalog(grid.bbox(), 8);
    let alpha = MultiIndex::unit(1, 0);
    let tau = 2.0 * std::f64::consts::PI;
    let smooth = GridFunction::from_fn(&grid, |x| (tau * x[0]).sin());
    let dsmooth = GridFunction::from_fn(&grid, |x| tau * (tau * x[0]).cos());
    let (kink, dkink) = kink_pair(400)?;
    let heaviside = GridFunction::from_fn(&grid, |x| if x[0] >= 0.5 { 1.0 } else { 0.0 });
    let zero = GridFunction::zeros(&grid);

    let a = verify_weak_derivative(&smooth, &dsmooth, &alpha, &tests, 1e-4)?;
    let b = verify_weak_derivative(&kink, &dkink, &alpha, &tests, 1e-4)?;
    let c = verify_weak_derivative(&heaviside, &zero, &alpha, &tests, 1e-4)?;
    let ok = a.verdict && b.verdict && !c.verdict && c.max_residual >= 0.1;
    Ok((
        ok,
        format!("smooth {:.1e}, kink {:.1e}, heaviside {:.3}", a.max_residual, b.max_residual, c.max_residual),
    ))
}

fn sobolev(_: u64) -> Result<(bool, String)> {
    let grid = unit_grid(1000)?;
    let f = GridFunction::from_fn(&grid, |x| x[0]);
    let fam = DerivativeFamily::new(f).with(MultiIndex::unit(1, 0), GridFunction::from_fn(&grid, |_| 1.0))?;
    let n2 = sobolev_norm(&fam, 1, 2.0)?;
    let ninf = sobolev_norm(&fam, 1, f64::INFINITY)?;
    let ok = (n2 - (4.0f64 / 3.0).sqrt()).abs() <= 1e-4 && ninf == 2.0;
    Ok((ok, format!("p=2: {n2:.8}, p=inf: {ninf}")))
}

fn composition(_: u64) -> Result<(bool, String)> {
    let profile = MollifierProfile::bump(1)?;
    let report = compose(&profile.scale(0.1)?, &profile.scale(0.2)?, 600)?;
    let cell = 2.0 * 0.3 / 600.0;
    let ok = report.support_radius <= 0.3 + cell && (report.mass - 1.0).abs() <= 1e-3;
    Ok((ok, format!("radius {:.4}, mass {:.6}", report.support_radius, report.mass)))
}

fn newton(_: u64) -> Result<(bool, String)> {
    let trace = newton_net(|x| x * x, 1.5, 3.0, 2.0, 1.5, 60, 1e-13)?;
    let err = (trace.last() - 2f64.sqrt()).abs();
    let rejected = matches!(newton_net(|x| x * x, 0.0, 0.0, 2.0, 1.5, 60, 1e-13), Err(Error::SingularDerivative));
    let ok = err <= 1e-10 && trace.iterates.len() <= 61 && rejected;
    Ok((ok, format!("|x - sqrt 2| = {err:.1e} after {} steps", trace.iterates.len() - 1)))
}

fn invertibility(_: u64) -> Result<(bool, String)> {
    let grid = unit_grid(400)?;
    let profile = MollifierProfile::bump(1)?;
    let mono = GridFunction::from_fn(&grid, |x| x[0] + x[0].powi(3));
    let critical = GridFunction::from_fn(&grid, |x| (x[0] - 0.5).powi(2));
    let a = invertibility_check(&mono, None, &profile, 0.1)?;
    let b = invertibility_check(&critical, None, &profile, 0.1)?;
    let ok = a.invertible && a.min_abs_df_eps > 0.0 && !b.invertible;
    Ok((ok, format!("monotone min|Df| {:.3}, critical min|Df| {:.1e}", a.min_abs_df_eps, b.min_abs_df_eps)))
}

fn flow(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let c = exponential_flow(
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-2.0..=2.0),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
        );
        worst = worst.max(c.residual);
    }
    let rk = exponential_flow(1.0, 1.0, 0.0, 1.0).rk4_error;
    Ok((worst <= 1e-12 && rk <= 1e-8, format!("group law {worst:.1e}, rk4 {rk:.1e}")))
}

fn shadow(_: u64) -> Result<(bool, String)> {
    let grid = unit_grid(2000)?;
    let f = GridFunction::from_fn(&grid, |x| sign(x[0] - 0.5));
    let net = orbit(&f, &MollifierProfile::bump(1)?, &[0.1, 0.05, 0.025, 0.0125])?;
    let mut worst: f64 = 0.0;
    for center in [0.5, 0.6] {
        let v = TestFunction::bump(vec![center], 0.25)?;
        let direct = crate::weakdiff::pair(&f, &v)?;
        let report = distributional_shadow(&net, &v)?;
        worst = worst.max((report.extrapolated_limit - direct).abs());
    }
    Ok((worst <= 1e-3, format!("max gap {worst:.1e}")))
}

fn parser(seed: u64) -> Result<(bool, String)> {
    let cases = [("2+3*4", 14.0), ("2^3^2", 512.0), ("-2^2", -4.0), ("(2+3)*4", 20.0), ("8/4/2", 1.0)];
    let mut ok = cases.iter().all(|(src, want)| parse(src, 1).ok().and_then(|a| eval(&a, &[]).ok()) == Some(*want));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    const ALPHABET: &[u8] = b"0123456789.eE+-*/^(),x123 pisncoabqrtlgmxd\t";
    let mut crashes = 0;
    for i in 0..100_000 {
        let len = rng.gen_range(0..24);
        let bytes: Vec<u8> = (0..len)
            .map(|_| if i % 2 == 0 { ALPHABET[rng.gen_range(0..ALPHABET.len())] } else { rng.gen() })
            .collect();
        let src = String::from_utf8_lossy(&bytes);
        let outcome = std::panic::catch_unwind(|| {
            if let Ok(ast) = parse(&src, 3) {
                let _ = eval(&ast, &[0.3, 0.5, 0.7]);
            }
        });
        if outcome.is_err() {
            crashes += 1;
        }
    }
    ok &= crashes == 0;
    Ok((ok, format!("{crashes} crashes in 100000 inputs")))
}
