use proptest::prelude::*;
use sobolevkit::expr::{eval, parse};
use sobolevkit::{
    interior_region, lp_norm, mollify, quadrature, section_pairing, BoxDomain, Grid, GridFunction,
    MollifierProfile, Region, VectorGridFunction,
};

fn grid(res: usize) -> Grid {
    Grid::uniform(BoxDomain::unit(1).unwrap(), res).unwrap()
}

fn samples(g: &Grid, coeffs: &[f64]) -> GridFunction {
    GridFunction::from_fn(g, |x| {
        coeffs.iter().enumerate().map(|(j, c)| c * ((j + 1) as f64 * 3.0 * x[0]).sin()).sum()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quadrature_is_linear(a in -5.0..5.0f64, b in -5.0..5.0f64,
                            cf in prop::collection::vec(-1.0..1.0f64, 3),
                            cg in prop::collection::vec(-1.0..1.0f64, 3)) {
        let g = grid(64);
        let (f, h) = (samples(&g, &cf), samples(&g, &cg));
        let full = Region::full(&g);
        let lhs = quadrature(&f.linear_combination(a, &h, b).unwrap(), &full).unwrap();
        let rhs = a * quadrature(&f, &full).unwrap() + b * quadrature(&h, &full).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn lp_norm_triangle_and_homogeneity(p in prop_oneof![1.0..6.0f64, Just(f64::INFINITY)], c in -4.0..4.0f64,
                                        cf in prop::collection::vec(-1.0..1.0f64, 3),
                                        cg in prop::collection::vec(-1.0..1.0f64, 3)) {
        let g = grid(64);
        let (f, h) = (samples(&g, &cf), samples(&g, &cg));
        let full = Region::full(&g);
        let sum = f.linear_combination(1.0, &h, 1.0).unwrap();
        let nf = lp_norm(&f, p, &full).unwrap();
        prop_assert!(lp_norm(&sum, p, &full).unwrap() <= nf + lp_norm(&h, p, &full).unwrap() + 1e-12);
        let scaled = lp_norm(&f.scale(c), p, &full).unwrap();
        prop_assert!((scaled - c.abs() * nf).abs() <= 1e-12 * (1.0 + scaled));
    }

    #[test]
    fn interior_region_is_antitone(e1 in 0.0..0.5f64, e2 in 0.0..0.5f64) {
        let g = Grid::uniform(BoxDomain::unit(2).unwrap(), 20).unwrap();
        let (small, large) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        prop_assert!(interior_region(&g, large).is_subset_of(&interior_region(&g, small)));
    }

    #[test]
    fn scaled_kernel_obeys_scaling_law(eps in 0.05..2.0f64, x in -1.0..1.0f64) {
        let p = MollifierProfile::bump(1).unwrap();
        let m = p.scale(eps).unwrap();
        let want = p.value(&[x / eps]) / eps;
        prop_assert!((m.value(&[x]) - want).abs() <= 1e-12 * (1.0 + want));
    }

    #[test]
    fn mollify_is_linear_and_positive(a in -3.0..3.0f64, cf in prop::collection::vec(-1.0..1.0f64, 3),
                                      shift in 0.0..2.0f64) {
        let g = grid(200);
        let m = MollifierProfile::bump(1).unwrap().scale(0.1).unwrap();
        let f = samples(&g, &cf);
        let (fe, region) = mollify(&f, &m).unwrap();
        let (sfe, _) = mollify(&f.scale(a), &m).unwrap();
        for k in region.nodes() {
            prop_assert!((sfe.value(k) - a * fe.value(k)).abs() <= 1e-12 * (1.0 + fe.value(k).abs()));
        }
        let pos = f.map(|v| v.abs() + shift);
        let (pe, _) = mollify(&pos, &m).unwrap();
        prop_assert!(region.nodes().all(|k| pe.value(k) >= 0.0));
    }

    #[test]
    fn section_pairing_is_bilinear(a in -3.0..3.0f64, c in prop::collection::vec(-1.0..1.0f64, 4)) {
        let g = grid(32);
        let f = VectorGridFunction::from_fn(&g, 2, |x| vec![c[0] * x[0], c[1]]).unwrap();
        let h = VectorGridFunction::from_fn(&g, 2, |x| vec![c[2], c[3] * x[0] * x[0]]).unwrap();
        let fa = VectorGridFunction::from_fn(&g, 2, |x| vec![a * c[0] * x[0], a * c[1]]).unwrap();
        let full = Region::full(&g);
        let base = section_pairing(&f, &h, &full).unwrap();
        prop_assert!((section_pairing(&fa, &h, &full).unwrap() - a * base).abs() <= 1e-12 * (1.0 + base.abs()));
        prop_assert!((section_pairing(&h, &f, &full).unwrap() - base).abs() <= 1e-14);
    }

    #[test]
    fn parser_never_panics(s in "\\PC{0,40}") {
        if let Ok(ast) = parse(&s, 3) {
            let _ = eval(&ast, &[0.1, 0.2, 0.3]);
        }
    }

    #[test]
    fn pretty_print_is_idempotent(s in "[x1x2()+*/^ 0-9.-]{1,30}|(sin|cos|exp|abs)\\(x1[+*-]x2\\)") {
        if let Ok(ast) = parse(&s, 2) {
            let once = ast.to_string();
            let reparsed = parse(&once, 2).unwrap();
            prop_assert_eq!(once, reparsed.to_string());
        }
    }
}
