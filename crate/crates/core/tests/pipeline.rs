use biquad_core::bench::lobatto_rule;
use biquad_core::refquad::{gauss_legendre, reference_rule};
use biquad_core::rules::{apply, load_rule, pushforward_h1, pushforward_l2, save_rule};
use biquad_core::{build_rule, AffineMap, Coefficient, Domain, InnerProductSpec, OptConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn quick() -> OptConfig {
    OptConfig {
        n_starts: 10,
        ..OptConfig::default()
    }
}

/// Polynomial with monomial coefficients and its derivative.
fn poly(c: &[f64], x: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut d = 0.0;
    for cj in c.iter().rev() {
        d = d * x + v;
        v = v * x + cj;
    }
    (v, d)
}

// ∫ A(Φ⁻¹ t) f' g' + f g over [lo, hi] with a 40-point Gauss rule.
fn h1_oracle(
    coef: Coefficient,
    f: &[f64],
    g: &[f64],
    lo: f64,
    hi: f64,
    to_ref: impl Fn(f64) -> f64,
) -> f64 {
    let rule = gauss_legendre(40, lo, hi).unwrap();
    rule.integrate(|p| {
        let (fv, fd) = poly(f, p[0]);
        let (gv, gd) = poly(g, p[0]);
        coef.eval(to_ref(p[0])) * fd * gd + fv * gv
    })
}

#[test]
fn h1_rules_evaluate_sobolev_products_without_derivatives() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for coef in [
        Coefficient::One,
        Coefficient::OnePlusXSquared,
        Coefficient::Exp,
    ] {
        let ip = InnerProductSpec::h1(Domain::unit_interval(), coef).unwrap();
        for n in 1..=5 {
            let rule = build_rule(Domain::unit_interval(), n, &ip, &quick()).unwrap();
            assert!(rule.sigma < 1e-9);
            for _ in 0..20 {
                let f: Vec<f64> = (0..=n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let g: Vec<f64> = (0..=n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let fv: Vec<f64> = rule.points_x.iter().map(|p| poly(&f, p[0]).0).collect();
                let gv: Vec<f64> = rule.points_y.iter().map(|p| poly(&g, p[0]).0).collect();
                let q = apply(&rule, &fv, &gv).unwrap();
                let exact = h1_oracle(coef, &f, &g, -1.0, 1.0, |t| t);
                let tol = if coef == Coefficient::Exp {
                    1e-9
                } else {
                    1e-10
                };
                assert!(
                    (q - exact).abs() <= tol * (1.0 + exact.abs()),
                    "{coef} n={n}: {q} vs {exact}"
                );
            }
        }
    }
}

#[test]
fn h1_similarity_pushforward_matches_transported_product() {
    let ip = InnerProductSpec::h1(Domain::unit_interval(), Coefficient::OnePlusXSquared).unwrap();
    let rule = build_rule(Domain::unit_interval(), 3, &ip, &quick()).unwrap();
    let (lambda, shift) = (2.0, 1.0);
    let image = pushforward_h1(&rule, &AffineMap::scaling_1d(lambda, shift).unwrap()).unwrap();
    assert!(image.provenance.pushforward_residual.unwrap() < 1e-10);
    let (w0, w1) = rule.w_split.as_ref().unwrap();
    let (v0, v1) = image.w_split.as_ref().unwrap();
    assert!((v0 - w0 * lambda).abs().max() < 1e-13 * v0.abs().max());
    assert!((v1 - w1 / lambda).abs().max() < 1e-13 * v1.abs().max().max(1.0));

    let f = [0.3, -1.0, 0.5, 0.25];
    let g = [1.0, 0.2, -0.7, 0.1];
    let fv: Vec<f64> = image.points_x.iter().map(|p| poly(&f, p[0]).0).collect();
    let gv: Vec<f64> = image.points_y.iter().map(|p| poly(&g, p[0]).0).collect();
    let q = apply(&image, &fv, &gv).unwrap();
    let exact = h1_oracle(Coefficient::OnePlusXSquared, &f, &g, -1.0, 3.0, |t| {
        (t - shift) / lambda
    });
    assert!(
        (q - exact).abs() < 1e-10 * exact.abs().max(1.0),
        "{q} vs {exact}"
    );
}

#[test]
fn mapped_triangle_rule_integrates_the_image() {
    let rule = build_rule(
        Domain::Triangle,
        2,
        &InnerProductSpec::l2(Domain::Triangle),
        &quick(),
    )
    .unwrap();
    let h = 3f64.sqrt() / 2.0;
    let image = pushforward_l2(
        &rule,
        &AffineMap::reference_triangle_to([0.0, 0.0], [1.0, 0.0], [0.5, h]).unwrap(),
    )
    .unwrap();
    let ones = vec![1.0; image.len()];
    assert!((apply(&image, &ones, &ones).unwrap() - h / 2.0).abs() < 1e-14);
    // Q(x, xy) = ∫ x²y over the image
    let x: Vec<f64> = image.points_x.iter().map(|p| p[0]).collect();
    let xy: Vec<f64> = image.points_y.iter().map(|p| p[0] * p[1]).collect();
    let got = apply(&image, &x, &xy).unwrap();
    let oracle = reference_rule(Domain::Triangle, 6)
        .unwrap()
        .transported(image.frame.as_ref().unwrap())
        .integrate(|p| p[0] * p[0] * p[1]);
    assert!((got - oracle).abs() < 1e-14, "{got} vs {oracle}");
}

#[test]
fn lobatto_rule_round_trips_through_a_file() {
    let (rule, _) = lobatto_rule(&quick()).unwrap();
    assert!(rule.kappa_inf.is_none());
    assert!(rule.exactness_residual().unwrap() < 1e-10);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lobatto.rule");
    save_rule(&rule, &path).unwrap();
    let back = load_rule(&path).unwrap();
    assert_eq!(back.w, rule.w);
    assert_eq!(back.points_x, rule.points_x);
    assert!(back.kappa_inf.is_none());
}
