use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subriem_core::expr::{parse, ScalarField, Var};
use subriem_core::Vec3;

fn random_polynomial(rng: &mut ChaCha8Rng) -> String {
    let mut terms = Vec::new();
    for _ in 0..rng.gen_range(1..8) {
        let c: f64 = rng.gen_range(-2.0..2.0);
        let mut term = format!("({c})");
        let mut degree = 0;
        for v in ["x", "y", "t"] {
            let e = rng.gen_range(0..=(4 - degree).min(3));
            degree += e;
            if e > 0 {
                term.push_str(&format!("*{v}^{e}"));
            }
        }
        terms.push(term);
    }
    terms.join(" + ")
}

#[test]
fn symbolic_partials_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let text = random_polynomial(&mut rng);
        let field = ScalarField::parse(&text).unwrap();
        for _ in 0..10 {
            let p = Vec3::new(
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
            );
            for (i, v) in Var::ALL.iter().enumerate() {
                let mut a = p;
                let mut b = p;
                a[i] += h;
                b[i] -= h;
                let fd = (field.value(&a).unwrap() - field.value(&b).unwrap()) / (2.0 * h);
                let sym = field.partial(*v).eval(&p).unwrap();
                worst = worst.max((sym - fd).abs() / (1.0 + sym.abs()));
            }
        }
    }
    assert!(worst <= 1e-6, "worst relative error {worst:e}");
}

#[test]
fn printed_polynomials_reparse() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let e = parse(&random_polynomial(&mut rng)).unwrap();
        let again = parse(&e.to_string()).unwrap();
        assert_eq!(again, e);
        assert_eq!(again.to_string(), e.to_string());
    }
}

#[test]
fn domain_errors_are_reported() {
    let p = Vec3::new(0.0, 0.0, 0.0);
    assert!(ScalarField::parse("1/x").unwrap().value(&p).is_err());
    assert!(ScalarField::parse("log(x)").unwrap().value(&p).is_err());
    assert!(ScalarField::parse("sqrt(x - 1)").unwrap().value(&p).is_err());
    assert!(parse("x +").is_err());
    assert!(parse("z").is_err());
}
