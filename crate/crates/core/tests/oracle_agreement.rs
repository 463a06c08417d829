use codivergence::closed_forms::{r_alpha_closed, ParamFamily};
use codivergence::codiv::{r_phi, PhiFunction};
use codivergence::extreal::ExtReal;
use codivergence::measures::DiscreteMeasure;
use codivergence::oracle::{oracle_discrete_bruteforce, oracle_r_alpha, OracleConfig};
use codivergence::sampling::{random_dominated, random_probability, random_probability_on};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn bruteforce_matches_core_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let phis = [PhiFunction::identity(), PhiFunction::sqrt(), PhiFunction::power(0.25).unwrap(), PhiFunction::power(2.5).unwrap()];
    let mut infinite = 0;
    for i in 0..1000 {
        let n = rng.random_range(1..=12usize);
        let p0 = if i % 5 == 0 && n > 1 {
            random_probability_on(&mut rng, n, &(1..n).collect::<Vec<_>>())
        } else {
            random_probability(&mut rng, n)
        };
        let (p1, p2) = if i % 7 == 0 {
            (random_probability(&mut rng, n), random_probability(&mut rng, n))
        } else {
            let mut ps = random_dominated(&mut rng, &p0, 2);
            (ps.remove(0), ps.remove(0))
        };
        let phi = &phis[i % phis.len()];
        let core = r_phi(&p0, &p1, &p2, phi).unwrap();
        let naive = oracle_discrete_bruteforce(&p0, &p1, &p2, phi).unwrap();
        match (core, naive) {
            (ExtReal::PosInf, ExtReal::PosInf) => infinite += 1,
            (ExtReal::Finite(a), ExtReal::Finite(b)) => {
                assert!((a - b).abs() <= 1e-11 * a.abs().max(1.0), "triple {i}: core {a} naive {b}");
            }
            other => panic!("triple {i}: {other:?}"),
        }
    }
    assert!(infinite > 0);
}

#[test]
fn bruteforce_trivial_cases() {
    let p0 = DiscreteMeasure::probability(vec![0.2, 0.3, 0.5]).unwrap();
    let phi = PhiFunction::power(0.7).unwrap();
    assert!(oracle_discrete_bruteforce(&p0, &p0, &p0, &phi).unwrap().to_f64().abs() < 1e-15);
    let q0 = DiscreteMeasure::probability(vec![0.0, 0.5, 0.5]).unwrap();
    assert_eq!(oracle_discrete_bruteforce(&q0, &p0, &p0, &phi).unwrap(), ExtReal::PosInf);
}

fn rel(c: ExtReal, o: ExtReal) -> f64 {
    match (c, o) {
        (ExtReal::PosInf, ExtReal::PosInf) => 0.0,
        (ExtReal::Finite(c), ExtReal::Finite(o)) => (c - o).abs() / (1.0 + c).abs().max(c.abs()),
        _ => f64::INFINITY,
    }
}

#[test]
fn closed_forms_match_oracle_on_products() {
    let cfg = OracleConfig::default();
    let cases = [
        [
            ParamFamily::GammaProd { shape: vec![1.5, 3.0], rate: vec![1.0, 2.0] },
            ParamFamily::GammaProd { shape: vec![2.0, 3.0], rate: vec![1.3, 1.5] },
            ParamFamily::GammaProd { shape: vec![1.0, 4.0], rate: vec![0.8, 2.2] },
        ],
        [
            ParamFamily::PoissonProd { lambda: vec![3.0, 0.5, 12.0] },
            ParamFamily::PoissonProd { lambda: vec![4.0, 0.7, 10.0] },
            ParamFamily::PoissonProd { lambda: vec![2.5, 0.4, 13.0] },
        ],
        [
            ParamFamily::GaussianIso { mean: vec![0.0, 1.0], sigma: 0.7 },
            ParamFamily::GaussianIso { mean: vec![0.3, 0.8], sigma: 0.7 },
            ParamFamily::GaussianIso { mean: vec![-0.2, 1.5], sigma: 0.7 },
        ],
    ];
    for [f0, f1, f2] in &cases {
        for alpha in [0.25, 0.5, 1.0, 1.7] {
            let c = r_alpha_closed(f0, f1, f2, alpha).unwrap();
            let o = oracle_r_alpha(f0, f1, f2, alpha, &cfg).unwrap();
            assert!(rel(c, o) <= 1e-8, "{} alpha {alpha}: {c} vs {o}", f0.kind_name());
        }
    }
}

#[test]
fn doubling_quadrature_order_is_stable() {
    let base = OracleConfig::default();
    let doubled = OracleConfig { quad_order: 2 * base.quad_order, ..base };
    let cases = [
        [
            ParamFamily::GammaProd { shape: vec![0.7], rate: vec![1.0] },
            ParamFamily::GammaProd { shape: vec![1.2], rate: vec![1.4] },
            ParamFamily::GammaProd { shape: vec![0.9], rate: vec![0.8] },
        ],
        [
            ParamFamily::GaussianIso { mean: vec![0.0], sigma: 1.0 },
            ParamFamily::GaussianIso { mean: vec![2.0], sigma: 1.0 },
            ParamFamily::GaussianIso { mean: vec![-1.0], sigma: 1.0 },
        ],
    ];
    for [f0, f1, f2] in &cases {
        for alpha in [0.25, 0.5, 1.0] {
            let a = oracle_r_alpha(f0, f1, f2, alpha, &base).unwrap();
            let b = oracle_r_alpha(f0, f1, f2, alpha, &doubled).unwrap();
            assert!(rel(a, b) <= base.rel_tol, "{a} vs {b}");
        }
    }
}

#[test]
fn fixed_poisson_truncation_converges_to_adaptive() {
    let f = |l: f64| ParamFamily::PoissonProd { lambda: vec![l] };
    let adaptive = oracle_r_alpha(&f(1.0), &f(2.0), &f(3.0), 1.0, &OracleConfig::default()).unwrap().to_f64();
    let fixed_cfg = OracleConfig { poisson_truncation: Some(80), ..OracleConfig::default() };
    let fixed = oracle_r_alpha(&f(1.0), &f(2.0), &f(3.0), 1.0, &fixed_cfg).unwrap().to_f64();
    let exact = 2.0f64.exp_m1();
    assert!((adaptive - exact).abs() <= 1e-9 * exact);
    assert!((fixed - exact).abs() <= 1e-9 * exact);
    let short = OracleConfig { poisson_truncation: Some(3), ..OracleConfig::default() };
    let truncated = oracle_r_alpha(&f(1.0), &f(2.0), &f(3.0), 1.0, &short).unwrap().to_f64();
    assert!((truncated - exact).abs() > 1e-3);
}
