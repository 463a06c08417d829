//! Random instances for the property suites. All generators take the RNG
//! explicitly so that runs are reproducible from a seed.

use rand::Rng;

use crate::error::Result;
use crate::matrices::MarkovKernel;
use crate::measures::{DiscreteMeasure, SignedMeasure};

/// Flat-Dirichlet weights (normalised standard exponentials).
fn simplex<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}

fn normalise(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    for x in &mut v {
        *x /= total;
    }
    v
}

/// A probability vector with full support, mixed with the uniform
/// distribution so that no mass is smaller than `0.1/n`.
pub fn random_probability<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DiscreteMeasure {
    let w = simplex(rng, n);
    let mass = normalise(w.into_iter().map(|x| 0.9 * x + 0.1 / n as f64).collect());
    DiscreteMeasure::new(mass).expect("positive weights")
}

/// A probability vector supported on `support` only.
pub fn random_probability_on<R: Rng + ?Sized>(rng: &mut R, n: usize, support: &[usize]) -> DiscreteMeasure {
    let w = random_probability(rng, support.len());
    let mut mass = vec![0.0; n];
    for (&i, &m) in support.iter().zip(w.mass()) {
        mass[i] = m;
    }
    DiscreteMeasure::new(mass).expect("nonnegative weights")
}

/// Measures dominated by `p0` (supported on `supp(p0)`).
pub fn random_dominated<R: Rng + ?Sized>(rng: &mut R, p0: &DiscreteMeasure, m: usize) -> Vec<DiscreteMeasure> {
    let support: Vec<usize> = (0..p0.support_size()).filter(|&i| p0.mass()[i] > 0.0).collect();
    (0..m).map(|_| random_probability_on(rng, p0.support_size(), &support)).collect()
}

/// A zero-mass perturbation `μ = p0 (g − E_{p0} g)` with `g` uniform in
/// `[-1, 1]` on `supp(p0)`.
pub fn random_perturbation<R: Rng + ?Sized>(rng: &mut R, p0: &DiscreteMeasure) -> SignedMeasure {
    let g: Vec<f64> = p0.mass().iter().map(|_| rng.random_range(-1.0..1.0)).collect();
    let mean: f64 = p0.mass().iter().zip(&g).map(|(p, x)| p * x).sum();
    let mass: Vec<f64> = p0.mass().iter().zip(&g).map(|(p, x)| if *p > 0.0 { p * (x - mean) } else { 0.0 }).collect();
    // Remove the rounding residue of the total on the largest atom.
    let residue: f64 = mass.iter().sum();
    let mut mass = mass;
    let top = (0..mass.len()).max_by(|&a, &b| p0.mass()[a].total_cmp(&p0.mass()[b])).expect("nonempty");
    mass[top] -= residue;
    SignedMeasure::new(mass).expect("finite")
}

/// A row-stochastic `rows × cols` kernel; about a third of the entries
/// are zeroed when `sparse` is set (each row keeps at least one).
pub fn random_kernel<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, sparse: bool) -> Result<MarkovKernel> {
    let matrix = (0..rows)
        .map(|_| {
            let mut w = simplex(rng, cols);
            if sparse && cols > 1 {
                let keep = rng.random_range(0..cols);
                for (j, x) in w.iter_mut().enumerate() {
                    if j != keep && rng.random::<f64>() < 1.0 / 3.0 {
                        *x = 0.0;
                    }
                }
            }
            normalise(w)
        })
        .collect();
    MarkovKernel::new(matrix)
}

/// A random convex combination `Σ w_j p_j`.
pub fn mixture<R: Rng + ?Sized>(rng: &mut R, ps: &[DiscreteMeasure]) -> DiscreteMeasure {
    let w = simplex(rng, ps.len());
    let n = ps[0].support_size();
    let mass = (0..n).map(|x| ps.iter().zip(&w).map(|(p, c)| c * p.mass()[x]).sum()).collect();
    DiscreteMeasure::new(normalise(mass)).expect("nonnegative")
}

/// A measure `q ∝ p0 (c0 + Σ c_j (dP_j/dP0)^α)^{1/α}` with positive
/// coefficients, so that `(dQ/dP0)^α` lies in the span of `1` and the
/// `(dP_j/dP0)^α`. Appending it to `ps` makes the `x^α` divergence
/// matrix rank deficient (`α = 1/2` covers the Hellinger case).
pub fn dependent_measure<R: Rng + ?Sized>(rng: &mut R, p0: &DiscreteMeasure, ps: &[DiscreteMeasure], alpha: f64) -> DiscreteMeasure {
    let c0 = rng.random_range(0.1..1.0);
    let c: Vec<f64> = ps.iter().map(|_| rng.random_range(0.1..1.0)).collect();
    let mass = (0..p0.support_size())
        .map(|x| {
            let q0 = p0.mass()[x];
            if q0 == 0.0 {
                return 0.0;
            }
            let g = c0 + ps.iter().zip(&c).map(|(p, cj)| cj * (p.mass()[x] / q0).powf(alpha)).sum::<f64>();
            q0 * g.powf(1.0 / alpha)
        })
        .collect();
    DiscreteMeasure::new(normalise(mass)).expect("nonnegative")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generators_produce_valid_objects() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..10 {
            let p = random_probability(&mut rng, n);
            assert!(p.is_probability());
            assert!(p.mass().iter().all(|&m| m >= 0.1 / n as f64 * 0.99));
            let mu = random_perturbation(&mut rng, &p);
            assert!(mu.total().abs() < 1e-15);
            let k = random_kernel(&mut rng, n, n + 1, true).unwrap();
            assert!(k.push_forward(&p).unwrap().is_probability());
        }
    }

    #[test]
    fn same_seed_same_instance() {
        let a = random_probability(&mut ChaCha8Rng::seed_from_u64(9), 5);
        let b = random_probability(&mut ChaCha8Rng::seed_from_u64(9), 5);
        assert_eq!(a, b);
    }

    #[test]
    fn dependent_measure_is_dominated() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p0 = random_probability_on(&mut rng, 6, &[0, 1, 2, 4]);
        let ps = random_dominated(&mut rng, &p0, 2);
        let q = dependent_measure(&mut rng, &p0, &ps, 0.5);
        assert!(q.is_probability());
        assert_eq!(q.mass()[3], 0.0);
        assert_eq!(q.mass()[5], 0.0);
    }
}
