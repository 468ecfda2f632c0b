//! Exact checks of the real and complex zonal spherical harmonics.
//!
//! Polynomials carry exact rational coefficients. In the complex case the
//! `2n` variables are `z_1..z_n` followed by `zbar_1..zbar_n`, treated as
//! independent formal variables.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::pseries::binomial;

/// A polynomial with exact rational coefficients, stored as a sorted map
/// from exponent vectors to nonzero coefficients.
#[derive(Clone, PartialEq, Eq)]
pub struct ExactPoly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, BigRational>,
}

impl fmt::Debug for ExactPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .rev()
            .map(|(e, c)| {
                let mono: Vec<String> = e
                    .iter()
                    .enumerate()
                    .filter(|(_, &d)| d > 0)
                    .map(|(i, &d)| if d == 1 { format!("x{}", i + 1) } else { format!("x{}^{d}", i + 1) })
                    .collect();
                if mono.is_empty() {
                    format!("{c}")
                } else {
                    format!("({c})*{}", mono.join("*"))
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl ExactPoly {
    pub fn zero(nvars: usize) -> ExactPoly {
        ExactPoly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: BigRational) -> ExactPoly {
        let mut p = ExactPoly::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn one(nvars: usize) -> ExactPoly {
        ExactPoly::constant(nvars, BigRational::one())
    }

    /// The monomial `x_i`.
    pub fn var(nvars: usize, i: usize) -> ExactPoly {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = ExactPoly::zero(nvars);
        p.add_term(e, BigRational::one());
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u32>, BigRational> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, e: Vec<u32>, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(e.clone()).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&e);
        }
    }

    pub fn add(&self, other: &ExactPoly) -> ExactPoly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> ExactPoly {
        let mut out = ExactPoly::zero(self.nvars);
        for (e, x) in &self.terms {
            out.add_term(e.clone(), x * c);
        }
        out
    }

    pub fn mul(&self, other: &ExactPoly) -> ExactPoly {
        let mut out = ExactPoly::zero(self.nvars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, c1 * c2);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> ExactPoly {
        (0..k).fold(ExactPoly::one(self.nvars), |acc, _| acc.mul(self))
    }

    /// `d/dx_i`.
    pub fn derivative(&self, i: usize) -> ExactPoly {
        let mut out = ExactPoly::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut e2 = e.clone();
                e2[i] -= 1;
                out.add_term(e2, c * BigRational::from_integer(BigInt::from(e[i])));
            }
        }
        out
    }

    /// Total degree of every term, if all terms share one.
    pub fn homogeneous_degree(&self) -> Option<u32> {
        let mut degs = self.terms.keys().map(|e| e.iter().sum::<u32>());
        let d = degs.next()?;
        degs.all(|x| x == d).then_some(d)
    }

    /// Degrees in the first and second halves of the variables, if every
    /// term shares the same pair.
    pub fn bidegree(&self) -> Option<(u32, u32)> {
        let h = self.nvars / 2;
        let mut degs = self
            .terms
            .keys()
            .map(|e| (e[..h].iter().sum::<u32>(), e[h..].iter().sum::<u32>()));
        let d = degs.next()?;
        degs.all(|x| x == d).then_some(d)
    }

    pub fn eval(&self, x: &[BigRational]) -> BigRational {
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .zip(x)
                    .fold(c.clone(), |acc, (&d, v)| acc * num_traits::pow(v.clone(), d as usize))
            })
            .sum()
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .zip(x)
                    .fold(c.to_f64().unwrap_or(f64::NAN), |acc, (&d, v)| acc * v.powi(d as i32))
            })
            .sum()
    }

    pub fn eval_complex(&self, x: &[Complex64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter().zip(x).fold(
                    Complex64::new(c.to_f64().unwrap_or(f64::NAN), 0.0),
                    |acc, (&d, v)| acc * v.powu(d),
                )
            })
            .sum()
    }
}

/// `sum_j d^2/dx_j^2`.
pub fn real_laplacian(p: &ExactPoly) -> ExactPoly {
    (0..p.nvars()).fold(ExactPoly::zero(p.nvars()), |acc, j| {
        acc.add(&p.derivative(j).derivative(j))
    })
}

/// `4 sum_j d^2/(dz_j dzbar_j)` on polynomials in `z` and `zbar`.
pub fn complex_laplacian(p: &ExactPoly) -> ExactPoly {
    let n = p.nvars() / 2;
    let sum = (0..n).fold(ExactPoly::zero(p.nvars()), |acc, j| {
        acc.add(&p.derivative(j).derivative(n + j))
    });
    sum.scale(&rat(4, 1))
}

/// Real zonal harmonic of degree `m` on `S^{n-1}`:
/// `sum over even nu of (-1)^{nu/2} m! / (2^nu (nu/2)! (m-nu)! prod_{j<nu/2} ((n-1)/2 + j))
///  * (x_1^2 + ... + x_{n-1}^2)^{nu/2} x_n^{m-nu}`.
pub fn real_zonal_poly(m: u32, n: usize) -> ExactPoly {
    assert!(n >= 2, "real zonal harmonics need n >= 2");
    let r2 = (0..n - 1).fold(ExactPoly::zero(n), |acc, j| {
        let x = ExactPoly::var(n, j);
        acc.add(&x.mul(&x))
    });
    let xn = ExactPoly::var(n, n - 1);
    let fact = |k: u32| (1..=k).fold(BigInt::one(), |a, i| a * BigInt::from(i));
    let mut out = ExactPoly::zero(n);
    for nu in (0..=m).step_by(2) {
        let half = nu / 2;
        let mut denom = BigRational::from_integer(BigInt::from(2u32).pow(nu) * fact(half) * fact(m - nu));
        for j in 0..half {
            denom *= rat(n as i64 - 1 + 2 * j as i64, 2);
        }
        let mut c = BigRational::from_integer(fact(m)) / denom;
        if half % 2 == 1 {
            c = -c;
        }
        out = out.add(&r2.pow(half).mul(&xn.pow(m - nu)).scale(&c));
    }
    out
}

/// Complex zonal harmonic of bidegree `(m1, m2)` on the unit sphere of `C^n`:
/// `sum_nu (-1)^nu C(m1,nu) C(m2,nu) / C(nu+n-2, n-2)
///  * (|z_1|^2 + ... + |z_{n-1}|^2)^nu z_n^{m1-nu} zbar_n^{m2-nu}`.
pub fn complex_zonal_poly(m1: u32, m2: u32, n: usize) -> ExactPoly {
    assert!(n >= 2, "complex zonal harmonics need n >= 2");
    let nv = 2 * n;
    let r2 = (0..n - 1).fold(ExactPoly::zero(nv), |acc, j| {
        acc.add(&ExactPoly::var(nv, j).mul(&ExactPoly::var(nv, n + j)))
    });
    let zn = ExactPoly::var(nv, n - 1);
    let zbn = ExactPoly::var(nv, 2 * n - 1);
    let mut out = ExactPoly::zero(nv);
    for nu in 0..=m1.min(m2) {
        let num = binomial(m1 as u64, nu as u64) as i64 * binomial(m2 as u64, nu as u64) as i64;
        let den = binomial(nu as u64 + n as u64 - 2, n as u64 - 2) as i64;
        let mut c = rat(num, den);
        if nu % 2 == 1 {
            c = -c;
        }
        let term = r2.pow(nu).mul(&zn.pow(m1 - nu)).mul(&zbn.pow(m2 - nu));
        out = out.add(&term.scale(&c));
    }
    out
}

/// `(2m + n - 2)/(m + n - 2) * C(m + n - 2, n - 2)`, with the value 1 at `m = 0`.
pub fn harmonic_dim_real(m: u32, n: usize) -> u64 {
    assert!(n >= 2);
    if m == 0 {
        return 1;
    }
    let (m, n) = (m as u64, n as u64);
    (2 * m + n - 2) * binomial(m + n - 2, n - 2) / (m + n - 2)
}

/// `(m1 + m2 + n - 1)/(n - 1) * C(m1 + n - 2, n - 2) * C(m2 + n - 2, n - 2)`.
pub fn harmonic_dim_complex(m1: u32, m2: u32, n: usize) -> u64 {
    assert!(n >= 2);
    let (m1, m2, n) = (m1 as u64, m2 as u64, n as u64);
    (m1 + m2 + n - 1) * binomial(m1 + n - 2, n - 2) * binomial(m2 + n - 2, n - 2) / (n - 1)
}

/// Exponent vectors of total degree `d` in `k` variables.
pub fn monomials(k: usize, d: u32) -> Vec<Vec<u32>> {
    if k == 0 {
        return if d == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in (0..=d).rev() {
        for mut rest in monomials(k - 1, d - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Rank of a rational matrix by exact Gaussian elimination.
pub fn exact_rank(mut rows: Vec<Vec<BigRational>>) -> usize {
    let ncols = rows.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..ncols {
        let Some(piv) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, piv);
        let p = rows[rank][col].clone();
        let pivot_row = rows[rank].clone();
        for r in rank + 1..rows.len() {
            if rows[r][col].is_zero() {
                continue;
            }
            let f = &rows[r][col] / &p;
            for (x, y) in rows[r].iter_mut().zip(&pivot_row) {
                *x -= &f * y;
            }
        }
        rank += 1;
    }
    rank
}

fn kernel_dim(domain: Vec<Vec<u32>>, target: Vec<Vec<u32>>, lap: impl Fn(&ExactPoly) -> ExactPoly, nv: usize) -> usize {
    if target.is_empty() {
        return domain.len();
    }
    let index: BTreeMap<&Vec<u32>, usize> = target.iter().enumerate().map(|(i, e)| (e, i)).collect();
    // Columns of the Laplacian matrix, one per domain monomial.
    let cols: Vec<Vec<BigRational>> = domain
        .iter()
        .map(|e| {
            let mut p = ExactPoly::zero(nv);
            p.add_term(e.clone(), BigRational::one());
            let mut col = vec![BigRational::zero(); target.len()];
            for (t, c) in lap(&p).terms() {
                col[index[t]] = c.clone();
            }
            col
        })
        .collect();
    domain.len() - exact_rank(cols)
}

/// Dimension of the kernel of the real Laplacian from degree `m` to `m - 2`.
pub fn real_kernel_dim(m: u32, n: usize) -> usize {
    let target = if m >= 2 { monomials(n, m - 2) } else { vec![] };
    kernel_dim(monomials(n, m), target, real_laplacian, n)
}

/// Dimension of the kernel of the complex Laplacian from bidegree
/// `(m1, m2)` to `(m1 - 1, m2 - 1)`.
pub fn complex_kernel_dim(m1: u32, m2: u32, n: usize) -> usize {
    let bi = |a: u32, b: u32| -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        for x in monomials(n, a) {
            for y in monomials(n, b) {
                out.push([x.clone(), y].concat());
            }
        }
        out
    };
    let target = if m1 >= 1 && m2 >= 1 { bi(m1 - 1, m2 - 1) } else { vec![] };
    kernel_dim(bi(m1, m2), target, complex_laplacian, 2 * n)
}

/// The real zonal harmonic as a polynomial in `t = x_n` on the sphere,
/// coefficients listed from `t^0` upward.
pub fn real_zonal_in_t(m: u32, n: usize) -> Vec<BigRational> {
    let p = real_zonal_poly(m, n);
    // On the sphere x_1^2 + ... + x_{n-1}^2 = 1 - t^2; each term is
    // c * (sum x_j^2)^{nu/2} * t^{m-nu} after grouping, so substitute by
    // expanding (1 - t^2)^{nu/2}.
    let mut out = vec![BigRational::zero(); m as usize + 1];
    let mut grouped: BTreeMap<u32, BigRational> = BTreeMap::new();
    for (e, c) in p.terms() {
        let tdeg = e[n - 1];
        grouped.entry(tdeg).or_insert_with(BigRational::zero);
        // Coefficient of r^nu t^{m-nu} equals the coefficient of
        // x_1^nu t^{m-nu} in the full polynomial.
        if e[..n - 1].iter().skip(1).all(|&d| d == 0) {
            *grouped.get_mut(&tdeg).expect("inserted") += c.clone();
        }
    }
    for (tdeg, c) in grouped {
        let half = (m - tdeg) / 2;
        for i in 0..=half {
            let mut term = c.clone() * BigRational::from_integer(BigInt::from(binomial(half as u64, i as u64)));
            if i % 2 == 1 {
                term = -term;
            }
            out[(tdeg + 2 * i) as usize] += term;
        }
    }
    out
}

/// Orthogonal polynomial of degree `m` for the weight `(1 - t^2)^{(n-3)/2}`
/// on `[-1, 1]`, normalised to 1 at `t = 1`, by Gram-Schmidt on `1, t, ..., t^m`.
pub fn gegenbauer_by_gram_schmidt(m: u32, n: usize) -> Vec<BigRational> {
    let len = m as usize + 1;
    // Moments relative to the zeroth: mu_{2k}/mu_{2k-2} = (2k - 1)/(2k - 2 + n).
    let mut moments = vec![BigRational::zero(); 2 * len];
    moments[0] = BigRational::one();
    for k in 1..len {
        moments[2 * k] = &moments[2 * k - 2] * rat(2 * k as i64 - 1, 2 * k as i64 - 2 + n as i64);
    }
    let ip = |a: &[BigRational], b: &[BigRational]| -> BigRational {
        let mut s = BigRational::zero();
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                if !x.is_zero() && !y.is_zero() {
                    s += x * y * &moments[i + j];
                }
            }
        }
        s
    };
    let mut basis: Vec<Vec<BigRational>> = Vec::new();
    for d in 0..len {
        let mut v = vec![BigRational::zero(); len];
        v[d] = BigRational::one();
        for b in &basis {
            let c = ip(&v, b) / ip(b, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= &c * y;
            }
        }
        basis.push(v);
    }
    let p = basis.pop().expect("nonempty");
    let at_one: BigRational = p.iter().cloned().sum();
    p.into_iter().map(|x| x / &at_one).collect()
}

/// Largest `|P(x g) - P(x)|` over sampled Givens rotations `g` acting on the
/// first `n - 1` coordinates, for points `x` on the unit sphere. Angles and
/// points are drawn deterministically from `seed`.
pub fn real_rotation_defect(p: &ExactPoly, n: usize, samples: usize, seed: u64) -> f64 {
    use rand::{Rng, SeedableRng};
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    if n < 3 {
        // O(1) is {1, -1}: check the reflection of x_1.
        for _ in 0..samples {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut y = x.clone();
            y[0] = -y[0];
            worst = worst.max((p.eval_f64(&y) - p.eval_f64(&x)).abs());
        }
        return worst;
    }
    for _ in 0..samples {
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= r);
        let i = rng.gen_range(0..n - 1);
        let j = (i + 1 + rng.gen_range(0..n - 2)) % (n - 1);
        let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let (s, c) = th.sin_cos();
        let mut y = x.clone();
        y[i] = c * x[i] - s * x[j];
        y[j] = s * x[i] + c * x[j];
        worst = worst.max((p.eval_f64(&y) - p.eval_f64(&x)).abs());
    }
    worst
}

/// Largest `|P(z g, conj(z g)) - P(z, conj z)|` for sampled unitary `g`
/// acting on the first `n - 1` coordinates by a phase and a Givens rotation.
pub fn complex_rotation_defect(p: &ExactPoly, n: usize, samples: usize, seed: u64) -> f64 {
    use rand::{Rng, SeedableRng};
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let eval = |z: &[Complex64]| {
        let full: Vec<Complex64> = z.iter().cloned().chain(z.iter().map(|v| v.conj())).collect();
        p.eval_complex(&full)
    };
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let mut z: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let r = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        z.iter_mut().for_each(|v| *v /= r);
        let mut w = z.clone();
        let i = rng.gen_range(0..n - 1);
        w[i] *= Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU));
        if n >= 3 {
            let j = (i + 1 + rng.gen_range(0..n - 2)) % (n - 1);
            let (s, c) = rng.gen_range(0.0..std::f64::consts::TAU).sin_cos();
            let (a, b) = (w[i], w[j]);
            w[i] = a * c - b * s;
            w[j] = a * s + b * c;
        }
        worst = worst.max((eval(&w) - eval(&z)).norm());
    }
    worst
}

/// `e_n` as an exact point.
pub fn e_n(nvars: usize, last: usize) -> Vec<BigRational> {
    (0..nvars)
        .map(|i| if i == last { BigRational::one() } else { BigRational::zero() })
        .collect()
}

/// Value of the complex zonal polynomial at `(e_n, e_n)`.
pub fn complex_value_at_e_n(p: &ExactPoly, n: usize) -> BigRational {
    let mut x = vec![BigRational::zero(); 2 * n];
    x[n - 1] = BigRational::one();
    x[2 * n - 1] = BigRational::one();
    p.eval(&x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ri(n: i64) -> BigRational {
        rat(n, 1)
    }

    #[test]
    fn real_m2_n3_is_legendre_kernel() {
        let p = real_zonal_poly(2, 3);
        let x = |i| ExactPoly::var(3, i);
        let expect = x(2)
            .mul(&x(2))
            .add(&x(0).mul(&x(0)).add(&x(1).mul(&x(1))).scale(&rat(-1, 2)));
        assert_eq!(p, expect);
        assert_eq!(real_zonal_in_t(2, 3), vec![rat(-1, 2), ri(0), rat(3, 2)]);
    }

    #[test]
    fn real_low_degrees() {
        for n in 2..=5 {
            assert_eq!(real_zonal_poly(0, n), ExactPoly::one(n));
            assert_eq!(real_zonal_poly(1, n), ExactPoly::var(n, n - 1));
        }
    }

    #[test]
    fn complex_examples() {
        let z = |i| ExactPoly::var(4, i);
        assert_eq!(complex_zonal_poly(1, 0, 2), z(1));
        let expect = z(1).mul(&z(3)).add(&z(0).mul(&z(2)).scale(&ri(-1)));
        assert_eq!(complex_zonal_poly(1, 1, 2), expect);
        assert!(complex_laplacian(&complex_zonal_poly(2, 1, 2)).is_zero());
    }

    #[test]
    fn laplacians_annihilate_and_normalise() {
        for n in 2..=4 {
            for m in 0..=6 {
                let p = real_zonal_poly(m, n);
                assert!(real_laplacian(&p).is_zero(), "real m={m} n={n}");
                assert_eq!(p.homogeneous_degree(), Some(m));
                assert_eq!(p.eval(&e_n(n, n - 1)), ri(1));
            }
        }
        for n in 2..=3 {
            for m1 in 0..=5 {
                for m2 in 0..=5 - m1 {
                    let p = complex_zonal_poly(m1, m2, n);
                    assert!(complex_laplacian(&p).is_zero());
                    assert_eq!(p.bidegree(), Some((m1, m2)));
                    assert_eq!(complex_value_at_e_n(&p, n), ri(1));
                }
            }
        }
    }

    #[test]
    fn dimensions_match_kernel_ranks() {
        assert_eq!(harmonic_dim_real(2, 3), 5);
        assert_eq!(real_kernel_dim(2, 3), 5);
        assert_eq!(harmonic_dim_real(0, 4), 1);
        assert_eq!(harmonic_dim_complex(1, 1, 2), 3);
        assert_eq!(complex_kernel_dim(1, 1, 2), 3);
        for n in 2..=4 {
            for m in 0..=6 {
                assert_eq!(real_kernel_dim(m, n) as u64, harmonic_dim_real(m, n), "m={m} n={n}");
            }
        }
        for n in 2..=3 {
            for m1 in 0..=4 {
                for m2 in 0..=4 - m1 {
                    assert_eq!(complex_kernel_dim(m1, m2, n) as u64, harmonic_dim_complex(m1, m2, n));
                }
            }
        }
    }

    #[test]
    fn zonal_restricts_to_gegenbauer() {
        for n in 2..=5 {
            for m in 0..=6 {
                assert_eq!(real_zonal_in_t(m, n), gegenbauer_by_gram_schmidt(m, n), "m={m} n={n}");
            }
        }
    }

    #[test]
    fn exact_rank_small() {
        let m = vec![vec![ri(1), ri(2)], vec![ri(2), ri(4)], vec![ri(0), ri(1)]];
        assert_eq!(exact_rank(m), 2);
        assert_eq!(monomials(3, 2).len(), 6);
    }

    proptest! {
        #[test]
        fn real_zonal_is_rotation_invariant(m in 0u32..=6, n in 2usize..=4, seed in any::<u64>()) {
            let p = real_zonal_poly(m, n);
            prop_assert!(real_rotation_defect(&p, n, 20, seed) < 1e-10);
        }

        #[test]
        fn complex_zonal_is_unitary_invariant(m1 in 0u32..=3, m2 in 0u32..=2, n in 2usize..=3, seed in any::<u64>()) {
            let p = complex_zonal_poly(m1, m2, n);
            prop_assert!(complex_rotation_defect(&p, n, 20, seed) < 1e-10);
        }
    }
}
