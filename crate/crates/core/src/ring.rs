//! Finite quotient rings `O/p^m` of a nonarchimedean ring of integers.
//!
//! Two branches are modeled: `Z/p^m` (the p-adic integers truncated at level
//! `m`, residue field `F_p`) and `F_q[t]/(t^m)` (the Laurent-series branch,
//! residue field `F_q` with `q = p^f`).
//!
//! Elements of both branches share one encoding: an integer in `0..q^m`
//! whose base-`q` digits are the coefficients of the uniformiser expansion.
//! Digit 0 is the residue class, so reduction to level `l` is `x mod q^l`,
//! multiplication by the uniformiser is a digit shift, and the valuation is
//! the number of trailing zero digits.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest ring cardinality accepted by [`RingLevel::new`].
pub const MAX_RING_SIZE: u64 = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    Padic,
    Laurent,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Branch::Padic => write!(f, "padic"),
            Branch::Laurent => write!(f, "laurent"),
        }
    }
}

/// Canonical residue representative of an element of some [`RingLevel`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RingElem(pub u32);

impl RingElem {
    pub const ZERO: RingElem = RingElem(0);
    pub const ONE: RingElem = RingElem(1);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for RingElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Arithmetic tables of the residue field `F_q = F_p[X]/(modulus)`.
#[derive(Debug)]
struct FieldTables {
    q: u32,
    add: Vec<u32>,
    mul: Vec<u32>,
    neg: Vec<u32>,
}

impl FieldTables {
    fn build(p: u32, f: u32, modulus: &[u32]) -> FieldTables {
        let q = p.pow(f);
        let qs = q as usize;
        let digits = |mut x: u32| {
            let mut d = vec![0u32; f as usize];
            for slot in d.iter_mut() {
                *slot = x % p;
                x /= p;
            }
            d
        };
        let undigits = |d: &[u32]| d.iter().rev().fold(0u32, |acc, &c| acc * p + c);

        let mut add = vec![0; qs * qs];
        let mut mul = vec![0; qs * qs];
        let mut neg = vec![0; qs];
        for a in 0..q {
            let da = digits(a);
            neg[a as usize] = undigits(&da.iter().map(|&c| (p - c) % p).collect::<Vec<_>>());
            for b in 0..q {
                let db = digits(b);
                let s: Vec<u32> = da.iter().zip(&db).map(|(x, y)| (x + y) % p).collect();
                add[a as usize * qs + b as usize] = undigits(&s);
                let prod = poly_mulmod(&da, &db, modulus, p);
                mul[a as usize * qs + b as usize] = undigits(&prod);
            }
        }
        FieldTables { q, add, mul, neg }
    }

    #[inline]
    fn add(&self, a: u32, b: u32) -> u32 {
        self.add[(a * self.q + b) as usize]
    }

    #[inline]
    fn mul(&self, a: u32, b: u32) -> u32 {
        self.mul[(a * self.q + b) as usize]
    }
}

/// Product of two polynomials over `F_p` reduced modulo a monic `modulus`.
fn poly_mulmod(a: &[u32], b: &[u32], modulus: &[u32], p: u32) -> Vec<u32> {
    let f = modulus.len() - 1;
    let mut prod = vec![0u64; a.len() + b.len()];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            prod[i + j] = (prod[i + j] + x as u64 * y as u64) % p as u64;
        }
    }
    for deg in (f..prod.len()).rev() {
        let c = prod[deg];
        if c == 0 {
            continue;
        }
        for (k, &mk) in modulus.iter().enumerate() {
            let idx = deg - f + k;
            prod[idx] = (prod[idx] + (p as u64 - c) * mk as u64) % p as u64;
        }
    }
    prod.truncate(f);
    prod.resize(f, 0);
    prod.into_iter().map(|c| c as u32).collect()
}

/// Remainder of `a` modulo a monic polynomial `g` over `F_p`.
fn poly_rem(a: &[u32], g: &[u32], p: u32) -> Vec<u32> {
    let mut r: Vec<u64> = a.iter().map(|&c| c as u64).collect();
    let dg = g.len() - 1;
    while r.len() > dg {
        let c = *r.last().unwrap();
        let shift = r.len() - 1 - dg;
        if c != 0 {
            for (k, &gk) in g.iter().enumerate() {
                r[shift + k] = (r[shift + k] + (p as u64 - c) * gk as u64) % p as u64;
            }
        }
        r.pop();
    }
    r.into_iter().map(|c| c as u32).collect()
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Whether a little-endian coefficient list is a monic irreducible of degree `f` over `F_p`.
pub fn is_monic_irreducible(poly: &[u32], p: u32, f: u32) -> bool {
    if poly.len() != f as usize + 1 || poly[f as usize] != 1 || poly.iter().any(|&c| c >= p) {
        return false;
    }
    if f == 1 {
        return true;
    }
    for deg in 1..=(f / 2) {
        for low in 0..p.pow(deg) {
            let mut g = Vec::with_capacity(deg as usize + 1);
            let mut x = low;
            for _ in 0..deg {
                g.push(x % p);
                x /= p;
            }
            g.push(1);
            if poly_rem(poly, &g, p).iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

/// The first monic irreducible polynomial of degree `f` over `F_p`, ordered by
/// the base-`p` integer formed from its lower coefficients.
pub fn default_modulus(p: u32, f: u32) -> Vec<u32> {
    if f == 1 {
        return vec![0, 1];
    }
    for low in 0..p.pow(f) {
        let mut poly = Vec::with_capacity(f as usize + 1);
        let mut x = low;
        for _ in 0..f {
            poly.push(x % p);
            x /= p;
        }
        poly.push(1);
        if is_monic_irreducible(&poly, p, f) {
            return poly;
        }
    }
    unreachable!("irreducible polynomials exist in every degree")
}

/// The finite ring `O/p^m` at a fixed level.
#[derive(Clone)]
pub struct RingLevel {
    branch: Branch,
    p: u32,
    f: u32,
    m: u32,
    q: u32,
    size: u32,
    modulus: Vec<u32>,
    field: Arc<FieldTables>,
    q_pows: Vec<u32>,
}

impl fmt::Debug for RingLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RingLevel")
            .field("branch", &self.branch)
            .field("p", &self.p)
            .field("f", &self.f)
            .field("m", &self.m)
            .field("modulus", &self.modulus)
            .finish()
    }
}

impl PartialEq for RingLevel {
    fn eq(&self, other: &Self) -> bool {
        self.branch == other.branch
            && self.p == other.p
            && self.f == other.f
            && self.m == other.m
            && self.modulus == other.modulus
    }
}

impl Eq for RingLevel {}

impl fmt::Display for RingLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.branch {
            Branch::Padic => write!(f, "Z/{}^{}", self.p, self.m),
            Branch::Laurent => write!(f, "F_{}[t]/(t^{})", self.q, self.m),
        }
    }
}

impl RingLevel {
    /// `O/p^m` with the built-in residue-field modulus.
    pub fn new(branch: Branch, p: u32, f: u32, m: u32) -> Result<RingLevel> {
        Self::with_modulus(branch, p, f, m, None)
    }

    pub fn padic(p: u32, m: u32) -> Result<RingLevel> {
        Self::new(Branch::Padic, p, 1, m)
    }

    pub fn laurent(p: u32, f: u32, m: u32) -> Result<RingLevel> {
        Self::new(Branch::Laurent, p, f, m)
    }

    /// As [`RingLevel::new`], with an optional user-supplied irreducible
    /// polynomial (little-endian coefficients mod `p`) defining `F_q`.
    pub fn with_modulus(
        branch: Branch,
        p: u32,
        f: u32,
        m: u32,
        modulus: Option<Vec<u32>>,
    ) -> Result<RingLevel> {
        if !is_prime(p as u64) {
            return Err(Error::InvalidPrime(p as u64));
        }
        if f == 0 {
            return Err(Error::InvalidParameter("extension degree f must be >= 1".into()));
        }
        if branch == Branch::Padic && f != 1 {
            return Err(Error::UnsupportedExtension(f));
        }
        if m == 0 {
            return Err(Error::InvalidParameter("ring level m must be >= 1".into()));
        }
        let q = (p as u64)
            .checked_pow(f)
            .filter(|&q| q <= 4096)
            .ok_or(Error::SizeCap {
                what: "residue field",
                size: (p as u128).saturating_pow(f),
                cap: 4096,
            })?;
        let size = q as u128;
        let size = size.saturating_pow(m);
        if size > MAX_RING_SIZE as u128 {
            return Err(Error::SizeCap {
                what: "ring O/p^m",
                size,
                cap: MAX_RING_SIZE as u128,
            });
        }
        let modulus = match modulus {
            Some(poly) => {
                if branch == Branch::Padic && poly != [0, 1] {
                    return Err(Error::InvalidModulus(poly));
                }
                if !is_monic_irreducible(&poly, p, f) {
                    return Err(Error::InvalidModulus(poly));
                }
                poly
            }
            None => default_modulus(p, f),
        };
        let q = q as u32;
        let field = Arc::new(FieldTables::build(p, f, &modulus));
        let q_pows = (0..=m).map(|i| q.pow(i)).collect();
        Ok(RingLevel {
            branch,
            p,
            f,
            m,
            q,
            size: size as u32,
            modulus,
            field,
            q_pows,
        })
    }

    /// The same ring at another level (sharing branch, prime and modulus).
    pub fn at_level(&self, m: u32) -> Result<RingLevel> {
        if m == self.m {
            return Ok(self.clone());
        }
        if m == 0 {
            return Err(Error::InvalidParameter("ring level m must be >= 1".into()));
        }
        let size = (self.q as u128).saturating_pow(m);
        if size > MAX_RING_SIZE as u128 {
            return Err(Error::SizeCap {
                what: "ring O/p^m",
                size,
                cap: MAX_RING_SIZE as u128,
            });
        }
        Ok(RingLevel {
            m,
            size: size as u32,
            q_pows: (0..=m).map(|i| self.q.pow(i)).collect(),
            ..self.clone()
        })
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn f(&self) -> u32 {
        self.f
    }

    pub fn level(&self) -> u32 {
        self.m
    }

    /// Residue field cardinality.
    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    /// `q^i` for `0 <= i <= m`.
    #[inline]
    pub fn q_pow(&self, i: u32) -> u32 {
        self.q_pows[i as usize]
    }

    /// `|(O/p^m)^x| = q^(m-1) (q - 1)`.
    pub fn unit_count(&self) -> u32 {
        self.q_pow(self.m - 1) * (self.q - 1)
    }

    pub fn elements(&self) -> impl Iterator<Item = RingElem> + Clone {
        (0..self.size).map(RingElem)
    }

    pub fn units(&self) -> impl Iterator<Item = RingElem> + '_ {
        self.elements().filter(move |&x| self.is_unit(x))
    }

    pub fn from_int(&self, v: i64) -> RingElem {
        match self.branch {
            Branch::Padic => RingElem(v.rem_euclid(self.size as i64) as u32),
            Branch::Laurent => RingElem(v.rem_euclid(self.p as i64) as u32),
        }
    }

    #[inline]
    pub fn add(&self, a: RingElem, b: RingElem) -> RingElem {
        match self.branch {
            Branch::Padic => RingElem(((a.0 as u64 + b.0 as u64) % self.size as u64) as u32),
            Branch::Laurent => {
                if self.f == 1 && self.m == 1 {
                    return RingElem((a.0 + b.0) % self.q);
                }
                let mut out = 0u32;
                let (mut x, mut y) = (a.0, b.0);
                for i in 0..self.m {
                    let d = self.field.add(x % self.q, y % self.q);
                    out += d * self.q_pows[i as usize];
                    x /= self.q;
                    y /= self.q;
                }
                RingElem(out)
            }
        }
    }

    #[inline]
    pub fn neg(&self, a: RingElem) -> RingElem {
        match self.branch {
            Branch::Padic => RingElem((self.size - a.0) % self.size),
            Branch::Laurent => {
                let mut out = 0u32;
                let mut x = a.0;
                for i in 0..self.m {
                    out += self.field.neg[(x % self.q) as usize] * self.q_pows[i as usize];
                    x /= self.q;
                }
                RingElem(out)
            }
        }
    }

    #[inline]
    pub fn sub(&self, a: RingElem, b: RingElem) -> RingElem {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: RingElem, b: RingElem) -> RingElem {
        match self.branch {
            Branch::Padic => RingElem(((a.0 as u64 * b.0 as u64) % self.size as u64) as u32),
            Branch::Laurent => {
                let m = self.m as usize;
                let mut da = [0u32; 32];
                let mut db = [0u32; 32];
                let (mut x, mut y) = (a.0, b.0);
                for i in 0..m {
                    da[i] = x % self.q;
                    db[i] = y % self.q;
                    x /= self.q;
                    y /= self.q;
                }
                let mut out = 0u32;
                for k in 0..m {
                    let mut acc = 0u32;
                    for i in 0..=k {
                        if da[i] != 0 && db[k - i] != 0 {
                            acc = self.field.add(acc, self.field.mul(da[i], db[k - i]));
                        }
                    }
                    out += acc * self.q_pows[k];
                }
                RingElem(out)
            }
        }
    }

    pub fn pow(&self, a: RingElem, mut e: u64) -> RingElem {
        let mut base = a;
        let mut acc = RingElem::ONE;
        if self.size == 1 {
            return RingElem::ZERO;
        }
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse of a unit.
    pub fn inv(&self, a: RingElem) -> Option<RingElem> {
        if !self.is_unit(a) {
            return None;
        }
        Some(self.pow(a, self.unit_count() as u64 - 1))
    }

    /// Truncated valuation `v(x)` in `0..=m`; `v(x) = m` iff `x = 0`.
    #[inline]
    pub fn valuation(&self, x: RingElem) -> u32 {
        if x.0 == 0 {
            return self.m;
        }
        let mut v = 0;
        let mut y = x.0;
        while y % self.q == 0 {
            y /= self.q;
            v += 1;
        }
        v
    }

    #[inline]
    pub fn is_unit(&self, x: RingElem) -> bool {
        x.0 % self.q != 0
    }

    /// Image of `x` under `O/p^m -> O/p^l`.
    #[inline]
    pub fn reduce(&self, x: RingElem, l: u32) -> RingElem {
        RingElem(x.0 % self.q_pow(l.min(self.m)))
    }

    /// `varpi^l * x`.
    #[inline]
    pub fn shift_up(&self, x: RingElem, l: u32) -> RingElem {
        if l >= self.m {
            return RingElem::ZERO;
        }
        RingElem(((x.0 as u64 * self.q_pow(l) as u64) % self.size as u64) as u32)
    }

    /// Canonical lift of `varpi^(-l) * x`; requires `v(x) >= l`.
    #[inline]
    pub fn shift_down(&self, x: RingElem, l: u32) -> RingElem {
        debug_assert!(self.valuation(x) >= l);
        RingElem(x.0 / self.q_pow(l.min(self.m)))
    }

    /// `varpi^l`.
    pub fn uniformizer_pow(&self, l: u32) -> RingElem {
        self.shift_up(RingElem::ONE, l)
    }

    /// Generators of the additive group of the ring.
    pub fn additive_generators(&self) -> Vec<RingElem> {
        match self.branch {
            Branch::Padic => vec![RingElem::ONE],
            Branch::Laurent => {
                let mut out = Vec::new();
                for s in 0..self.m {
                    for j in 0..self.f {
                        out.push(RingElem(self.p.pow(j) * self.q_pow(s)));
                    }
                }
                out
            }
        }
    }

    /// Additive generators of the ideal `p^l`.
    pub fn ideal_generators(&self, l: u32) -> Vec<RingElem> {
        if l >= self.m {
            return Vec::new();
        }
        match self.branch {
            Branch::Padic => vec![self.uniformizer_pow(l)],
            Branch::Laurent => self
                .additive_generators()
                .into_iter()
                .filter(|&x| self.valuation(x) >= l)
                .collect(),
        }
    }

    /// Multiplicative order of a unit.
    pub fn unit_order(&self, x: RingElem) -> u64 {
        let mut o = self.unit_count() as u64;
        for r in prime_factors(o) {
            while o % r == 0 && self.pow(x, o / r) == RingElem::ONE {
                o /= r;
            }
        }
        o
    }
}

/// An exact root of unity `exp(2 pi i num / order)`, kept reduced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RootOfUnity {
    num: u32,
    order: u32,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

impl RootOfUnity {
    pub const ONE: RootOfUnity = RootOfUnity { num: 0, order: 1 };

    pub fn new(num: u64, order: u64) -> RootOfUnity {
        assert!(order > 0);
        let num = num % order;
        let g = gcd(num, order);
        RootOfUnity {
            num: (num / g) as u32,
            order: (order / g) as u32,
        }
    }

    pub fn numerator(self) -> u32 {
        self.num
    }

    /// Exact multiplicative order of the root.
    pub fn order(self) -> u32 {
        self.order
    }

    pub fn is_one(self) -> bool {
        self.num == 0
    }

    pub fn mul(self, other: RootOfUnity) -> RootOfUnity {
        let n = lcm(self.order as u64, other.order as u64);
        let a = self.num as u64 * (n / self.order as u64) + other.num as u64 * (n / other.order as u64);
        RootOfUnity::new(a, n)
    }

    pub fn conj(self) -> RootOfUnity {
        RootOfUnity::new((self.order - self.num) as u64, self.order as u64)
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::from_polar(1.0, std::f64::consts::TAU * self.num as f64 / self.order as f64)
    }
}

impl fmt::Display for RootOfUnity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e(2pi i {}/{})", self.num, self.order)
    }
}

/// Decomposition of `(O/p^m)^x` as an internal direct product of cyclic groups.
#[derive(Debug)]
pub struct UnitGroupBasis {
    ring: RingLevel,
    generators: Vec<RingElem>,
    orders: Vec<u32>,
    exponent: u32,
    /// Mixed-radix exponent code of each unit, `u32::MAX` for non-units.
    log: Vec<u32>,
    /// Subgroups `1 + p^l` (`l = 0` meaning all units), given by generators.
    congruence_generators: Vec<Vec<RingElem>>,
}

impl UnitGroupBasis {
    /// Finds a basis by Sylow decomposition and greedy lifting of maximal-order
    /// elements, then verifies it by exhaustive reconstruction of every unit.
    pub fn new(ring: &RingLevel) -> Result<UnitGroupBasis> {
        let units: Vec<RingElem> = ring.units().collect();
        let total = units.len() as u64;
        if total != ring.unit_count() as u64 {
            return Err(Error::Internal("unit count disagrees with q^(m-1)(q-1)".into()));
        }
        let orders: Vec<u64> = units.iter().map(|&u| ring.unit_order(u)).collect();

        let mut generators = Vec::new();
        let mut gen_orders = Vec::new();
        for r in prime_factors(total) {
            let sylow: Vec<RingElem> = units
                .iter()
                .zip(&orders)
                .filter(|(_, &o)| is_power_of(o, r))
                .map(|(&u, _)| u)
                .collect();
            let (g, o) = sylow_basis(ring, &sylow, r)?;
            generators.extend(g);
            gen_orders.extend(o);
        }

        let exponent = gen_orders.iter().fold(1u64, |acc, &d| lcm(acc, d as u64)) as u32;
        let mut log = vec![u32::MAX; ring.size() as usize];
        let powers: Vec<Vec<RingElem>> = generators
            .iter()
            .zip(&gen_orders)
            .map(|(&g, &d)| {
                let mut v = Vec::with_capacity(d as usize);
                let mut x = RingElem::ONE;
                for _ in 0..d {
                    v.push(x);
                    x = ring.mul(x, g);
                }
                v
            })
            .collect();
        let mut exps = vec![0u32; generators.len()];
        for code in 0..total as u32 {
            decode_mixed(code, &gen_orders, &mut exps);
            let mut x = RingElem::ONE;
            for (i, &e) in exps.iter().enumerate() {
                x = ring.mul(x, powers[i][e as usize]);
            }
            if log[x.index()] != u32::MAX {
                return Err(Error::Internal(format!(
                    "unit {} reached twice by the basis {:?}",
                    x.0, generators
                )));
            }
            log[x.index()] = code;
        }
        if units.iter().any(|u| log[u.index()] == u32::MAX) {
            return Err(Error::Internal("unit basis does not reach every unit".into()));
        }

        let mut basis = UnitGroupBasis {
            ring: ring.clone(),
            generators,
            orders: gen_orders,
            exponent,
            log,
            congruence_generators: Vec::new(),
        };
        basis.congruence_generators = (0..=ring.level())
            .map(|l| basis.congruence_subgroup_generators(l))
            .collect();
        Ok(basis)
    }

    pub fn ring(&self) -> &RingLevel {
        &self.ring
    }

    pub fn generators(&self) -> &[RingElem] {
        &self.generators
    }

    pub fn orders(&self) -> &[u32] {
        &self.orders
    }

    /// Exponent of the unit group, `lcm` of the generator orders.
    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn order(&self) -> u32 {
        self.orders.iter().product()
    }

    /// Mixed-radix code of the exponent vector of a unit.
    #[inline]
    pub fn code(&self, u: RingElem) -> Option<u32> {
        match self.log.get(u.index()) {
            Some(&c) if c != u32::MAX => Some(c),
            _ => None,
        }
    }

    pub fn exponents(&self, u: RingElem) -> Option<Vec<u32>> {
        let code = self.code(u)?;
        let mut e = vec![0; self.orders.len()];
        decode_mixed(code, &self.orders, &mut e);
        Some(e)
    }

    pub fn element(&self, exps: &[u32]) -> RingElem {
        let mut x = RingElem::ONE;
        for (&g, &e) in self.generators.iter().zip(exps) {
            x = self.ring.mul(x, self.ring.pow(g, e as u64));
        }
        x
    }

    /// Generators of `(1 + p^l) ∩ O^x`; for `l = 0` the whole unit group.
    pub fn congruence_generators(&self, l: u32) -> &[RingElem] {
        &self.congruence_generators[l.min(self.ring.level()) as usize]
    }

    fn congruence_subgroup_generators(&self, l: u32) -> Vec<RingElem> {
        if l == 0 {
            return self.generators.clone();
        }
        let ring = &self.ring;
        let members: Vec<RingElem> = ring
            .units()
            .filter(|&u| ring.reduce(u, l) == ring.reduce(RingElem::ONE, l))
            .collect();
        let mut span: HashSet<RingElem> = HashSet::from([RingElem::ONE]);
        let mut gens = Vec::new();
        for &u in &members {
            if span.contains(&u) {
                continue;
            }
            gens.push(u);
            let mut frontier: Vec<RingElem> = span.iter().copied().collect();
            while let Some(x) = frontier.pop() {
                for &g in &gens {
                    let y = ring.mul(x, g);
                    if span.insert(y) {
                        frontier.push(y);
                    }
                }
            }
        }
        gens
    }
}

fn is_power_of(mut x: u64, r: u64) -> bool {
    while x % r == 0 {
        x /= r;
    }
    x == 1
}

fn decode_mixed(mut code: u32, radices: &[u32], out: &mut [u32]) {
    for i in (0..radices.len()).rev() {
        out[i] = code % radices[i];
        code /= radices[i];
    }
}

fn encode_mixed(exps: &[u32], radices: &[u32]) -> u32 {
    exps.iter()
        .zip(radices)
        .fold(0u32, |acc, (&e, &d)| acc * d + (e % d))
}

/// Basis of an abelian `r`-group given as an explicit element list.
fn sylow_basis(
    ring: &RingLevel,
    group: &[RingElem],
    r: u64,
) -> Result<(Vec<RingElem>, Vec<u32>)> {
    let mut gens: Vec<RingElem> = Vec::new();
    let mut orders: Vec<u32> = Vec::new();
    // Elements of the current subgroup H with their exponent vectors.
    let mut span: std::collections::HashMap<RingElem, Vec<u32>> =
        std::collections::HashMap::from([(RingElem::ONE, Vec::new())]);

    while span.len() < group.len() {
        // Order of each element modulo H, as (r^e, y^(r^e)).
        let mut best: Option<u64> = None;
        let mut quotient_orders = Vec::with_capacity(group.len());
        for &y in group {
            let mut o = 1u64;
            let mut z = y;
            while !span.contains_key(&z) {
                z = ring.pow(z, r);
                o *= r;
            }
            quotient_orders.push((o, z));
            best = Some(best.map_or(o, |b| b.max(o)));
        }
        let best = best.unwrap();
        let mut chosen = None;
        for (&y, &(o, z)) in group.iter().zip(&quotient_orders) {
            if o != best {
                continue;
            }
            let s = &span[&z];
            if s.iter().all(|&si| si as u64 % o == 0) {
                let mut lifted = y;
                for (i, &si) in s.iter().enumerate() {
                    let d = orders[i] as u64;
                    let k = si as u64 / o;
                    let correction = ring.pow(gens[i], (d - k % d) % d);
                    lifted = ring.mul(lifted, correction);
                }
                chosen = Some(lifted);
                break;
            }
        }
        let g = chosen.ok_or_else(|| {
            Error::Internal("no liftable element of maximal quotient order".into())
        })?;
        if ring.pow(g, best) != RingElem::ONE {
            return Err(Error::Internal("lifted generator has the wrong order".into()));
        }
        let old: Vec<(RingElem, Vec<u32>)> = span.drain().collect();
        let mut power = RingElem::ONE;
        for e in 0..best as u32 {
            for (x, v) in &old {
                let mut w = v.clone();
                w.push(e);
                span.insert(ring.mul(*x, power), w);
            }
            power = ring.mul(power, g);
        }
        if span.len() != old.len() * best as usize {
            return Err(Error::Internal("new generator meets the span nontrivially".into()));
        }
        gens.push(g);
        orders.push(best as u32);
    }
    Ok((gens, orders))
}

/// A character of `(O/p^m)^x`, stored as an exponent vector against a
/// [`UnitGroupBasis`]: `chi(g_i) = exp(2 pi i a_i / d_i)`.
#[derive(Clone, Debug)]
pub struct UnitCharacter {
    basis: Arc<UnitGroupBasis>,
    exponents: Vec<u32>,
    conductor: u32,
}

impl PartialEq for UnitCharacter {
    fn eq(&self, other: &Self) -> bool {
        self.basis.ring == other.basis.ring && self.exponents == other.exponents
    }
}

impl Eq for UnitCharacter {}

impl UnitCharacter {
    pub fn from_exponents(basis: Arc<UnitGroupBasis>, exponents: Vec<u32>) -> Result<Self> {
        if exponents.len() != basis.orders.len() {
            return Err(Error::Mismatch(format!(
                "character needs {} exponents, got {}",
                basis.orders.len(),
                exponents.len()
            )));
        }
        let exponents: Vec<u32> = exponents
            .iter()
            .zip(&basis.orders)
            .map(|(&a, &d)| a % d)
            .collect();
        let mut chi = UnitCharacter {
            basis,
            exponents,
            conductor: 0,
        };
        chi.conductor = chi.compute_conductor();
        Ok(chi)
    }

    pub fn trivial(basis: Arc<UnitGroupBasis>) -> Self {
        let k = basis.orders.len();
        UnitCharacter {
            basis,
            exponents: vec![0; k],
            conductor: 0,
        }
    }

    fn compute_conductor(&self) -> u32 {
        let m = self.basis.ring.level();
        (0..=m)
            .find(|&l| {
                self.basis
                    .congruence_generators(l)
                    .iter()
                    .all(|&u| self.rotation(u) == Some(0))
            })
            .unwrap_or(m)
    }

    pub fn basis(&self) -> &Arc<UnitGroupBasis> {
        &self.basis
    }

    pub fn ring(&self) -> &RingLevel {
        &self.basis.ring
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    /// Conductor exponent: least `l >= 0` with `chi` trivial on `1 + p^l`.
    pub fn conductor(&self) -> u32 {
        self.conductor
    }

    pub fn is_trivial(&self) -> bool {
        self.exponents.iter().all(|&a| a == 0)
    }

    /// Value at a unit as a rotation index `k` meaning `exp(2 pi i k / E)`,
    /// with `E` the exponent of the unit group.
    #[inline]
    pub fn rotation(&self, u: RingElem) -> Option<u32> {
        let code = self.basis.code(u)?;
        let e_total = self.basis.exponent as u64;
        let mut c = code;
        let mut acc = 0u64;
        for i in (0..self.exponents.len()).rev() {
            let d = self.basis.orders[i];
            let e = c % d;
            c /= d;
            acc += self.exponents[i] as u64 * e as u64 * (e_total / d as u64);
        }
        Some((acc % e_total) as u32)
    }

    pub fn eval(&self, u: RingElem) -> Result<RootOfUnity> {
        let k = self.rotation(u).ok_or(Error::NonUnit)?;
        Ok(RootOfUnity::new(k as u64, self.basis.exponent as u64))
    }

    /// Value as a complex number; non-units map to 0 unless the character is
    /// trivial, which extends to the constant 1.
    pub fn value_or_zero(&self, u: RingElem) -> Complex64 {
        match self.rotation(u) {
            Some(k) => RootOfUnity::new(k as u64, self.basis.exponent as u64).to_complex(),
            None if self.is_trivial() => Complex64::new(1.0, 0.0),
            None => Complex64::new(0.0, 0.0),
        }
    }

    pub fn product(&self, other: &UnitCharacter) -> Result<UnitCharacter> {
        if self.basis.ring != other.basis.ring {
            return Err(Error::Mismatch("characters live on different rings".into()));
        }
        let e = self
            .exponents
            .iter()
            .zip(&other.exponents)
            .map(|(&a, &b)| a + b)
            .collect();
        UnitCharacter::from_exponents(self.basis.clone(), e)
    }

    pub fn conj(&self) -> UnitCharacter {
        let e = self
            .exponents
            .iter()
            .zip(&self.basis.orders)
            .map(|(&a, &d)| (d - a) % d)
            .collect();
        UnitCharacter::from_exponents(self.basis.clone(), e).expect("same basis")
    }

    /// Position of this character in [`CharacterGroup::characters`].
    pub fn code(&self) -> u32 {
        encode_mixed(&self.exponents, &self.basis.orders)
    }
}

/// The full character group of `(O/p^m)^x`.
#[derive(Clone, Debug)]
pub struct CharacterGroup {
    basis: Arc<UnitGroupBasis>,
    characters: Vec<UnitCharacter>,
}

impl CharacterGroup {
    pub fn new(ring: &RingLevel) -> Result<CharacterGroup> {
        let basis = Arc::new(UnitGroupBasis::new(ring)?);
        Ok(Self::from_basis(basis))
    }

    pub fn from_basis(basis: Arc<UnitGroupBasis>) -> CharacterGroup {
        let total = basis.order();
        let mut exps = vec![0; basis.orders.len()];
        let characters = (0..total)
            .map(|code| {
                decode_mixed(code, &basis.orders, &mut exps);
                UnitCharacter::from_exponents(basis.clone(), exps.clone()).expect("valid")
            })
            .collect();
        CharacterGroup { basis, characters }
    }

    pub fn basis(&self) -> &Arc<UnitGroupBasis> {
        &self.basis
    }

    pub fn ring(&self) -> &RingLevel {
        &self.basis.ring
    }

    pub fn characters(&self) -> &[UnitCharacter] {
        &self.characters
    }

    pub fn len(&self) -> usize {
        self.characters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.characters.is_empty()
    }

    pub fn trivial(&self) -> &UnitCharacter {
        &self.characters[0]
    }

    /// Characters with the given conductor exponent, in enumeration order.
    pub fn with_conductor(&self, c: u32) -> Vec<&UnitCharacter> {
        self.characters.iter().filter(|chi| chi.conductor == c).collect()
    }

    /// The `index`-th character of conductor `c`.
    pub fn select(&self, c: u32, index: usize) -> Result<UnitCharacter> {
        self.with_conductor(c)
            .get(index)
            .map(|&chi| chi.clone())
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "no character #{index} of conductor {c} on {}",
                    self.basis.ring
                ))
            })
    }
}

/// Builds the ring; shorthand for [`RingLevel::new`].
pub fn make_ring_level(branch: Branch, p: u32, f: u32, m: u32) -> Result<RingLevel> {
    RingLevel::new(branch, p, f, m)
}

pub fn unit_group_basis(ring: &RingLevel) -> Result<UnitGroupBasis> {
    UnitGroupBasis::new(ring)
}

pub fn characters(ring: &RingLevel) -> Result<Vec<UnitCharacter>> {
    Ok(CharacterGroup::new(ring)?.characters)
}
