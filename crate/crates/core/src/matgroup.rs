//! `GL_n(O/p^M)`, its congruence subgroups, generating sets, and the
//! `K_0(p^m)` double coset decomposition with explicit witnesses.

use std::collections::HashSet;
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::ring::{RingElem, RingLevel, UnitGroupBasis};

/// Default number of elements a closure computation may visit.
pub const DEFAULT_CLOSURE_BUDGET: usize = 2_000_000;

/// An `n x n` matrix over a ring level, stored row-major.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MatK {
    n: usize,
    entries: Vec<RingElem>,
}

impl fmt::Debug for MatK {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.n {
            if i > 0 {
                write!(f, "; ")?;
            }
            let row: Vec<String> = self.row(i).iter().map(|x| x.0.to_string()).collect();
            write!(f, "{}", row.join(" "))?;
        }
        write!(f, "]")
    }
}

impl MatK {
    pub fn from_entries(n: usize, entries: Vec<RingElem>) -> MatK {
        assert_eq!(entries.len(), n * n, "matrix needs n^2 entries");
        MatK { n, entries }
    }

    pub fn from_rows(rows: &[&[u32]]) -> MatK {
        let n = rows.len();
        let entries = rows
            .iter()
            .flat_map(|r| {
                assert_eq!(r.len(), n);
                r.iter().map(|&x| RingElem(x))
            })
            .collect();
        MatK { n, entries }
    }

    pub fn identity(n: usize) -> MatK {
        let mut entries = vec![RingElem::ZERO; n * n];
        for i in 0..n {
            entries[i * n + i] = RingElem::ONE;
        }
        MatK { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> RingElem {
        self.entries[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, x: RingElem) {
        self.entries[i * self.n + j] = x;
    }

    pub fn row(&self, i: usize) -> &[RingElem] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[RingElem] {
        &self.entries
    }

    /// Bottom row `e_n k`.
    pub fn bottom_row(&self) -> &[RingElem] {
        self.row(self.n - 1)
    }

    /// Bottom right entry `e_n k e_n^t`.
    pub fn corner(&self) -> RingElem {
        self.get(self.n - 1, self.n - 1)
    }

    /// Top-left `(n-1) x (n-1)` block.
    pub fn block_a(&self) -> MatK {
        let m = self.n - 1;
        let entries = (0..m).flat_map(|i| (0..m).map(move |j| (i, j)));
        MatK::from_entries(m, entries.map(|(i, j)| self.get(i, j)).collect())
    }
}

/// The kinds of subgroup of `K = GL_n(O)` used throughout, at a fixed level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SubgroupSpec {
    /// All of `K`.
    Full,
    /// `K(p^l)`: `k == 1 mod p^l`.
    Principal(u32),
    /// `K_1(p^l)`: bottom row `== (0, ..., 0, 1) mod p^l`.
    K1(u32),
    /// `K_0(p^l)`: bottom-left block `== 0 mod p^l`.
    K0(u32),
    /// `K_{n-1,1}`: bottom row exactly `(0, ..., 0, 1)`.
    Mirabolic,
}

impl fmt::Display for SubgroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubgroupSpec::Full => write!(f, "K"),
            SubgroupSpec::Principal(l) => write!(f, "K(p^{l})"),
            SubgroupSpec::K1(l) => write!(f, "K1(p^{l})"),
            SubgroupSpec::K0(l) => write!(f, "K0(p^{l})"),
            SubgroupSpec::Mirabolic => write!(f, "K_(n-1,1)"),
        }
    }
}

/// `GL_n` over a fixed ring level: the arithmetic context for [`MatK`].
#[derive(Clone, Debug)]
pub struct GlGroup {
    ring: RingLevel,
    n: usize,
}

impl GlGroup {
    pub fn new(ring: RingLevel, n: usize) -> Result<GlGroup> {
        if n < 1 {
            return Err(Error::InvalidParameter("matrix size n must be >= 1".into()));
        }
        Ok(GlGroup { ring, n })
    }

    pub fn ring(&self) -> &RingLevel {
        &self.ring
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn level(&self) -> u32 {
        self.ring.level()
    }

    pub fn identity(&self) -> MatK {
        MatK::identity(self.n)
    }

    fn check(&self, k: &MatK) -> Result<()> {
        if k.n != self.n {
            return Err(Error::Mismatch(format!("expected {0}x{0}, got {1}x{1}", self.n, k.n)));
        }
        Ok(())
    }

    pub fn mul(&self, x: &MatK, y: &MatK) -> MatK {
        let n = x.n;
        debug_assert_eq!(n, y.n);
        let r = &self.ring;
        let mut out = vec![RingElem::ZERO; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = x.entries[i * n + k];
                if a == RingElem::ZERO {
                    continue;
                }
                for j in 0..n {
                    let b = y.entries[k * n + j];
                    if b != RingElem::ZERO {
                        out[i * n + j] = r.add(out[i * n + j], r.mul(a, b));
                    }
                }
            }
        }
        MatK { n, entries: out }
    }

    /// Row vector times matrix.
    pub fn vec_mul(&self, x: &[RingElem], k: &MatK) -> Vec<RingElem> {
        let n = k.n;
        let r = &self.ring;
        let mut out = vec![RingElem::ZERO; n];
        for (i, &xi) in x.iter().enumerate() {
            if xi == RingElem::ZERO {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                let b = k.entries[i * n + j];
                if b != RingElem::ZERO {
                    *o = r.add(*o, r.mul(xi, b));
                }
            }
        }
        out
    }

    pub fn det(&self, k: &MatK) -> RingElem {
        det_rec(&self.ring, &k.entries, k.n)
    }

    pub fn is_invertible(&self, k: &MatK) -> bool {
        self.ring.is_unit(self.det(k))
    }

    /// Inverse by Gauss-Jordan elimination with unit pivots.
    pub fn inv(&self, k: &MatK) -> Option<MatK> {
        let n = k.n;
        let r = &self.ring;
        let mut a = k.entries.clone();
        let mut b = MatK::identity(n).entries;
        for col in 0..n {
            let piv = (col..n).find(|&i| r.is_unit(a[i * n + col]))?;
            if piv != col {
                for j in 0..n {
                    a.swap(piv * n + j, col * n + j);
                    b.swap(piv * n + j, col * n + j);
                }
            }
            let s = r.inv(a[col * n + col])?;
            for j in 0..n {
                a[col * n + j] = r.mul(a[col * n + j], s);
                b[col * n + j] = r.mul(b[col * n + j], s);
            }
            for i in 0..n {
                if i == col {
                    continue;
                }
                let f = a[i * n + col];
                if f == RingElem::ZERO {
                    continue;
                }
                for j in 0..n {
                    a[i * n + j] = r.sub(a[i * n + j], r.mul(f, a[col * n + j]));
                    b[i * n + j] = r.sub(b[i * n + j], r.mul(f, b[col * n + j]));
                }
            }
        }
        Some(MatK { n, entries: b })
    }

    /// Entrywise reduction mod `p^l`, as canonical representatives at this level.
    pub fn reduce(&self, k: &MatK, l: u32) -> MatK {
        MatK {
            n: k.n,
            entries: k.entries.iter().map(|&x| self.ring.reduce(x, l)).collect(),
        }
    }

    /// Elementary matrix `1 + b e_ij`.
    pub fn elementary(&self, i: usize, j: usize, b: RingElem) -> MatK {
        let mut k = self.identity();
        k.set(i, j, if i == j { self.ring.add(RingElem::ONE, b) } else { b });
        k
    }

    pub fn diag(&self, d: &[RingElem]) -> MatK {
        let mut k = MatK::from_entries(self.n, vec![RingElem::ZERO; self.n * self.n]);
        for (i, &x) in d.iter().enumerate() {
            k.set(i, i, x);
        }
        k
    }

    pub fn scalar(&self, a: RingElem) -> MatK {
        self.diag(&vec![a; self.n])
    }

    /// `u_l`: the identity with `varpi^l` in position `(n, n-1)`.
    pub fn u_ell(&self, l: u32) -> MatK {
        let mut k = self.identity();
        if self.n >= 2 {
            k.set(self.n - 1, self.n - 2, self.ring.uniformizer_pow(l));
        }
        k
    }

    pub fn contains(&self, k: &MatK, s: SubgroupSpec) -> bool {
        if k.n != self.n || !self.is_invertible(k) {
            return false;
        }
        let r = &self.ring;
        let n = self.n;
        let deep = |x: RingElem, l: u32| r.valuation(x) >= l.min(r.level());
        match s {
            SubgroupSpec::Full => true,
            SubgroupSpec::Principal(l) => (0..n).all(|i| {
                (0..n).all(|j| {
                    let x = k.get(i, j);
                    deep(if i == j { r.sub(x, RingElem::ONE) } else { x }, l)
                })
            }),
            SubgroupSpec::K1(l) => {
                (0..n - 1).all(|j| deep(k.get(n - 1, j), l))
                    && deep(r.sub(k.corner(), RingElem::ONE), l)
            }
            SubgroupSpec::K0(l) => (0..n - 1).all(|j| deep(k.get(n - 1, j), l)),
            SubgroupSpec::Mirabolic => {
                (0..n - 1).all(|j| k.get(n - 1, j) == RingElem::ZERO) && k.corner() == RingElem::ONE
            }
        }
    }

    /// A generating set, built from elementary and diagonal matrices. Its
    /// correctness is checked by [`GlGroup::closure_size`] or by index counts.
    pub fn generators(&self, s: SubgroupSpec, units: &UnitGroupBasis) -> Vec<MatK> {
        let m = self.level();
        match s {
            SubgroupSpec::Full => self.gl_generators(self.n, units),
            SubgroupSpec::Principal(l) if l == 0 => self.gl_generators(self.n, units),
            SubgroupSpec::Principal(l) => self.principal_generators(l, units),
            SubgroupSpec::K1(l) if l == 0 => self.gl_generators(self.n, units),
            SubgroupSpec::K1(l) => {
                let mut g = self.mirabolic_generators(units);
                g.extend(self.principal_generators(l, units));
                dedup(g)
            }
            SubgroupSpec::K0(l) if l == 0 => self.gl_generators(self.n, units),
            SubgroupSpec::K0(l) => {
                let mut g = self.generators(SubgroupSpec::K1(l), units);
                g.extend(units.generators().iter().map(|&u| self.scalar(u)));
                dedup(g)
            }
            SubgroupSpec::Mirabolic => {
                let _ = m;
                self.mirabolic_generators(units)
            }
        }
    }

    /// Generators of `GL_d` embedded in the top-left corner.
    fn gl_generators(&self, d: usize, units: &UnitGroupBasis) -> Vec<MatK> {
        let mut out = Vec::new();
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    for b in self.ring.additive_generators() {
                        out.push(self.elementary(i, j, b));
                    }
                }
            }
        }
        if d >= 1 {
            for &g in units.generators() {
                let mut diag = vec![RingElem::ONE; self.n];
                diag[0] = g;
                out.push(self.diag(&diag));
            }
        }
        out
    }

    fn mirabolic_generators(&self, units: &UnitGroupBasis) -> Vec<MatK> {
        let n = self.n;
        let mut out = self.gl_generators(n - 1, units);
        for i in 0..n - 1 {
            for b in self.ring.additive_generators() {
                out.push(self.elementary(i, n - 1, b));
            }
        }
        out
    }

    fn principal_generators(&self, l: u32, units: &UnitGroupBasis) -> Vec<MatK> {
        let n = self.n;
        let mut out = Vec::new();
        if l >= self.level() {
            return out;
        }
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    for b in self.ring.ideal_generators(l) {
                        out.push(self.elementary(i, j, b));
                    }
                }
            }
        }
        for i in 0..n {
            for &u in units.congruence_generators(l) {
                let mut diag = vec![RingElem::ONE; n];
                diag[i] = u;
                out.push(self.diag(&diag));
            }
        }
        out
    }

    /// Packs a matrix into a single integer key.
    pub fn key(&self, k: &MatK) -> u128 {
        let base = self.ring.size() as u128;
        k.entries.iter().fold(0u128, |acc, x| acc * base + x.0 as u128)
    }

    fn key_fits(&self) -> bool {
        (self.ring.size() as f64).log2() * (self.n * self.n) as f64 <= 127.0
    }

    /// Size of the group generated by `gens`, by breadth-first closure.
    /// Fails with [`Error::BudgetExceeded`] once more than `budget`
    /// elements have been found.
    pub fn closure_size(&self, gens: &[MatK], budget: usize) -> Result<usize> {
        if !self.key_fits() {
            return Err(Error::SizeCap {
                what: "matrix key",
                size: self.ring.size() as u128,
                cap: u128::MAX,
            });
        }
        let id = self.identity();
        let mut seen: HashSet<u128> = HashSet::from([self.key(&id)]);
        let mut frontier = vec![id];
        while let Some(x) = frontier.pop() {
            for g in gens {
                let y = self.mul(&x, g);
                if seen.insert(self.key(&y)) {
                    if seen.len() > budget {
                        return Err(Error::BudgetExceeded {
                            what: "generated subgroup".into(),
                            budget,
                        });
                    }
                    frontier.push(y);
                }
            }
        }
        Ok(seen.len())
    }

    /// `|GL_n(O/p^M)| = q^((M-1) n^2) prod_{i<n} (q^n - q^i)`.
    pub fn order(&self) -> u128 {
        let q = self.ring.q() as u128;
        let n = self.n as u32;
        let lift = q.pow((self.level() - 1) * n * n);
        (0..n).map(|i| q.pow(n) - q.pow(i)).product::<u128>() * lift
    }

    /// Index of a subgroup in `K`, from the counting formulas.
    pub fn index(&self, s: SubgroupSpec) -> u128 {
        let q = self.ring.q() as u128;
        let n = self.n as u32;
        let qn1 = q.pow(n) - 1;
        match s {
            SubgroupSpec::Full => 1,
            SubgroupSpec::Principal(0) | SubgroupSpec::K1(0) | SubgroupSpec::K0(0) => 1,
            SubgroupSpec::Principal(l) => {
                let l = l.min(self.level());
                let gl1 = (0..n).map(|i| q.pow(n) - q.pow(i)).product::<u128>();
                gl1 * q.pow((l - 1) * n * n)
            }
            SubgroupSpec::K1(l) => {
                let l = l.min(self.level());
                q.pow((l - 1) * n) * qn1
            }
            SubgroupSpec::K0(l) => {
                let l = l.min(self.level());
                q.pow((l - 1) * (n - 1)) * qn1 / (q - 1)
            }
            SubgroupSpec::Mirabolic => {
                let m = self.level();
                q.pow((m - 1) * n) * qn1
            }
        }
    }

    pub fn subgroup_order(&self, s: SubgroupSpec) -> u128 {
        self.order() / self.index(s)
    }

    /// Streams every element of `GL_n(O/p^M)`: invertible residue matrices
    /// over `F_q`, each followed by all its lifts. Positionally deterministic.
    pub fn elements(&self) -> impl Iterator<Item = MatK> + '_ {
        let n = self.n;
        let nn = n * n;
        let q = self.ring.q();
        let residue = self.ring.at_level(1).expect("level 1 exists");
        let residue_group = GlGroup { ring: residue, n };
        let res_count = (q as u64).pow(nn as u32);
        let lift_count = self.ring.q_pow(self.level() - 1) as u64;
        let lifts_total = lift_count.pow(nn as u32);
        (0..res_count)
            .map(move |code| {
                let mut x = code;
                let mut e = Vec::with_capacity(nn);
                for _ in 0..nn {
                    e.push(RingElem((x % q as u64) as u32));
                    x /= q as u64;
                }
                e.reverse();
                MatK::from_entries(n, e)
            })
            .filter(move |k| residue_group.is_invertible(k))
            .flat_map(move |res| {
                (0..lifts_total).map(move |code| {
                    let mut x = code;
                    let mut e = res.entries.clone();
                    for slot in e.iter_mut().rev() {
                        let lift = (x % lift_count) as u32;
                        x /= lift_count;
                        slot.0 += q * lift;
                    }
                    MatK::from_entries(n, e)
                })
            })
    }

    /// Elements of a subgroup, filtered from [`GlGroup::elements`].
    pub fn subgroup_elements(&self, s: SubgroupSpec) -> Vec<MatK> {
        self.elements().filter(|k| self.contains(k, s)).collect()
    }

    /// A uniformly random element of `K`, by rejection on the determinant.
    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> MatK {
        self.random_in(SubgroupSpec::Full, rng)
    }

    /// A uniformly random element of the given subgroup.
    pub fn random_in<R: Rng + ?Sized>(&self, s: SubgroupSpec, rng: &mut R) -> MatK {
        let n = self.n;
        let r = &self.ring;
        let size = r.size();
        loop {
            let mut k = MatK::from_entries(
                n,
                (0..n * n).map(|_| RingElem(rng.gen_range(0..size))).collect(),
            );
            match s {
                SubgroupSpec::Full => {}
                SubgroupSpec::Principal(l) => {
                    for i in 0..n {
                        for j in 0..n {
                            let x = r.shift_up(k.get(i, j), l);
                            let x = if i == j { r.add(x, RingElem::ONE) } else { x };
                            k.set(i, j, x);
                        }
                    }
                }
                SubgroupSpec::K1(l) | SubgroupSpec::K0(l) => {
                    for j in 0..n - 1 {
                        k.set(n - 1, j, r.shift_up(k.get(n - 1, j), l));
                    }
                    if let SubgroupSpec::K1(_) = s {
                        k.set(n - 1, n - 1, r.add(RingElem::ONE, r.shift_up(k.corner(), l)));
                    }
                }
                SubgroupSpec::Mirabolic => {
                    for j in 0..n - 1 {
                        k.set(n - 1, j, RingElem::ZERO);
                    }
                    k.set(n - 1, n - 1, RingElem::ONE);
                }
            }
            if self.is_invertible(&k) {
                return k;
            }
        }
    }

    /// The `l` with `k` in `K_0(p^m) u_l K_0(p^m)`: the least valuation in the
    /// bottom-left block, capped at `m`.
    pub fn double_coset_index(&self, k: &MatK, m: u32) -> u32 {
        let n = self.n;
        (0..n - 1)
            .map(|j| self.ring.valuation(k.get(n - 1, j)))
            .min()
            .unwrap_or(m)
            .min(m)
    }

    /// Explicit factorisation `k = k0 u_l k0'` with `k0, k0'` in `K_0(p^m)`.
    pub fn double_coset_witness(&self, k: &MatK, m: u32) -> Result<(MatK, u32, MatK)> {
        self.check(k)?;
        if m > self.level() {
            return Err(Error::Mismatch(format!(
                "double coset level {m} above working level {}",
                self.level()
            )));
        }
        if self.n < 2 {
            return Err(Error::InvalidParameter("double cosets need n >= 2".into()));
        }
        let n = self.n;
        let r = &self.ring;
        let l = self.double_coset_index(k, m);
        if l == m {
            let u_inv = self.inv(&self.u_ell(m)).ok_or(Error::NonUnit)?;
            return Ok((self.mul(k, &u_inv), m, self.identity()));
        }
        let mut a = k.block_a();
        let c: Vec<RingElem> = k.bottom_row()[..n - 1].to_vec();
        let d = k.corner();
        let mut b: Vec<RingElem> = (0..n - 1).map(|i| k.get(i, n - 1)).collect();
        let sub = GlGroup { ring: r.clone(), n: n - 1 };

        // For l = 0 first move to a matrix whose top-left block is invertible.
        let beta = if l == 0 {
            let beta = chang_beta(r, &a, &c)?;
            for i in 0..n - 1 {
                for j in 0..n - 1 {
                    a.set(i, j, r.sub(a.get(i, j), r.mul(beta[i], c[j])));
                }
                b[i] = r.sub(b[i], r.mul(beta[i], d));
            }
            Some(beta)
        } else {
            None
        };

        let a_inv = sub.inv(&a).ok_or_else(|| {
            Error::Internal("top-left block not invertible in double coset witness".into())
        })?;
        let ca = sub.vec_mul(&c, &a_inv);
        let y: Vec<RingElem> = ca.iter().map(|&x| r.shift_down(x, l)).collect();
        let jpiv = y
            .iter()
            .position(|&x| r.is_unit(x))
            .ok_or_else(|| Error::Internal("reduced row has no unit entry".into()))?;
        // alpha^{-1}: the standard rows other than e_jpiv, then y.
        let mut rows = Vec::with_capacity((n - 1) * (n - 1));
        for i in 0..n - 1 {
            if i != jpiv {
                rows.extend((0..n - 1).map(|j| if i == j { RingElem::ONE } else { RingElem::ZERO }));
            }
        }
        rows.extend(y.iter().copied());
        let alpha_inv = MatK::from_entries(n - 1, rows);
        let alpha = sub
            .inv(&alpha_inv)
            .ok_or_else(|| Error::Internal("completed row matrix not invertible".into()))?;

        // Right factor [[alpha^{-1} a, alpha^{-1} b], [0, d - c a^{-1} b]].
        let top_a = sub.mul(&alpha_inv, &a);
        let top_b: Vec<RingElem> = (0..n - 1)
            .map(|i| {
                (0..n - 1).fold(RingElem::ZERO, |acc, j| {
                    r.add(acc, r.mul(alpha_inv.get(i, j), b[j]))
                })
            })
            .collect();
        let cab = ca
            .iter()
            .zip(&b)
            .fold(RingElem::ZERO, |acc, (&x, &y)| r.add(acc, r.mul(x, y)));
        let mut right = MatK::from_entries(n, vec![RingElem::ZERO; n * n]);
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                right.set(i, j, top_a.get(i, j));
            }
            right.set(i, n - 1, top_b[i]);
        }
        right.set(n - 1, n - 1, r.sub(d, cab));

        // Left factor [[alpha, beta], [0, 1]].
        let mut left = self.identity();
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                left.set(i, j, alpha.get(i, j));
            }
            if let Some(beta) = &beta {
                left.set(i, n - 1, beta[i]);
            }
        }
        Ok((left, l, right))
    }
}

fn dedup(v: Vec<MatK>) -> Vec<MatK> {
    let mut seen = HashSet::new();
    v.into_iter().filter(|k| seen.insert(k.clone())).collect()
}

fn det_rec(r: &RingLevel, e: &[RingElem], n: usize) -> RingElem {
    match n {
        0 => RingElem::ONE,
        1 => e[0],
        2 => r.sub(r.mul(e[0], e[3]), r.mul(e[1], e[2])),
        _ => {
            let mut acc = RingElem::ZERO;
            let mut minor = Vec::with_capacity((n - 1) * (n - 1));
            for j in 0..n {
                if e[j] == RingElem::ZERO {
                    continue;
                }
                minor.clear();
                for i in 1..n {
                    for jj in 0..n {
                        if jj != j {
                            minor.push(e[i * n + jj]);
                        }
                    }
                }
                let t = r.mul(e[j], det_rec(r, &minor, n - 1));
                acc = if j % 2 == 0 { r.add(acc, t) } else { r.sub(acc, t) };
            }
            acc
        }
    }
}

/// A column `beta` with `det(a - beta c)` a unit, given a row `c` with a unit
/// entry. Searches residue representatives only, trying `beta = 0` first.
pub fn chang_beta(r: &RingLevel, a: &MatK, c: &[RingElem]) -> Result<Vec<RingElem>> {
    let d = a.n();
    if c.len() != d {
        return Err(Error::Mismatch("row c must have length n - 1".into()));
    }
    if !c.iter().any(|&x| r.is_unit(x)) {
        return Err(Error::InvalidParameter("row c has no unit entry".into()));
    }
    let q = r.q() as u64;
    let total = q.pow(d as u32);
    let mut shifted = a.clone();
    for code in 0..total {
        let mut x = code;
        let beta: Vec<RingElem> = (0..d)
            .map(|_| {
                let v = RingElem((x % q) as u32);
                x /= q;
                v
            })
            .collect();
        for i in 0..d {
            for j in 0..d {
                shifted.set(i, j, r.sub(a.get(i, j), r.mul(beta[i], c[j])));
            }
        }
        if r.is_unit(det_rec(r, &shifted.entries, d)) {
            return Ok(beta);
        }
    }
    Err(Error::ChangSearchFailed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::UnitGroupBasis;
    use rand::SeedableRng;

    fn group(p: u32, m: u32, n: usize) -> (GlGroup, UnitGroupBasis) {
        let r = RingLevel::padic(p, m).unwrap();
        let b = UnitGroupBasis::new(&r).unwrap();
        (GlGroup::new(r, n).unwrap(), b)
    }

    #[test]
    fn group_orders_by_enumeration() {
        for (p, m, n, expect) in [(2, 1, 2, 6), (2, 2, 2, 96), (3, 1, 2, 48), (2, 1, 3, 168)] {
            let (g, _) = group(p, m, n);
            assert_eq!(g.elements().count(), expect);
            assert_eq!(g.order(), expect as u128);
        }
        let g = GlGroup::new(RingLevel::laurent(2, 2, 1).unwrap(), 2).unwrap();
        assert_eq!(g.elements().count() as u128, g.order());
        assert_eq!(g.order(), 180);
    }

    #[test]
    fn enumeration_is_distinct_and_invertible() {
        let (g, _) = group(2, 2, 2);
        let all: Vec<MatK> = g.elements().collect();
        let keys: HashSet<u128> = all.iter().map(|k| g.key(k)).collect();
        assert_eq!(keys.len(), all.len());
        assert!(all.iter().all(|k| g.is_invertible(k)));
    }

    #[test]
    fn inverse_and_det() {
        let (g, _) = group(3, 2, 3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let k = g.random(&mut rng);
            let ki = g.inv(&k).unwrap();
            assert_eq!(g.mul(&k, &ki), g.identity());
            let h = g.random(&mut rng);
            let r = g.ring();
            assert_eq!(g.det(&g.mul(&k, &h)), r.mul(g.det(&k), g.det(&h)));
        }
    }

    #[test]
    fn membership_examples() {
        let (g, _) = group(3, 2, 3);
        let id = g.identity();
        for s in [
            SubgroupSpec::Full,
            SubgroupSpec::Principal(2),
            SubgroupSpec::K1(2),
            SubgroupSpec::K0(2),
            SubgroupSpec::Mirabolic,
        ] {
            assert!(g.contains(&id, s));
        }
        let d = g.diag(&[RingElem(1), RingElem(1), RingElem(2)]);
        assert!(g.contains(&d, SubgroupSpec::K0(1)));
        assert!(!g.contains(&d, SubgroupSpec::K1(1)));
    }

    #[test]
    fn small_closures() {
        let (g, b) = group(2, 1, 2);
        let gens = vec![MatK::from_rows(&[&[0, 1], &[1, 0]]), MatK::from_rows(&[&[1, 1], &[0, 1]])];
        assert_eq!(g.closure_size(&gens, 100).unwrap(), 6);
        let mir = g.generators(SubgroupSpec::Mirabolic, &b);
        assert_eq!(g.closure_size(&mir, 100).unwrap(), 2);
        let (g4, b4) = group(2, 2, 2);
        let k1 = g4.generators(SubgroupSpec::K1(1), &b4);
        assert_eq!(g4.closure_size(&k1, 1000).unwrap(), 32);
        assert_eq!(g4.subgroup_order(SubgroupSpec::K1(1)), 32);
    }

    #[test]
    fn generators_generate_each_subgroup() {
        let cases: Vec<(RingLevel, usize)> = vec![
            (RingLevel::padic(2, 2).unwrap(), 2),
            (RingLevel::padic(2, 3).unwrap(), 2),
            (RingLevel::padic(3, 2).unwrap(), 2),
            (RingLevel::laurent(2, 1, 2).unwrap(), 2),
            (RingLevel::laurent(2, 2, 1).unwrap(), 2),
            (RingLevel::padic(2, 1).unwrap(), 3),
            (RingLevel::padic(2, 2).unwrap(), 3),
        ];
        for (r, n) in cases {
            let b = UnitGroupBasis::new(&r).unwrap();
            let g = GlGroup::new(r.clone(), n).unwrap();
            let m = r.level();
            let mut specs = vec![SubgroupSpec::Full, SubgroupSpec::Mirabolic];
            for l in 0..=m {
                specs.extend([SubgroupSpec::Principal(l), SubgroupSpec::K1(l), SubgroupSpec::K0(l)]);
            }
            for s in specs {
                let gens = g.generators(s, &b);
                assert!(gens.iter().all(|k| g.contains(k, s)), "{s} at {r}");
                let size = g.closure_size(&gens, 5_000_000).unwrap();
                assert_eq!(size as u128, g.subgroup_order(s), "{s} at {r} n={n}");
            }
        }
    }

    #[test]
    fn subgroup_orders_match_enumeration() {
        let (g, _) = group(2, 2, 2);
        for s in [SubgroupSpec::K0(1), SubgroupSpec::K0(2), SubgroupSpec::K1(2), SubgroupSpec::Principal(1)] {
            assert_eq!(g.subgroup_elements(s).len() as u128, g.subgroup_order(s), "{s}");
        }
    }

    #[test]
    fn budget_is_reported() {
        let (g, b) = group(3, 2, 2);
        let gens = g.generators(SubgroupSpec::Full, &b);
        assert!(matches!(g.closure_size(&gens, 100), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn double_coset_examples() {
        let (g, _) = group(2, 2, 2);
        assert_eq!(g.double_coset_index(&g.identity(), 2), 2);
        let w = MatK::from_rows(&[&[0, 1], &[1, 0]]);
        assert_eq!(g.double_coset_index(&w, 2), 0);
        assert_eq!(g.double_coset_index(&g.u_ell(1), 2), 1);
        let (k0, l, k1) = g.double_coset_witness(&g.u_ell(1), 2).unwrap();
        assert_eq!((k0, l, k1), (g.identity(), 1, g.identity()));
    }

    #[test]
    fn double_coset_witnesses_exhaustive_gl2_z4() {
        let (g, _) = group(2, 2, 2);
        for k in g.elements() {
            let (a, l, b) = g.double_coset_witness(&k, 2).unwrap();
            assert!(g.contains(&a, SubgroupSpec::K0(2)));
            assert!(g.contains(&b, SubgroupSpec::K0(2)));
            assert_eq!(g.mul(&g.mul(&a, &g.u_ell(l)), &b), k);
        }
    }

    #[test]
    fn chang_beta_examples() {
        let r = RingLevel::padic(5, 1).unwrap();
        let a = MatK::from_rows(&[&[0]]);
        assert_eq!(chang_beta(&r, &a, &[RingElem(1)]).unwrap(), vec![RingElem(1)]);
        let a = MatK::from_rows(&[&[2]]);
        assert_eq!(chang_beta(&r, &a, &[RingElem(1)]).unwrap(), vec![RingElem(0)]);
    }

    #[test]
    fn chang_beta_exhaustive_mod_2_n3() {
        // Existence needs the full matrix to be invertible: with a = 0 and
        // c = (1, 0) every a - beta c is singular.
        let (g, _) = group(2, 1, 3);
        let r = g.ring().clone();
        let sub = GlGroup::new(r.clone(), 2).unwrap();
        let mut pairs = HashSet::new();
        for k in g.elements().filter(|k| g.double_coset_index(k, 1) == 0) {
            let a = k.block_a();
            let c = k.bottom_row()[..2].to_vec();
            let beta = chang_beta(&r, &a, &c).unwrap();
            let mut s = a.clone();
            for i in 0..2 {
                for j in 0..2 {
                    s.set(i, j, r.sub(a.get(i, j), r.mul(beta[i], c[j])));
                }
            }
            assert!(sub.is_invertible(&s));
            pairs.insert((a, c));
        }
        assert!(pairs.len() > 1);
        let a0 = MatK::from_rows(&[&[0, 0], &[0, 0]]);
        assert_eq!(
            chang_beta(&r, &a0, &[RingElem(1), RingElem(0)]),
            Err(Error::ChangSearchFailed)
        );
    }
}
