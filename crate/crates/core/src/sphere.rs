//! The finite unit sphere `S^{n-1}` mod `p^m`: row vectors over `O/p^m` with
//! at least one unit coordinate.

use crate::error::{Error, Result};
use crate::matgroup::{GlGroup, MatK};
use crate::ring::{RingElem, RingLevel};

/// Default cap on the number of sphere points.
pub const DEFAULT_SPHERE_CAP: u64 = 1_000_000;

/// A point of the sphere, as its coordinate vector.
pub type SpherePoint = Vec<RingElem>;

/// The enumerated sphere with a dense index bijection.
///
/// Points are listed in lexicographic order of their coordinate
/// representatives, first coordinate most significant.
#[derive(Clone, Debug)]
pub struct Sphere {
    ring: RingLevel,
    n: usize,
    coords: Vec<RingElem>,
    /// `lookup[code]` is the index of the tuple with that base-`|R|` code.
    lookup: Vec<u32>,
}

/// `|S^{n-1} mod p^m| = q^((m-1)n) (q^n - 1)`.
pub fn sphere_size(q: u32, n: usize, m: u32) -> u128 {
    let q = q as u128;
    let n = n as u32;
    q.pow((m - 1) * n) * (q.pow(n) - 1)
}

impl Sphere {
    pub fn new(ring: RingLevel, n: usize) -> Result<Sphere> {
        Self::with_cap(ring, n, DEFAULT_SPHERE_CAP)
    }

    pub fn with_cap(ring: RingLevel, n: usize, cap: u64) -> Result<Sphere> {
        if n < 2 {
            return Err(Error::InvalidParameter("sphere needs n >= 2".into()));
        }
        let expected = sphere_size(ring.q(), n, ring.level());
        if expected > cap as u128 {
            return Err(Error::SizeCap {
                what: "sphere",
                size: expected,
                cap: cap as u128,
            });
        }
        let base = ring.size() as u64;
        let total = base.pow(n as u32);
        let mut coords = Vec::with_capacity(expected as usize * n);
        let mut lookup = vec![u32::MAX; total as usize];
        let mut x = vec![RingElem::ZERO; n];
        let mut count = 0u32;
        for code in 0..total {
            let mut c = code;
            for slot in x.iter_mut().rev() {
                *slot = RingElem((c % base) as u32);
                c /= base;
            }
            if x.iter().any(|&v| ring.is_unit(v)) {
                coords.extend_from_slice(&x);
                lookup[code as usize] = count;
                count += 1;
            }
        }
        if count as u128 != expected {
            return Err(Error::Internal(format!(
                "enumerated {count} sphere points, expected {expected}"
            )));
        }
        Ok(Sphere {
            ring,
            n,
            coords,
            lookup,
        })
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

    pub fn len(&self) -> usize {
        self.coords.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[RingElem] {
        &self.coords[i * self.n..(i + 1) * self.n]
    }

    pub fn points(&self) -> impl Iterator<Item = &[RingElem]> {
        self.coords.chunks_exact(self.n)
    }

    /// Index of a point, or `None` when it is off the sphere.
    #[inline]
    pub fn index(&self, x: &[RingElem]) -> Option<usize> {
        if x.len() != self.n {
            return None;
        }
        let base = self.ring.size() as u64;
        let mut code = 0u64;
        for &v in x {
            if v.0 >= self.ring.size() {
                return None;
            }
            code = code * base + v.0 as u64;
        }
        match self.lookup[code as usize] {
            u32::MAX => None,
            i => Some(i as usize),
        }
    }

    /// Index of `e_n = (0, ..., 0, 1)`.
    pub fn e_n(&self) -> usize {
        let mut x = vec![RingElem::ZERO; self.n];
        x[self.n - 1] = RingElem::ONE;
        self.index(&x).expect("e_n is on the sphere")
    }

    /// Coordinatewise reduction mod `p^l`.
    pub fn reduce_point(&self, x: &[RingElem], l: u32) -> SpherePoint {
        x.iter().map(|&v| self.ring.reduce(v, l)).collect()
    }

    /// The sphere at level `l <= m` and the reduction map on indices.
    pub fn reduction(&self, l: u32) -> Result<(Sphere, Vec<u32>)> {
        if l == 0 || l > self.level() {
            return Err(Error::InvalidParameter(format!(
                "reduction level {l} outside 1..={}",
                self.level()
            )));
        }
        let lower = Sphere::with_cap(self.ring.at_level(l)?, self.n, u64::MAX)?;
        let map = self
            .points()
            .map(|x| {
                let y = self.reduce_point(x, l);
                lower.index(&y).expect("reduction stays on the sphere") as u32
            })
            .collect();
        Ok((lower, map))
    }

    /// `x k` (row vector times matrix).
    pub fn act(&self, x: &[RingElem], k: &MatK, group: &GlGroup) -> Result<SpherePoint> {
        if k.n() != self.n || x.len() != self.n || group.ring() != &self.ring {
            return Err(Error::Mismatch("point and matrix do not share n and level".into()));
        }
        Ok(group.vec_mul(x, k))
    }

    /// The permutation `i -> index(x_i k)` induced by `k`.
    pub fn permutation(&self, k: &MatK, group: &GlGroup) -> Result<Vec<u32>> {
        if k.n() != self.n || group.ring() != &self.ring {
            return Err(Error::Mismatch("matrix does not match the sphere".into()));
        }
        self.points()
            .map(|x| {
                let y = group.vec_mul(x, k);
                self.index(&y)
                    .map(|i| i as u32)
                    .ok_or_else(|| Error::Internal("action left the sphere; k not invertible".into()))
            })
            .collect()
    }

    /// Index of `e_n k`, the bottom row of `k`.
    pub fn bottom_row_index(&self, k: &MatK) -> Option<usize> {
        self.index(k.bottom_row())
    }
}

/// Precomputed scalar action `(a, x) -> a x` for every unit `a`.
#[derive(Clone, Debug)]
pub struct ScalarTable {
    units: Vec<RingElem>,
    unit_pos: Vec<u32>,
    len: usize,
    table: Vec<u32>,
}

impl ScalarTable {
    pub fn new(sphere: &Sphere) -> ScalarTable {
        let ring = sphere.ring();
        let units: Vec<RingElem> = ring.units().collect();
        let mut unit_pos = vec![u32::MAX; ring.size() as usize];
        for (i, u) in units.iter().enumerate() {
            unit_pos[u.index()] = i as u32;
        }
        let len = sphere.len();
        let mut table = Vec::with_capacity(units.len() * len);
        let mut y = vec![RingElem::ZERO; sphere.n()];
        for &a in &units {
            for x in sphere.points() {
                for (s, &v) in y.iter_mut().zip(x) {
                    *s = ring.mul(a, v);
                }
                table.push(sphere.index(&y).expect("unit multiple stays on the sphere") as u32);
            }
        }
        ScalarTable {
            units,
            unit_pos,
            len,
            table,
        }
    }

    pub fn units(&self) -> &[RingElem] {
        &self.units
    }

    /// Index of `a x_i`, where `a` is the `pos`-th unit.
    #[inline]
    pub fn apply(&self, pos: usize, i: usize) -> usize {
        self.table[pos * self.len + i] as usize
    }

    /// Index of `a x_i` for a unit `a`.
    pub fn scale(&self, a: RingElem, i: usize) -> Option<usize> {
        let pos = *self.unit_pos.get(a.index())?;
        (pos != u32::MAX).then(|| self.apply(pos as usize, i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matgroup::SubgroupSpec;
    use crate::ring::UnitGroupBasis;
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn sphere_sizes() {
        let s = Sphere::new(RingLevel::padic(2, 1).unwrap(), 2).unwrap();
        let pts: Vec<Vec<u32>> = s.points().map(|x| x.iter().map(|v| v.0).collect()).collect();
        assert_eq!(pts, vec![vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(Sphere::new(RingLevel::padic(3, 2).unwrap(), 2).unwrap().len(), 72);
        assert_eq!(Sphere::new(RingLevel::padic(2, 2).unwrap(), 3).unwrap().len(), 56);
        assert_eq!(Sphere::new(RingLevel::laurent(2, 2, 2).unwrap(), 2).unwrap().len(), 240);
        assert!(matches!(
            Sphere::with_cap(RingLevel::padic(5, 2).unwrap(), 3, 1000),
            Err(Error::SizeCap { .. })
        ));
    }

    #[test]
    fn reduce_examples() {
        let s4 = Sphere::new(RingLevel::padic(2, 2).unwrap(), 2).unwrap();
        assert_eq!(s4.reduce_point(&[RingElem(2), RingElem(1)], 1), vec![RingElem(0), RingElem(1)]);
        let s9 = Sphere::new(RingLevel::padic(3, 2).unwrap(), 2).unwrap();
        assert_eq!(s9.reduce_point(&[RingElem(1), RingElem(3)], 1), vec![RingElem(1), RingElem(0)]);
        assert_eq!(s9.reduce_point(&[RingElem(1), RingElem(3)], 2), vec![RingElem(1), RingElem(3)]);
        let (lower, map) = s9.reduction(1).unwrap();
        assert_eq!(lower.len(), 8);
        for j in 0..lower.len() {
            assert_eq!(map.iter().filter(|&&i| i as usize == j).count(), 9);
        }
    }

    #[test]
    fn orbit_of_e_n_under_gl2_f2() {
        let r = RingLevel::padic(2, 1).unwrap();
        let s = Sphere::new(r.clone(), 2).unwrap();
        let g = GlGroup::new(r, 2).unwrap();
        let e = s.point(s.e_n()).to_vec();
        let orbit: std::collections::HashSet<_> =
            g.elements().map(|k| s.index(&s.act(&e, &k, &g).unwrap()).unwrap()).collect();
        assert_eq!(orbit.len(), 3);
    }

    #[test]
    fn transitive_with_equal_stabilisers() {
        for (r, n) in [
            (RingLevel::padic(2, 2).unwrap(), 2),
            (RingLevel::padic(3, 1).unwrap(), 2),
            (RingLevel::padic(2, 1).unwrap(), 3),
            (RingLevel::laurent(2, 1, 2).unwrap(), 2),
        ] {
            let s = Sphere::new(r.clone(), n).unwrap();
            let g = GlGroup::new(r, n).unwrap();
            let e = s.e_n();
            let mut hits = vec![0usize; s.len()];
            for k in g.elements() {
                hits[s.permutation(&k, &g).unwrap()[e] as usize] += 1;
            }
            let stab = g.order() as usize / s.len();
            assert!(hits.iter().all(|&h| h == stab));
        }
    }

    #[test]
    fn mirabolic_fixes_e_n() {
        let r = RingLevel::padic(3, 2).unwrap();
        let s = Sphere::new(r.clone(), 3).unwrap();
        let g = GlGroup::new(r, 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let e = s.point(s.e_n()).to_vec();
        for _ in 0..100 {
            let k = g.random_in(SubgroupSpec::Mirabolic, &mut rng);
            assert_eq!(s.act(&e, &k, &g).unwrap(), e);
        }
    }

    #[test]
    fn scalar_table_matches_diagonal_action() {
        let r = RingLevel::padic(3, 2).unwrap();
        let s = Sphere::new(r.clone(), 2).unwrap();
        let g = GlGroup::new(r.clone(), 2).unwrap();
        let t = ScalarTable::new(&s);
        for a in r.units() {
            let perm = s.permutation(&g.scalar(a), &g).unwrap();
            for i in 0..s.len() {
                assert_eq!(t.scale(a, i), Some(perm[i] as usize));
            }
        }
        assert_eq!(t.scale(RingElem(3), 0), None);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn action_is_a_right_action(seed in any::<u64>()) {
            let r = RingLevel::padic(2, 3).unwrap();
            let s = Sphere::new(r.clone(), 3).unwrap();
            let g = GlGroup::new(r, 3).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let k1 = g.random(&mut rng);
            let k2 = g.random(&mut rng);
            let i = (seed % s.len() as u64) as usize;
            let x = s.point(i);
            let lhs = s.act(x, &g.mul(&k1, &k2), &g).unwrap();
            let rhs = s.act(&s.act(x, &k1, &g).unwrap(), &k2, &g).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn reduction_commutes_with_action(seed in any::<u64>(), l in 1u32..=3) {
            let r = RingLevel::padic(3, 3).unwrap();
            let s = Sphere::new(r.clone(), 2).unwrap();
            let g = GlGroup::new(r.clone(), 2).unwrap();
            let gl = GlGroup::new(r.at_level(l).unwrap(), 2).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let k = g.random(&mut rng);
            let x = s.point((seed % s.len() as u64) as usize);
            let lhs = s.reduce_point(&s.act(x, &k, &g).unwrap(), l);
            let rhs = gl.vec_mul(&s.reduce_point(x, l), &g.reduce(&k, l));
            prop_assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn unit_basis_used_for_generators_is_consistent() {
        let r = RingLevel::padic(2, 2).unwrap();
        let b = UnitGroupBasis::new(&r).unwrap();
        let s = Sphere::new(r.clone(), 2).unwrap();
        let g = GlGroup::new(r, 2).unwrap();
        // The orbit of e_n under the generated group is the whole sphere.
        let gens = g.generators(SubgroupSpec::Full, &b);
        let perms: Vec<Vec<u32>> = gens.iter().map(|k| s.permutation(k, &g).unwrap()).collect();
        let mut seen = vec![false; s.len()];
        let mut stack = vec![s.e_n()];
        seen[s.e_n()] = true;
        while let Some(i) = stack.pop() {
            for p in &perms {
                let j = p[i] as usize;
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        assert!(seen.iter().all(|&b| b));
    }
}
