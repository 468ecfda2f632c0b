//! Finite-level models of principal series representations restricted to
//! `K = GL_n(O)`.
//!
//! For characters `chi_1, ..., chi_n` of `O^x` (seen at level `M`), the model
//! is the space of functions on `GL_n(O/p^M)` with
//! `f(b g) = prod_j chi_j(b_jj) f(g)` for upper triangular `b`, and `K` acts
//! by right translation. A function is stored by its values on canonical
//! representatives of `B \ G`, so every `pi(k)` is a monomial matrix whose
//! nonzero entries are roots of unity.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::harmonics::{alpha, harmonic_dim};
use crate::linalg::{self, CVec, C64};
use crate::matgroup::{GlGroup, MatK, SubgroupSpec};
use crate::ring::{RingElem, RingLevel, RootOfUnity, UnitCharacter, UnitGroupBasis};
use crate::sphere::Sphere;

/// Default cap on the number of cosets `B \ G`.
pub const DEFAULT_COSET_BUDGET: usize = 200_000;

/// A vector in the model, one complex value per coset representative.
pub type ModelVector = CVec;

/// `binom(a, b)` with `binom(a, b) = 0` for `b > a`.
pub fn binomial(a: u64, b: u64) -> u64 {
    if b > a {
        return 0;
    }
    let b = b.min(a - b);
    (0..b).fold(1u64, |acc, i| acc * (a - i) / (i + 1))
}

/// Expected `dim V^{K_1(p^l)}` for a representation of conductor `c`.
pub fn oldform_dim(n: usize, c: u32, l: u32) -> u64 {
    if l < c {
        0
    } else {
        binomial((l - c) as u64 + n as u64 - 1, n as u64 - 1)
    }
}

/// Expected multiplicity of `tau_{chi_pi, l}` (and its `K_{n-1,1}`-fixed line).
pub fn graded_dim(n: usize, c: u32, l: u32) -> u64 {
    if l < c {
        0
    } else {
        binomial((l - c) as u64 + n as u64 - 2, n as u64 - 2)
    }
}

/// Canonical representative of `B g`: bottom-up row pivoting. Returns the
/// representative and the diagonal of `b` with `g = b rep`.
pub fn canonical_coset(ring: &RingLevel, g: &MatK) -> Option<(MatK, Vec<RingElem>)> {
    let n = g.n();
    let mut rows: Vec<Vec<RingElem>> = (0..n).map(|i| g.row(i).to_vec()).collect();
    let mut pivots = vec![0usize; n];
    let mut diag = vec![RingElem::ZERO; n];
    for i in (0..n).rev() {
        for r in (i + 1..n).rev() {
            let j = pivots[r];
            let f = rows[i][j];
            if f != RingElem::ZERO {
                let lower = rows[r].clone();
                for (x, y) in rows[i].iter_mut().zip(&lower) {
                    *x = ring.sub(*x, ring.mul(f, *y));
                }
            }
        }
        let j = rows[i].iter().position(|&x| ring.is_unit(x))?;
        let s = rows[i][j];
        let s_inv = ring.inv(s)?;
        for x in rows[i].iter_mut() {
            *x = ring.mul(*x, s_inv);
        }
        pivots[i] = j;
        diag[i] = s;
    }
    Some((MatK::from_entries(n, rows.concat()), diag))
}

/// A monomial operator: `(A f)[r] = e(phase[r] / E) f[perm[r]]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonomialAction {
    pub perm: Vec<u32>,
    pub phase: Vec<u32>,
}

/// A finite-level principal series model.
pub struct PSeriesModel {
    group: GlGroup,
    units: Arc<UnitGroupBasis>,
    chars: Vec<UnitCharacter>,
    exponent: u32,
    cosets: Vec<MatK>,
    lookup: HashMap<u128, u32>,
    phases: Vec<C64>,
}

impl PSeriesModel {
    /// Builds the model, enumerating `B \ G` by closure from the identity
    /// coset under generators of `K`; reaching `|G|/|B|` cosets certifies
    /// that `K` acts transitively.
    pub fn new(chars: Vec<UnitCharacter>) -> Result<PSeriesModel> {
        Self::with_budget(chars, DEFAULT_COSET_BUDGET)
    }

    pub fn with_budget(chars: Vec<UnitCharacter>, budget: usize) -> Result<PSeriesModel> {
        let n = chars.len();
        if n < 2 {
            return Err(Error::InvalidParameter("principal series needs n >= 2".into()));
        }
        let units = chars[0].basis().clone();
        if chars.iter().any(|c| c.ring() != units.ring()) {
            return Err(Error::Mismatch("characters live on different rings".into()));
        }
        let ring = units.ring().clone();
        let group = GlGroup::new(ring.clone(), n)?;
        let borel = (ring.unit_count() as u128).pow(n as u32)
            * (ring.size() as u128).pow((n * (n - 1) / 2) as u32);
        let expected = group.order() / borel;
        if expected > budget as u128 {
            return Err(Error::SizeCap {
                what: "coset space B\\G",
                size: expected,
                cap: budget as u128,
            });
        }
        let exponent = units.exponent();
        let mut model = PSeriesModel {
            group,
            units,
            chars,
            exponent,
            cosets: Vec::new(),
            lookup: HashMap::new(),
            phases: (0..exponent)
                .map(|k| RootOfUnity::new(k as u64, exponent as u64).to_complex())
                .collect(),
        };
        let gens = model.group.generators(SubgroupSpec::Full, &model.units);
        let id = model.group.identity();
        model.lookup.insert(model.group.key(&id), 0);
        model.cosets.push(id);
        let mut frontier = VecDeque::from([0usize]);
        while let Some(i) = frontier.pop_front() {
            for g in &gens {
                let x = model.group.mul(&model.cosets[i], g);
                let (rep, _) = canonical_coset(model.ring(), &x).ok_or(Error::NonUnit)?;
                let key = model.group.key(&rep);
                if !model.lookup.contains_key(&key) {
                    model.lookup.insert(key, model.cosets.len() as u32);
                    model.cosets.push(rep);
                    frontier.push_back(model.cosets.len() - 1);
                }
            }
        }
        if model.cosets.len() as u128 != expected {
            return Err(Error::Internal(format!(
                "reached {} cosets, expected |G|/|B| = {expected}",
                model.cosets.len()
            )));
        }
        Ok(model)
    }

    pub fn ring(&self) -> &RingLevel {
        self.group.ring()
    }

    pub fn group(&self) -> &GlGroup {
        &self.group
    }

    pub fn n(&self) -> usize {
        self.group.n()
    }

    pub fn level(&self) -> u32 {
        self.group.level()
    }

    pub fn characters(&self) -> &[UnitCharacter] {
        &self.chars
    }

    pub fn dim(&self) -> usize {
        self.cosets.len()
    }

    pub fn cosets(&self) -> &[MatK] {
        &self.cosets
    }

    /// Weight of one coset in the model inner product.
    pub fn weight(&self) -> f64 {
        1.0 / self.cosets.len() as f64
    }

    pub fn inner(&self, f: &[C64], g: &[C64]) -> C64 {
        linalg::inner(f, g, self.weight())
    }

    /// Central character `chi_pi = prod chi_j`.
    pub fn central_character(&self) -> UnitCharacter {
        self.chars[1..]
            .iter()
            .fold(self.chars[0].clone(), |acc, c| acc.product(c).expect("same ring"))
    }

    /// Declared conductor exponent `sum_j c(chi_j)`.
    pub fn declared_conductor(&self) -> u32 {
        self.chars.iter().map(|c| c.conductor()).sum()
    }

    pub fn generators(&self, s: SubgroupSpec) -> Vec<MatK> {
        self.group.generators(s, &self.units)
    }

    fn diag_phase(&self, d: &[RingElem]) -> u32 {
        let e = self.exponent as u64;
        let total: u64 = self
            .chars
            .iter()
            .zip(d)
            .map(|(c, &x)| c.rotation(x).expect("diagonal entries are units") as u64)
            .sum();
        (total % e) as u32
    }

    /// `pi(k)` as a monomial operator.
    pub fn action(&self, k: &MatK) -> Result<MonomialAction> {
        let mut perm = Vec::with_capacity(self.dim());
        let mut phase = Vec::with_capacity(self.dim());
        for r in &self.cosets {
            let x = self.group.mul(r, k);
            let (rep, d) = canonical_coset(self.ring(), &x).ok_or(Error::NonUnit)?;
            let j = *self
                .lookup
                .get(&self.group.key(&rep))
                .ok_or_else(|| Error::Internal("coset outside the enumerated orbit".into()))?;
            perm.push(j);
            phase.push(self.diag_phase(&d));
        }
        Ok(MonomialAction { perm, phase })
    }

    pub fn apply(&self, a: &MonomialAction, f: &[C64]) -> ModelVector {
        a.perm
            .iter()
            .zip(&a.phase)
            .map(|(&j, &ph)| self.phases[ph as usize] * f[j as usize])
            .collect()
    }

    /// `pi(k) f`.
    pub fn act(&self, k: &MatK, f: &[C64]) -> Result<ModelVector> {
        Ok(self.apply(&self.action(k)?, f))
    }

    /// Orthonormal basis of `{f : pi(g) f = psi(g) f for all g in gens}`,
    /// where `psi(g)` is a rotation index mod the unit-group exponent.
    ///
    /// Solved exactly: each orbit of the generated permutation group carries
    /// either a one-dimensional solution, fixed by propagating phases from a
    /// base point, or none if the propagated phases conflict.
    pub fn equivariant_basis(&self, gens: &[MatK], psi: &[u32]) -> Result<Vec<ModelVector>> {
        let e = self.exponent;
        let actions = gens.iter().map(|g| self.action(g)).collect::<Result<Vec<_>>>()?;
        let d = self.dim();
        let mut theta = vec![u32::MAX; d];
        let mut out = Vec::new();
        for start in 0..d {
            if theta[start] != u32::MAX {
                continue;
            }
            theta[start] = 0;
            let mut members = vec![start];
            let mut stack = vec![start];
            let mut consistent = true;
            while let Some(r) = stack.pop() {
                for (a, &s) in actions.iter().zip(psi) {
                    // f[perm r] = e(psi - phase) f[r]
                    let t = a.perm[r] as usize;
                    let want = (theta[r] + s + e - a.phase[r] % e) % e;
                    if theta[t] == u32::MAX {
                        theta[t] = want;
                        members.push(t);
                        stack.push(t);
                    } else if theta[t] != want {
                        consistent = false;
                    }
                }
            }
            if consistent {
                let scale = (d as f64 / members.len() as f64).sqrt();
                let mut v = vec![C64::new(0.0, 0.0); d];
                for &r in &members {
                    v[r] = self.phases[theta[r] as usize] * scale;
                }
                out.push(v);
            }
        }
        Ok(out)
    }

    /// Orthonormal basis of `V^{K_1(p^l)}`.
    pub fn invariant_basis(&self, l: u32) -> Result<Vec<ModelVector>> {
        let gens = self.generators(SubgroupSpec::K1(l));
        let psi = vec![0; gens.len()];
        self.equivariant_basis(&gens, &psi)
    }

    pub fn invariant_dim(&self, l: u32) -> Result<usize> {
        Ok(self.invariant_basis(l)?.len())
    }

    /// `dim` of the `(K_0(p^l), psi_{chi_pi})`-equivariant vectors, where
    /// `psi(k) = chi_pi(k_nn)`.
    pub fn equivariant_dim(&self, l: u32) -> Result<usize> {
        let gens = self.generators(SubgroupSpec::K0(l));
        let chi = self.central_character();
        let psi = gens
            .iter()
            .map(|g| chi.rotation(g.corner()).ok_or(Error::NonUnit))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.equivariant_basis(&gens, &psi)?.len())
    }

    /// Least `l <= M` with nonzero `K_1(p^l)`-invariants.
    pub fn empirical_conductor(&self) -> Result<Option<u32>> {
        for l in 0..=self.level() {
            if self.invariant_dim(l)? > 0 {
                return Ok(Some(l));
            }
        }
        Ok(None)
    }

    /// Dimensions of `V^{K_1(p^l)} minus V^{K_1(p^{l-1})}` for `l = 0..=M`.
    pub fn graded_newvector_dims(&self) -> Result<Vec<usize>> {
        let dims = (0..=self.level())
            .map(|l| self.invariant_dim(l))
            .collect::<Result<Vec<_>>>()?;
        Ok(dims
            .iter()
            .enumerate()
            .map(|(l, &d)| if l == 0 { d } else { d - dims[l - 1] })
            .collect())
    }

    /// The newform: unit-norm generator of `V^{K_1(p^c)}` with `c` the
    /// empirical conductor, which must equal `sum c(chi_j)`.
    pub fn newform(&self) -> Result<ModelVector> {
        let declared = self.declared_conductor();
        if declared > self.level() {
            return Err(Error::InvalidParameter(format!(
                "level {} cannot host a newform of conductor {declared}",
                self.level()
            )));
        }
        let empirical = self.empirical_conductor()?;
        if empirical != Some(declared) {
            return Err(Error::ConductorMismatch {
                declared,
                empirical: empirical.unwrap_or(u32::MAX),
            });
        }
        let basis = self.invariant_basis(declared)?;
        if basis.len() != 1 {
            return Err(Error::Internal(format!(
                "newform space has dimension {}",
                basis.len()
            )));
        }
        Ok(basis.into_iter().next().expect("one vector"))
    }

    /// `max |pi(k0) v - chi_pi(d) v|` over generators of `K_0(p^c)`.
    pub fn equivariance_residual(&self, v: &[C64], c: u32) -> Result<f64> {
        let chi = self.central_character();
        let mut worst = 0.0f64;
        for g in self.generators(SubgroupSpec::K0(c)) {
            let lhs = self.act(&g, v)?;
            let s = chi.value_or_zero(g.corner());
            let rhs: CVec = v.iter().map(|x| x * s).collect();
            worst = worst.max(linalg::max_abs_diff(&lhs, &rhs));
        }
        Ok(worst)
    }

    /// Whether every `pi(g)` permutes the cosets bijectively. The phases are
    /// exact roots of unity, so this is exactly unitarity.
    pub fn is_unitary(&self, gens: &[MatK]) -> Result<bool> {
        for g in gens {
            let a = self.action(g)?;
            let mut seen = vec![false; self.dim()];
            for &j in &a.perm {
                if std::mem::replace(&mut seen[j as usize], true) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Closed form of `<pi(k) v°, v°> / <v°, v°>`.
    pub fn matrix_coefficient_closed_form(&self, k: &MatK, c: u32) -> C64 {
        let chi = self.central_character();
        let corner = chi.value_or_zero(k.corner());
        if self.group.contains(k, SubgroupSpec::K0(c)) {
            corner
        } else if c > chi.conductor() && self.group.contains(k, SubgroupSpec::K0(c - 1)) {
            let a = alpha(self.ring().q(), self.n(), c);
            corner * (*a.numer() as f64 / *a.denom() as f64)
        } else {
            C64::new(0.0, 0.0)
        }
    }

    /// `max |<pi(k) v°, v°>/<v°, v°> - closed form|` over the given `k`.
    pub fn matrix_coefficient_residual(&self, newform: &[C64], ks: &[MatK]) -> Result<f64> {
        let c = self.declared_conductor();
        let nn = self.inner(newform, newform);
        let mut worst = 0.0f64;
        for k in ks {
            let coeff = self.inner(&self.act(k, newform)?, newform) / nn;
            worst = worst.max((coeff - self.matrix_coefficient_closed_form(k, c)).norm());
        }
        Ok(worst)
    }

    /// For each sphere point `y`, a matrix `s_y` whose inverse has bottom row `y`.
    fn sphere_sections(&self, sphere: &Sphere) -> Result<Vec<MatK>> {
        let n = self.n();
        sphere
            .points()
            .map(|y| {
                let j = y
                    .iter()
                    .position(|&v| self.ring().is_unit(v))
                    .ok_or_else(|| Error::Internal("sphere point without a unit".into()))?;
                let mut rows = Vec::with_capacity(n * n);
                for i in 0..n {
                    if i != j {
                        rows.extend((0..n).map(|c| if c == i { RingElem::ONE } else { RingElem::ZERO }));
                    }
                }
                rows.extend_from_slice(y);
                let t = MatK::from_entries(n, rows);
                self.group.inv(&t).ok_or(Error::NonUnit)
            })
            .collect()
    }

    /// `dim/|S| sum_y P(y) pi(s_y) v`, which equals
    /// `dim * int_K P(e_n k^{-1}) pi(k) v dk` whenever `v` is fixed by `K_{n-1,1}`.
    pub fn kernel_average(
        &self,
        sphere: &Sphere,
        p: &[C64],
        dim: f64,
        vs: &[ModelVector],
    ) -> Result<Vec<ModelVector>> {
        if sphere.ring() != self.ring() || sphere.n() != self.n() {
            return Err(Error::Mismatch("sphere and model differ in n or level".into()));
        }
        let sections = self.sphere_sections(sphere)?;
        let mut out = vec![vec![C64::new(0.0, 0.0); self.dim()]; vs.len()];
        let scale = dim / sphere.len() as f64;
        for (y, s) in sections.iter().enumerate() {
            if p[y].norm() == 0.0 {
                continue;
            }
            let a = self.action(s)?;
            let w = p[y] * scale;
            for (o, v) in out.iter_mut().zip(vs) {
                for (x, val) in o.iter_mut().zip(self.apply(&a, v)) {
                    *x += w * val;
                }
            }
        }
        Ok(out)
    }

    /// `dim/|K| sum_{k in K} P(e_n k^{-1}) pi(k) v`, by full enumeration of `K`.
    pub fn kernel_average_exhaustive(
        &self,
        sphere: &Sphere,
        p: &[C64],
        dim: f64,
        v: &[C64],
    ) -> Result<ModelVector> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        let mut count = 0usize;
        for k in self.group.elements() {
            count += 1;
            let k_inv = self.group.inv(&k).ok_or(Error::NonUnit)?;
            let y = sphere
                .bottom_row_index(&k_inv)
                .ok_or_else(|| Error::Internal("bottom row off the sphere".into()))?;
            if p[y].norm() == 0.0 {
                continue;
            }
            for (x, val) in out.iter_mut().zip(self.act(&k, v)?) {
                *x += p[y] * val;
            }
        }
        let scale = dim / count as f64;
        Ok(out.into_iter().map(|x| x * scale).collect())
    }

    /// Dimension of the `K_{n-1,1}`-fixed vectors in the `tau_{chi,l}`-isotypic
    /// part, computed by applying the `tau_{chi,l}` projector (built from the
    /// zonal function `zonal` of dimension `dim`) to the `K_{n-1,1}`-invariants.
    pub fn ktype_fixed_dim(&self, sphere: &Sphere, zonal: &[C64], dim: usize) -> Result<usize> {
        Ok(self.ktype_fixed_dims(sphere, &[(dim, zonal.to_vec())])?[0])
    }

    /// [`Self::ktype_fixed_dim`] for several K-types at once, sharing the
    /// section actions.
    pub fn ktype_fixed_dims(&self, sphere: &Sphere, zonals: &[(usize, CVec)]) -> Result<Vec<usize>> {
        if sphere.ring() != self.ring() || sphere.n() != self.n() {
            return Err(Error::Mismatch("sphere and model differ in n or level".into()));
        }
        let gens = self.generators(SubgroupSpec::Mirabolic);
        let inv = self.equivariant_basis(&gens, &vec![0; gens.len()])?;
        if inv.is_empty() {
            return Ok(vec![0; zonals.len()]);
        }
        let actions = self
            .sphere_sections(sphere)?
            .iter()
            .map(|s| self.action(s))
            .collect::<Result<Vec<_>>>()?;
        let moved: Vec<Vec<ModelVector>> = actions
            .iter()
            .map(|a| inv.iter().map(|v| self.apply(a, v)).collect())
            .collect();
        zonals
            .iter()
            .map(|(dim, p)| {
                let scale = *dim as f64 / sphere.len() as f64;
                let mut images = vec![vec![C64::new(0.0, 0.0); self.dim()]; inv.len()];
                for (y, mv) in moved.iter().enumerate() {
                    if p[y].norm() == 0.0 {
                        continue;
                    }
                    let w = p[y] * scale;
                    for (o, v) in images.iter_mut().zip(mv) {
                        for (x, val) in o.iter_mut().zip(v) {
                            *x += w * val;
                        }
                    }
                }
                let refs: Vec<(CVec, f64)> = images.into_iter().map(|v| (v, 1.0)).collect();
                let o = linalg::pivoted_mgs_against(
                    refs,
                    self.weight(),
                    linalg::PIVOT_THRESHOLD,
                    linalg::PIVOT_GAP,
                )?;
                Ok(o.rank())
            })
            .collect()
    }

    /// Orthonormal basis of the `K`-span of `v`, grown by applying generators.
    pub fn k_span(&self, v: &[C64]) -> Result<Vec<ModelVector>> {
        let gens = self.generators(SubgroupSpec::Full);
        let actions = gens.iter().map(|g| self.action(g)).collect::<Result<Vec<_>>>()?;
        let w = self.weight();
        let nv = linalg::norm(v, w);
        let mut basis: Vec<CVec> = vec![v.iter().map(|x| x / nv).collect()];
        let mut dropped_max = 0.0f64;
        let mut kept_min = 1.0f64;
        let mut i = 0;
        while i < basis.len() {
            for a in &actions {
                let mut y = self.apply(a, &basis[i]);
                linalg::project_out(&mut y, &basis, w);
                linalg::project_out(&mut y, &basis, w);
                let r = linalg::norm(&y, w);
                if r < linalg::PIVOT_THRESHOLD {
                    dropped_max = dropped_max.max(r);
                } else {
                    kept_min = kept_min.min(r);
                    basis.push(y.into_iter().map(|x| x / r).collect());
                }
            }
            i += 1;
        }
        if dropped_max > 0.0 && kept_min / dropped_max < linalg::PIVOT_GAP {
            return Err(Error::RankGap {
                kept: kept_min,
                dropped: dropped_max,
            });
        }
        Ok(basis)
    }

    /// Random elements of `K` for sampled checks.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<MatK> {
        (0..count).map(|_| self.group.random(rng)).collect()
    }

    /// Expected `dim tau_{chi_pi, c(pi)}`.
    pub fn newform_ktype_dim(&self) -> u64 {
        harmonic_dim(
            self.ring().q(),
            self.n(),
            self.central_character().conductor(),
            self.declared_conductor(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::Harmonics;
    use crate::ring::CharacterGroup;
    use rand::SeedableRng;

    fn chars(r: &RingLevel) -> CharacterGroup {
        CharacterGroup::new(r).unwrap()
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(3, 1), 3);
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(2, 3), 0);
        assert_eq!(oldform_dim(2, 0, 2), 3);
        assert_eq!(oldform_dim(3, 1, 0), 0);
        assert_eq!(graded_dim(3, 0, 2), 3);
    }

    #[test]
    fn coset_counts() {
        for (r, n, expect) in [
            (RingLevel::padic(2, 1).unwrap(), 2, 3),
            (RingLevel::padic(2, 2).unwrap(), 2, 6),
            (RingLevel::padic(2, 1).unwrap(), 3, 21),
            (RingLevel::padic(3, 2).unwrap(), 2, 12),
        ] {
            let g = chars(&r);
            let m = PSeriesModel::new(vec![g.trivial().clone(); n]).unwrap();
            assert_eq!(m.dim(), expect);
        }
    }

    #[test]
    fn coset_count_matches_brute_force() {
        let r = RingLevel::padic(2, 2).unwrap();
        let g = GlGroup::new(r.clone(), 2).unwrap();
        let reps: std::collections::HashSet<MatK> =
            g.elements().map(|k| canonical_coset(&r, &k).unwrap().0).collect();
        assert_eq!(reps.len(), 6);
    }

    #[test]
    fn canonical_factorisation_reconstructs() {
        let r = RingLevel::padic(3, 2).unwrap();
        let g = GlGroup::new(r.clone(), 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let k = g.random(&mut rng);
            let (rep, d) = canonical_coset(&r, &k).unwrap();
            let b = g.mul(&k, &g.inv(&rep).unwrap());
            for i in 0..3 {
                assert_eq!(b.get(i, i), d[i]);
                for j in 0..i {
                    assert_eq!(b.get(i, j), RingElem::ZERO);
                }
            }
            let h = g.random_in(SubgroupSpec::K0(2), &mut rng);
            let mut upper = h.clone();
            for i in 0..3 {
                for j in 0..i {
                    upper.set(i, j, RingElem::ZERO);
                }
            }
            if g.is_invertible(&upper) {
                assert_eq!(canonical_coset(&r, &g.mul(&upper, &k)).unwrap().0, rep);
            }
        }
    }

    #[test]
    fn spherical_model() {
        let r = RingLevel::padic(2, 2).unwrap();
        let g = chars(&r);
        let m = PSeriesModel::new(vec![g.trivial().clone(); 2]).unwrap();
        assert_eq!(m.declared_conductor(), 0);
        assert_eq!(m.invariant_dim(0).unwrap(), 1);
        assert_eq!(m.invariant_dim(2).unwrap(), 3);
        let v = m.newform().unwrap();
        let all: Vec<MatK> = m.group().elements().collect();
        assert!(m.matrix_coefficient_residual(&v, &all).unwrap() < 1e-12);
        for k in &all {
            assert!((m.matrix_coefficient_closed_form(k, 0) - C64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn central_character_acts_by_scalars() {
        let r = RingLevel::padic(3, 2).unwrap();
        let g = chars(&r);
        let chi1 = g.select(1, 0).unwrap();
        let m = PSeriesModel::new(vec![chi1, g.trivial().clone()]).unwrap();
        assert_eq!(m.dim(), 12);
        assert_eq!(m.declared_conductor(), 1);
        let chi = m.central_character();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let v: CVec = (0..m.dim()).map(|_| C64::new(rng.gen(), rng.gen())).collect();
        for a in r.units() {
            let lhs = m.act(&m.group().scalar(a), &v).unwrap();
            let s = chi.value_or_zero(a);
            let rhs: CVec = v.iter().map(|x| x * s).collect();
            assert!(linalg::max_abs_diff(&lhs, &rhs) < 1e-12);
        }
        assert_eq!(m.empirical_conductor().unwrap(), Some(1));
        assert_eq!(m.invariant_dim(1).unwrap(), 1);
    }

    #[test]
    fn action_is_a_homomorphism() {
        let r = RingLevel::padic(2, 3).unwrap();
        let g = chars(&r);
        let m = PSeriesModel::new(vec![g.select(2, 0).unwrap(), g.select(3, 1).unwrap()]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let v: CVec = (0..m.dim()).map(|_| C64::new(rng.gen(), rng.gen())).collect();
        for _ in 0..20 {
            let k1 = m.group().random(&mut rng);
            let k2 = m.group().random(&mut rng);
            let lhs = m.act(&m.group().mul(&k1, &k2), &v).unwrap();
            let rhs = m.act(&k1, &m.act(&k2, &v).unwrap()).unwrap();
            assert!(linalg::max_abs_diff(&lhs, &rhs) < 1e-12);
        }
    }

    #[test]
    fn conductor_four_at_level_four() {
        let r = RingLevel::padic(2, 4).unwrap();
        let g = chars(&r);
        let c2 = g.select(2, 0).unwrap();
        let m = PSeriesModel::new(vec![c2.clone(), c2]).unwrap();
        assert_eq!(m.empirical_conductor().unwrap(), Some(4));
    }

    #[test]
    fn vcirc_roundtrip_and_ktype_projector() {
        let r = RingLevel::padic(2, 2).unwrap();
        let hm = Harmonics::new(r.clone(), 2).unwrap();
        let g = hm.characters();
        let c2 = g.select(2, 0).unwrap();
        let m = PSeriesModel::new(vec![c2.clone(), g.trivial().clone()]).unwrap();
        let v0 = m.newform().unwrap();
        let sub = hm.harmonic_subspace(&c2, 2).unwrap();
        let zonal = hm.zonal_from_subspace(&sub).unwrap();
        let dim = sub.dim() as f64;
        let fast = m.kernel_average(hm.sphere(), &zonal, dim, &[v0.clone()]).unwrap().remove(0);
        let slow = m.kernel_average_exhaustive(hm.sphere(), &zonal, dim, &v0).unwrap();
        assert!(linalg::max_abs_diff(&fast, &v0) < 1e-10);
        assert!(linalg::max_abs_diff(&slow, &v0) < 1e-10);
        assert_eq!(m.ktype_fixed_dim(hm.sphere(), &zonal, sub.dim()).unwrap(), 1);
        assert_eq!(m.k_span(&v0).unwrap().len(), sub.dim());
    }
}
