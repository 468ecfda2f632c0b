//! Functions on the finite sphere: the `chi`-equivariant level filtration,
//! the irreducible spaces `H_{chi,m}`, zonal spherical functions, and the
//! identities tying them together.
//!
//! All functions are vectors indexed by [`Sphere`] points at the working
//! level `M`. The inner product is the uniform probability measure on the
//! sphere, which is the pushforward of Haar measure on `K` because `K` acts
//! transitively with stabilisers of equal size.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_rational::Ratio;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CVec, Orthonormalized, C64};
use crate::matgroup::{GlGroup, MatK, SubgroupSpec};
use crate::ring::{CharacterGroup, RingElem, RingLevel, UnitCharacter};
use crate::sphere::{ScalarTable, Sphere};

/// A complex function on the enumerated sphere.
pub type SphereFn = CVec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubspaceKind {
    /// `C^infty(S)^{K(p^l)}_chi`: level-`l` functions with central character `chi`.
    Level,
    /// `H_{chi,m}`.
    Harmonic,
}

/// An orthonormal family of sphere functions with its provenance.
#[derive(Clone, Debug)]
pub struct Subspace {
    pub basis: Vec<SphereFn>,
    pub chi: UnitCharacter,
    pub level: u32,
    pub kind: SubspaceKind,
    /// Pivot-gap certificate of the rank decision.
    pub gap: f64,
}

impl Subspace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

/// `dim C^infty(S)^{K(p^l)}_chi` from the counting formula.
pub fn level_dim(q: u32, n: usize, c: u32, l: u32) -> u64 {
    let q = q as u64;
    let n = n as u32;
    if l < c {
        0
    } else if l == 0 {
        1
    } else {
        q.pow((l - 1) * (n - 1)) * (q.pow(n) - 1) / (q - 1)
    }
}

/// `dim H_{chi,m}` from the four-case formula.
pub fn harmonic_dim(q: u32, n: usize, c: u32, m: u32) -> u64 {
    let qq = q as u64;
    let nn = n as u32;
    if m < c {
        0
    } else if m == 0 {
        1
    } else if c == 0 && m == 1 {
        qq * (qq.pow(nn - 1) - 1) / (qq - 1)
    } else if c == m {
        qq.pow((c - 1) * (nn - 1)) * (qq.pow(nn) - 1) / (qq - 1)
    } else {
        qq.pow((m - 2) * (nn - 1)) * (qq.pow(nn) - 1) * (qq.pow(nn - 1) - 1) / (qq - 1)
    }
}

/// The shell coefficient `alpha_{chi,m;m-1}` of the zonal function.
pub fn alpha(q: u32, n: usize, m: u32) -> Ratio<i64> {
    let q = q as i64;
    let qn1 = q.pow(n as u32 - 1) - 1;
    if m == 1 {
        Ratio::new(-(q - 1), q * qn1)
    } else {
        Ratio::new(-1, qn1)
    }
}

/// `<phi_{chi,l1}, phi_{chi,l2}>`.
pub fn phi_inner_exact(q: u32, n: usize, l1: u32, l2: u32) -> Ratio<i64> {
    let l = l1.max(l2);
    if l == 0 {
        return Ratio::from_integer(1);
    }
    let q = q as i64;
    let n = n as u32;
    Ratio::new(q - 1, q.pow((l - 1) * (n - 1)) * (q.pow(n) - 1))
}

fn ratio_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// The sphere at working level `M` together with the tables needed to build
/// and test harmonic subspaces.
pub struct Harmonics {
    sphere: Arc<Sphere>,
    group: GlGroup,
    chars: Arc<CharacterGroup>,
    scalars: ScalarTable,
    /// `reductions[l - 1][i]`: index of `x_i mod p^l` on the level-`l` sphere.
    reductions: Vec<Vec<u32>>,
    reduced_sizes: Vec<usize>,
}

impl Harmonics {
    pub fn new(ring: RingLevel, n: usize) -> Result<Harmonics> {
        let sphere = Arc::new(Sphere::new(ring.clone(), n)?);
        let chars = Arc::new(CharacterGroup::new(&ring)?);
        Self::from_parts(sphere, chars)
    }

    pub fn from_parts(sphere: Arc<Sphere>, chars: Arc<CharacterGroup>) -> Result<Harmonics> {
        let ring = sphere.ring().clone();
        if chars.ring() != &ring {
            return Err(Error::Mismatch("characters and sphere live at different levels".into()));
        }
        let group = GlGroup::new(ring.clone(), sphere.n())?;
        let scalars = ScalarTable::new(&sphere);
        let mut reductions = Vec::new();
        let mut reduced_sizes = Vec::new();
        for l in 1..=ring.level() {
            let (lower, map) = sphere.reduction(l)?;
            reduced_sizes.push(lower.len());
            reductions.push(map);
        }
        Ok(Harmonics {
            sphere,
            group,
            chars,
            scalars,
            reductions,
            reduced_sizes,
        })
    }

    pub fn sphere(&self) -> &Arc<Sphere> {
        &self.sphere
    }

    pub fn group(&self) -> &GlGroup {
        &self.group
    }

    pub fn characters(&self) -> &Arc<CharacterGroup> {
        &self.chars
    }

    pub fn ring(&self) -> &RingLevel {
        self.sphere.ring()
    }

    pub fn n(&self) -> usize {
        self.sphere.n()
    }

    pub fn level(&self) -> u32 {
        self.sphere.level()
    }

    /// Weight of one point in the probability measure.
    pub fn weight(&self) -> f64 {
        1.0 / self.sphere.len() as f64
    }

    pub fn inner(&self, f: &[C64], g: &[C64]) -> C64 {
        linalg::inner(f, g, self.weight())
    }

    pub fn generators(&self, s: SubgroupSpec) -> Vec<MatK> {
        self.group.generators(s, self.chars.basis())
    }

    /// Smallest valuation among the first `n - 1` coordinates.
    fn head_valuation(&self, x: &[RingElem]) -> u32 {
        let r = self.ring();
        x[..x.len() - 1].iter().map(|&v| r.valuation(v)).min().unwrap_or(r.level())
    }

    fn check_chi(&self, chi: &UnitCharacter) -> Result<()> {
        if chi.ring() != self.ring() {
            return Err(Error::Mismatch("character is not defined at the working level".into()));
        }
        Ok(())
    }

    /// `phi_{chi,l}`: `chi(x_n)` where `x_1..x_{n-1}` all lie in `p^l`, else 0.
    /// For `l = 0` only trivial `chi` is allowed and the result is constant 1.
    pub fn phi(&self, chi: &UnitCharacter, l: u32) -> Result<SphereFn> {
        self.check_chi(chi)?;
        if l < chi.conductor() {
            return Err(Error::InvalidParameter(format!(
                "phi needs level {l} >= conductor {}",
                chi.conductor()
            )));
        }
        if l > self.level() {
            return Err(Error::InvalidParameter(format!("phi level {l} above working level")));
        }
        if l == 0 {
            return Ok(vec![C64::new(1.0, 0.0); self.sphere.len()]);
        }
        Ok(self
            .sphere
            .points()
            .map(|x| {
                if self.head_valuation(x) >= l {
                    chi.value_or_zero(x[x.len() - 1])
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect())
    }

    /// The zonal spherical function from its closed form.
    pub fn zonal_closed_form(&self, chi: &UnitCharacter, m: u32) -> Result<SphereFn> {
        self.check_chi(chi)?;
        let c = chi.conductor();
        if m < c || m > self.level() {
            return Err(Error::InvalidParameter(format!(
                "zonal level {m} outside {c}..={}",
                self.level()
            )));
        }
        if m == 0 {
            return Ok(vec![C64::new(1.0, 0.0); self.sphere.len()]);
        }
        let a = ratio_f64(alpha(self.ring().q(), self.n(), m));
        Ok(self
            .sphere
            .points()
            .map(|x| {
                let v = self.head_valuation(x);
                let xn = chi.value_or_zero(x[x.len() - 1]);
                if v >= m {
                    xn
                } else if m > c && v == m - 1 {
                    xn * a
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect())
    }

    /// Orthonormal basis of `C^infty(S)^{K(p^l)}_chi`: functions pulled back
    /// from level `l` with `f(a x) = chi(a) f(x)` for units `a`.
    pub fn chi_level_subspace(&self, chi: &UnitCharacter, l: u32) -> Result<Subspace> {
        self.check_chi(chi)?;
        if l > self.level() {
            return Err(Error::InvalidParameter(format!("level {l} above working level")));
        }
        let empty = |gap| Subspace {
            basis: Vec::new(),
            chi: chi.clone(),
            level: l,
            kind: SubspaceKind::Level,
            gap,
        };
        if l == 0 {
            if !chi.is_trivial() {
                return Ok(empty(f64::INFINITY));
            }
            return Ok(Subspace {
                basis: vec![vec![C64::new(1.0, 0.0); self.sphere.len()]],
                ..empty(f64::INFINITY)
            });
        }
        let red = &self.reductions[l as usize - 1];
        let lower = self.reduced_sizes[l as usize - 1];
        let n_pts = self.sphere.len();
        let units = self.scalars.units();
        let scale = 1.0 / units.len() as f64;
        // cand[z](x) = |U|^{-1} sum_{a : a x reduces to z} conj chi(a)
        let mut cand = vec![vec![C64::new(0.0, 0.0); n_pts]; lower];
        for (pos, &a) in units.iter().enumerate() {
            let w = chi.value_or_zero(a).conj() * scale;
            for i in 0..n_pts {
                let z = red[self.scalars.apply(pos, i)] as usize;
                cand[z][i] += w;
            }
        }
        // Each candidate is the projection of a fiber indicator, whose norm
        // is the reference for the relative pivot.
        let fiber_norm = (n_pts as f64 / lower as f64 * self.weight()).sqrt();
        let o = mgs_with_reference(cand, self.weight(), fiber_norm)?;
        let gap = o.gap();
        Ok(Subspace {
            basis: o.basis,
            ..empty(gap)
        })
    }

    /// Orthonormal basis of `H_{chi,m}`: the complement of level `m - 1`
    /// inside level `m` (or the whole level-`c(chi)` space when `m = c(chi)`).
    pub fn harmonic_subspace(&self, chi: &UnitCharacter, m: u32) -> Result<Subspace> {
        let c = chi.conductor();
        if m < c {
            return Err(Error::InvalidParameter(format!(
                "harmonic level {m} below conductor {c}"
            )));
        }
        let top = self.chi_level_subspace(chi, m)?;
        if m == c {
            return Ok(Subspace {
                kind: SubspaceKind::Harmonic,
                ..top
            });
        }
        let below = self.chi_level_subspace(chi, m - 1)?;
        let w = self.weight();
        let cand: Vec<CVec> = top
            .basis
            .into_iter()
            .map(|mut f| {
                linalg::project_out(&mut f, &below.basis, w);
                linalg::project_out(&mut f, &below.basis, w);
                f
            })
            .collect();
        let o = mgs_with_reference(cand, w, 1.0)?;
        Ok(Subspace {
            basis: o.basis.clone(),
            chi: chi.clone(),
            level: m,
            kind: SubspaceKind::Harmonic,
            gap: o.gap().min(top.gap).min(below.gap),
        })
    }

    /// The zonal function computed without the closed form: project
    /// `phi_{chi,m}` onto `H_{chi,m}` and normalise to 1 at `e_n`.
    pub fn zonal_from_subspace(&self, sub: &Subspace) -> Result<SphereFn> {
        let phi = self.phi(&sub.chi, sub.level)?;
        let p = linalg::project_onto(&phi, &sub.basis, self.weight());
        let at_e = p[self.sphere.e_n()];
        if at_e.norm() < 1e-12 {
            return Err(Error::Internal("zonal projection vanishes at e_n".into()));
        }
        Ok(p.iter().map(|z| z / at_e).collect())
    }

    /// `(tau(k) f)(x) = f(x k)`.
    pub fn translate(&self, f: &[C64], k: &MatK) -> Result<SphereFn> {
        let perm = self.sphere.permutation(k, &self.group)?;
        Ok(perm.iter().map(|&j| f[j as usize]).collect())
    }

    /// Matrix of `tau(k)` on an orthonormal basis: entry `(i, j)` is
    /// `<tau(k) Q_j, Q_i>`.
    pub fn representation_matrix(&self, sub: &Subspace, k: &MatK) -> Result<DMatrix<C64>> {
        let d = sub.dim();
        let perm = self.sphere.permutation(k, &self.group)?;
        let w = self.weight();
        let moved: Vec<CVec> = sub
            .basis
            .iter()
            .map(|q| perm.iter().map(|&j| q[j as usize]).collect())
            .collect();
        Ok(DMatrix::from_fn(d, d, |i, j| linalg::inner(&moved[j], &sub.basis[i], w)))
    }

    /// Largest deviation of a subspace from `K`-stability under `gens`:
    /// `max |tau(g) Q_j - proj(tau(g) Q_j)|`.
    pub fn stability_defect(&self, sub: &Subspace, gens: &[MatK]) -> Result<f64> {
        let w = self.weight();
        let mut worst = 0.0f64;
        for g in gens {
            for q in &sub.basis {
                let moved = self.translate(q, g)?;
                let back = linalg::project_onto(&moved, &sub.basis, w);
                worst = worst.max(linalg::max_abs_diff(&moved, &back));
            }
        }
        Ok(worst)
    }

    /// Dimension of the commutant of the `K`-action on `sub`, with the
    /// eigenvalue gap that certifies it.
    pub fn commutant_dimension(&self, sub: &Subspace, gens: &[MatK]) -> Result<(usize, f64)> {
        if sub.dim() == 0 {
            return Ok((0, f64::INFINITY));
        }
        let mats = gens
            .iter()
            .map(|g| self.representation_matrix(sub, g))
            .collect::<Result<Vec<_>>>()?;
        linalg::commutant_dimension(&mats)
    }

    /// Dimension of the subspace of vectors in `sub` fixed by all of `gens`.
    pub fn fixed_dimension(&self, sub: &Subspace, gens: &[MatK]) -> Result<(usize, f64)> {
        let d = sub.dim();
        if d == 0 {
            return Ok((0, f64::INFINITY));
        }
        let mut c = DMatrix::<C64>::zeros(d, d);
        for g in gens {
            let a = self.representation_matrix(sub, g)? - DMatrix::<C64>::identity(d, d);
            c += a.adjoint() * &a;
        }
        linalg::psd_kernel_dim(c)
    }

    /// Value of `f` at `x k^{-1}`.
    fn eval_at_inverse(&self, f: &[C64], x: &[RingElem], k_inv: &MatK) -> Result<C64> {
        let y = self.group.vec_mul(x, k_inv);
        let i = self
            .sphere
            .index(&y)
            .ok_or_else(|| Error::Internal("x k^-1 left the sphere".into()))?;
        Ok(f[i])
    }

    /// `max |sum_j Q_j(x) conj Q_j(e_n k) - dim P(x k^{-1})|` over samples.
    pub fn verify_addition_theorem(
        &self,
        sub: &Subspace,
        zonal: &[C64],
        samples: &[(usize, MatK)],
    ) -> Result<f64> {
        let dim = sub.dim() as f64;
        let mut worst = 0.0f64;
        for (xi, k) in samples {
            let x = self.sphere.point(*xi);
            let ek = self
                .sphere
                .bottom_row_index(k)
                .ok_or_else(|| Error::Internal("bottom row off the sphere".into()))?;
            let lhs: C64 = sub.basis.iter().map(|q| q[*xi] * q[ek].conj()).sum();
            let k_inv = self.group.inv(k).ok_or(Error::NonUnit)?;
            let rhs = self.eval_at_inverse(zonal, x, &k_inv)? * dim;
            worst = worst.max((lhs - rhs).norm());
        }
        Ok(worst)
    }

    /// Checks `P(e_n k) = dim <tau(k) P, P°>` for every basis vector `P`, and
    /// the symmetry `P°(e_n k) = conj P°(e_n k^{-1})`. Returns the two
    /// largest residuals.
    pub fn verify_reproducing_kernel(
        &self,
        sub: &Subspace,
        zonal: &[C64],
        ks: &[MatK],
    ) -> Result<(f64, f64)> {
        let dim = sub.dim() as f64;
        let w = self.weight();
        let mut kernel = 0.0f64;
        let mut symmetry = 0.0f64;
        for k in ks {
            let perm = self.sphere.permutation(k, &self.group)?;
            let ek = perm[self.sphere.e_n()] as usize;
            for p in &sub.basis {
                let moved: CVec = perm.iter().map(|&j| p[j as usize]).collect();
                let rhs = linalg::inner(&moved, zonal, w) * dim;
                kernel = kernel.max((p[ek] - rhs).norm());
            }
            let k_inv = self.group.inv(k).ok_or(Error::NonUnit)?;
            let ek_inv = self.sphere.bottom_row_index(&k_inv).expect("on sphere");
            symmetry = symmetry.max((zonal[ek] - zonal[ek_inv].conj()).norm());
        }
        Ok((kernel, symmetry))
    }

    /// The zonal functions `P°_{chi,l}` and dimensions for `l = c(chi)..=m`,
    /// computed from the harmonic subspaces.
    pub fn zonal_tower(&self, chi: &UnitCharacter, m: u32) -> Result<Vec<(usize, SphereFn)>> {
        (chi.conductor()..=m)
            .map(|l| {
                let sub = self.harmonic_subspace(chi, l)?;
                Ok((sub.dim(), self.zonal_from_subspace(&sub)?))
            })
            .collect()
    }

    /// `sum_l dim(tau_{chi,l}) P°_{chi,l}(e_n k^{-1})` from a zonal tower.
    pub fn idempotent_sum(&self, tower: &[(usize, SphereFn)], k: &MatK) -> Result<C64> {
        let k_inv = self.group.inv(k).ok_or(Error::NonUnit)?;
        let i = self
            .sphere
            .bottom_row_index(&k_inv)
            .ok_or_else(|| Error::Internal("bottom row off the sphere".into()))?;
        Ok(tower.iter().map(|(d, p)| p[i] * *d as f64).sum())
    }

    /// Closed-form right side of the `K_0(p^m)` idempotent identity.
    pub fn idempotent_target_k0(&self, chi: &UnitCharacter, m: u32, k: &MatK) -> C64 {
        if m == 0 {
            return C64::new(1.0, 0.0);
        }
        if !self.group.contains(k, SubgroupSpec::K0(m)) {
            return C64::new(0.0, 0.0);
        }
        let index = self.group.index(SubgroupSpec::K0(m)) as f64;
        chi.value_or_zero(k.corner()).conj() * index
    }

    /// Closed-form right side of the `K_1(p^m)` identity.
    pub fn idempotent_target_k1(&self, m: u32, k: &MatK) -> C64 {
        if self.group.contains(k, SubgroupSpec::K1(m)) {
            C64::new(self.group.index(SubgroupSpec::K1(m)) as f64, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    }

    /// Largest residual of both idempotent identities at level `m` over the
    /// given group elements. Towers are built once for every character of
    /// conductor at most `m`.
    pub fn verify_idempotent_sums(&self, m: u32, ks: &[MatK]) -> Result<(f64, f64)> {
        let chars: Vec<&UnitCharacter> = self
            .chars
            .characters()
            .iter()
            .filter(|c| c.conductor() <= m)
            .collect();
        let towers = chars
            .iter()
            .map(|c| self.zonal_tower(c, m))
            .collect::<Result<Vec<_>>>()?;
        let mut k0 = 0.0f64;
        let mut k1 = 0.0f64;
        for k in ks {
            let mut total = C64::new(0.0, 0.0);
            for (chi, tower) in chars.iter().zip(&towers) {
                let s = self.idempotent_sum(tower, k)?;
                k0 = k0.max((s - self.idempotent_target_k0(chi, m, k)).norm());
                total += s;
            }
            k1 = k1.max((total - self.idempotent_target_k1(m, k)).norm());
        }
        Ok((k0, k1))
    }

    /// Random `(x, k)` pairs for sampled identity checks.
    pub fn sample_pairs<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<(usize, MatK)> {
        (0..count)
            .map(|_| (rng.gen_range(0..self.sphere.len()), self.group.random(rng)))
            .collect()
    }
}

/// Pivoted Gram-Schmidt with every pivot measured against one reference norm.
fn mgs_with_reference(cand: Vec<CVec>, w: f64, reference: f64) -> Result<Orthonormalized> {
    let cand = cand.into_iter().map(|v| (v, reference)).collect();
    linalg::pivoted_mgs_against(cand, w, linalg::PIVOT_THRESHOLD, linalg::PIVOT_GAP)
}
