//! Small dense complex linear algebra with certified rank decisions.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CVec = Vec<C64>;

/// Relative pivot below which a direction is treated as dependent.
pub const PIVOT_THRESHOLD: f64 = 1e-6;

/// Required ratio between the smallest kept and largest dropped pivot.
pub const PIVOT_GAP: f64 = 1e4;

/// Default tolerance for numerical equality and orthogonality.
pub const TAU_NUM: f64 = 1e-8;

/// `w * sum_i f_i conj(g_i)`.
#[inline]
pub fn inner(f: &[C64], g: &[C64], w: f64) -> C64 {
    f.iter().zip(g).map(|(a, b)| a * b.conj()).sum::<C64>() * w
}

#[inline]
pub fn norm(f: &[C64], w: f64) -> f64 {
    (f.iter().map(|a| a.norm_sqr()).sum::<f64>() * w).sqrt()
}

pub fn max_abs_diff(f: &[C64], g: &[C64]) -> f64 {
    f.iter().zip(g).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
}

/// `f - sum_j <f, q_j> q_j` in place, one basis vector at a time.
pub fn project_out(f: &mut [C64], basis: &[CVec], w: f64) {
    for q in basis {
        let c = inner(f, q, w);
        for (x, y) in f.iter_mut().zip(q) {
            *x -= c * y;
        }
    }
}

/// Orthogonal projection of `f` onto the span of an orthonormal basis.
pub fn project_onto(f: &[C64], basis: &[CVec], w: f64) -> CVec {
    let mut out = vec![C64::new(0.0, 0.0); f.len()];
    for q in basis {
        let c = inner(f, q, w);
        for (x, y) in out.iter_mut().zip(q) {
            *x += c * y;
        }
    }
    out
}

/// Outcome of a certified rank decision.
#[derive(Clone, Debug)]
pub struct Orthonormalized {
    pub basis: Vec<CVec>,
    /// Smallest relative pivot among kept directions (1 if none kept).
    pub kept_min: f64,
    /// Largest relative pivot among dropped directions (0 if none dropped).
    pub dropped_max: f64,
}

impl Orthonormalized {
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// `kept_min / dropped_max`, infinite when nothing was dropped.
    pub fn gap(&self) -> f64 {
        if self.dropped_max == 0.0 {
            f64::INFINITY
        } else {
            self.kept_min / self.dropped_max
        }
    }
}

/// Pivoted modified Gram-Schmidt under the inner product `w * sum f conj g`.
///
/// The candidate with the largest residual relative to its own original norm
/// is taken next; the process stops once that ratio falls below
/// [`PIVOT_THRESHOLD`]. The decision is accepted only if the smallest kept
/// pivot exceeds the largest dropped one by [`PIVOT_GAP`].
pub fn pivoted_mgs(candidates: Vec<CVec>, w: f64) -> Result<Orthonormalized> {
    pivoted_mgs_with(candidates, w, PIVOT_THRESHOLD, PIVOT_GAP)
}

pub fn pivoted_mgs_with(
    candidates: Vec<CVec>,
    w: f64,
    threshold: f64,
    gap: f64,
) -> Result<Orthonormalized> {
    let with_norms = candidates
        .into_iter()
        .map(|v| {
            let n0 = norm(&v, w);
            (v, n0)
        })
        .collect();
    pivoted_mgs_against(with_norms, w, threshold, gap)
}

/// As [`pivoted_mgs_with`], but each candidate's pivot is measured against
/// the supplied reference norm. Useful when candidates are projections whose
/// own norm may be pure roundoff.
pub fn pivoted_mgs_against(
    candidates: Vec<(CVec, f64)>,
    w: f64,
    threshold: f64,
    gap: f64,
) -> Result<Orthonormalized> {
    let mut rest: Vec<(CVec, f64)> = candidates.into_iter().filter(|(_, n0)| *n0 > 0.0).collect();
    let mut basis: Vec<CVec> = Vec::new();
    let mut kept_min = 1.0f64;
    let mut dropped_max = 0.0f64;
    while !rest.is_empty() {
        let (best, rel) = rest
            .iter()
            .enumerate()
            .map(|(i, (v, n0))| (i, norm(v, w) / n0))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if rel < threshold {
            dropped_max = rel;
            break;
        }
        kept_min = kept_min.min(rel);
        let (mut v, _) = rest.swap_remove(best);
        // Re-orthogonalise once more for stability.
        project_out(&mut v, &basis, w);
        let nv = norm(&v, w);
        for x in v.iter_mut() {
            *x /= nv;
        }
        for (r, _) in rest.iter_mut() {
            let c = inner(r, &v, w);
            for (x, y) in r.iter_mut().zip(&v) {
                *x -= c * y;
            }
        }
        basis.push(v);
    }
    let out = Orthonormalized {
        basis,
        kept_min,
        dropped_max,
    };
    if out.gap() < gap {
        return Err(Error::RankGap {
            kept: out.kept_min,
            dropped: out.dropped_max,
        });
    }
    Ok(out)
}

/// Largest deviation of the Gram matrix from the identity.
pub fn gram_defect(basis: &[CVec], w: f64) -> f64 {
    let mut worst = 0.0f64;
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate().skip(i) {
            let g = inner(a, b, w);
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g - target).norm());
        }
    }
    worst
}

/// Kernel dimension of a Hermitian positive semidefinite matrix.
///
/// Eigenvalues are compared through `sqrt(lambda / lambda_max)`, which plays
/// the role of a relative pivot; the same threshold and gap as
/// [`pivoted_mgs`] apply.
pub fn psd_kernel_dim(c: DMatrix<C64>) -> Result<(usize, f64)> {
    let d = c.nrows();
    if d == 0 {
        return Ok((0, f64::INFINITY));
    }
    let eig = c.symmetric_eigenvalues();
    let lmax = eig.iter().cloned().fold(0.0f64, f64::max);
    if lmax <= 0.0 {
        return Ok((d, f64::INFINITY));
    }
    let rel: Vec<f64> = eig.iter().map(|&l| (l.max(0.0) / lmax).sqrt()).collect();
    let dropped_max = rel.iter().cloned().filter(|&r| r < PIVOT_THRESHOLD).fold(0.0, f64::max);
    let kept_min = rel.iter().cloned().filter(|&r| r >= PIVOT_THRESHOLD).fold(1.0, f64::min);
    let kernel = rel.iter().filter(|&&r| r < PIVOT_THRESHOLD).count();
    let gap = if dropped_max == 0.0 {
        f64::INFINITY
    } else {
        kept_min / dropped_max
    };
    if gap < PIVOT_GAP {
        return Err(Error::RankGap {
            kept: kept_min,
            dropped: dropped_max,
        });
    }
    Ok((kernel, gap))
}

/// Dimension of `{T : T A_g = A_g T for all g}` for unitary matrices `A_g`.
///
/// Uses the positive semidefinite operator
/// `T -> sum_g ||T A_g - A_g T||^2`, written as a Hermitian matrix on the
/// entries of `T`; its kernel is exactly the commutant.
pub fn commutant_dimension(mats: &[DMatrix<C64>]) -> Result<(usize, f64)> {
    let d = match mats.first() {
        Some(a) => a.nrows(),
        None => return Err(Error::InvalidParameter("no generators supplied".into())),
    };
    if d == 0 {
        return Ok((0, f64::INFINITY));
    }
    let dd = d * d;
    let mut c = DMatrix::<C64>::zeros(dd, dd);
    for a in mats {
        let ac = a.map(|z| z.conj());
        for i1 in 0..d {
            for i2 in 0..d {
                let row = i1 * d + i2;
                for j1 in 0..d {
                    let x = ac[(j1, i1)];
                    let y = a[(i1, j1)];
                    for j2 in 0..d {
                        c[(row, j1 * d + j2)] -= x * a[(j2, i2)] + y * ac[(i2, j2)];
                    }
                }
                c[(row, row)] += C64::new(2.0, 0.0);
            }
        }
    }
    psd_kernel_dim(c)
}
