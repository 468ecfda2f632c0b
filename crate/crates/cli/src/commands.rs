//! Verification suites behind each subcommand.
//!
//! Every suite produces a list of independent tasks. Tasks run on the rayon
//! pool and each draws randomness from its own stream, keyed by the task id,
//! so reports do not depend on scheduling.

use std::collections::HashMap;
use std::sync::Arc;

use padic_harmonics::arch;
use padic_harmonics::harmonics::{harmonic_dim, level_dim, Harmonics};
use padic_harmonics::linalg::{self, C64};
use padic_harmonics::matgroup::{GlGroup, MatK, SubgroupSpec};
use padic_harmonics::pseries::{graded_dim, oldform_dim, PSeriesModel};
use padic_harmonics::ring::{Branch, CharacterGroup, RingLevel, UnitCharacter, UnitGroupBasis};
use padic_harmonics::sphere::sphere_size;
use padic_harmonics::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::config::RunConfig;
use crate::report::{Check, Record};

/// Exhaustive sums over `K` are used when `|K|` is at most this.
const EXHAUSTIVE_GROUP_LIMIT: u128 = 20_000;

type Task = Box<dyn FnOnce(&mut ChaCha8Rng) -> Vec<Record> + Send>;

#[derive(Clone, Debug)]
pub struct Settings {
    pub seed: u64,
    pub samples: usize,
    pub budget: usize,
}

impl Settings {
    pub fn from_config(cfg: &RunConfig) -> Settings {
        Settings {
            seed: cfg.run.seed,
            samples: cfg.run.samples,
            budget: cfg.run.budget,
        }
    }
}

fn stream_id(id: &str) -> u64 {
    // FNV-1a: a stable, documented hash for deriving per-task streams.
    id.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn run(tasks: Vec<(String, Task)>, seed: u64) -> Vec<Record> {
    tasks
        .into_par_iter()
        .flat_map_iter(|(id, task)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream_id(&id));
            task(&mut rng)
        })
        .collect()
}

fn tag(r: &RingLevel, n: usize) -> String {
    let b = match r.branch() {
        Branch::Padic => "",
        Branch::Laurent => "t",
    };
    format!("q{}{b}-n{n}-M{}", r.q(), r.level())
}

fn base(check: Check, r: &RingLevel, n: usize) -> Check {
    check
        .param("branch", r.branch().to_string())
        .param("p", r.p())
        .param("q", r.q())
        .param("n", n)
        .param("M", r.level())
}

fn chi_check(id: String, anchor: &'static str, r: &RingLevel, n: usize, chi: &UnitCharacter) -> Check {
    base(Check::new(id, anchor), r, n)
        .param("chi", chi.code())
        .param("conductor", chi.conductor())
}

fn setup_failure(id: String, anchor: &'static str, e: impl std::fmt::Display) -> Vec<Record> {
    vec![Check::new(id, anchor).fail(e.to_string())]
}

// ---------------------------------------------------------------- decompose

pub fn decompose_tasks(r: &RingLevel, n: usize) -> Vec<(String, Task)> {
    let t = tag(r, n);
    let hm = match Harmonics::new(r.clone(), n) {
        Ok(h) => Arc::new(h),
        Err(e) => {
            let id = format!("decompose/{t}/setup");
            let rec = setup_failure(id.clone(), "sphere-construction", e);
            return vec![(id, Box::new(move |_: &mut ChaCha8Rng| rec))];
        }
    };
    let mut tasks: Vec<(String, Task)> = Vec::new();
    {
        let (hm, r, t) = (hm.clone(), r.clone(), t.clone());
        let id = format!("decompose/{t}/totals");
        tasks.push((
            id.clone(),
            Box::new(move |_: &mut ChaCha8Rng| {
                let (q, m) = (r.q(), r.level());
                let mut out = vec![base(Check::new(format!("{id}/sphere-size"), "sphere-cardinality"), &r, n)
                    .equal(sphere_size(q, n, m) as u64, hm.sphere().len() as u64)];
                let mut total = 0u64;
                let mut spaces = 0u64;
                for chi in hm.characters().characters() {
                    for l in chi.conductor()..=m {
                        total += harmonic_dim(q, n, chi.conductor(), l);
                        spaces += 1;
                    }
                }
                out.push(
                    base(Check::new(format!("{id}/harmonic-sum"), "harmonic-decomposition"), &r, n)
                        .param("spaces", spaces)
                        .param("characters", hm.characters().len())
                        .equal(hm.sphere().len() as u64, total),
                );
                out
            }),
        ));
    }
    for chi in hm.characters().characters().iter().cloned() {
        let (hm, r) = (hm.clone(), r.clone());
        let id = format!("decompose/{t}/chi{:03}", chi.code());
        tasks.push((
            id.clone(),
            Box::new(move |_: &mut ChaCha8Rng| decompose_character(&hm, &r, n, &chi, &id)),
        ));
    }
    tasks
}

fn decompose_character(hm: &Harmonics, r: &RingLevel, n: usize, chi: &UnitCharacter, id: &str) -> Vec<Record> {
    let mut out = Vec::new();
    let (q, c) = (r.q(), chi.conductor());
    let gens = hm.generators(SubgroupSpec::Full);
    let mir = hm.generators(SubgroupSpec::Mirabolic);
    let w = hm.weight();
    for l in 0..=r.level() {
        let ck = chi_check(format!("{id}/l{l}/level-dim"), "level-space-dimension", r, n, chi).param("l", l);
        match hm.chi_level_subspace(chi, l) {
            Ok(s) => {
                out.push(ck.equal(level_dim(q, n, c, l), s.dim() as u64));
                if l >= c {
                    let ck = chi_check(format!("{id}/l{l}/level-commutant"), "level-space-commutant", r, n, chi)
                        .param("l", l);
                    out.push(match hm.commutant_dimension(&s, &gens) {
                        Ok((d, _)) => ck.equal((l - c + 1) as u64, d as u64),
                        Err(e) => ck.fail(e.to_string()),
                    });
                }
            }
            Err(e) => out.push(ck.fail(e.to_string())),
        }
    }
    for m in c..=r.level() {
        let pre = format!("{id}/m{m}");
        let ck = chi_check(format!("{pre}/harmonic-dim"), "harmonic-space-dimension", r, n, chi).param("m", m);
        let sub = match hm.harmonic_subspace(chi, m) {
            Ok(s) => s,
            Err(e) => {
                out.push(ck.fail(e.to_string()));
                continue;
            }
        };
        out.push(ck.equal(harmonic_dim(q, n, c, m), sub.dim() as u64));
        out.push(
            chi_check(format!("{pre}/orthonormal"), "harmonic-space-orthonormality", r, n, chi)
                .param("m", m)
                .below(linalg::gram_defect(&sub.basis, w), 1e-9),
        );
        let ck = chi_check(format!("{pre}/stable"), "harmonic-space-invariance", r, n, chi).param("m", m);
        out.push(match hm.stability_defect(&sub, &gens) {
            Ok(d) => ck.below(d, 1e-9),
            Err(e) => ck.fail(e.to_string()),
        });
        let ck = chi_check(format!("{pre}/irreducible"), "harmonic-space-irreducibility", r, n, chi).param("m", m);
        out.push(match hm.commutant_dimension(&sub, &gens) {
            Ok((d, gap)) => ck.param("pivot_gap", crate::report::round15(gap.min(1e300))).equal(1u64, d as u64),
            Err(e) => ck.fail(e.to_string()),
        });
        let ck = chi_check(format!("{pre}/mirabolic-fixed"), "mirabolic-fixed-line", r, n, chi).param("m", m);
        out.push(match hm.fixed_dimension(&sub, &mir) {
            Ok((d, _)) => ck.equal(1u64, d as u64),
            Err(e) => ck.fail(e.to_string()),
        });
    }
    out
}

// -------------------------------------------------------------------- zonal

pub fn zonal_tasks(r: &RingLevel, n: usize, samples: usize) -> Vec<(String, Task)> {
    let t = tag(r, n);
    let hm = match Harmonics::new(r.clone(), n) {
        Ok(h) => Arc::new(h),
        Err(e) => {
            let id = format!("zonal/{t}/setup");
            let rec = setup_failure(id.clone(), "sphere-construction", e);
            return vec![(id, Box::new(move |_: &mut ChaCha8Rng| rec))];
        }
    };
    let mut tasks: Vec<(String, Task)> = Vec::new();
    for chi in hm.characters().characters().iter().cloned() {
        for m in chi.conductor()..=r.level() {
            let (hm, r, chi) = (hm.clone(), r.clone(), chi.clone());
            let id = format!("zonal/{t}/chi{:03}/m{m}", chi.code());
            tasks.push((
                id.clone(),
                Box::new(move |rng: &mut ChaCha8Rng| zonal_space(&hm, &r, n, &chi, m, samples, &id, rng)),
            ));
        }
    }
    for m in 0..=r.level() {
        let (hm, r) = (hm.clone(), r.clone());
        let id = format!("zonal/{t}/idempotent/m{m}");
        tasks.push((
            id.clone(),
            Box::new(move |rng: &mut ChaCha8Rng| {
                let g = hm.group();
                let (ks, mode): (Vec<MatK>, &str) = if g.order() <= EXHAUSTIVE_GROUP_LIMIT {
                    (g.elements().collect(), "exhaustive")
                } else {
                    ((0..samples.max(1000)).map(|_| g.random(rng)).collect(), "sampled")
                };
                let c0 = base(Check::new(format!("{id}/k0"), "zonal-idempotent-sum-k0"), &r, n)
                    .param("m", m)
                    .param("mode", mode)
                    .param("elements", ks.len());
                let c1 = base(Check::new(format!("{id}/k1"), "zonal-idempotent-sum-k1"), &r, n)
                    .param("m", m)
                    .param("mode", mode)
                    .param("elements", ks.len());
                match hm.verify_idempotent_sums(m, &ks) {
                    Ok((a, b)) => vec![c0.below(a, 1e-9), c1.below(b, 1e-9)],
                    Err(e) => vec![c0.fail(e.to_string()), c1.fail(e.to_string())],
                }
            }),
        ));
    }
    tasks
}

#[allow(clippy::too_many_arguments)]
fn zonal_space(
    hm: &Harmonics,
    r: &RingLevel,
    n: usize,
    chi: &UnitCharacter,
    m: u32,
    samples: usize,
    id: &str,
    rng: &mut ChaCha8Rng,
) -> Vec<Record> {
    let ck = |name: &str, anchor: &'static str| chi_check(format!("{id}/{name}"), anchor, r, n, chi).param("m", m);
    let sub = match hm.harmonic_subspace(chi, m) {
        Ok(s) => s,
        Err(e) => return vec![ck("setup", "harmonic-space").fail(e.to_string())],
    };
    let z = match hm.zonal_from_subspace(&sub) {
        Ok(z) => z,
        Err(e) => return vec![ck("setup", "zonal-function").fail(e.to_string())],
    };
    let mut out = Vec::new();
    let dim = sub.dim() as f64;
    out.push(ck("norm", "zonal-norm-is-inverse-dimension").below((hm.inner(&z, &z).re - 1.0 / dim).abs(), 1e-9));
    match hm.zonal_closed_form(chi, m) {
        Ok(cf) => out.push(ck("closed-form", "zonal-shell-values").below(linalg::max_abs_diff(&z, &cf), 1e-9)),
        Err(e) => out.push(ck("closed-form", "zonal-shell-values").fail(e.to_string())),
    }
    let count = samples.max(200);
    let pairs = hm.sample_pairs(count, rng);
    let ks: Vec<MatK> = pairs.iter().map(|(_, k)| k.clone()).collect();
    match hm.verify_addition_theorem(&sub, &z, &pairs) {
        Ok(res) => out.push(ck("addition", "addition-theorem").param("samples", count).below(res, 1e-8)),
        Err(e) => out.push(ck("addition", "addition-theorem").fail(e.to_string())),
    }
    match hm.verify_reproducing_kernel(&sub, &z, &ks) {
        Ok((kern, sym)) => {
            out.push(ck("reproducing", "reproducing-kernel").param("samples", count).below(kern, 1e-8));
            out.push(ck("symmetry", "zonal-inverse-symmetry").param("samples", count).below(sym, 1e-9));
        }
        Err(e) => out.push(ck("reproducing", "reproducing-kernel").fail(e.to_string())),
    }
    out
}

// ------------------------------------------------------------ double cosets

fn brute_double_cosets(g: &GlGroup, gens: &[MatK], elements: &[MatK]) -> Vec<usize> {
    let index: HashMap<&MatK, usize> = elements.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let mut parent: Vec<usize> = (0..elements.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (i, k) in elements.iter().enumerate() {
        for h in gens {
            for j in [index[&g.mul(h, k)], index[&g.mul(k, h)]] {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    (0..elements.len()).map(|i| find(&mut parent, i)).collect()
}

pub fn double_coset_tasks(r: &RingLevel, n: usize, s: &Settings) -> Vec<(String, Task)> {
    let t = tag(r, n);
    let g = match GlGroup::new(r.clone(), n) {
        Ok(g) => Arc::new(g),
        Err(e) => {
            let id = format!("double-cosets/{t}/setup");
            let rec = setup_failure(id.clone(), "group-construction", e);
            return vec![(id, Box::new(move |_: &mut ChaCha8Rng| rec))];
        }
    };
    let units = match UnitGroupBasis::new(r) {
        Ok(u) => Arc::new(u),
        Err(e) => {
            let id = format!("double-cosets/{t}/setup");
            let rec = setup_failure(id.clone(), "unit-group", e);
            return vec![(id, Box::new(move |_: &mut ChaCha8Rng| rec))];
        }
    };
    let m = r.level();
    let budget = s.budget;
    let samples = s.samples;
    let mut tasks: Vec<(String, Task)> = Vec::new();
    let specs = [
        SubgroupSpec::Full,
        SubgroupSpec::Principal(m),
        SubgroupSpec::K0(m),
        SubgroupSpec::K1(m),
        SubgroupSpec::Mirabolic,
    ];
    for spec in specs {
        let (g, units, r) = (g.clone(), units.clone(), r.clone());
        let id = format!("double-cosets/{t}/generators/{}", spec.to_string().replace(['(', ')'], "-"));
        tasks.push((
            id.clone(),
            Box::new(move |_: &mut ChaCha8Rng| {
                let ck = base(Check::new(id, "subgroup-generators"), &r, n).param("subgroup", spec.to_string());
                let gens = g.generators(spec, &units);
                match g.closure_size(&gens, budget) {
                    Ok(size) => vec![ck.equal(g.subgroup_order(spec).to_string(), size.to_string())],
                    Err(Error::BudgetExceeded { .. }) => vec![ck.param("budget", budget).skipped(format!(
                        "closure needs {} elements, above the budget {budget}",
                        g.subgroup_order(spec)
                    ))],
                    Err(e) => vec![ck.fail(e.to_string())],
                }
            }),
        ));
    }
    {
        let (g, units, r) = (g.clone(), units.clone(), r.clone());
        let id = format!("double-cosets/{t}/witnesses");
        tasks.push((
            id.clone(),
            Box::new(move |rng: &mut ChaCha8Rng| {
                let order = g.order();
                let exhaustive = order <= budget as u128;
                let ks: Vec<MatK> = if exhaustive {
                    g.elements().collect()
                } else {
                    (0..samples).map(|_| g.random(rng)).collect()
                };
                let mode = if exhaustive { "exhaustive" } else { "sampled" };
                let mut out = Vec::new();
                let mut bad = 0usize;
                let mut first = None;
                for k in &ks {
                    let ok = match g.double_coset_witness(k, m) {
                        Ok((a, l, b)) => {
                            l == g.double_coset_index(k, m)
                                && g.contains(&a, SubgroupSpec::K0(m))
                                && g.contains(&b, SubgroupSpec::K0(m))
                                && g.mul(&g.mul(&a, &g.u_ell(l)), &b) == *k
                        }
                        Err(_) => false,
                    };
                    if !ok {
                        bad += 1;
                        first.get_or_insert_with(|| format!("{k:?}"));
                    }
                }
                let ck = base(Check::new(format!("{id}/remultiply"), "double-coset-witness"), &r, n)
                    .param("mode", mode)
                    .param("elements", ks.len());
                out.push(match first {
                    None => ck.equal(0u64, bad as u64),
                    Some(f) => ck.param("first_bad", f).equal(0u64, bad as u64),
                });
                let ck = base(Check::new(format!("{id}/classes"), "double-coset-count"), &r, n).param("mode", mode);
                if exhaustive {
                    let gens = g.generators(SubgroupSpec::K0(m), &units);
                    let roots = brute_double_cosets(&g, &gens, &ks);
                    let mut label: HashMap<usize, u32> = HashMap::new();
                    let mut seen: HashMap<u32, usize> = HashMap::new();
                    let mut consistent = true;
                    for (k, root) in ks.iter().zip(&roots) {
                        let l = g.double_coset_index(k, m);
                        consistent &= *label.entry(*root).or_insert(l) == l;
                        consistent &= *seen.entry(l).or_insert(*root) == *root;
                    }
                    out.push(ck.equal((m + 1) as u64, label.len() as u64));
                    out.push(
                        base(Check::new(format!("{id}/index-matches-brute-force"), "double-coset-index"), &r, n)
                            .truth(consistent, consistent),
                    );
                } else {
                    out.push(ck.skipped(format!("|G| = {order} above the budget {budget}; classes not enumerated")));
                }
                out
            }),
        ));
    }
    tasks
}

// --------------------------------------------------------- principal series

/// Characters chosen by the configuration; all trivial when none are given.
pub fn select_characters(cfg: &RunConfig, r: &RingLevel, n: usize) -> Result<Vec<UnitCharacter>, Error> {
    let g = CharacterGroup::new(r)?;
    let c = &cfg.characters;
    if c.conductors.is_empty() {
        return Ok(vec![g.trivial().clone(); n]);
    }
    c.conductors
        .iter()
        .enumerate()
        .map(|(i, &cond)| g.select(cond, c.indices.get(i).copied().unwrap_or(0)))
        .collect()
}

pub fn principal_series_tasks(chars: Vec<UnitCharacter>, samples: usize, budget: usize) -> Vec<(String, Task)> {
    let r = chars[0].ring().clone();
    let n = chars.len();
    let codes: Vec<String> = chars.iter().map(|c| format!("{:03}", c.code())).collect();
    let id = format!("principal-series/{}/chars{}", tag(&r, n), codes.join("-"));
    vec![(
        id.clone(),
        Box::new(move |rng: &mut ChaCha8Rng| principal_series_suite(chars, samples, budget, &id, rng)),
    )]
}

fn principal_series_suite(
    chars: Vec<UnitCharacter>,
    samples: usize,
    budget: usize,
    id: &str,
    rng: &mut ChaCha8Rng,
) -> Vec<Record> {
    let r = chars[0].ring().clone();
    let n = chars.len();
    let conductors: Vec<u32> = chars.iter().map(|c| c.conductor()).collect();
    let ck = |name: &str, anchor: &'static str| {
        base(Check::new(format!("{id}/{name}"), anchor), &r, n)
            .param("conductors", json!(conductors))
            .param("characters", json!(chars.iter().map(|c| c.code()).collect::<Vec<_>>()))
    };
    let model = match PSeriesModel::with_budget(chars.clone(), budget) {
        Ok(m) => m,
        Err(e @ Error::SizeCap { .. }) => return vec![ck("setup", "principal-series-model").skipped(e.to_string())],
        Err(e) => return vec![ck("setup", "principal-series-model").fail(e.to_string())],
    };
    let mut out = Vec::new();
    let c = model.declared_conductor();
    let big_m = model.level();
    let chi_pi = model.central_character();
    let empirical = model.empirical_conductor();
    if c > big_m {
        out.push(ck("conductor", "newform-conductor").skipped(format!(
            "working level {big_m} is below the declared conductor {c}; raise the level"
        )));
    } else {
        out.push(match &empirical {
            Ok(e) => ck("conductor", "newform-conductor").equal(json!(c), json!(e)),
            Err(e) => ck("conductor", "newform-conductor").fail(e.to_string()),
        });
    }
    for l in 0..=big_m {
        let name = format!("oldforms/l{l}");
        out.push(match model.invariant_dim(l) {
            Ok(d) => ck(&name, "oldform-dimension").param("l", l).equal(oldform_dim(n, c, l), d as u64),
            Err(e) => ck(&name, "oldform-dimension").fail(e.to_string()),
        });
    }
    match (model.graded_newvector_dims(), Harmonics::new(r.clone(), n)) {
        (Ok(graded), Ok(hm)) => {
            let zonals: Vec<(usize, Vec<C64>)> = (0..=big_m)
                .map(|l| {
                    if l < chi_pi.conductor() {
                        (0, vec![C64::new(0.0, 0.0); hm.sphere().len()])
                    } else {
                        let d = harmonic_dim(r.q(), n, chi_pi.conductor(), l) as usize;
                        (d, hm.zonal_closed_form(&chi_pi, l).unwrap_or_default())
                    }
                })
                .collect();
            let projected = model.ktype_fixed_dims(hm.sphere(), &zonals);
            for l in 0..=big_m {
                let want = graded_dim(n, c, l);
                out.push(
                    ck(&format!("graded/l{l}/difference"), "graded-newvector-dimension")
                        .param("l", l)
                        .equal(want, graded[l as usize] as u64),
                );
                let name = format!("graded/l{l}/projector");
                out.push(match &projected {
                    Ok(p) => ck(&name, "ktype-projector-rank").param("l", l).equal(want, p[l as usize] as u64),
                    Err(e) => ck(&name, "ktype-projector-rank").fail(e.to_string()),
                });
            }
            if c <= big_m {
                newform_checks(&model, &hm, samples, &ck, &mut out, rng);
            }
        }
        (Err(e), _) => out.push(ck("graded", "graded-newvector-dimension").fail(e.to_string())),
        (_, Err(e)) => out.push(ck("graded", "sphere-construction").fail(e.to_string())),
    }
    let ramified = conductors.iter().filter(|&&x| x > 0).count();
    if let Ok(Some(e)) = empirical {
        let minimal = e == chi_pi.conductor();
        out.push(
            ck("twist-minimal", "twist-minimality-criterion")
                .param("ramified", ramified)
                .equal(ramified <= 1, minimal),
        );
    }
    out
}

fn newform_checks(
    model: &PSeriesModel,
    hm: &Harmonics,
    samples: usize,
    ck: &dyn Fn(&str, &'static str) -> Check,
    out: &mut Vec<Record>,
    rng: &mut ChaCha8Rng,
) {
    let c = model.declared_conductor();
    let v0 = match model.newform() {
        Ok(v) => v,
        Err(e) => {
            out.push(ck("newform", "newform-line").fail(e.to_string()));
            return;
        }
    };
    out.push(match model.equivariant_dim(c) {
        Ok(d) => ck("newform/equivariant-line", "newform-line").equal(1u64, d as u64),
        Err(e) => ck("newform/equivariant-line", "newform-line").fail(e.to_string()),
    });
    out.push(match model.equivariance_residual(&v0, c) {
        Ok(x) => ck("newform/equivariance", "newform-k0-equivariance").below(x, 1e-9),
        Err(e) => ck("newform/equivariance", "newform-k0-equivariance").fail(e.to_string()),
    });
    let count = samples.max(500);
    let ks = model.sample(count, rng);
    out.push(match model.matrix_coefficient_residual(&v0, &ks) {
        Ok(x) => ck("newform/matrix-coefficient", "newform-matrix-coefficient")
            .param("samples", count)
            .below(x, 1e-8),
        Err(e) => ck("newform/matrix-coefficient", "newform-matrix-coefficient").fail(e.to_string()),
    });

    // Newform from the zonal function, and a mismatched K-type giving zero.
    let chi_pi = model.central_character();
    let Some(chi) = hm.characters().characters().iter().find(|x| **x == chi_pi) else {
        out.push(ck("newform/zonal", "newform-from-zonal").fail("central character not found"));
        return;
    };
    let exhaustive = model.group().order() <= EXHAUSTIVE_GROUP_LIMIT;
    let average = |p: &[C64], dim: f64| -> Result<Vec<C64>, Error> {
        if exhaustive {
            model.kernel_average_exhaustive(hm.sphere(), p, dim, &v0)
        } else {
            Ok(model.kernel_average(hm.sphere(), p, dim, &[v0.clone()])?.remove(0))
        }
    };
    let mode = if exhaustive { "exhaustive" } else { "sphere-sections" };
    let w = model.weight();
    let result = hm.harmonic_subspace(chi, c).and_then(|sub| {
        let z = hm.zonal_from_subspace(&sub)?;
        let dim = sub.dim() as f64;
        let v = average(&z, dim)?;
        let s = model.inner(&v, &v0) / model.inner(&v0, &v0);
        let resid: Vec<C64> = v.iter().zip(&v0).map(|(a, b)| a - s * b).collect();
        let rel = linalg::norm(&resid, w) / linalg::norm(&v, w);
        // Any other K-type annihilates the newform.
        let other = hm
            .characters()
            .characters()
            .iter()
            .flat_map(|x| (x.conductor()..=model.level()).map(move |l| (x, l)))
            .find(|(x, l)| (*x != chi) && *l >= x.conductor())
            .or_else(|| (0..=model.level()).find(|&l| l != c && l >= chi.conductor()).map(|l| (chi, l)));
        let mism = match other {
            Some((x, l)) => {
                let sub2 = hm.harmonic_subspace(x, l)?;
                let z2 = hm.zonal_from_subspace(&sub2)?;
                Some(linalg::norm(&average(&z2, dim)?, w))
            }
            None => None,
        };
        Ok((rel, mism))
    });
    match result {
        Ok((rel, mism)) => {
            out.push(ck("newform/zonal-roundtrip", "newform-from-zonal").param("mode", mode).below(rel, 1e-8));
            if let Some(x) = mism {
                out.push(ck("newform/zonal-mismatch", "mismatched-ktype-vanishes").param("mode", mode).below(x, 1e-9));
            }
        }
        Err(e) => out.push(ck("newform/zonal-roundtrip", "newform-from-zonal").fail(e.to_string())),
    }
}

// --------------------------------------------------------------------- arch

pub fn arch_tasks(real: Option<(u32, usize)>, complex: Option<(u32, usize)>, samples: usize) -> Vec<(String, Task)> {
    let mut tasks: Vec<(String, Task)> = Vec::new();
    if let Some((max_m, max_n)) = real {
        for n in 2..=max_n {
            for m in 0..=max_m {
                let id = format!("arch/real/n{n}/m{m}");
                tasks.push((id.clone(), Box::new(move |rng: &mut ChaCha8Rng| real_checks(m, n, samples, &id, rng))));
            }
        }
    }
    if let Some((max_deg, max_n)) = complex {
        for n in 2..=max_n {
            for m1 in 0..=max_deg {
                for m2 in 0..=max_deg - m1 {
                    let id = format!("arch/complex/n{n}/m{m1}-{m2}");
                    tasks.push((
                        id.clone(),
                        Box::new(move |rng: &mut ChaCha8Rng| complex_checks(m1, m2, n, samples, &id, rng)),
                    ));
                }
            }
        }
    }
    tasks
}

fn real_checks(m: u32, n: usize, samples: usize, id: &str, rng: &mut ChaCha8Rng) -> Vec<Record> {
    use rand::Rng;
    let ck = |name: &str, anchor: &'static str| {
        Check::new(format!("{id}/{name}"), anchor)
            .param("field", "real")
            .param("n", n)
            .param("m", m)
    };
    let p = arch::real_zonal_poly(m, n);
    let one = num_rational::BigRational::from_integer(1.into());
    let at_e = p.eval(&arch::e_n(n, n - 1));
    let count = samples.min(200);
    vec![
        ck("laplacian", "real-zonal-harmonic").truth(arch::real_laplacian(&p).is_zero(), "laplacian vanishes"),
        ck("degree", "real-zonal-harmonic").equal(json!(m), json!(p.homogeneous_degree())),
        ck("value-at-en", "real-zonal-normalisation").equal(one.to_string(), at_e.to_string()),
        ck("dimension", "real-harmonic-dimension")
            .equal(arch::harmonic_dim_real(m, n), arch::real_kernel_dim(m, n) as u64),
        ck("gegenbauer", "real-zonal-orthogonal-polynomial").truth(
            arch::real_zonal_in_t(m, n) == arch::gegenbauer_by_gram_schmidt(m, n),
            "matches Gram-Schmidt",
        ),
        ck("rotation", "real-zonal-invariance")
            .param("samples", count)
            .below(arch::real_rotation_defect(&p, n, count, rng.gen()), 1e-10),
    ]
}

fn complex_checks(m1: u32, m2: u32, n: usize, samples: usize, id: &str, rng: &mut ChaCha8Rng) -> Vec<Record> {
    use rand::Rng;
    let ck = |name: &str, anchor: &'static str| {
        Check::new(format!("{id}/{name}"), anchor)
            .param("field", "complex")
            .param("n", n)
            .param("m1", m1)
            .param("m2", m2)
    };
    let p = arch::complex_zonal_poly(m1, m2, n);
    let count = samples.min(200);
    vec![
        ck("laplacian", "complex-zonal-harmonic").truth(arch::complex_laplacian(&p).is_zero(), "laplacian vanishes"),
        ck("bidegree", "complex-zonal-harmonic").equal(json!([m1, m2]), json!(p.bidegree())),
        ck("value-at-en", "complex-zonal-normalisation")
            .equal("1".to_string(), arch::complex_value_at_e_n(&p, n).to_string()),
        ck("dimension", "complex-harmonic-dimension")
            .equal(arch::harmonic_dim_complex(m1, m2, n), arch::complex_kernel_dim(m1, m2, n) as u64),
        ck("rotation", "complex-zonal-invariance")
            .param("samples", count)
            .below(arch::complex_rotation_defect(&p, n, count, rng.gen()), 1e-10),
    ]
}

// --------------------------------------------------------------- front end

pub fn decompose(r: &RingLevel, n: usize, s: &Settings) -> Vec<Record> {
    run(decompose_tasks(r, n), s.seed)
}

pub fn zonal(r: &RingLevel, n: usize, s: &Settings) -> Vec<Record> {
    run(zonal_tasks(r, n, s.samples), s.seed)
}

pub fn double_cosets(r: &RingLevel, n: usize, s: &Settings) -> Vec<Record> {
    run(double_coset_tasks(r, n, s), s.seed)
}

pub fn principal_series(chars: Vec<UnitCharacter>, s: &Settings) -> Vec<Record> {
    run(principal_series_tasks(chars, s.samples, s.budget), s.seed)
}

pub fn arch_verify(cfg: &RunConfig, s: &Settings) -> Vec<Record> {
    let a = &cfg.arch;
    let real = matches!(a.branch.as_str(), "real" | "both").then_some((a.real_max_degree, a.real_max_n));
    let complex = matches!(a.branch.as_str(), "complex" | "both").then_some((a.complex_max_degree, a.complex_max_n));
    run(arch_tasks(real, complex, s.samples), s.seed)
}

/// Rings and dimensions of the standard grid.
pub fn standard_grid() -> Vec<(RingLevel, usize)> {
    [
        (Branch::Padic, 2, 1, 3, 2),
        (Branch::Padic, 3, 1, 2, 2),
        (Branch::Padic, 2, 1, 2, 3),
        (Branch::Laurent, 2, 2, 2, 2),
        (Branch::Padic, 5, 1, 1, 2),
    ]
    .into_iter()
    .map(|(b, p, f, m, n)| (RingLevel::new(b, p, f, m).expect("grid rings are valid"), n))
    .collect()
}

/// Character tuples of the principal series grid.
pub fn principal_series_grid() -> Vec<Vec<UnitCharacter>> {
    let mut out = Vec::new();
    for p in [2u32, 3] {
        for total in 0..=3u32 {
            let r = RingLevel::padic(p, total + 1).expect("valid ring");
            let g = CharacterGroup::new(&r).expect("valid ring");
            for a in g.characters() {
                for b in g.characters() {
                    if a.conductor() + b.conductor() == total {
                        out.push(vec![a.clone(), b.clone()]);
                    }
                }
            }
        }
    }
    let r = RingLevel::padic(2, 2).expect("valid ring");
    let g = CharacterGroup::new(&r).expect("valid ring");
    for a in g.characters() {
        for b in g.characters() {
            for c in g.characters() {
                if a.conductor() + b.conductor() + c.conductor() <= 1 {
                    out.push(vec![a.clone(), b.clone(), c.clone()]);
                }
            }
        }
    }
    out
}

/// The full verification grid.
pub fn verify_all(s: &Settings) -> Vec<Record> {
    let mut tasks = Vec::new();
    for (r, n) in standard_grid() {
        tasks.extend(decompose_tasks(&r, n));
        tasks.extend(zonal_tasks(&r, n, s.samples));
    }
    for (p, m, n) in [(2, 2, 2), (2, 1, 3)] {
        let r = RingLevel::padic(p, m).expect("valid ring");
        tasks.extend(double_coset_tasks(&r, n, s));
    }
    for chars in principal_series_grid() {
        tasks.extend(principal_series_tasks(chars, s.samples, s.budget));
    }
    tasks.extend(arch_tasks(Some((6, 4)), Some((5, 3)), s.samples));
    run(tasks, s.seed)
}
