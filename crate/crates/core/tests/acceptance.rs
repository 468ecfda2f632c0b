//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.

use std::collections::{HashMap, HashSet};
use std::time::{Duration, Instant};

use padic_harmonics::arch;
use padic_harmonics::harmonics::{harmonic_dim, level_dim, Harmonics};
use padic_harmonics::linalg::{self, C64};
use padic_harmonics::matgroup::{GlGroup, MatK, SubgroupSpec};
use padic_harmonics::pseries::{graded_dim, oldform_dim, PSeriesModel};
use padic_harmonics::ring::{CharacterGroup, RingLevel, UnitCharacter};
use padic_harmonics::sphere::sphere_size;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, failures: &[String], start: Instant, limit: Duration) {
    let elapsed = start.elapsed();
    let mut failures = failures.to_vec();
    if elapsed > limit {
        failures.push(format!("runtime {elapsed:?} above {limit:?}"));
    }
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    println!("criterion {id} [{name}]: {status} ({:.2}s)", elapsed.as_secs_f64());
    for f in failures.iter().take(20) {
        println!("    {f}");
    }
    assert!(failures.is_empty(), "criterion {id} failed: {} problems", failures.len());
}

fn grid() -> Vec<(RingLevel, usize)> {
    vec![
        (RingLevel::padic(2, 3).unwrap(), 2),
        (RingLevel::padic(3, 2).unwrap(), 2),
        (RingLevel::padic(2, 2).unwrap(), 3),
        (RingLevel::laurent(2, 2, 2).unwrap(), 2),
        (RingLevel::padic(5, 1).unwrap(), 2),
    ]
}

#[test]
fn criterion_1_sphere_and_dimension_grid() {
    let start = Instant::now();
    let mut bad = Vec::new();
    for (r, n) in grid() {
        let hm = Harmonics::new(r.clone(), n).unwrap();
        let (q, m) = (r.q(), r.level());
        if hm.sphere().len() as u128 != sphere_size(q, n, m) {
            bad.push(format!("{r} n={n}: sphere size {}", hm.sphere().len()));
        }
        let mut total = 0u64;
        for chi in hm.characters().characters() {
            let c = chi.conductor();
            for l in 0..=m {
                let d = hm.chi_level_subspace(chi, l).unwrap().dim() as u64;
                if d != level_dim(q, n, c, l) {
                    bad.push(format!("{r} n={n} chi={} l={l}: level dim {d}", chi.code()));
                }
            }
            for l in c..=m {
                let d = hm.harmonic_subspace(chi, l).unwrap().dim() as u64;
                if d != harmonic_dim(q, n, c, l) {
                    bad.push(format!("{r} n={n} chi={} m={l}: harmonic dim {d}", chi.code()));
                }
                total += d;
            }
        }
        if total as u128 != sphere_size(q, n, m) {
            bad.push(format!("{r} n={n}: harmonic dims sum to {total}"));
        }
    }
    report(1, "sphere and dimension grid", &bad, start, Duration::from_secs(60));
}

#[test]
fn criterion_2_irreducibility() {
    let start = Instant::now();
    let mut bad = Vec::new();
    for (r, n) in grid() {
        let hm = Harmonics::new(r.clone(), n).unwrap();
        let gens = hm.generators(SubgroupSpec::Full);
        for chi in hm.characters().characters() {
            let c = chi.conductor();
            for m in c..=r.level() {
                let h = hm.harmonic_subspace(chi, m).unwrap();
                match hm.commutant_dimension(&h, &gens) {
                    Ok((1, _)) => {}
                    other => bad.push(format!("{r} n={n} chi={} H_m={m}: {other:?}", chi.code())),
                }
                let lvl = hm.chi_level_subspace(chi, m).unwrap();
                match hm.commutant_dimension(&lvl, &gens) {
                    Ok((d, _)) if d as u32 == m - c + 1 => {}
                    other => bad.push(format!("{r} n={n} chi={} C_m={m}: {other:?}", chi.code())),
                }
            }
        }
    }
    report(2, "irreducibility", &bad, start, Duration::from_secs(300));
}

#[test]
fn criterion_3_zonal_identities() {
    let start = Instant::now();
    let mut bad = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (r, n) in grid() {
        let hm = Harmonics::new(r.clone(), n).unwrap();
        let samples = hm.sample_pairs(200, &mut rng);
        let ks: Vec<MatK> = samples.iter().map(|(_, k)| k.clone()).collect();
        for chi in hm.characters().characters() {
            for m in chi.conductor()..=r.level() {
                let tag = format!("{r} n={n} chi={} m={m}", chi.code());
                let sub = hm.harmonic_subspace(chi, m).unwrap();
                let z = hm.zonal_from_subspace(&sub).unwrap();
                let norm = hm.inner(&z, &z).re;
                if (norm - 1.0 / sub.dim() as f64).abs() > 1e-9 {
                    bad.push(format!("{tag}: <P,P> = {norm}"));
                }
                let closed = hm.zonal_closed_form(chi, m).unwrap();
                let shell = linalg::max_abs_diff(&z, &closed);
                if shell > 1e-9 {
                    bad.push(format!("{tag}: shell values off by {shell:e}"));
                }
                let add = hm.verify_addition_theorem(&sub, &z, &samples).unwrap();
                let (kern, sym) = hm.verify_reproducing_kernel(&sub, &z, &ks).unwrap();
                if add >= 1e-8 || kern >= 1e-8 || sym > 1e-9 {
                    bad.push(format!("{tag}: addition {add:e} kernel {kern:e} symmetry {sym:e}"));
                }
            }
        }
    }
    report(3, "zonal identities", &bad, start, Duration::from_secs(600));
}

/// Double cosets `K_0(p^m) k K_0(p^m)` by union-find over all of `GL_n`.
fn brute_double_cosets(g: &GlGroup, m: u32, elements: &[MatK]) -> HashMap<MatK, usize> {
    let units = padic_harmonics::ring::UnitGroupBasis::new(g.ring()).unwrap();
    let gens = g.generators(SubgroupSpec::K0(m), &units);
    let index: HashMap<&MatK, usize> = elements.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let mut parent: Vec<usize> = (0..elements.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for (i, k) in elements.iter().enumerate() {
        for h in &gens {
            for j in [index[&g.mul(h, k)], index[&g.mul(k, h)]] {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    elements
        .iter()
        .enumerate()
        .map(|(i, k)| (k.clone(), find(&mut parent, i)))
        .collect()
}

#[test]
fn criterion_4_double_cosets() {
    let start = Instant::now();
    let mut bad = Vec::new();
    for (r, n, m, order) in [
        (RingLevel::padic(2, 2).unwrap(), 2, 2u32, 96usize),
        (RingLevel::padic(2, 1).unwrap(), 3, 1, 168),
    ] {
        let g = GlGroup::new(r.clone(), n).unwrap();
        let all: Vec<MatK> = g.elements().collect();
        if all.len() != order {
            bad.push(format!("{r} n={n}: {} elements", all.len()));
        }
        let brute = brute_double_cosets(&g, m, &all);
        let classes: HashSet<usize> = brute.values().cloned().collect();
        if classes.len() != m as usize + 1 {
            bad.push(format!("{r} n={n}: {} brute-force classes", classes.len()));
        }
        // The index must be constant on and separate the brute-force classes.
        let mut label: HashMap<usize, u32> = HashMap::new();
        let mut seen: HashMap<u32, usize> = HashMap::new();
        for k in &all {
            let l = g.double_coset_index(k, m);
            let cls = brute[k];
            if *label.entry(cls).or_insert(l) != l || *seen.entry(l).or_insert(cls) != cls {
                bad.push(format!("{r} n={n}: index disagrees with brute force at {k:?}"));
            }
            match g.double_coset_witness(k, m) {
                Ok((a, l2, b)) => {
                    let ok = l2 == l
                        && g.contains(&a, SubgroupSpec::K0(m))
                        && g.contains(&b, SubgroupSpec::K0(m))
                        && g.mul(&g.mul(&a, &g.u_ell(l)), &b) == *k;
                    if !ok {
                        bad.push(format!("{r} n={n}: witness for {k:?} does not re-multiply"));
                    }
                }
                Err(e) => bad.push(format!("{r} n={n}: witness error {e}")),
            }
        }
        if label.len() != m as usize + 1 {
            bad.push(format!("{r} n={n}: index takes {} values", label.len()));
        }
    }
    report(4, "double cosets", &bad, start, Duration::from_secs(30));
}

#[test]
fn criterion_5_idempotent_sums() {
    let start = Instant::now();
    let mut bad = Vec::new();
    let hm = Harmonics::new(RingLevel::padic(2, 2).unwrap(), 2).unwrap();
    let all: Vec<MatK> = hm.group().elements().collect();
    for m in 0..=2 {
        let (k0, k1) = hm.verify_idempotent_sums(m, &all).unwrap();
        if k0 >= 1e-9 || k1 >= 1e-9 {
            bad.push(format!("exhaustive Z/4 n=2 m={m}: {k0:e} {k1:e}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (r, n) in grid() {
        let hm = Harmonics::new(r.clone(), n).unwrap();
        let ks: Vec<MatK> = (0..1000).map(|_| hm.group().random(&mut rng)).collect();
        for m in 0..=r.level() {
            let (k0, k1) = hm.verify_idempotent_sums(m, &ks).unwrap();
            if k0 >= 1e-9 || k1 >= 1e-9 {
                bad.push(format!("{r} n={n} m={m}: {k0:e} {k1:e}"));
            }
        }
    }
    report(5, "idempotent sums", &bad, start, Duration::from_secs(600));
}

/// All checks of one principal series model; returns problems found.
fn newform_suite(chars: Vec<UnitCharacter>, rng: &mut ChaCha8Rng) -> Vec<String> {
    let conductors: Vec<u32> = chars.iter().map(|c| c.conductor()).collect();
    let model = PSeriesModel::new(chars).unwrap();
    let tag = format!("{} n={} c={conductors:?}", model.ring(), model.n());
    let mut bad = Vec::new();
    let n = model.n();
    let c = model.declared_conductor();
    let big_m = model.level();
    let chi_pi = model.central_character();

    match model.empirical_conductor() {
        Ok(Some(e)) if e == c => {}
        other => bad.push(format!("{tag}: empirical conductor {other:?}")),
    }
    for l in 0..=big_m {
        let d = model.invariant_dim(l).unwrap() as u64;
        if d != oldform_dim(n, c, l) {
            bad.push(format!("{tag}: dim V^K1({l}) = {d}"));
        }
    }
    let graded = model.graded_newvector_dims().unwrap();
    let hm = Harmonics::new(model.ring().clone(), n).unwrap();
    let zonals: Vec<(usize, Vec<C64>)> = (0..=big_m)
        .map(|l| {
            if l < chi_pi.conductor() {
                (0, vec![C64::new(0.0, 0.0); hm.sphere().len()])
            } else {
                let d = harmonic_dim(model.ring().q(), n, chi_pi.conductor(), l) as usize;
                (d, hm.zonal_closed_form(&chi_pi, l).unwrap())
            }
        })
        .collect();
    let projected = model.ktype_fixed_dims(hm.sphere(), &zonals).unwrap();
    for l in 0..=big_m {
        let want = graded_dim(n, c, l);
        if graded[l as usize] as u64 != want || projected[l as usize] as u64 != want {
            bad.push(format!(
                "{tag}: graded dim at {l}: difference {} projector {} expected {want}",
                graded[l as usize], projected[l as usize]
            ));
        }
    }
    let v = match model.newform() {
        Ok(v) => v,
        Err(e) => {
            bad.push(format!("{tag}: newform {e}"));
            return bad;
        }
    };
    if model.invariant_dim(c).unwrap() != 1 || model.equivariant_dim(c).unwrap() != 1 {
        bad.push(format!("{tag}: newform line not one-dimensional"));
    }
    let eq = model.equivariance_residual(&v, c).unwrap();
    if eq >= 1e-9 {
        bad.push(format!("{tag}: equivariance residual {eq:e}"));
    }
    let ks = model.sample(500, rng);
    let mc = model.matrix_coefficient_residual(&v, &ks).unwrap();
    if mc >= 1e-8 {
        bad.push(format!("{tag}: matrix coefficient residual {mc:e}"));
    }
    let ramified = conductors.iter().filter(|&&x| x > 0).count();
    let minimal = c == chi_pi.conductor();
    if minimal != (ramified <= 1) {
        bad.push(format!("{tag}: twist-minimality {minimal} with {ramified} ramified"));
    }
    bad
}

#[test]
fn criterion_6_newform_suite() {
    let start = Instant::now();
    let mut bad = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut models = 0;
    for p in [2u32, 3] {
        for total in 0..=3u32 {
            let m = total + 1;
            let r = RingLevel::padic(p, m).unwrap();
            let g = CharacterGroup::new(&r).unwrap();
            for a in g.characters() {
                for b in g.characters() {
                    if a.conductor() + b.conductor() == total {
                        bad.extend(newform_suite(vec![a.clone(), b.clone()], &mut rng));
                        models += 1;
                    }
                }
            }
        }
    }
    let r = RingLevel::padic(2, 2).unwrap();
    let g = CharacterGroup::new(&r).unwrap();
    for a in g.characters() {
        for b in g.characters() {
            for c in g.characters() {
                if a.conductor() + b.conductor() + c.conductor() <= 1 {
                    bad.extend(newform_suite(vec![a.clone(), b.clone(), c.clone()], &mut rng));
                    models += 1;
                }
            }
        }
    }
    println!("    {models} principal series models checked");
    report(6, "newform suite", &bad, start, Duration::from_secs(600));
}

#[test]
fn criterion_7_newform_from_zonal() {
    let start = Instant::now();
    let mut bad = Vec::new();
    let hm = Harmonics::new(RingLevel::padic(2, 2).unwrap(), 2).unwrap();
    let g = hm.characters();
    let chi = g.select(2, 0).unwrap();
    let model = PSeriesModel::new(vec![chi.clone(), g.trivial().clone()]).unwrap();
    let v0 = model.newform().unwrap();
    let c = model.declared_conductor();

    let sub = hm.harmonic_subspace(&chi, c).unwrap();
    let zonal = hm.zonal_from_subspace(&sub).unwrap();
    let dim = sub.dim() as f64;
    let v = model.kernel_average_exhaustive(hm.sphere(), &zonal, dim, &v0).unwrap();
    let scale = model.inner(&v, &v0) / model.inner(&v0, &v0);
    let resid: Vec<C64> = v.iter().zip(&v0).map(|(a, b)| a - scale * b).collect();
    let rel = linalg::norm(&resid, model.weight()) / linalg::norm(&v, model.weight());
    if !(rel < 1e-8) {
        bad.push(format!("zonal roundtrip relative residual {rel:e}"));
    }

    let other = g.trivial().clone();
    let mism = hm.harmonic_subspace(&other, c).unwrap();
    let pz = hm.zonal_from_subspace(&mism).unwrap();
    let w = model.kernel_average_exhaustive(hm.sphere(), &pz, dim, &v0).unwrap();
    let wn = linalg::norm(&w, model.weight());
    if !(wn < 1e-9) {
        bad.push(format!("mismatched character gives norm {wn:e}"));
    }
    report(7, "newform from zonal function", &bad, start, Duration::from_secs(60));
}

#[test]
fn criterion_8_archimedean() {
    let start = Instant::now();
    let mut bad = Vec::new();
    for n in 2..=4 {
        for m in 0..=6 {
            let p = arch::real_zonal_poly(m, n);
            if !arch::real_laplacian(&p).is_zero() {
                bad.push(format!("real m={m} n={n}: Laplacian nonzero"));
            }
            if p.eval(&arch::e_n(n, n - 1)) != num_rational::BigRational::from_integer(1.into()) {
                bad.push(format!("real m={m} n={n}: value at e_n is not 1"));
            }
        }
    }
    for n in 2..=3 {
        for m1 in 0..=5 {
            for m2 in 0..=5 - m1 {
                let p = arch::complex_zonal_poly(m1, m2, n);
                if !arch::complex_laplacian(&p).is_zero() {
                    bad.push(format!("complex ({m1},{m2}) n={n}: Laplacian nonzero"));
                }
                if arch::complex_value_at_e_n(&p, n) != num_rational::BigRational::from_integer(1.into()) {
                    bad.push(format!("complex ({m1},{m2}) n={n}: value at e_n is not 1"));
                }
            }
        }
    }
    let checks = [
        ("real m=2 n=3", arch::harmonic_dim_real(2, 3), arch::real_kernel_dim(2, 3) as u64, 5),
        (
            "complex (1,1) n=2",
            arch::harmonic_dim_complex(1, 1, 2),
            arch::complex_kernel_dim(1, 1, 2) as u64,
            3,
        ),
    ];
    for (name, formula, kernel, want) in checks {
        if formula != want || kernel != want {
            bad.push(format!("{name}: formula {formula} kernel {kernel}"));
        }
    }
    for n in 2..=4 {
        for m in 0..=6 {
            if arch::harmonic_dim_real(m, n) != arch::real_kernel_dim(m, n) as u64 {
                bad.push(format!("real dim m={m} n={n}"));
            }
        }
    }
    for n in 2..=3 {
        for m1 in 0..=5 {
            for m2 in 0..=5 - m1 {
                if arch::harmonic_dim_complex(m1, m2, n) != arch::complex_kernel_dim(m1, m2, n) as u64 {
                    bad.push(format!("complex dim ({m1},{m2}) n={n}"));
                }
            }
        }
    }
    report(8, "archimedean zonal harmonics", &bad, start, Duration::from_secs(60));
}
