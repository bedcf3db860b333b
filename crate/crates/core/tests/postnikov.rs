use effhom::complex::Rng;
use effhom::em::{em_space, Cyclic};
use effhom::gen::Gen;
use effhom::linalg::AbelianGroupDescr;
use effhom::postnikov::*;
use effhom::reduction::check_equivalence_sampled;
use effhom::simplicial::*;
use effhom::Error;
use num_bigint::BigInt;
use num_integer::Integer;
use rand::SeedableRng;

fn g(t: &[u64], r: usize) -> AbelianGroupDescr {
    AbelianGroupDescr::new(t, r)
}

fn cyclics(a: &AbelianGroupDescr) -> Vec<BigInt> {
    let mut v = a.torsion.clone();
    v.extend(std::iter::repeat(BigInt::from(0)).take(a.free_rank));
    v
}

/// Hom(Z/a, Z/d) and Ext(Z/a, Z/d) with 0 standing for Z.
fn hom(a: &BigInt, d: &BigInt) -> BigInt {
    if *d == BigInt::from(0) && *a != BigInt::from(0) {
        BigInt::from(1)
    } else {
        a.gcd(d)
    }
}

fn ext(a: &BigInt, d: &BigInt) -> Option<BigInt> {
    if *a == BigInt::from(0) {
        None
    } else {
        Some(a.gcd(d))
    }
}

/// H^m(X; Z/d) = Hom(H_m, Z/d) ⊕ Ext(H_{m−1}, Z/d), d = 0 meaning Z.
fn uct(h_m: &AbelianGroupDescr, h_prev: &AbelianGroupDescr, d: u64) -> AbelianGroupDescr {
    let d = BigInt::from(d);
    let mut f: Vec<BigInt> = cyclics(h_m).iter().map(|a| hom(a, &d)).collect();
    f.extend(cyclics(h_prev).iter().filter_map(|a| ext(a, &d)));
    AbelianGroupDescr::from_factors(f, 0)
}

#[test]
fn cohomology_matches_universal_coefficients() {
    let spaces = vec![
        sphere(3).unwrap(),
        rproj_truncated(1).unwrap(),
        rproj_truncated(4).unwrap(),
        em_space(&g(&[], 1), 2).unwrap(),
        em_space(&g(&[2], 0), 2).unwrap(),
    ];
    for x in &spaces {
        for d in [0u64, 2, 4] {
            for m in 0..=5 {
                let want = uct(&x.homology(m).unwrap(), &x.homology(m - 1).unwrap(), d);
                let pi = if d == 0 { g(&[], 1) } else { g(&[d], 0) };
                let (got, reps) = cohomology_group(x, m, &pi).unwrap();
                assert_eq!(got, want, "H^{m}({}; {pi})", x.name);
                assert_eq!(reps.len(), got.torsion.len() + got.free_rank);
                for (_, c) in &reps {
                    assert!(c.is_cocycle(x.effective()).unwrap(), "{c}");
                }
            }
        }
    }
}

#[test]
fn fourth_cohomology_of_cp_infinity() {
    let k = em_space(&g(&[], 1), 2).unwrap();
    let (h, reps) = cohomology_group(&k, 4, &g(&[], 1)).unwrap();
    assert_eq!(h, g(&[], 1));
    assert_eq!(reps.len(), 1);
    assert_eq!(reps[0].0, BigInt::from(0));
}

#[test]
fn tower_documents_roundtrip() {
    let text = "# S² through stage 4\nstage 2 pi=;1\nstage 3 pi=;1 k=(#0,1)\nstage 4 pi=2 k=(<Bar 2:u1 3:u2>,1) (#1,1)\n";
    let t = PostnikovTower::parse(text).unwrap();
    assert_eq!(t.stages.len(), 3);
    assert_eq!(t.stage(4).unwrap().pi, g(&[2], 0));
    assert_eq!(t.stage(3).unwrap().k, vec![(GenRef::Index(0), vec![1])]);
    let again = PostnikovTower::parse(&t.to_string()).unwrap();
    assert_eq!(again, t);
    let bad = PostnikovTower::parse("stage 2 pi=;1\nstage 3 pi=;x").unwrap_err();
    assert!(matches!(&bad, Error::Parse(m) if m.starts_with("line 2")), "{bad}");
    assert!(PostnikovTower::parse("stage 3 pi=;1").is_err());
    assert!(PostnikovTower::parse("stage 2 pi=;1 k=(#0,1)").is_err());
}

/// Künneth: H_n(X×Y) = ⊕ H_p⊗H_q ⊕ ⊕_{p+q=n−1} Tor(H_p,H_q).
fn kunneth(hx: &[AbelianGroupDescr], hy: &[AbelianGroupDescr], n: usize) -> AbelianGroupDescr {
    let mut f = Vec::new();
    for p in 0..=n {
        for a in cyclics(&hx[p]) {
            for b in cyclics(&hy[n - p]) {
                f.push(a.gcd(&b));
            }
        }
    }
    for p in 0..n {
        for a in cyclics(&hx[p]) {
            for b in cyclics(&hy[n - 1 - p]) {
                if a != BigInt::from(0) && b != BigInt::from(0) {
                    f.push(a.gcd(&b));
                }
            }
        }
    }
    AbelianGroupDescr::from_factors(f, 0)
}

#[test]
fn split_tower_is_a_product() {
    let t = PostnikovTower::parse("stage 2 pi=;1\nstage 3 pi=;1 k=0").unwrap();
    let x = realize(&t, 3).unwrap();
    let k2 = em_space(&g(&[], 1), 2).unwrap();
    let k3 = em_space(&g(&[], 1), 3).unwrap();
    let h2: Vec<_> = (0..=5).map(|n| k2.homology(n).unwrap()).collect();
    let h3: Vec<_> = (0..=5).map(|n| k3.homology(n).unwrap()).collect();
    for n in 0..=5 {
        assert_eq!(x.homology(n as i32).unwrap(), kunneth(&h2, &h3, n), "H{n}");
    }
    let mut rng = Rng::seed_from_u64(3);
    let rep = check_equivalence_sampled(&x.equiv, 4, 20, &mut rng);
    assert!(rep.passed(), "{rep}");
}

#[test]
fn k_invariant_multiples_of_the_square() {
    // K(Z,3) → X → K(Z,2) with k = c·ι²: the transgression Z → Z is c, so H3 = Z/c, H4 = 0.
    for c in [1u64, 2, 3] {
        let t = PostnikovTower::parse(&format!("stage 2 pi=;1\nstage 3 pi=;1 k=(#0,{c})")).unwrap();
        let x = realize(&t, 3).unwrap();
        assert_eq!(x.homology(2).unwrap(), g(&[], 1));
        assert_eq!(x.homology(3).unwrap(), g(&[c], 0), "c = {c}");
        assert_eq!(x.homology(4).unwrap(), g(&[], 0), "c = {c}");
    }
}

#[test]
fn torsion_fibre() {
    let t = PostnikovTower::parse("stage 2 pi=\nstage 3 pi=4").unwrap();
    let x = realize(&t, 3).unwrap();
    assert_eq!(x.homology(3).unwrap(), g(&[4], 0));
    assert_eq!(x.homology(2).unwrap(), g(&[], 0));
}

#[test]
fn non_cocycles_are_rejected() {
    // On K(Z/2,2) the degree-4 basis element #0 is not a cocycle with Z coefficients.
    let t = PostnikovTower::parse("stage 2 pi=2\nstage 3 pi=;1 k=(#0,1)").unwrap();
    assert!(matches!(realize(&t, 3), Err(Error::Precondition(m)) if m.contains("not a cocycle")));
    assert!(matches!(realize(&t, 4), Err(Error::Precondition(_))));
}

#[test]
fn cochains_evaluate_linearly() {
    let mut c = Cochain::zero(2, vec![Cyclic(0), Cyclic(4)]);
    c.set(Gen::atom("a"), vec![1, 3]);
    c.set(Gen::atom("b"), vec![2, 6]);
    let x = effhom::cmbn::Cmbn::from_terms(2, vec![(2, Gen::atom("a")), (-1, Gen::atom("b"))]);
    assert_eq!(c.eval(&x), vec![0, 0]);
    assert!(!c.is_zero());
    assert!(Cochain::zero(2, vec![Cyclic(0)]).is_zero());
}
