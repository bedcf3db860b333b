use effhom::cmbn::Cmbn;
use effhom::complex::{homology, Complex, Morphism, Rng, CC};
use effhom::gen::Gen;
use effhom::linalg::AbelianGroupDescr;
use effhom::reduction::*;
use proptest::prelude::*;
use rand::SeedableRng;

fn a(s: &str) -> Gen {
    Gen::atom(s)
}

/// D: x1 → 0, x0; the top adds the contractible pair e1 → e0.
fn split_pair() -> (CC, CC, Reduction) {
    let bot = Complex::finite("D", vec![(0, a("x0"), vec![]), (1, a("x1"), vec![])]);
    let top = Complex::finite(
        "C",
        vec![(0, a("x0"), vec![]), (0, a("e0"), vec![]), (1, a("x1"), vec![]), (1, a("e1"), vec![(1, a("e0"))])],
    );
    let f = Morphism::new(&top, &bot, 0, |n, g| {
        if g.as_atom().map_or(false, |s| s.starts_with('x')) {
            Cmbn::gen(n, g.clone())
        } else {
            Cmbn::zero(n)
        }
    });
    let g = Morphism::new(&bot, &top, 0, |n, x| Cmbn::gen(n, x.clone()));
    let h = Morphism::new(&top, &top, 1, |n, x| if *x == a("e0") { Cmbn::gen(n + 1, a("e1")) } else { Cmbn::zero(n + 1) });
    let r = Reduction::new(f, g, h).unwrap();
    (top, bot, r)
}

fn all_gens(c: &CC, upto: i32) -> Vec<Cmbn> {
    (0..=upto).flat_map(|n| c.basis(n).unwrap().into_iter().map(move |g| Cmbn::gen(n, g))).collect()
}

#[test]
fn splitting_off_a_contractible_pair() {
    let (top, bot, r) = split_pair();
    let rep = check_reduction(&r, &all_gens(&top, 1), &all_gens(&bot, 1));
    assert!(rep.passed(), "{rep}");
    for n in 0..=1 {
        assert_eq!(homology(&top, n).unwrap(), homology(&bot, n).unwrap());
    }
}

#[test]
fn corrupted_homotopy_breaks_the_fifth_equation() {
    let (top, bot, r) = split_pair();
    let bad = Reduction { h: r.h.scaled(2), ..r };
    let rep = check_reduction(&bad, &all_gens(&top, 1), &all_gens(&bot, 1));
    assert!(!rep.passed());
    let row = rep.rows.iter().find(|x| x.0 == "g∘f + d∘h + h∘d = id").unwrap();
    assert!(row.2 > 0);
}

#[test]
fn perturbation_creates_torsion() {
    // δ(x1) = e0, δ(e1) = a·x0; the perturbed bottom has d(x1) = −a·x0, so H0 = Z/a.
    for k in [2i64, 3, 5] {
        let (top, bot, r) = split_pair();
        let delta = Morphism::new(&top, &top, -1, move |_, g| {
            if *g == a("x1") {
                Cmbn::gen(0, a("e0"))
            } else if *g == a("e1") {
                Cmbn::term(0, k, a("x0"))
            } else {
                Cmbn::zero(-1)
            }
        });
        let p = bpl(&r, &delta).unwrap();
        assert_eq!(p.bottom().d(1, &a("x1")), Cmbn::term(0, -k, a("x0")));
        assert_eq!(homology(p.bottom(), 0).unwrap(), AbelianGroupDescr::new(&[k as u64], 0));
        let rep = check_reduction(&p, &all_gens(&top, 1), &all_gens(&bot, 1));
        assert!(rep.passed(), "{rep}");
    }
}

#[test]
fn bpl_rejects_non_differential_perturbations() {
    let (top, _, r) = split_pair();
    let wrong_degree = Morphism::zero(&top, &top, 0);
    assert!(matches!(bpl(&r, &wrong_degree), Err(effhom::Error::Precondition(_))));
}

#[test]
fn compositions_and_tensors_stay_reductions() {
    let (top, _, r) = split_pair();
    let id = identity_reduction(r.bottom());
    let c = compose_reductions(&r, &id).unwrap();
    let bot = r.bottom().clone();
    assert!(check_reduction(&c, &all_gens(&top, 1), &all_gens(&bot, 1)).passed());
    assert!(compose_reductions(&id, &r).is_err());
    let t = tensor_reduction(&r, &r);
    let mut rng = Rng::seed_from_u64(9);
    let rep = check_reduction_sampled(&t, 2, 40, &mut rng);
    assert!(rep.passed(), "{rep}");
    assert_eq!(homology(t.top(), 1).unwrap(), homology(t.bottom(), 1).unwrap());
}

#[test]
fn equivalences_compose_through_a_bicone() {
    let (_, _, r) = split_pair();
    let e1 = Equivalence::from_reduction(&r);
    let e2 = Equivalence::identity(r.bottom());
    let e = compose_equivalences(&e1, &e2).unwrap();
    let mut rng = Rng::seed_from_u64(4);
    let rep = check_equivalence_sampled(&e, 2, 30, &mut rng);
    assert!(rep.passed(), "{rep}");
    for n in 0..=1 {
        assert_eq!(homology(e.lbottom(), n).unwrap(), homology(e.rbottom(), n).unwrap());
    }
}

/// A bottom complex Z^p ← Z^q with matrix `m`; the top adds `pairs` contractible pairs.
fn random_splitting(m: &[Vec<i64>], pairs: usize) -> (CC, CC, Reduction) {
    let p = m.len();
    let q = m[0].len();
    let x0 = |i: usize| a(&format!("x0_{i}"));
    let x1 = |j: usize| a(&format!("x1_{j}"));
    let col = |j: usize| (0..p).filter(|&i| m[i][j] != 0).map(|i| (m[i][j], x0(i))).collect::<Vec<_>>();
    let mut bcells: Vec<(i32, Gen, Vec<(i64, Gen)>)> = (0..p).map(|i| (0, x0(i), vec![])).collect();
    bcells.extend((0..q).map(|j| (1, x1(j), col(j))));
    let mut tcells = bcells.clone();
    for k in 0..pairs {
        tcells.push((0, a(&format!("e0_{k}")), vec![]));
        tcells.push((1, a(&format!("e1_{k}")), vec![(1, a(&format!("e0_{k}")))]));
    }
    let bot = Complex::finite("B", bcells);
    let top = Complex::finite("T", tcells);
    let f = Morphism::new(&top, &bot, 0, |n, g| {
        if g.as_atom().unwrap().starts_with('x') {
            Cmbn::gen(n, g.clone())
        } else {
            Cmbn::zero(n)
        }
    });
    let g = Morphism::new(&bot, &top, 0, |n, x| Cmbn::gen(n, x.clone()));
    let h = Morphism::new(&top, &top, 1, |n, x| match x.as_atom().unwrap().strip_prefix("e0_") {
        Some(k) => Cmbn::gen(n + 1, a(&format!("e1_{k}"))),
        None => Cmbn::zero(n + 1),
    });
    (top, bot, Reduction { f, g, h })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Splittings satisfy every equation; scaling h always breaks the fifth.
    #[test]
    fn splittings_pass_and_corruptions_fail(
        m in prop::collection::vec(prop::collection::vec(-3i64..=3, 1..4), 1..4),
        pairs in 1usize..4,
        k in 2i64..5,
    ) {
        let q = m[0].len();
        let m: Vec<Vec<i64>> = m.into_iter().map(|mut r| { r.resize(q, 0); r }).collect();
        let (top, bot, r) = random_splitting(&m, pairs);
        let rep = check_reduction(&r, &all_gens(&top, 1), &all_gens(&bot, 1));
        prop_assert!(rep.passed(), "{}", rep);
        for n in 0..=1 {
            prop_assert_eq!(homology(&top, n).unwrap(), homology(&bot, n).unwrap());
        }
        let bad = Reduction { h: r.h.scaled(k), ..r };
        let rep = check_reduction(&bad, &all_gens(&top, 1), &all_gens(&bot, 1));
        let row = rep.rows.iter().find(|x| x.0 == "g∘f + d∘h + h∘d = id").unwrap();
        prop_assert!(row.2 > 0);
    }

    /// d∘d = 0 on every generator of a tensor square.
    #[test]
    fn tensor_squares_are_complexes(m in prop::collection::vec(prop::collection::vec(-3i64..=3, 2..3), 2..3)) {
        let (top, _, _) = random_splitting(&m, 1);
        let t = effhom::complex::tensor_product(&top, &top);
        for n in 0..=2 {
            for g in t.basis(n).unwrap() {
                prop_assert!(t.diff(&t.d(n, &g)).is_zero());
            }
        }
    }
}
