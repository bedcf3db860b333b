use effhom::complex::Rng;
use effhom::gen::Gen;
use effhom::linalg::AbelianGroupDescr;
use effhom::loops::*;
use effhom::reduction::check_equivalence_sampled;
use effhom::simplicial::*;
use proptest::prelude::*;
use rand::SeedableRng;

fn g(t: &[u64], r: usize) -> AbelianGroupDescr {
    AbelianGroupDescr::new(t, r)
}

/// Rank of the cobar construction on one cell of degree c (zero differential):
/// words of letters of degree c − 1 summing to k.
fn cobar_one_cell(c: i32, k: i32) -> AbelianGroupDescr {
    if k % (c - 1) == 0 {
        g(&[], 1)
    } else {
        g(&[], 0)
    }
}

#[test]
fn loops_on_spheres() {
    for c in [2, 3, 4] {
        let s = sphere(c as usize).unwrap();
        let o = loop_space_eh(&s).unwrap();
        for k in 0..=8 {
            assert_eq!(o.homology(k).unwrap(), cobar_one_cell(c, k), "H{k}(ΩS{c})");
        }
    }
}

#[test]
fn loop_space_of_truncated_projective_space() {
    let p4 = rproj_truncated(4).unwrap();
    let o = loop_space_eh(&p4).unwrap();
    assert_eq!(o.homology(0).unwrap(), g(&[], 1));
    assert_eq!(o.homology(1).unwrap(), g(&[], 0));
    assert_eq!(o.homology(2).unwrap(), g(&[], 0));
    assert_eq!(o.homology(3).unwrap(), g(&[], 1));
    assert_eq!(o.homology(4).unwrap(), g(&[2], 0));
    let mut rng = Rng::seed_from_u64(1);
    let rep = check_equivalence_sampled(&o.equiv, 5, 50, &mut rng);
    assert!(rep.passed(), "{rep}");
}

#[test]
fn double_loop_space_of_s4() {
    // Ω²S⁴ is simply connected with π₂ = π₄S⁴ = Z.
    let s4 = sphere(4).unwrap();
    let oo = iterated_cobar(&s4, 2).unwrap();
    assert_eq!(oo.homology(0).unwrap(), g(&[], 1));
    assert_eq!(oo.homology(1).unwrap(), g(&[], 0));
    assert_eq!(oo.homology(2).unwrap(), g(&[], 1));
    let mut rng = Rng::seed_from_u64(2);
    let rep = check_equivalence_sampled(&oo.equiv, 4, 30, &mut rng);
    assert!(rep.passed(), "{rep}");
}

#[test]
fn chains_of_loop_groups_are_locally_effective() {
    let s3 = sphere(3).unwrap();
    let o = loop_space_eh(&s3).unwrap();
    assert!(matches!(o.chains.basis(4), Err(effhom::Error::LocallyEffective(_, 4))));
    assert_eq!(o.effective().basis(4).unwrap().len(), 1);
    assert!(o.chains.basis(-1).unwrap().is_empty());
    let s1 = sphere(1).unwrap();
    assert!(loop_space_eh(&s1).is_err());
}

#[test]
fn loop_group_arithmetic() {
    let s3 = sphere(3).unwrap();
    let gr = kan_loop_group(&s3.space).unwrap();
    let x = LoopGroup::normalize(vec![(Simplex::nondeg(Gen::atom("S3")), 2)], 2);
    let inv = gr.inv(2, &x);
    assert_eq!(gr.mul(2, &x, &inv), gr.unit(2));
    assert!(!gr.is_abelian());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// The Kan loop group is simplicial: ∂_i∂_j = ∂_{j−1}∂_i for i < j, and faces are
    /// homomorphisms.
    #[test]
    fn loop_group_faces(seed in any::<u64>(), dim in 2usize..5, i in 0usize..5, j in 0usize..5) {
        let p4 = rproj_truncated(4).unwrap();
        let gr = kan_loop_group(&p4.space).unwrap();
        let mut rng = Rng::seed_from_u64(seed);
        let (Some(a), Some(b)) = (gr.sample(dim, &mut rng), gr.sample(dim, &mut rng)) else { return Ok(()) };
        let (a, b) = (Simplex::nondeg(a), Simplex::nondeg(b));
        let (i, j) = (i.min(j) % dim, (i.max(j) % dim).max(i.min(j) % dim + 1));
        if j <= dim {
            let l = face(&*gr, i, dim - 1, &face(&*gr, j, dim, &a));
            let r = face(&*gr, j - 1, dim - 1, &face(&*gr, i, dim, &a));
            prop_assert_eq!(l, r);
        }
        let ab = gr.mul(dim, &a, &b);
        prop_assert_eq!(face(&*gr, i, dim, &ab), gr.mul(dim - 1, &face(&*gr, i, dim, &a), &face(&*gr, i, dim, &b)));
    }
}
