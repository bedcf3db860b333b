use effhom::complex::Rng;
use effhom::gen::Gen;
use effhom::linalg::AbelianGroupDescr;
use effhom::reduction::{check_equivalence_sampled, check_reduction_sampled};
use effhom::simplicial::*;
use rand::SeedableRng;

fn z() -> AbelianGroupDescr {
    AbelianGroupDescr::free(1)
}

fn g(t: &[u64], r: usize) -> AbelianGroupDescr {
    AbelianGroupDescr::new(t, r)
}

fn star(k: usize) -> Simplex {
    Simplex::iterated(Gen::atom("*"), k)
}

#[test]
fn spheres() {
    for n in 1..=6 {
        let s = sphere(n).unwrap();
        for k in 0..=7 {
            let want = if k == 0 || k == n as i32 { z() } else { AbelianGroupDescr::zero() };
            assert_eq!(s.homology(k).unwrap(), want, "H{k}(S{n})");
        }
    }
    assert!(sphere(0).is_err());
}

#[test]
fn truncated_projective() {
    let p = rproj_truncated(4).unwrap();
    let want = [z(), g(&[], 0), g(&[], 0), g(&[], 0), z(), g(&[2], 0), g(&[], 0), g(&[2], 0)];
    for (k, w) in want.iter().enumerate() {
        assert_eq!(&p.homology(k as i32).unwrap(), w, "H{k}");
    }
    let c = &p.chains;
    assert!(c.d(5, &Gen::atom("P5")).is_zero());
    assert_eq!(c.d(6, &Gen::atom("P6")).coeff(&Gen::atom("P5")), 2);
    let p1 = rproj_truncated(1).unwrap();
    assert_eq!(p1.homology(1).unwrap(), g(&[2], 0));
    assert_eq!(p1.homology(2).unwrap(), g(&[], 0));
    assert_eq!(p1.homology(3).unwrap(), g(&[2], 0));
}

#[test]
fn projective_plane_by_pasting() {
    let s1 = sphere(1).unwrap();
    let s = Simplex::nondeg(Gen::atom("S1"));
    let rp2 = disk_pasting(&s1, 2, "D2", vec![s.clone(), star(1), s.clone()]).unwrap();
    assert_eq!(rp2.homology(1).unwrap(), g(&[2], 0));
    assert_eq!(rp2.homology(2).unwrap(), g(&[], 0));
    let mut rng = Rng::seed_from_u64(1);
    let rep = check_equivalence_sampled(&rp2.equiv, 3, 20, &mut rng);
    assert!(rep.passed(), "{rep}");
    let s0 = Simplex::new(vec![0], Gen::atom("S1"));
    let s1d = Simplex::new(vec![1], Gen::atom("S1"));
    let bad = disk_pasting(&s1, 3, "D3", vec![s0, s1d, star(2), star(2)]);
    let msg = bad.err().expect("incompatible faces").to_string();
    assert!(msg.contains("(0,1)"), "{msg}");
}

#[test]
fn products() {
    let s1 = sphere(1).unwrap();
    let t = cartesian_product(&s1, &s1).unwrap();
    assert_eq!(t.homology(0).unwrap(), z());
    assert_eq!(t.homology(1).unwrap(), g(&[], 2));
    assert_eq!(t.homology(2).unwrap(), z());
    let mut rng = Rng::seed_from_u64(2);
    let rep = check_equivalence_sampled(&t.equiv, 3, 30, &mut rng);
    assert!(rep.passed(), "{rep}");
    let a = sphere(2).unwrap();
    let b = sphere(3).unwrap();
    let p = cartesian_product(&a, &b).unwrap();
    assert_eq!(p.homology(5).unwrap(), z());
    assert_eq!(p.homology(4).unwrap(), g(&[], 0));
    let (_, ez) = ez_reduction(&a.space, &b.space);
    let rep = check_reduction_sampled(&ez, 6, 60, &mut rng);
    assert!(rep.passed(), "{rep}");
}
