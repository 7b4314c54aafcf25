//! Property tests for the structural invariants: antisymmetry and the
//! norm inequality in the exterior algebra, basis independence of subgroup
//! norms, and the scaling law for the shortest-vector function.

use latflow::exterior::{self, MultiVector, SubgroupBasis};
use latflow::lattice::{self, Lattice};

use proptest::prelude::*;

fn int_vector(dim: usize) -> impl Strategy<Value = Vec<i128>> {
    proptest::collection::vec(-6i128..=6, dim)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn wedge_antisymmetric_on_vectors(
        dim in 2usize..=5,
        seed_a in int_vector(5),
        seed_b in int_vector(5),
    ) {
        let a = MultiVector::from_vector(&seed_a[..dim]);
        let b = MultiVector::from_vector(&seed_b[..dim]);
        let ab = exterior::wedge(&a, &b).unwrap();
        let ba = exterior::wedge(&b, &a).unwrap();
        prop_assert_eq!(ab, ba.neg());
    }

    #[test]
    fn wedge_with_vector_norm_inequality(
        dim in 2usize..=5,
        rank in 1usize..=3,
        vecs in proptest::collection::vec(int_vector(5), 4),
    ) {
        // ||w ^ v|| <= k ||w|| ||v|| for a subgroup representative w.
        let rank = rank.min(dim - 1);
        let basis: Vec<Vec<i128>> = vecs[..rank].iter().map(|v| v[..dim].to_vec()).collect();
        let g = SubgroupBasis::new(dim, basis).unwrap();
        let w = match exterior::represent(&g) {
            Ok(w) => w,
            Err(_) => return Ok(()), // dependent sample
        };
        let v = MultiVector::from_vector(&vecs[3][..dim]);
        let wv = exterior::wedge(&w, &v).unwrap();
        prop_assert!(wv.sup_norm() <= dim as i128 * w.sup_norm() * v.sup_norm());
    }

    #[test]
    fn subgroup_norm_is_basis_independent(
        dim in 2usize..=4,
        rank in 1usize..=2,
        vecs in proptest::collection::vec(int_vector(4), 2),
        ops in proptest::collection::vec((0usize..2, 0usize..2, -2i128..=2), 0..6),
    ) {
        let rank = rank.min(dim);
        let basis: Vec<Vec<i128>> = vecs[..rank].iter().map(|v| v[..dim].to_vec()).collect();
        let g = match SubgroupBasis::new(dim, basis.clone()) {
            Ok(g) => g,
            Err(_) => return Ok(()),
        };
        let n1 = match exterior::subgroup_norm(&g) {
            Ok(n) => n,
            Err(_) => return Ok(()), // dependent sample
        };
        // apply random elementary column operations (a unimodular change of basis)
        let mut changed = basis;
        for &(i, j, f) in &ops {
            let (i, j) = (i % rank, j % rank);
            if i != j {
                let snapshot = changed[j].clone();
                for (dst, src) in changed[i].iter_mut().zip(snapshot) {
                    *dst += f * src;
                }
            }
        }
        let g2 = SubgroupBasis::new(dim, changed).unwrap();
        let n2 = exterior::subgroup_norm(&g2).unwrap();
        prop_assert_eq!(n1, n2);
    }

    #[test]
    fn delta_scales_linearly(scale in 0.25f64..4.0, seed in 0u64..500) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = lattice::random_unimodular(3, 30, &mut rng);
        let lat = Lattice::<f64>::from_integer_basis(&m).unwrap();
        let d1 = lattice::delta(&lat).unwrap().value;
        let d2 = lattice::delta(&lat.scaled(scale)).unwrap().value;
        prop_assert!((d2 - scale * d1).abs() <= 1e-9 * (1.0 + scale * d1));
    }

    #[test]
    fn saturation_idempotent(
        dim in 2usize..=4,
        vecs in proptest::collection::vec(int_vector(4), 2),
    ) {
        let basis: Vec<Vec<i128>> = vecs.iter().map(|v| v[..dim].to_vec()).collect();
        let g = match SubgroupBasis::new(dim, basis) {
            Ok(g) => g,
            Err(_) => return Ok(()),
        };
        let s1 = match lattice::saturate(&g) {
            Ok(s) => s,
            Err(_) => return Ok(()),
        };
        let s2 = lattice::saturate(&s1.to_subgroup_basis()).unwrap();
        prop_assert_eq!(s1, s2);
    }
}

#[test]
fn pi_plus_dominates_sup_norm_on_integers() {
    use latflow::dioph;
    for q in [[3.0f64, 0.0], [1.0, -7.0], [2.0, 2.0], [0.0, 1.0]] {
        let sup = q.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(dioph::pi_plus(&q) >= sup.max(1.0) - 1e-12);
    }
}
