mod common;

use cayley_measure::cylinder::{rho, CylinderSet, SpinSet};
use cayley_measure::sample::CylinderSampler;
use cayley_measure::tree::{TreeGeometry, Vertex};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SPINS: SpinSet = SpinSet::Finite(2);

fn tree() -> TreeGeometry {
    TreeGeometry::new(2).unwrap()
}

fn cylinder(seed: u64) -> CylinderSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CylinderSampler::new(2).sample(&mut rng, SPINS, &tree()).unwrap()
}

/// Membership of every configuration of `V_2` (10 sites when `k = 2`).
fn truth(set: &CylinderSet) -> Vec<bool> {
    common::all_configurations(10, 2).map(|v| set.contains(&common::dense(&v))).collect()
}

fn pointwise(a: &[bool], b: &[bool], f: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn set_operations_match_membership(s1 in any::<u64>(), s2 in any::<u64>()) {
        let (a, b) = (cylinder(s1), cylinder(s2));
        let (ta, tb) = (truth(&a), truth(&b));
        prop_assert_eq!(truth(&a.union(&b)), pointwise(&ta, &tb, |x, y| x || y));
        prop_assert_eq!(truth(&a.intersect(&b)), pointwise(&ta, &tb, |x, y| x && y));
        prop_assert_eq!(truth(&a.difference(&b).unwrap()), pointwise(&ta, &tb, |x, y| x && !y));
        prop_assert_eq!(truth(&a.complement().unwrap()), ta.iter().map(|x| !x).collect::<Vec<_>>());
        let subset = ta.iter().zip(&tb).all(|(&x, &y)| !x || y);
        prop_assert_eq!(a.is_subset(&b).unwrap(), subset);
        prop_assert_eq!(a.is_disjoint(&b), ta.iter().zip(&tb).all(|(&x, &y)| !(x && y)));
        prop_assert_eq!(a.semantic_eq(&b).unwrap(), ta == tb);
    }

    #[test]
    fn field_laws(s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>()) {
        let (a, b, c) = (cylinder(s1), cylinder(s2), cylinder(s3));
        let de_morgan = a.union(&b).complement().unwrap();
        let other = a.complement().unwrap().intersect(&b.complement().unwrap());
        prop_assert!(de_morgan.semantic_eq(&other).unwrap());
        let lhs = a.intersect(&b.union(&c));
        let rhs = a.intersect(&b).union(&a.intersect(&c));
        prop_assert!(lhs.semantic_eq(&rhs).unwrap());
        prop_assert!(a.complement().unwrap().complement().unwrap().semantic_eq(&a).unwrap());
        prop_assert!(a.union(&a.complement().unwrap()).semantic_eq(&CylinderSet::full(SPINS)).unwrap());
        prop_assert!(a.intersect(&a.complement().unwrap()).is_empty());
    }

    #[test]
    fn disjoint_parts_partition_the_set(s in any::<u64>()) {
        let a = cylinder(s);
        let parts = a.disjoint_parts().unwrap();
        let mut counts = vec![0usize; 1024];
        for p in &parts {
            let one = CylinderSet::from_rects(SPINS, vec![p.clone()]);
            for (i, hit) in truth(&one).into_iter().enumerate() {
                counts[i] += hit as usize;
            }
        }
        let expected: Vec<usize> = truth(&a).into_iter().map(usize::from).collect();
        prop_assert_eq!(counts, expected);
    }

    #[test]
    fn rho_is_a_metric_on_truncations(
        a in proptest::collection::vec(0u64..2, 46),
        b in proptest::collection::vec(0u64..2, 46),
        c in proptest::collection::vec(0u64..2, 46),
    ) {
        let t = tree();
        let (a, b, c) = (common::dense(&a), common::dense(&b), common::dense(&c));
        let ab = rho(&a, &b, &t, 4).unwrap().partial;
        let bc = rho(&b, &c, &t, 4).unwrap().partial;
        let ac = rho(&a, &c, &t, 4).unwrap().partial;
        prop_assert!(ac <= &ab + &bc);
        prop_assert_eq!(&ab, &rho(&b, &a, &t, 4).unwrap().partial);
        prop_assert_eq!(rho(&a, &a, &t, 4).unwrap().partial, cayley_measure::value::int(0));
    }
}

#[test]
fn sphere_and_ball_sizes_match_breadth_first_counts() {
    for k in 1..=3u32 {
        let t = TreeGeometry::new(k).unwrap();
        let mut frontier = vec![Vertex::ROOT];
        let mut ball = 1;
        for n in 0..=8 {
            assert_eq!(t.sphere_size(n).unwrap(), frontier.len(), "k={k} n={n}");
            assert_eq!(t.ball_size(n).unwrap(), ball, "k={k} n={n}");
            for v in &frontier {
                assert_eq!(t.level(*v), n);
            }
            frontier = frontier.iter().flat_map(|&v| t.children(v).map(Vertex)).collect();
            ball += frontier.len();
        }
    }
}

#[test]
fn parents_invert_children() {
    let t = TreeGeometry::new(3).unwrap();
    for i in 0..t.ball_size(4).unwrap() {
        let v = Vertex(i);
        for c in t.children(v) {
            assert_eq!(t.parent(Vertex(c)), Some(v));
            assert_eq!(t.distance(v, Vertex(c)), 1);
        }
    }
}
