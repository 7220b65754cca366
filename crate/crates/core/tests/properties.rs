use fqv_core::calculus::{isometry_level, qv_level, riemann_sum, Variant};
use fqv_core::functional::builtin_names;
use fqv_core::partition::{dyadic_sequence, hitting_times, uniform_sequence};
use fqv_core::path::generate_brownian;
use fqv_core::{builtin, Grid, Partition, SampledPath};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn path_from(values: Vec<f64>, dim: usize) -> SampledPath {
    let intervals = values.len() / dim - 1;
    SampledPath::new(Grid::new(intervals, 1.0).unwrap(), dim, values, "prop", None).unwrap()
}

fn random_partition(intervals: usize, cuts: Vec<usize>) -> Partition {
    let mut idx: Vec<usize> = cuts.into_iter().map(|c| c % intervals).filter(|&c| c > 0).collect();
    idx.push(0);
    idx.push(intervals);
    idx.sort_unstable();
    idx.dedup();
    Partition::new(Grid::new(intervals, 1.0).unwrap(), idx).unwrap()
}

fn increments() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 9..129)
}

fn cumulative(steps: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    std::iter::once(0.0)
        .chain(steps.iter().map(|s| {
            acc += s;
            acc
        }))
        .collect()
}

/// Values after `t_k` never reach `F(t_k, ·)` or its derivatives.
#[test]
fn functionals_are_non_anticipative() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut cases = 0;
    for name in builtin_names() {
        let f = builtin(name).unwrap();
        for _ in 0..128 / builtin_names().len() + 1 {
            let base = generate_brownian(2, 1.0, 256, rng.random()).unwrap();
            let k = rng.random_range(0..256);
            let mut values = base.values().to_vec();
            for v in &mut values[(k + 1) * 2..] {
                *v += rng.random_range(-5.0..5.0);
            }
            let other = SampledPath::new(base.grid(), 2, values, "bumped", None).unwrap();
            let a = f.prepare(&base).unwrap().jet(k, 2).unwrap();
            let b = f.prepare(&other).unwrap().jet(k, 2).unwrap();
            assert_eq!(a, b, "{name} at k={k}");
            cases += 1;
        }
    }
    assert!(cases >= 128);
}

#[test]
fn dyadic_levels_are_nested() {
    let grid = Grid::new(1 << 10, 2.0).unwrap();
    let seq = dyadic_sequence(grid, 2, 10).unwrap();
    assert!(seq.nested());
    for pair in seq.levels().windows(2) {
        assert!(pair[0].partition.is_subset_of(&pair[1].partition));
        assert!(pair[1].partition.mesh() < pair[0].partition.mesh());
    }
    let ternary = uniform_sequence(Grid::new(81, 1.0).unwrap(), 1, 4, 3).unwrap();
    assert_eq!(ternary.finest().partition.cells(), 81);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn identity_sums_telescope(steps in increments(), cuts in prop::collection::vec(0usize..1000, 0..20)) {
        let xs = cumulative(&steps);
        let path = path_from(xs.clone(), 1);
        let p = random_partition(path.intervals(), cuts);
        let f = builtin("identity").unwrap();
        for v in [Variant::AlongApprox, Variant::AlongPath] {
            let (s, _) = riemann_sum(&f, &path, &p, v, false).unwrap();
            prop_assert!((s - (xs[xs.len() - 1] - xs[0])).abs() <= 1e-10 * (1.0 + xs.iter().map(|x| x.abs()).sum::<f64>()));
        }
    }

    #[test]
    fn quadratic_identity_holds_on_any_partition(steps in increments(), cuts in prop::collection::vec(0usize..1000, 0..20)) {
        let xs = cumulative(&steps);
        let path = path_from(xs.clone(), 1);
        let p = random_partition(path.intervals(), cuts);
        let qv = qv_level(&path, &p).terminal()[0];
        let (s, _) = riemann_sum(&builtin("square").unwrap(), &path, &p, Variant::AlongPath, false).unwrap();
        let (x0, xt) = (xs[0], xs[xs.len() - 1]);
        prop_assert!((s - (xt * xt - x0 * x0 - qv)).abs() <= 1e-10 * (1.0 + xt * xt + qv));
    }

    #[test]
    fn qv_is_symmetric_and_increasing(steps in prop::collection::vec(-1.0f64..1.0, 18..200), cuts in prop::collection::vec(0usize..1000, 0..20)) {
        let mut steps = steps;
        if steps.len() % 2 == 1 {
            steps.pop();
        }
        let mut values = vec![0.0, 0.0];
        for pair in steps.chunks(2) {
            let last = [values[values.len() - 2], values[values.len() - 1]];
            values.extend([last[0] + pair[0], last[1] + pair[1]]);
        }
        let path = path_from(values, 2);
        let p = random_partition(path.intervals(), cuts);
        let qv = qv_level(&path, &p);
        prop_assert!(qv.is_symmetric());
        prop_assert!(qv.min_increment_eigenvalue() >= -1e-12);
        for i in 1..qv.len() {
            prop_assert!(qv.trace(i) >= qv.trace(i - 1));
        }
    }

    #[test]
    fn hitting_times_respect_the_threshold(steps in increments(), threshold in 0.05f64..2.0) {
        let xs = cumulative(&steps);
        let path = path_from(xs.clone(), 1);
        let p = hitting_times(&path, threshold);
        let idx = p.indices();
        for w in idx.windows(2) {
            for k in w[0] + 1..w[1] {
                prop_assert!((xs[k] - xs[w[0]]).abs() < threshold);
            }
            if w[1] != path.intervals() {
                prop_assert!((xs[w[1]] - xs[w[0]]).abs() >= threshold);
            }
        }
    }

    #[test]
    fn isometry_gap_matches_remainders(seed in 0u64..1000, which in 0usize..15, n in 2usize..8) {
        let name = builtin_names()[which % builtin_names().len()];
        let f = builtin(name).unwrap();
        let path = generate_brownian(2, 1.0, 256, seed).unwrap();
        let p = dyadic_sequence(path.grid(), n, n).unwrap().finest().partition.clone();
        let level = isometry_level(&f, &path, &p, n).unwrap();
        prop_assert!(level.consistent(), "{name}: {level:?}");
    }
}
