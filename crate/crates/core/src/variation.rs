//! One-point (common-region) crossover and subtree mutation.
//!
//! The root node is never a crossover or mutation point, so an offspring's
//! root symbol is always inherited from the first parent. Both operators act
//! on the solution and the preference chromosome with independently chosen
//! points, and any result deeper than `max_depth` is discarded in favour of
//! the unmodified chromosome.

use rand::Rng;

use crate::error::{Error, Result};
use crate::individual::{grow_tree, Individual};
use crate::primitives::{ExprTree, PrimitiveSet};

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct VariationConfig {
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub max_depth: usize,
    /// Inclusive depth range for subtrees grown by mutation.
    pub mutation_depth: (usize, usize),
}

impl Default for VariationConfig {
    fn default() -> Self {
        VariationConfig {
            crossover_prob: 0.9,
            mutation_prob: 0.05,
            max_depth: 17,
            mutation_depth: (2, 6),
        }
    }
}

impl VariationConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("crossover probability", self.crossover_prob),
            ("mutation probability", self.mutation_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("{name} {p} is outside [0, 1]")));
            }
        }
        if self.max_depth < 1 {
            return Err(Error::config("max depth must be at least 1"));
        }
        let (lo, hi) = self.mutation_depth;
        if lo < 1 || lo > hi {
            return Err(Error::config(format!("invalid mutation depth range [{lo}, {hi}]")));
        }
        Ok(())
    }
}

/// A node present in the common region, addressed by its preorder position
/// in each tree.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegionPoint {
    pub left: usize,
    pub right: usize,
}

/// Largest common upper structure of `a` and `b`: the root pair, plus the
/// children of every region pair whose two nodes have equal arity. Returned
/// in preorder of `a`, root first.
pub fn common_region(a: &ExprTree, b: &ExprTree) -> Vec<RegionPoint> {
    let mut out = Vec::new();
    walk_region(a, b, 0, 0, &mut out);
    out
}

fn walk_region(
    a: &ExprTree,
    b: &ExprTree,
    ia: usize,
    ib: usize,
    out: &mut Vec<RegionPoint>,
) -> (usize, usize) {
    out.push(RegionPoint { left: ia, right: ib });
    let arity = a.nodes()[ia].arity();
    if arity != b.nodes()[ib].arity() {
        return (a.subtree_end(ia), b.subtree_end(ib));
    }
    let (mut ja, mut jb) = (ia + 1, ib + 1);
    for _ in 0..arity {
        (ja, jb) = walk_region(a, b, ja, jb, out);
    }
    (ja, jb)
}

/// Crosses one chromosome pair: picks a non-root point of the common region
/// uniformly and grafts `donor`'s subtree there into a copy of `base`.
pub fn crossover_trees<R: Rng + ?Sized>(
    base: &ExprTree,
    donor: &ExprTree,
    max_depth: usize,
    rng: &mut R,
) -> ExprTree {
    let region = common_region(base, donor);
    if region.len() < 2 {
        return base.clone();
    }
    let point = region[rng.gen_range(1..region.len())];
    let donor_end = donor.subtree_end(point.right);
    let child = base.replace_subtree(point.left, &donor.nodes()[point.right..donor_end]);
    if child.depth() > max_depth {
        base.clone()
    } else {
        child
    }
}

/// One offspring per couple with `parent1` (the chooser) as the base. A single
/// Bernoulli draw decides whether crossover happens; if so both chromosomes
/// are crossed with independent points.
pub fn one_point_crossover<R: Rng + ?Sized>(
    parent1: &Individual,
    parent2: &Individual,
    cfg: &VariationConfig,
    rng: &mut R,
) -> Individual {
    if !rng.gen_bool(cfg.crossover_prob) {
        return Individual::new(parent1.solution.clone(), parent1.preference.clone());
    }
    let solution = crossover_trees(&parent1.solution, &parent2.solution, cfg.max_depth, rng);
    let preference = crossover_trees(&parent1.preference, &parent2.preference, cfg.max_depth, rng);
    Individual::new(solution, preference)
}

/// Replaces a uniformly chosen non-root subtree with a freshly grown one.
/// Single-node trees come back unchanged.
pub fn mutate_tree<R: Rng + ?Sized>(
    tree: &ExprTree,
    cfg: &VariationConfig,
    prims: &PrimitiveSet,
    rng: &mut R,
) -> ExprTree {
    if tree.size() < 2 {
        return tree.clone();
    }
    let at = rng.gen_range(1..tree.size());
    let (lo, hi) = cfg.mutation_depth;
    let depth = rng.gen_range(lo..=hi);
    let fresh = grow_tree(prims, lo, depth, rng);
    let child = tree.replace_subtree(at, fresh.nodes());
    if child.depth() > cfg.max_depth {
        tree.clone()
    } else {
        child
    }
}

/// With probability `mutation_prob`, mutates both chromosomes (independent
/// points). Fitness is cleared only when mutation fires.
pub fn subtree_mutation<R: Rng + ?Sized>(
    individual: Individual,
    cfg: &VariationConfig,
    prims: &PrimitiveSet,
    rng: &mut R,
) -> Individual {
    if !rng.gen_bool(cfg.mutation_prob) {
        return individual;
    }
    let solution = mutate_tree(&individual.solution, cfg, prims, rng);
    let preference = mutate_tree(&individual.preference, cfg, prims, rng);
    Individual::new(solution, preference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::individual::ramped_half_and_half;
    use crate::primitives::Node;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn t(s: &str) -> ExprTree {
        s.parse().unwrap()
    }

    /// Independent nested representation used as a region oracle.
    enum Nested {
        Node(usize, Vec<Nested>),
    }

    fn nest(tree: &ExprTree) -> Nested {
        fn go(nodes: &[Node], pos: &mut usize) -> Nested {
            let n = nodes[*pos];
            *pos += 1;
            let kids = (0..n.arity()).map(|_| go(nodes, pos)).collect();
            Nested::Node(n.arity(), kids)
        }
        go(tree.nodes(), &mut 0)
    }

    fn region_paths(a: &Nested, b: &Nested, path: &mut Vec<usize>, out: &mut BTreeSet<Vec<usize>>) {
        out.insert(path.clone());
        let (Nested::Node(ka, ca), Nested::Node(kb, cb)) = (a, b);
        if ka == kb {
            for (i, (x, y)) in ca.iter().zip(cb).enumerate() {
                path.push(i);
                region_paths(x, y, path, out);
                path.pop();
            }
        }
    }

    fn path_of(tree: &ExprTree, target: usize) -> Vec<usize> {
        let mut path = Vec::new();
        let mut at = 0;
        while at != target {
            let kids = tree.children(at);
            let i = kids
                .iter()
                .rposition(|&k| k <= target)
                .expect("target inside subtree");
            path.push(i);
            at = kids[i];
        }
        path
    }

    fn oracle_region(a: &ExprTree, b: &ExprTree) -> BTreeSet<Vec<usize>> {
        let mut out = BTreeSet::new();
        region_paths(&nest(a), &nest(b), &mut Vec::new(), &mut out);
        out
    }

    fn check_against_oracle(a: &ExprTree, b: &ExprTree) {
        let region = common_region(a, b);
        let left: BTreeSet<Vec<usize>> = region.iter().map(|p| path_of(a, p.left)).collect();
        let right: BTreeSet<Vec<usize>> = region.iter().map(|p| path_of(b, p.right)).collect();
        let expected = oracle_region(a, b);
        assert_eq!(left, expected);
        assert_eq!(right, expected);
        assert_eq!(region.len(), expected.len());
        for p in &region {
            assert_eq!(path_of(a, p.left), path_of(b, p.right));
        }
    }

    #[test]
    fn region_examples() {
        let a = t("(add x (sin x))");
        let b = t("(mul (sin x) x)");
        let region = common_region(&a, &b);
        assert_eq!(
            region,
            vec![
                RegionPoint { left: 0, right: 0 },
                RegionPoint { left: 1, right: 1 },
                RegionPoint { left: 2, right: 3 },
            ]
        );
        check_against_oracle(&a, &b);

        let same = t("(add (sin x) (mul x (cos x)))");
        assert_eq!(common_region(&same, &same).len(), same.size());

        let leaf = t("x");
        assert_eq!(common_region(&leaf, &same), vec![RegionPoint { left: 0, right: 0 }]);
        assert_eq!(common_region(&same, &leaf), vec![RegionPoint { left: 0, right: 0 }]);
    }

    #[test]
    fn crossover_identical_parents() {
        let p = Individual::new(t("(add (sin x) (mul x x))"), t("(cos x)"));
        let cfg = VariationConfig {
            crossover_prob: 1.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let child = one_point_crossover(&p, &p, &cfg, &mut rng);
            assert_eq!(child.solution, p.solution);
            assert_eq!(child.preference, p.preference);
            assert_eq!(child.fitness(), None);
        }
    }

    #[test]
    fn crossover_single_terminals_copies_base() {
        let p1 = Individual::new(t("x"), t("x"));
        let p2 = Individual::new(t("y"), t("(sin y)"));
        let cfg = VariationConfig {
            crossover_prob: 1.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let child = one_point_crossover(&p1, &p2, &cfg, &mut rng);
        assert_eq!(child.solution, p1.solution);
        assert_eq!(child.preference, p1.preference);
    }

    #[test]
    fn crossover_swaps_region_subtrees() {
        let a = t("(add x (sin x))");
        let b = t("(mul (cos y) y)");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = BTreeSet::new();
        for _ in 0..200 {
            seen.insert(crossover_trees(&a, &b, 17, &mut rng).to_string());
        }
        let expected: BTreeSet<String> = ["(add (cos y) (sin x))", "(add x y)"]
            .into_iter()
            .map(String::from)
            .collect();
        assert_eq!(seen, expected);
    }

    #[test]
    fn crossover_reverts_when_too_deep() {
        let deep = t("(sin (sin (sin (sin x))))");
        let base = t("(sin (sin x))");
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // both non-root region points yield depth 5
        for _ in 0..20 {
            assert_eq!(crossover_trees(&base, &deep, 4, &mut rng), base);
            assert_eq!(crossover_trees(&base, &deep, 5, &mut rng).depth(), 5);
        }
    }

    #[test]
    fn mutation_examples() {
        let prims = PrimitiveSet::new(1);
        let cfg = VariationConfig {
            mutation_prob: 1.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let leaf = Individual::new(t("x"), t("x"));
        for _ in 0..20 {
            let m = subtree_mutation(leaf.clone(), &cfg, &prims, &mut rng);
            assert_eq!(m.solution, leaf.solution);
            assert_eq!(m.preference, leaf.preference);
        }
        // every possible regrown subtree overshoots a cap of 3 here
        let tree = t("(sin (sin x))");
        let tight = VariationConfig {
            mutation_prob: 1.0,
            mutation_depth: (3, 3),
            max_depth: 3,
            ..Default::default()
        };
        for _ in 0..50 {
            assert_eq!(mutate_tree(&tree, &tight, &prims, &mut rng), tree);
        }

        let mut chain = "x".to_string();
        for _ in 0..16 {
            chain = format!("(sin {chain})");
        }
        let chain = t(&chain);
        assert_eq!(chain.depth(), 17);
        for _ in 0..200 {
            let m = mutate_tree(&chain, &cfg, &prims, &mut rng);
            assert!(m.depth() <= 17);
            assert_eq!(m.root(), chain.root());
        }
    }

    #[test]
    fn probability_zero_is_identity() {
        let prims = PrimitiveSet::new(2);
        let cfg = VariationConfig {
            crossover_prob: 0.0,
            mutation_prob: 0.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let trees = ramped_half_and_half(40, 2, 6, &prims, &mut rng);
        for pair in trees.chunks(4) {
            let p1 = Individual::new(pair[0].clone(), pair[1].clone());
            let p2 = Individual::new(pair[2].clone(), pair[3].clone());
            let child = one_point_crossover(&p1, &p2, &cfg, &mut rng);
            let child = subtree_mutation(child, &cfg, &prims, &mut rng);
            assert_eq!(child.solution, p1.solution);
            assert_eq!(child.preference, p1.preference);
        }
    }

    #[test]
    fn depth_cap_over_many_applications() {
        let prims = PrimitiveSet::new(2);
        let cfg = VariationConfig {
            crossover_prob: 1.0,
            mutation_prob: 0.5,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sols = ramped_half_and_half(64, 2, 6, &prims, &mut rng);
        let prefs = ramped_half_and_half(64, 2, 6, &prims, &mut rng);
        let mut pool: Vec<Individual> =
            sols.into_iter().zip(prefs).map(|(s, p)| Individual::new(s, p)).collect();
        for step in 0..100_000 {
            let i = rng.gen_range(0..pool.len());
            let j = rng.gen_range(0..pool.len());
            let child = one_point_crossover(&pool[i], &pool[j], &cfg, &mut rng);
            let child = subtree_mutation(child, &cfg, &prims, &mut rng);
            assert!(child.solution.depth() <= 17, "step {step}");
            assert!(child.preference.depth() <= 17, "step {step}");
            assert_eq!(child.solution.root(), pool[i].solution.root());
            assert_eq!(child.preference.root(), pool[i].preference.root());
            // keep the pool from collapsing to enormous trees
            let slot = rng.gen_range(0..pool.len());
            if child.solution.size() < 2_000 && child.preference.size() < 2_000 {
                pool[slot] = child;
            }
        }
    }

    #[test]
    fn validate_rejects_bad_values() {
        let ok = VariationConfig::default();
        assert!(ok.validate().is_ok());
        assert!(VariationConfig { crossover_prob: 1.5, ..ok }.validate().is_err());
        assert!(VariationConfig { mutation_prob: -0.1, ..ok }.validate().is_err());
        assert!(VariationConfig { max_depth: 0, ..ok }.validate().is_err());
        assert!(VariationConfig { mutation_depth: (3, 2), ..ok }.validate().is_err());
    }

    fn random_tree(seed: u64, depth: usize, vars: u8) -> ExprTree {
        let prims = PrimitiveSet::new(vars);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ramped_half_and_half(2, 1, depth, &prims, &mut rng).swap_remove((seed % 2) as usize)
    }

    proptest! {
        #[test]
        fn region_matches_oracle(sa in any::<u64>(), sb in any::<u64>(), da in 1usize..8, db in 1usize..8) {
            let a = random_tree(sa, da, 2);
            let b = random_tree(sb, db, 2);
            check_against_oracle(&a, &b);
            prop_assert_eq!(common_region(&a, &a).len(), a.size());
            let forward: BTreeSet<(usize, usize)> =
                common_region(&a, &b).iter().map(|p| (p.left, p.right)).collect();
            let backward: BTreeSet<(usize, usize)> =
                common_region(&b, &a).iter().map(|p| (p.right, p.left)).collect();
            prop_assert_eq!(forward, backward);
        }

        #[test]
        fn offspring_inherit_base_root(sa in any::<u64>(), sb in any::<u64>(), seed in any::<u64>()) {
            let a = random_tree(sa, 6, 1);
            let b = random_tree(sb, 6, 1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let child = crossover_trees(&a, &b, 17, &mut rng);
            prop_assert_eq!(child.root(), a.root());
            prop_assert!(child.depth() <= 17);
            let cfg = VariationConfig { mutation_prob: 1.0, ..Default::default() };
            let m = mutate_tree(&child, &cfg, &PrimitiveSet::new(1), &mut rng);
            prop_assert_eq!(m.root(), a.root());
        }
    }
}
