use obliq::alternating::{alternating_gradient, alternating_objective};
use obliq::em::{e_step, split_gradient, split_objective, PosteriorMatrix};
use obliq::testutil::{random_samples, random_tree};
use obliq::{Regularizer, SampleSet, Steepness, Tree};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// Largest relative error between an analytic gradient and central differences of `f`.
fn check(tree: &Tree, analytic: &[Vec<f64>], f: impl Fn(&Tree) -> f64) -> f64 {
    let mut worst = 0.0f64;
    for (i, g) in analytic.iter().enumerate() {
        for j in 0..g.len() {
            let mut plus = tree.clone();
            plus.split_beta_mut(i)[j] += STEP;
            let mut minus = tree.clone();
            minus.split_beta_mut(i)[j] -= STEP;
            let fd = (f(&plus) - f(&minus)) / (2.0 * STEP);
            worst = worst.max(relative_error(g[j], fd));
        }
    }
    worst
}

struct Instance {
    tree: Tree,
    data: SampleSet,
    gamma: Steepness,
    reg: Option<Regularizer>,
}

fn instance(rng: &mut ChaCha8Rng) -> Instance {
    let (h, w) = (rng.gen_range(1..=2), rng.gen_range(1..=4));
    let p = h * w;
    let k = rng.gen_range(2..=4);
    let depth = rng.gen_range(1..=4);
    let tree = random_tree(rng, p, k, depth);
    let n = rng.gen_range(5..40);
    let data = random_samples(rng, n, p, k);
    let lambda = if rng.gen_bool(0.5) { 0.0 } else { 0.1 };
    Instance {
        tree,
        data,
        gamma: Steepness::soft(rng.gen_range(0.2..3.0)).unwrap(),
        reg: (lambda > 0.0).then(|| Regularizer::new(lambda, h, w).unwrap()),
    }
}

#[test]
fn em_split_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for _ in 0..50 {
        let inst = instance(&mut rng);
        let h: PosteriorMatrix = e_step(&inst.tree, &inst.data, inst.gamma).unwrap();
        let g = split_gradient(&inst.tree, &h, &inst.data, inst.gamma, inst.reg.as_ref()).unwrap();
        let err = check(&inst.tree, &g, |t| {
            split_objective(t, &h, &inst.data, inst.gamma, inst.reg.as_ref()).unwrap()
        });
        assert!(err < 1e-5, "relative error {err}");
    }
}

#[test]
fn alternating_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    for _ in 0..50 {
        let inst = instance(&mut rng);
        let g = alternating_gradient(&inst.tree, &inst.data, inst.gamma, inst.reg.as_ref()).unwrap();
        let err = check(&inst.tree, &g, |t| {
            alternating_objective(t, &inst.data, inst.gamma, inst.reg.as_ref()).unwrap()
        });
        assert!(err < 1e-5, "relative error {err}");
    }
}

#[test]
fn zero_lambda_changes_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    for _ in 0..20 {
        let inst = instance(&mut rng);
        let p = inst.tree.feature_dim();
        let zero = Regularizer::new(0.0, 1, p).unwrap();
        let h = e_step(&inst.tree, &inst.data, inst.gamma).unwrap();
        let a = split_gradient(&inst.tree, &h, &inst.data, inst.gamma, None).unwrap();
        let b = split_gradient(&inst.tree, &h, &inst.data, inst.gamma, Some(&zero)).unwrap();
        assert_eq!(a, b);
        let fa = split_objective(&inst.tree, &h, &inst.data, inst.gamma, None).unwrap();
        let fb = split_objective(&inst.tree, &h, &inst.data, inst.gamma, Some(&zero)).unwrap();
        assert_eq!(fa.to_bits(), fb.to_bits());
    }
}
