use ictlab_core::mixup::mix_rows;
use ictlab_core::mixup::{
    ict_loss, mixup_supervised_batch, sample_dirichlet, supervised_loss, Batch, ConsistencySpace,
    DirichletParams, IctOptions, MixWeights,
};
use ictlab_core::netcore::gradcheck::{
    numeric_gradient, random_net, relative_error, NumericGradient,
};
use ictlab_core::{Matrix, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NETS: usize = 100;
/// Nets whose finite differences straddle a ReLU kink are redrawn, up to this many.
const MAX_REDRAWS: usize = 20;
const H: f64 = 1e-5;
const TOL: f64 = 1e-5;
const FLOOR: f64 = 1e-10;

fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| rng.random_range(-2.0..2.0))
            .collect(),
    )
    .unwrap()
}

fn simplex_rows(rows: usize, k: usize, rng: &mut impl Rng) -> Vec<MixWeights> {
    let p = DirichletParams::new(1.0, k).unwrap();
    (0..rows)
        .map(|_| sample_dirichlet(p, rng).unwrap())
        .collect()
}

fn targets(rows: usize, classes: usize, rng: &mut impl Rng) -> Matrix {
    let w = simplex_rows(rows, classes, rng);
    Matrix::from_rows(&w.iter().map(|m| m.as_slice().to_vec()).collect::<Vec<_>>()).unwrap()
}

struct Case {
    net: Network,
    rows: usize,
    classes: usize,
    rng: ChaCha8Rng,
}

fn cases(seed: u64) -> impl Iterator<Item = Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::iter::repeat_with(move || {
        let input = rng.random_range(1..=4);
        let classes = rng.random_range(2..=5);
        let net = random_net(input, classes, 4, 16, &mut rng);
        let rows = rng.random_range(1..=6);
        Case {
            net,
            rows,
            classes,
            rng: ChaCha8Rng::seed_from_u64(rng.random()),
        }
    })
}

/// Runs `check` on fresh nets until `NETS` of them give a valid oracle.
fn check_nets(
    what: &str,
    seed: u64,
    mut check: impl FnMut(&mut Case) -> (Vec<f64>, NumericGradient),
) {
    let (mut valid, mut redrawn) = (0, 0);
    for (i, mut c) in cases(seed).enumerate() {
        let (analytic, numeric) = check(&mut c);
        if numeric.kink_crossed {
            redrawn += 1;
            assert!(
                redrawn <= MAX_REDRAWS,
                "{what}: too many nets straddle a kink"
            );
            continue;
        }
        let err = relative_error(&analytic, &numeric.values, FLOOR);
        assert!(err < TOL, "{what} net {i}: relative error {err:e}");
        valid += 1;
        if valid == NETS {
            break;
        }
    }
}

#[test]
fn cross_entropy_gradients_match_finite_differences() {
    check_nets("cross-entropy", 1, |c| {
        let x = random_matrix(c.rows, c.net.input_dim(), &mut c.rng);
        let t = targets(c.rows, c.classes, &mut c.rng);
        let (_, g) = supervised_loss(&c.net.logits(&x).unwrap(), &t).unwrap();
        let analytic = c.net.backward(&x, &g).unwrap().to_flat();
        let numeric = numeric_gradient(&c.net, H, &[&x], |n| {
            Ok(supervised_loss(&n.logits(&x)?, &t)?.0)
        })
        .unwrap();
        (analytic, numeric)
    });
}

#[test]
fn mixup_gradients_match_finite_differences() {
    check_nets("mixup", 2, |c| {
        let k = c.rng.random_range(2..=5);
        let batches: Vec<Batch> = (0..k)
            .map(|_| Batch {
                inputs: random_matrix(c.rows, c.net.input_dim(), &mut c.rng),
                targets: targets(c.rows, c.classes, &mut c.rng),
            })
            .collect();
        let w = simplex_rows(c.rows, k, &mut c.rng);
        let loss = |n: &Network| {
            let m = mixup_supervised_batch(&batches, &w)?;
            supervised_loss(&n.logits(&m.inputs)?, &m.targets)
        };
        let m = mixup_supervised_batch(&batches, &w).unwrap();
        let (_, g) = loss(&c.net).unwrap();
        let analytic = c.net.backward(&m.inputs, &g).unwrap().to_flat();
        let numeric = numeric_gradient(&c.net, H, &[&m.inputs], |n| Ok(loss(n)?.0)).unwrap();
        (analytic, numeric)
    });
}

fn check_ict(seed: u64, space: ConsistencySpace) {
    let opts = IctOptions {
        space,
        ..IctOptions::default()
    };
    check_nets("ict", seed, |c| {
        let k = c.rng.random_range(2..=5);
        let u: Vec<Matrix> = (0..k)
            .map(|_| random_matrix(c.rows, c.net.input_dim(), &mut c.rng))
            .collect();
        let w = simplex_rows(c.rows, k, &mut c.rng);
        let analytic = ict_loss(&c.net, &u, &w, opts).unwrap().grads.to_flat();
        let refs: Vec<&Matrix> = u.iter().collect();
        let mixed = mix_rows(&w, &refs).unwrap();
        let mut watch = refs.clone();
        watch.push(&mixed);
        let numeric =
            numeric_gradient(&c.net, H, &watch, |n| Ok(ict_loss(n, &u, &w, opts)?.value)).unwrap();
        (analytic, numeric)
    });
}

#[test]
fn ict_gradients_match_finite_differences_on_logits() {
    check_ict(3, ConsistencySpace::Logits);
}

#[test]
fn ict_gradients_match_finite_differences_on_softmax() {
    check_ict(4, ConsistencySpace::Softmax);
}
