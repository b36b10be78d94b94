use ictlab_core::data::{gen_two_moons, sample_diverse, split_semisupervised, Sampler};
use ictlab_core::rng::{stream, Stream};
use ictlab_core::trainer::{DatasetKind, DatasetSpec, Experiment};
use ictlab_core::{Matrix, Method, TrainConfig};
use rand::seq::index::sample;

fn min_pairwise(points: &Matrix, idx: &[usize]) -> f64 {
    let mut best = f64::INFINITY;
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            let d: f64 = points
                .row(i)
                .iter()
                .zip(points.row(j))
                .map(|(x, y)| (x - y).powi(2))
                .sum();
            best = best.min(d.sqrt());
        }
    }
    best
}

#[test]
fn diverse_subsets_are_spread_wider_than_random_ones() {
    for k in [3, 10] {
        let mut wins = 0;
        for seed in 0..100 {
            let mut rng = stream(seed, Stream::Dataset);
            let data = gen_two_moons(500, 0.1, &mut rng).unwrap();
            let diverse = min_pairwise(&data.points, &sample_diverse(&data.points, k).unwrap());
            let mut draw = stream(seed, Stream::Split);
            let expected = (0..200)
                .map(|_| min_pairwise(&data.points, &sample(&mut draw, data.len(), k).into_vec()))
                .sum::<f64>()
                / 200.0;
            wins += usize::from(diverse >= expected);
        }
        assert!(wins >= 95, "k={k}: diverse wins {wins}/100");
    }
}

#[test]
fn generators_and_splits_repeat_under_a_seed() {
    let once = |seed| {
        let data = gen_two_moons(200, 0.1, &mut stream(seed, Stream::Dataset)).unwrap();
        split_semisupervised(
            &data,
            2,
            5,
            40,
            Sampler::Random,
            &mut stream(seed, Stream::Split),
        )
        .unwrap()
    };
    assert_eq!(once(3), once(3));
    assert_ne!(once(3).labeled_indices, once(4).labeled_indices);
}

#[test]
fn erm_loss_falls_on_separable_blobs() {
    let cfg = TrainConfig {
        method: Method::Erm,
        total_steps: 10_000,
        hidden: vec![32, 32],
        dataset: DatasetSpec {
            kind: DatasetKind::Blobs,
            n_points: 600,
            n_labeled: 30,
            n_test: 150,
            ..Default::default()
        },
        ..Default::default()
    };
    let mut exp = Experiment::new(cfg).unwrap();
    let losses: Vec<f64> = (0..10_000)
        .map(|_| exp.advance().unwrap().sup_loss)
        .collect();
    let blocks: Vec<f64> = losses
        .chunks(500)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    let falling = blocks.windows(2).filter(|w| w[1] <= w[0]).count();
    assert!(
        falling as f64 >= 0.9 * (blocks.len() - 1) as f64,
        "{falling}/{} windows non-increasing: {blocks:?}",
        blocks.len() - 1
    );
    assert!(exp.test_accuracy().unwrap() >= 0.99);
}
