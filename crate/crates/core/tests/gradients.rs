use mogan_core::mogan::{feature_matching_loss, DiscriminatorNet, GeneratorNet};
use mogan_core::ndcore::{grad_check, softmax_cross_entropy, GradCheckReport, Layer, Network, Tensor};
use mogan_core::rng::{seeded, sub_seed, Rng};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

const TRIALS: u64 = 100;
const EPS: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn normal(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// `0.5 * ||y - t||^2` with a fixed random target.
fn quadratic(target: Vec<f64>) -> impl Fn(&Tensor) -> (f64, Tensor) {
    move |y: &Tensor| {
        let d: Vec<f64> = y.data().iter().zip(&target).map(|(a, b)| a - b).collect();
        let loss = 0.5 * d.iter().map(|v| v * v).sum::<f64>();
        (loss, Tensor::new(y.shape().to_vec(), d).unwrap())
    }
}

fn check(net: &Network, x: &Tensor, rng: &mut Rng) -> GradCheckReport {
    let out: usize = net.forward(x).unwrap().len();
    grad_check(net, x, quadratic(normal(rng, out)), EPS).unwrap()
}

fn assert_suite(name: &str, mut trial: impl FnMut(&mut Rng) -> GradCheckReport) {
    let mut worst: f64 = 0.0;
    for t in 0..TRIALS {
        let mut rng = seeded(sub_seed(0x6EAD, t));
        let r = trial(&mut rng);
        assert!(r.failure.is_none(), "{name} trial {t}: {:?}", r.failure);
        assert!(r.max_rel_error <= TOL, "{name} trial {t}: rel error {}", r.max_rel_error);
        worst = worst.max(r.max_rel_error);
    }
    eprintln!("{name}: worst relative error {worst:.2e} over {TRIALS} trials");
}

#[test]
fn dense_gradients() {
    assert_suite("dense", |rng| {
        let (i, o) = (rng.random_range(1..7), rng.random_range(1..7));
        let net = Network::new(vec![Layer::dense(i, o, rng).unwrap()]);
        let x = Tensor::from_vec(normal(rng, i));
        check(&net, &x, rng)
    });
}

#[test]
fn prelu_gradients() {
    assert_suite("prelu", |rng| {
        let (c, g) = (rng.random_range(1..5), rng.random_range(1..5));
        let mut layer = Layer::prelu(c).unwrap();
        for a in layer.params_mut()[0].data_mut() {
            *a = rng.random_range(-0.5..0.5);
        }
        // keep inputs away from the kink
        let x: Vec<f64> = (0..c * g)
            .map(|_| {
                let m = rng.random_range(0.05..2.0);
                if rng.random_bool(0.5) {
                    m
                } else {
                    -m
                }
            })
            .collect();
        check(&Network::new(vec![layer]), &Tensor::from_vec(x), rng)
    });
}

#[test]
fn instance_norm_gradients() {
    assert_suite("instance_norm", |rng| {
        let c = rng.random_range(1..4);
        let l = rng.random_range(2..9);
        let x = if rng.random_bool(0.5) {
            Tensor::from_vec(normal(rng, l))
        } else {
            Tensor::new(vec![c, l], normal(rng, c * l)).unwrap()
        };
        check(&Network::new(vec![Layer::instance_norm(1e-5).unwrap()]), &x, rng)
    });
}

#[test]
fn conv_transpose_gradients() {
    assert_suite("conv_transpose1d", |rng| {
        let (ci, co) = (rng.random_range(1..4), rng.random_range(1..4));
        let k = rng.random_range(1..5);
        let s = rng.random_range(1..4);
        let p = rng.random_range(0..(k + 1) / 2);
        let l = rng.random_range(1..6);
        let layer = Layer::conv_transpose1d(ci, co, k, s, p, rng).unwrap();
        let x = Tensor::new(vec![ci, l], normal(rng, ci * l)).unwrap();
        check(&Network::new(vec![layer]), &x, rng)
    });
}

#[test]
fn softmax_head_gradients() {
    assert_suite("softmax_head", |rng| {
        let k = rng.random_range(2..7);
        let x = Tensor::from_vec(normal(rng, k));
        check(&Network::new(vec![Layer::softmax_head(k).unwrap()]), &x, rng)
    });
}

#[test]
fn stacked_generator_stage_gradients() {
    assert_suite("dense+norm+prelu+convT", |rng| {
        let net = Network::new(vec![
            Layer::dense(3, 8, rng).unwrap(),
            Layer::instance_norm(1e-5).unwrap(),
            Layer::prelu(2).unwrap(),
            Layer::conv_transpose1d(2, 2, 4, 2, 1, rng).unwrap(),
        ]);
        let x = Tensor::from_vec(normal(rng, 3));
        check(&net, &x, rng)
    });
}

#[test]
fn cross_entropy_through_discriminator() {
    assert_suite("k+1 cross-entropy", |rng| {
        let k = rng.random_range(1..4);
        let width = rng.random_range(2..6);
        let d = DiscriminatorNet::mlp(width, k, &[5, 3], rng).unwrap();
        let mut layers = d.body().layers().to_vec();
        layers.extend(d.head().layers().iter().cloned());
        let net = Network::new(layers);
        let target = rng.random_range(0..=k);
        let x = Tensor::from_vec(normal(rng, width));
        grad_check(&net, &x, |y| softmax_cross_entropy(y, target).unwrap(), EPS).unwrap()
    });
}

#[test]
fn feature_matching_through_tiny_generator() {
    assert_suite("feature matching", |rng| {
        let (k, width, latent) = (3, 4, 2);
        let g = GeneratorNet::mlp(latent, k, width, &[5], rng).unwrap();
        let d = DiscriminatorNet::mlp(width, k, &[6, 3], rng).unwrap();
        let reals: Vec<Vec<f64>> = (0..4).map(|_| normal(rng, width)).collect();
        let real_refs: Vec<&[f64]> = reals.iter().map(Vec::as_slice).collect();
        let z = normal(rng, latent);
        let x = g.input(&z, rng.random_range(0..k)).unwrap();
        grad_check(
            g.network(),
            &x,
            |y| {
                let fm = feature_matching_loss(&d, &real_refs, &[y.data()]).unwrap();
                (fm.loss, Tensor::new(y.shape().to_vec(), fm.fake_input_grads[0].clone()).unwrap())
            },
            EPS,
        )
        .unwrap()
    });
}
