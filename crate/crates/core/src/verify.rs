//! Finite-difference verification of every backward pass, in f64.
//!
//! Each case draws random instances, differentiates a random projection
//! `Σ y ⊙ r` of the operation's output analytically and compares against
//! central differences with [`H`] and [`TOL`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::netspec::{build_model, parse_spec, BuildOptions, Layer, Model, Source, Trace};
use crate::optim::{penalty_grad, regularized_loss};
use crate::tensor::{
    batchnorm_backward, batchnorm_forward, conv2d_backward, conv2d_forward, dropout,
    dropout_backward, global_avg_pool, global_avg_pool_backward, grad_check, maxpool2d,
    maxpool2d_backward, relu, relu_backward, softmax_cross_entropy, BatchNormState, Mode, Padding,
    Tensor,
};

pub const H: f64 = 1e-5;
pub const TOL: f64 = 1e-4;

/// Outcome of one case over all of its instances.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseReport {
    pub name: &'static str,
    pub instances: usize,
    /// Individual gradient tensors compared.
    pub checks: usize,
    pub max_rel_error: f64,
    pub failures: Vec<String>,
}

impl CaseReport {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            instances: 0,
            checks: 0,
            max_rel_error: 0.0,
            failures: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn check(
        &mut self,
        tag: &str,
        f: impl FnMut(&Tensor<f64>) -> Result<f64>,
        x: &Tensor<f64>,
        g: &Tensor<f64>,
    ) -> Result<()> {
        let r = grad_check(f, x, g, H, TOL)?;
        self.checks += 1;
        self.max_rel_error = self.max_rel_error.max(r.max_rel_error);
        if !r.passed {
            self.failures.push(format!(
                "{tag}: rel error {:.3e} at entry {}",
                r.max_rel_error, r.worst_index
            ));
        }
        Ok(())
    }
}

fn randn(shape: &[usize], rng: &mut ChaCha8Rng) -> Result<Tensor<f64>> {
    Tensor::randn(shape, 1.0, rng)
}

fn project(y: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

/// Moves values off a kink at 0.
fn off_zero(t: Tensor<f64>) -> Tensor<f64> {
    t.map(|v| if v.abs() < 1e-2 { v + 0.1 } else { v })
}

/// Stride-2 same-padded conv of a 1×8×8×3 input with a 3×3×3×4 kernel.
pub fn conv_example() -> Result<CaseReport> {
    let mut rep = CaseReport::new("conv2d 1x8x8x3 stride 2");
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = randn(&[1, 8, 8, 3], &mut rng)?;
    let k = randn(&[3, 3, 3, 4], &mut rng)?;
    let y = conv2d_forward(&x, &k, 2, Padding::Same)?;
    let r = randn(y.shape(), &mut rng)?;
    let g = conv2d_backward(&x, &k, 2, Padding::Same, &r)?;
    rep.check("input", |t| Ok(project(&conv2d_forward(t, &k, 2, Padding::Same)?, &r)), &x, &g.d_input)?;
    rep.check("kernel", |t| Ok(project(&conv2d_forward(&x, t, 2, Padding::Same)?, &r)), &k, &g.d_params[0])?;
    rep.instances = 1;
    Ok(rep)
}

pub fn conv(instances: u64) -> Result<CaseReport> {
    let mut rep = CaseReport::new("conv2d");
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let n = rng.random_range(1..=2);
        let (h, w) = (rng.random_range(3..=7), rng.random_range(3..=7));
        let cin = rng.random_range(1..=3);
        let cout = rng.random_range(1..=3);
        let ks = [1usize, 3, 5];
        let kk = ks[rng.random_range(0..3)].min(h.min(w));
        let stride = rng.random_range(1..=2);
        let padding = if rng.random() { Padding::Same } else { Padding::Valid };
        let x = randn(&[n, h, w, cin], &mut rng)?;
        let k = randn(&[kk, kk, cin, cout], &mut rng)?;
        let y = conv2d_forward(&x, &k, stride, padding)?;
        let r = randn(y.shape(), &mut rng)?;
        let g = conv2d_backward(&x, &k, stride, padding, &r)?;
        let tag = format!("seed {seed} {:?} k{kk} s{stride} {padding:?}", x.shape());
        rep.check(&tag, |t| Ok(project(&conv2d_forward(t, &k, stride, padding)?, &r)), &x, &g.d_input)?;
        rep.check(&tag, |t| Ok(project(&conv2d_forward(&x, t, stride, padding)?, &r)), &k, &g.d_params[0])?;
        rep.instances += 1;
    }
    Ok(rep)
}

pub fn maxpool(instances: u64) -> Result<CaseReport> {
    let mut rep = CaseReport::new("maxpool2d");
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let x = randn(&[2, rng.random_range(2..=7), rng.random_range(2..=7), 2], &mut rng)?;
        let (y, idx) = maxpool2d(&x, 2, 2)?;
        let r = randn(y.shape(), &mut rng)?;
        let g = maxpool2d_backward(&idx, &r)?;
        rep.check(&format!("seed {seed}"), |t| Ok(project(&maxpool2d(t, 2, 2)?.0, &r)), &x, &g)?;
        rep.instances += 1;
    }
    Ok(rep)
}

/// Train-mode batch norm; input, gamma and beta.
pub fn batchnorm(instances: u64) -> Result<CaseReport> {
    let mut rep = CaseReport::new("batchnorm");
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let c = rng.random_range(1..=4);
        let x = randn(&[rng.random_range(2..=4), 3, 3, c], &mut rng)?;
        let mut state = BatchNormState::<f64>::new(c)?;
        state.gamma = randn(&[c], &mut rng)?;
        state.beta = randn(&[c], &mut rng)?;
        let (y, cache) = batchnorm_forward(&x, &mut state.clone(), Mode::Train)?;
        let r = randn(y.shape(), &mut rng)?;
        let g = batchnorm_backward(&cache, &state, &r)?;
        let tag = format!("seed {seed}");
        let st = &state;
        rep.check(
            &tag,
            |t| Ok(project(&batchnorm_forward(t, &mut st.clone(), Mode::Train)?.0, &r)),
            &x,
            &g.d_input,
        )?;
        rep.check(
            &tag,
            |t| {
                let mut s = st.clone();
                s.gamma = t.clone();
                Ok(project(&batchnorm_forward(&x, &mut s, Mode::Train)?.0, &r))
            },
            &state.gamma,
            &g.d_params[0],
        )?;
        rep.check(
            &tag,
            |t| {
                let mut s = st.clone();
                s.beta = t.clone();
                Ok(project(&batchnorm_forward(&x, &mut s, Mode::Train)?.0, &r))
            },
            &state.beta,
            &g.d_params[1],
        )?;
        rep.instances += 1;
    }
    Ok(rep)
}

pub fn relu_case(instances: u64) -> Result<CaseReport> {
    let mut rep = CaseReport::new("relu");
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
        let x = off_zero(randn(&[30], &mut rng)?);
        let r = randn(&[30], &mut rng)?;
        let g = relu_backward(&x, &r)?;
        rep.check(&format!("seed {seed}"), |t| Ok(project(&relu(t), &r)), &x, &g)?;
        rep.instances += 1;
    }
    Ok(rep)
}

pub fn softmax_ce(instances: u64) -> Result<CaseReport> {
    let mut rep = CaseReport::new("softmax cross-entropy");
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let (n, c) = (rng.random_range(1..=5), rng.random_range(2..=10));
        let x = randn(&[n, c], &mut rng)?.scale(3.0);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let (_, g) = softmax_cross_entropy(&x, &labels)?;
        rep.check(&format!("seed {seed}"), |t| Ok(softmax_cross_entropy(t, &labels)?.0), &x, &g)?;
        rep.instances += 1;
    }
    Ok(rep)
}

pub fn global_avg_pool_case(instances: u64) -> Result<CaseReport> {
    let mut rep = CaseReport::new("global average pool");
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let x = randn(&[2, rng.random_range(1..=4), rng.random_range(1..=4), 3], &mut rng)?;
        let r = randn(&[2, 1, 1, 3], &mut rng)?;
        let g = global_avg_pool_backward(x.shape(), &r)?;
        rep.check(&format!("seed {seed}"), |t| Ok(project(&global_avg_pool(t)?, &r)), &x, &g)?;
        rep.instances += 1;
    }
    Ok(rep)
}

/// Dropout with a fixed mask (same mask seed for every probe).
pub fn dropout_case(instances: u64) -> Result<CaseReport> {
    let mut rep = CaseReport::new("dropout");
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(700 + seed);
        let x = randn(&[40], &mut rng)?;
        let r = randn(&[40], &mut rng)?;
        let fwd = |t: &Tensor<f64>| {
            let mut mask_rng = ChaCha8Rng::seed_from_u64(seed);
            dropout(t, 0.3, &mut mask_rng, Mode::Train)
        };
        let (_, mask) = fwd(&x)?;
        let g = dropout_backward(&mask, &r)?;
        rep.check(&format!("seed {seed}"), |t| Ok(project(&fwd(t)?.0, &r)), &x, &g)?;
        rep.instances += 1;
    }
    Ok(rep)
}

/// L1 + squared-L2 penalty, weights away from 0.
pub fn penalties(instances: u64) -> Result<CaseReport> {
    let mut rep = CaseReport::new("l1/l2 penalty");
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(800 + seed);
        let w = off_zero(randn(&[25], &mut rng)?);
        let (l1, l2) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        let g = penalty_grad(&w, l1, l2);
        rep.check(&format!("seed {seed}"), |t| Ok(regularized_loss(0.0, &[t], l1, l2)), &w, &g)?;
        rep.instances += 1;
    }
    Ok(rep)
}

const NET: &str = "\
input: 8 x 8 x 2
c1: conv3x3, 3
c2: conv3x3, 2, 4
s: conv1x1, 2, 4 <- c1
a: c2 + s
p: max_pool
d: dropout 0.25
out: 1 x conv1x1, 1, 3
";

fn model_loss(model: &mut Model<f64>, x: &Tensor<f64>, labels: &[usize], seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trace = model.forward(x, Mode::Train, &mut rng)?;
    Ok(softmax_cross_entropy(trace.logits(), labels)?.0)
}

/// Smallest distance of any pre-ReLU value from 0, and of any max-pool
/// window's winner from its runner-up. Finite differences are only
/// meaningful when both exceed the probe step by a wide margin.
fn kink_margin(model: &Model<f64>, trace: &Trace<f64>) -> Result<f64> {
    let mut margin = f64::INFINITY;
    for node in model.nodes() {
        let input = match node.inputs[0] {
            Source::Input => trace.input(),
            Source::Node(j) => trace.node_output(j),
        };
        match node.layer {
            Layer::Relu => {
                for v in input.data() {
                    margin = margin.min(v.abs());
                }
            }
            Layer::MaxPool => {
                let (n, h, w, c) = input.dims4()?;
                let at = |b: usize, y: usize, x: usize, ch: usize| input.data()[((b * h + y) * w + x) * c + ch];
                for b in 0..n {
                    for oy in 0..h / 2 {
                        for ox in 0..w / 2 {
                            for ch in 0..c {
                                let mut win = [
                                    at(b, 2 * oy, 2 * ox, ch),
                                    at(b, 2 * oy, 2 * ox + 1, ch),
                                    at(b, 2 * oy + 1, 2 * ox, ch),
                                    at(b, 2 * oy + 1, 2 * ox + 1, ch),
                                ];
                                win.sort_by(|a, b| b.total_cmp(a));
                                // Windows of ReLU zeros are flat, not kinked.
                                if win[0] > 0.0 {
                                    margin = margin.min(win[0] - win[1]);
                                }
                            }
                        }
                    }
                }
            }
            _ => {}
        }
    }
    Ok(margin)
}

/// Whole network (conv, batch norm, ReLU, residual add, max pool, dropout,
/// global pooling, loss) against its input and every parameter. Instances
/// with an activation within 1e-3 of a ReLU or max-pool kink are redrawn.
pub fn whole_model(instances: u64) -> Result<CaseReport> {
    let mut rep = CaseReport::new("whole model");
    let spec = parse_spec(NET)?;
    let mut seed = 0;
    while (rep.instances as u64) < instances {
        seed += 1;
        if seed > 4 * instances.max(1) {
            rep.failures.push(format!("too many instances rejected: {seed}"));
            break;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
        let mut model = build_model::<f64, _>(&spec, &mut rng, BuildOptions::default())?;
        // Move batch-norm affine parameters off their initial values.
        for (_, p) in model.params_mut() {
            if p.rank() == 1 {
                *p = Tensor::randn(p.shape(), 0.5, &mut rng)?.map(|v| v + 1.0);
            }
        }
        let x = randn(&[3, 8, 8, 2], &mut rng)?;
        let labels: Vec<usize> = (0..3).map(|_| rng.random_range(0..3)).collect();

        let mut fwd_rng = ChaCha8Rng::seed_from_u64(seed);
        let trace = model.forward(&x, Mode::Train, &mut fwd_rng)?;
        if kink_margin(&model, &trace)? < 1e-3 {
            continue;
        }
        let (_, d_logits) = softmax_cross_entropy(trace.logits(), &labels)?;
        let (grads, d_input) = model.backward(&trace, &d_logits)?;

        let mut probe = model.clone();
        rep.check(
            &format!("input seed {seed}"),
            |t| model_loss(&mut probe, t, &labels, seed),
            &x,
            &d_input,
        )?;
        let params: Vec<Tensor<f64>> = model.params().into_iter().map(|(_, t)| t.clone()).collect();
        for (p, (value, grad)) in params.iter().zip(&grads).enumerate() {
            let mut probe = model.clone();
            rep.check(
                &format!("param {p} seed {seed}"),
                |t| {
                    *probe.params_mut()[p].1 = t.clone();
                    model_loss(&mut probe, &x, &labels, seed)
                },
                value,
                grad,
            )?;
        }
        rep.instances += 1;
    }
    Ok(rep)
}

/// Every case with `instances` random instances each.
pub fn all_cases(instances: u64) -> Result<Vec<CaseReport>> {
    Ok(vec![
        conv_example()?,
        conv(instances)?,
        maxpool(instances)?,
        batchnorm(instances)?,
        relu_case(instances)?,
        softmax_ce(instances)?,
        global_avg_pool_case(instances)?,
        dropout_case(instances)?,
        penalties(instances)?,
        whole_model(instances)?,
    ])
}
