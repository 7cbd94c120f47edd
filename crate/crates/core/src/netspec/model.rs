use rand::{Rng, SeedableRng};

use super::{BlockKind, NetSpec, Pred, Shape3, CONV_PADDING};
use crate::error::{shape_err, Error, Result};
use crate::tensor::{
    batchnorm_backward, batchnorm_forward, conv2d_backward, conv2d_forward, dropout,
    dropout_backward, global_avg_pool, global_avg_pool_backward, maxpool2d, maxpool2d_backward,
    relu, relu_backward, BatchNormCache, BatchNormState, DropoutMask, Element, Mode, PoolIndices,
    Tensor, POOL_STRIDE, POOL_WINDOW,
};

/// Switches applied when lowering a spec to layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    pub batch_norm: bool,
    pub dropout: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            batch_norm: true,
            dropout: true,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Layer<T: Element = f32> {
    Conv { kernel: Tensor<T>, stride: usize },
    BatchNorm(BatchNormState<T>),
    Relu,
    MaxPool,
    Dropout { rate: f64 },
    Add,
    GlobalAvgPool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Input,
    Node(usize),
}

#[derive(Debug, Clone)]
pub struct Node<T: Element = f32> {
    /// Name of the `NetSpec` block this layer was lowered from.
    pub block: String,
    pub layer: Layer<T>,
    pub inputs: Vec<Source>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Kernel,
    BnGamma,
    BnBeta,
}

#[derive(Debug, Clone)]
enum Cache<T: Element> {
    None,
    BatchNorm(BatchNormCache<T>),
    Pool(PoolIndices),
    Dropout(DropoutMask<T>),
    Gap(Vec<usize>),
}

/// Activations of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Trace<T: Element = f32> {
    input: Tensor<T>,
    outputs: Vec<Tensor<T>>,
    caches: Vec<Cache<T>>,
}

impl<T: Element> Trace<T> {
    /// Output of the last layer: `batch × 1 × 1 × classes`.
    pub fn logits(&self) -> &Tensor<T> {
        self.outputs.last().expect("model has at least one node")
    }

    /// Output tensor of layer node `i`.
    pub fn node_output(&self, i: usize) -> &Tensor<T> {
        &self.outputs[i]
    }

    pub fn input(&self) -> &Tensor<T> {
        &self.input
    }
}

/// An executable network: layer nodes in topological order.
#[derive(Debug, Clone)]
pub struct Model<T: Element = f32> {
    pub name: String,
    nodes: Vec<Node<T>>,
    input_shape: Shape3,
    classes: usize,
    /// Node whose output is each spec block's output, in block order.
    block_outputs: Vec<(String, Source)>,
}

/// Lowers a spec to layers and initializes parameters.
///
/// Each conv in a composition becomes conv → batch norm → ReLU (unless the
/// unit is linear or batch norm is disabled). Kernels are drawn from
/// N(0, 2 / fan_in); convolutions carry no bias. The output block's result
/// is averaged over space so logits are `batch × 1 × 1 × classes`; for a
/// single 1×1 linear output conv the average is taken before it, which is
/// equivalent and cheaper.
pub fn build_model<T: Element, R: Rng + ?Sized>(
    spec: &NetSpec,
    rng: &mut R,
    options: BuildOptions,
) -> Result<Model<T>> {
    let order = spec.validate()?;
    let shapes = spec.block_shapes()?;
    let in_channels = spec.block_in_channels()?;
    let output = spec.output_index();
    if !spec.blocks[output].is_conv() {
        return Err(Error::Build(format!(
            "output block '{}' must be a conv composition producing logits",
            spec.blocks[output].name
        )));
    }
    let mut nodes: Vec<Node<T>> = Vec::new();
    let mut block_src: Vec<Option<Source>> = vec![None; spec.blocks.len()];

    for i in order {
        let block = &spec.blocks[i];
        let mut srcs: Vec<Source> = spec
            .preds(i)
            .into_iter()
            .map(|p| match p {
                Pred::Input => Source::Input,
                Pred::Block(j) => block_src[j].expect("topological order"),
            })
            .collect();
        let mut push = |layer: Layer<T>, inputs: Vec<Source>| -> Source {
            nodes.push(Node {
                block: block.name.clone(),
                layer,
                inputs,
            });
            Source::Node(nodes.len() - 1)
        };
        let is_output = i == output;
        let out_shape = shapes[i];

        let result = match &block.kind {
            BlockKind::ConvComposition { kernel, repeat, .. } => {
                let in_hw = match spec.preds(i)[0] {
                    Pred::Input => (spec.input_shape.h, spec.input_shape.w),
                    Pred::Block(j) => (shapes[j].h, shapes[j].w),
                };
                let pool_first = is_output && *kernel == 1 && *repeat == 1 && in_hw != (1, 1);
                let mut cur = srcs.remove(0);
                if pool_first {
                    cur = push(Layer::GlobalAvgPool, vec![cur]);
                }
                for unit in block.conv_units(in_channels[i], is_output) {
                    let fan_in = (unit.kernel * unit.kernel * unit.in_channels) as f64;
                    let kernel = Tensor::randn(
                        &[unit.kernel, unit.kernel, unit.in_channels, unit.out_channels],
                        (2.0 / fan_in).sqrt(),
                        rng,
                    )?;
                    cur = push(
                        Layer::Conv {
                            kernel,
                            stride: unit.stride,
                        },
                        vec![cur],
                    );
                    if unit.bn_relu {
                        if options.batch_norm {
                            cur = push(
                                Layer::BatchNorm(BatchNormState::new(unit.out_channels)?),
                                vec![cur],
                            );
                        }
                        cur = push(Layer::Relu, vec![cur]);
                    }
                }
                if is_output && !pool_first && (out_shape.h, out_shape.w) != (1, 1) {
                    cur = push(Layer::GlobalAvgPool, vec![cur]);
                }
                cur
            }
            BlockKind::MaxPool => push(Layer::MaxPool, srcs),
            BlockKind::Dropout { rate } => {
                if options.dropout {
                    push(Layer::Dropout { rate: *rate }, srcs)
                } else {
                    srcs[0]
                }
            }
            BlockKind::ResidualAdd => push(Layer::Add, srcs),
        };
        block_src[i] = Some(result);
    }

    if !is_output_node(&nodes, block_src[output]) {
        return Err(Error::Build(
            "the output block must lower to at least one layer".into(),
        ));
    }
    let classes = shapes[output].c;
    let block_outputs = spec
        .blocks
        .iter()
        .zip(block_src)
        .map(|(b, s)| (b.name.clone(), s.expect("every block visited")))
        .collect();
    Ok(Model {
        name: spec.name.clone(),
        nodes,
        input_shape: spec.input_shape,
        classes,
        block_outputs,
    })
}

fn is_output_node<T: Element>(nodes: &[Node<T>], src: Option<Source>) -> bool {
    matches!(src, Some(Source::Node(i)) if i + 1 == nodes.len())
}

impl<T: Element> Model<T> {
    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn input_shape(&self) -> Shape3 {
        self.input_shape
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Which node produces each spec block's output.
    pub fn block_outputs(&self) -> &[(String, Source)] {
        &self.block_outputs
    }

    pub fn params(&self) -> Vec<(ParamKind, &Tensor<T>)> {
        let mut out = Vec::new();
        for node in &self.nodes {
            match &node.layer {
                Layer::Conv { kernel, .. } => out.push((ParamKind::Kernel, kernel)),
                Layer::BatchNorm(st) => {
                    out.push((ParamKind::BnGamma, &st.gamma));
                    out.push((ParamKind::BnBeta, &st.beta));
                }
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<(ParamKind, &mut Tensor<T>)> {
        let mut out = Vec::new();
        for node in &mut self.nodes {
            match &mut node.layer {
                Layer::Conv { kernel, .. } => out.push((ParamKind::Kernel, kernel)),
                Layer::BatchNorm(st) => {
                    out.push((ParamKind::BnGamma, &mut st.gamma));
                    out.push((ParamKind::BnBeta, &mut st.beta));
                }
                _ => {}
            }
        }
        out
    }

    /// Trainable scalar count (kernels plus batch-norm gamma/beta).
    pub fn param_count(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        input: &Tensor<T>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Trace<T>> {
        let (_, h, w, c) = input.dims4()?;
        let s = self.input_shape;
        if (h, w, c) != (s.h, s.w, s.c) {
            return Err(shape_err!(
                "model expects {s} inputs, got {h} x {w} x {c}"
            ));
        }
        let mut outputs: Vec<Tensor<T>> = Vec::with_capacity(self.nodes.len());
        let mut caches = Vec::with_capacity(self.nodes.len());
        for node in &mut self.nodes {
            let src = |s: Source| -> &Tensor<T> {
                match s {
                    Source::Input => input,
                    Source::Node(j) => &outputs[j],
                }
            };
            let x = src(node.inputs[0]);
            let (y, cache) = match &mut node.layer {
                Layer::Conv { kernel, stride } => {
                    (conv2d_forward(x, kernel, *stride, CONV_PADDING)?, Cache::None)
                }
                Layer::BatchNorm(st) => {
                    let (y, c) = batchnorm_forward(x, st, mode)?;
                    (y, Cache::BatchNorm(c))
                }
                Layer::Relu => (relu(x), Cache::None),
                Layer::MaxPool => {
                    let (y, idx) = maxpool2d(x, POOL_WINDOW, POOL_STRIDE)?;
                    (y, Cache::Pool(idx))
                }
                Layer::Dropout { rate } => {
                    let (y, mask) = dropout(x, *rate, rng, mode)?;
                    (y, Cache::Dropout(mask))
                }
                Layer::Add => (x.add(src(node.inputs[1]))?, Cache::None),
                Layer::GlobalAvgPool => (global_avg_pool(x)?, Cache::Gap(x.shape().to_vec())),
            };
            outputs.push(y);
            caches.push(cache);
        }
        Ok(Trace {
            input: input.clone(),
            outputs,
            caches,
        })
    }

    /// Eval-mode logits, `batch × classes`.
    pub fn predict(&mut self, input: &Tensor<T>) -> Result<Tensor<T>> {
        // Eval mode draws no random numbers.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let trace = self.forward(input, Mode::Eval, &mut rng)?;
        let n = input.shape()[0];
        trace.logits().clone().reshape(&[n, self.classes])
    }

    /// Back-propagates `d_logits` (shaped like [`Trace::logits`] or
    /// `batch × classes`). Returns parameter gradients in [`Model::params`]
    /// order followed by the gradient with respect to the model input.
    pub fn backward(
        &self,
        trace: &Trace<T>,
        d_logits: &Tensor<T>,
    ) -> Result<(Vec<Tensor<T>>, Tensor<T>)> {
        let last = trace.logits();
        if d_logits.len() != last.len() {
            return Err(shape_err!(
                "logit gradient has {} values, logits have {}",
                d_logits.len(),
                last.len()
            ));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        *grads.last_mut().expect("non-empty") = Some(d_logits.clone().reshape(last.shape())?);
        let mut d_input = trace.input.zeros_like();

        let mut param_grads: Vec<Option<Tensor<T>>> = Vec::new();
        let mut param_slots = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            param_slots.push(param_grads.len());
            match node.layer {
                Layer::Conv { .. } => param_grads.push(None),
                Layer::BatchNorm(_) => param_grads.extend([None, None]),
                _ => {}
            }
        }

        for i in (0..self.nodes.len()).rev() {
            let Some(g) = grads[i].take() else {
                continue;
            };
            let node = &self.nodes[i];
            let x = match node.inputs[0] {
                Source::Input => &trace.input,
                Source::Node(j) => &trace.outputs[j],
            };
            let d_ins: Vec<Tensor<T>> = match (&node.layer, &trace.caches[i]) {
                (Layer::Conv { kernel, stride }, _) => {
                    let lg = conv2d_backward(x, kernel, *stride, CONV_PADDING, &g)?;
                    param_grads[param_slots[i]] = lg.d_params.into_iter().next();
                    vec![lg.d_input]
                }
                (Layer::BatchNorm(st), Cache::BatchNorm(c)) => {
                    let lg = batchnorm_backward(c, st, &g)?;
                    let mut ps = lg.d_params.into_iter();
                    param_grads[param_slots[i]] = ps.next();
                    param_grads[param_slots[i] + 1] = ps.next();
                    vec![lg.d_input]
                }
                (Layer::Relu, _) => vec![relu_backward(&trace.outputs[i], &g)?],
                (Layer::MaxPool, Cache::Pool(idx)) => vec![maxpool2d_backward(idx, &g)?],
                (Layer::Dropout { .. }, Cache::Dropout(mask)) => vec![dropout_backward(mask, &g)?],
                (Layer::Add, _) => vec![g.clone(), g],
                (Layer::GlobalAvgPool, Cache::Gap(shape)) => {
                    vec![global_avg_pool_backward(shape, &g)?]
                }
                _ => return Err(Error::Build(format!("node {i}: cache does not match layer"))),
            };
            for (src, d) in node.inputs.iter().zip(d_ins) {
                match *src {
                    Source::Input => d_input.axpy(T::one(), &d)?,
                    Source::Node(j) => match &mut grads[j] {
                        Some(acc) => acc.axpy(T::one(), &d)?,
                        slot @ None => *slot = Some(d),
                    },
                }
            }
        }

        let params = self.params();
        let param_grads = param_grads
            .into_iter()
            .zip(params)
            .map(|(g, (_, p))| g.unwrap_or_else(|| p.zeros_like()))
            .collect();
        Ok((param_grads, d_input))
    }
}
