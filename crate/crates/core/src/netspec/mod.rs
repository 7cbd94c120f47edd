//! Declarative network descriptions.
//!
//! A [`NetSpec`] is an ordered list of named [`Block`]s wired as a DAG. The
//! conv-composition notation follows the `repeat x convKxK, stride,
//! channels` convention: `2 x conv3x3, 1, 128` is two stacked 3×3 stride-1
//! convolutions with 128 kernels each, every one followed by batch norm and
//! ReLU. See [`parse_spec`] for the text format.

mod builtin;
mod model;
mod parse;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{conv_output_extent, Padding, POOL_STRIDE, POOL_WINDOW};

pub use builtin::{builtin_design, BUILTIN_DESIGNS};
pub use model::{build_model, BuildOptions, Layer, Model, Node, ParamKind, Source, Trace};
pub use parse::{parse_spec, render_spec};

/// Padding used by every convolution the builder emits.
pub const CONV_PADDING: Padding = Padding::Same;

/// Spatial extent and channel count of a feature map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape3 {
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl Shape3 {
    pub const fn new(h: usize, w: usize, c: usize) -> Self {
        Self { h, w, c }
    }
}

impl fmt::Display for Shape3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} x {} x {}", self.h, self.w, self.c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlockKind {
    /// `repeat` stacked convolutions; the stride applies to the first one.
    ConvComposition {
        repeat: usize,
        kernel: usize,
        stride: usize,
        out_channels: usize,
        with_bn_relu: bool,
    },
    MaxPool,
    Dropout { rate: f64 },
    ResidualAdd,
}

/// One convolution inside a composition, as seen by the analyzer and the
/// model builder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvUnit {
    pub kernel: usize,
    pub stride: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub bn_relu: bool,
}

impl ConvUnit {
    pub fn weights(&self) -> usize {
        self.kernel * self.kernel * self.in_channels * self.out_channels
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    #[serde(flatten)]
    pub kind: BlockKind,
    /// Predecessors. Empty means "the previous block in declaration order"
    /// (or the network input for the first block).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<String>,
}

impl Block {
    pub fn conv(name: &str, repeat: usize, kernel: usize, stride: usize, out: usize) -> Self {
        Self {
            name: name.to_string(),
            kind: BlockKind::ConvComposition {
                repeat,
                kernel,
                stride,
                out_channels: out,
                with_bn_relu: true,
            },
            inputs: Vec::new(),
        }
    }

    pub fn max_pool(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: BlockKind::MaxPool,
            inputs: Vec::new(),
        }
    }

    pub fn dropout(name: &str, rate: f64) -> Self {
        Self {
            name: name.to_string(),
            kind: BlockKind::Dropout { rate },
            inputs: Vec::new(),
        }
    }

    pub fn residual_add(name: &str, a: &str, b: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: BlockKind::ResidualAdd,
            inputs: vec![a.to_string(), b.to_string()],
        }
    }

    pub fn with_inputs(mut self, inputs: &[&str]) -> Self {
        self.inputs = inputs.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn is_conv(&self) -> bool {
        matches!(self.kind, BlockKind::ConvComposition { .. })
    }

    /// Expands a conv composition into its individual convolutions. The
    /// last convolution of the network output block is always linear (it
    /// produces logits).
    pub fn conv_units(&self, in_channels: usize, is_output: bool) -> Vec<ConvUnit> {
        let BlockKind::ConvComposition {
            repeat,
            kernel,
            stride,
            out_channels,
            with_bn_relu,
        } = self.kind
        else {
            return Vec::new();
        };
        (0..repeat)
            .map(|i| ConvUnit {
                kernel,
                stride: if i == 0 { stride } else { 1 },
                in_channels: if i == 0 { in_channels } else { out_channels },
                out_channels,
                bn_relu: with_bn_relu && !(is_output && i + 1 == repeat),
            })
            .collect()
    }

    /// Output shape given the (already validated) input shapes.
    pub fn output_shape(&self, inputs: &[Shape3]) -> Result<Shape3> {
        let first = inputs[0];
        match self.kind {
            BlockKind::ConvComposition {
                repeat,
                kernel,
                stride,
                out_channels,
                ..
            } => {
                let mut s = first;
                for i in 0..repeat {
                    let st = if i == 0 { stride } else { 1 };
                    s.h = conv_output_extent(s.h, kernel, st, CONV_PADDING)?.0;
                    s.w = conv_output_extent(s.w, kernel, st, CONV_PADDING)?.0;
                }
                s.c = out_channels;
                Ok(s)
            }
            BlockKind::MaxPool => {
                if first.h < POOL_WINDOW || first.w < POOL_WINDOW {
                    return Err(Error::Analysis(format!(
                        "{}: cannot max-pool a {}x{} map",
                        self.name, first.h, first.w
                    )));
                }
                Ok(Shape3::new(
                    (first.h - POOL_WINDOW) / POOL_STRIDE + 1,
                    (first.w - POOL_WINDOW) / POOL_STRIDE + 1,
                    first.c,
                ))
            }
            BlockKind::Dropout { .. } => Ok(first),
            BlockKind::ResidualAdd => {
                if inputs.iter().any(|s| *s != first) {
                    return Err(Error::Build(format!(
                        "{}: residual inputs {} have different shapes {}",
                        self.name,
                        self.inputs.join(" + "),
                        inputs
                            .iter()
                            .map(|s| s.to_string())
                            .collect::<Vec<_>>()
                            .join(" vs ")
                    )));
                }
                Ok(first)
            }
        }
    }
}

/// A named network: input shape plus wired blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub name: String,
    pub input_shape: Shape3,
    pub blocks: Vec<Block>,
}

/// Where a block reads from after resolving default chaining.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pred {
    Input,
    Block(usize),
}

impl NetSpec {
    /// Resolved predecessors of block `i`.
    pub fn preds(&self, i: usize) -> Vec<Pred> {
        let b = &self.blocks[i];
        if b.inputs.is_empty() {
            return vec![if i == 0 { Pred::Input } else { Pred::Block(i - 1) }];
        }
        b.inputs
            .iter()
            .map(|n| match self.index_of(n) {
                Some(j) => Pred::Block(j),
                None => Pred::Input,
            })
            .collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.name == name)
    }

    /// Index of the single sink block.
    pub fn output_index(&self) -> usize {
        self.blocks.len() - 1
    }

    /// Checks names, references, arity, acyclicity and the single-output
    /// rule. Returns a topological order of block indices.
    pub fn validate(&self) -> Result<Vec<usize>> {
        self.validate_with_lines(&[])
    }

    pub(crate) fn validate_with_lines(&self, lines: &[usize]) -> Result<Vec<usize>> {
        let err = |i: usize, msg: String| -> Error {
            match lines.get(i) {
                Some(&line) => Error::Parse { line, msg },
                None => Error::Build(msg),
            }
        };
        if self.blocks.is_empty() {
            return Err(err(0, format!("{}: network has no blocks", self.name)));
        }
        let mut seen = HashSet::new();
        for (i, b) in self.blocks.iter().enumerate() {
            if b.name == "input" || !seen.insert(b.name.as_str()) {
                return Err(err(i, format!("duplicate or reserved block name '{}'", b.name)));
            }
            for r in &b.inputs {
                if r != "input" && self.index_of(r).is_none() {
                    return Err(err(i, format!("{}: unknown input '{r}'", b.name)));
                }
                if r == &b.name {
                    return Err(err(i, format!("{}: block reads from itself", b.name)));
                }
            }
            let arity = b.inputs.len().max(1);
            match b.kind {
                BlockKind::ResidualAdd if arity != 2 => {
                    return Err(err(i, format!("{}: residual add needs exactly 2 inputs", b.name)));
                }
                BlockKind::ResidualAdd => {}
                _ if arity != 1 => {
                    return Err(err(i, format!("{}: only residual add takes 2 inputs", b.name)));
                }
                BlockKind::ConvComposition {
                    repeat,
                    kernel,
                    stride,
                    out_channels,
                    ..
                } => {
                    if repeat == 0 || kernel == 0 || out_channels == 0 {
                        return Err(err(i, format!("{}: repeat, kernel and channels must be >= 1", b.name)));
                    }
                    if !(1..=2).contains(&stride) {
                        return Err(err(i, format!("{}: stride must be 1 or 2, got {stride}", b.name)));
                    }
                }
                BlockKind::Dropout { rate } if !(0.0..1.0).contains(&rate) => {
                    return Err(err(i, format!("{}: dropout rate must lie in [0, 1)", b.name)));
                }
                _ => {}
            }
        }

        // Kahn's algorithm over resolved edges.
        let n = self.blocks.len();
        let mut indeg = vec![0usize; n];
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            for p in self.preds(i) {
                if let Pred::Block(j) = p {
                    indeg[i] += 1;
                    succ[j].push(i);
                }
            }
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).rev().collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop() {
            order.push(i);
            for &s in succ[i].iter().rev() {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    ready.push(s);
                }
            }
        }
        if order.len() != n {
            let stuck = (0..n).find(|&i| indeg[i] > 0).unwrap_or(0);
            return Err(err(
                stuck,
                format!("wiring through '{}' is cyclic", self.blocks[stuck].name),
            ));
        }
        let sinks: Vec<usize> = (0..n).filter(|&i| succ[i].is_empty()).collect();
        if sinks != [n - 1] {
            let names: Vec<&str> = sinks.iter().map(|&i| self.blocks[i].name.as_str()).collect();
            return Err(err(
                n - 1,
                format!(
                    "network must have a single output block declared last, found sinks {names:?}"
                ),
            ));
        }
        Ok(order)
    }

    /// Output shape of every block, in declaration order.
    pub fn block_shapes(&self) -> Result<Vec<Shape3>> {
        let order = self.validate()?;
        let mut shapes: Vec<Option<Shape3>> = vec![None; self.blocks.len()];
        for i in order {
            let ins: Vec<Shape3> = self
                .preds(i)
                .into_iter()
                .map(|p| match p {
                    Pred::Input => self.input_shape,
                    Pred::Block(j) => shapes[j].expect("topological order"),
                })
                .collect();
            shapes[i] = Some(self.blocks[i].output_shape(&ins)?);
        }
        Ok(shapes.into_iter().map(|s| s.expect("all visited")).collect())
    }

    /// Input channel count seen by each block.
    pub fn block_in_channels(&self) -> Result<Vec<usize>> {
        let shapes = self.block_shapes()?;
        Ok((0..self.blocks.len())
            .map(|i| match self.preds(i)[0] {
                Pred::Input => self.input_shape.c,
                Pred::Block(j) => shapes[j].c,
            })
            .collect())
    }

    /// Every convolution of every block, tagged with its block index.
    pub fn conv_units(&self) -> Result<Vec<(usize, ConvUnit)>> {
        let cins = self.block_in_channels()?;
        let out = self.output_index();
        Ok(self
            .blocks
            .iter()
            .enumerate()
            .flat_map(|(i, b)| {
                b.conv_units(cins[i], i == out)
                    .into_iter()
                    .map(move |u| (i, u))
            })
            .collect())
    }

    /// Channel widths divided by `divisor`, except the output block whose
    /// width is the class count.
    pub fn scaled(&self, divisor: usize) -> Result<Self> {
        if divisor == 0 {
            return Err(Error::Param("scale divisor must be >= 1".into()));
        }
        let out = self.output_index();
        let mut spec = self.clone();
        for (i, b) in spec.blocks.iter_mut().enumerate() {
            if let BlockKind::ConvComposition { out_channels, .. } = &mut b.kind {
                if i == out {
                    continue;
                }
                if *out_channels % divisor != 0 {
                    return Err(Error::Param(format!(
                        "{}: {} channels not divisible by {divisor}",
                        b.name, out_channels
                    )));
                }
                *out_channels /= divisor;
            }
        }
        if divisor > 1 {
            spec.name = format!("{}/{}", self.name, divisor);
        }
        Ok(spec)
    }

    /// Number of output classes (channels of the output block).
    pub fn classes(&self) -> Result<usize> {
        Ok(self.block_shapes()?[self.output_index()].c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(blocks: Vec<Block>) -> NetSpec {
        NetSpec {
            name: "t".into(),
            input_shape: Shape3::new(8, 8, 3),
            blocks,
        }
    }

    #[test]
    fn empty_is_invalid() {
        assert!(chain(vec![]).validate().is_err());
    }

    #[test]
    fn residual_shape_mismatch() {
        let spec = chain(vec![
            Block::conv("a", 1, 3, 1, 8),
            Block::conv("b", 1, 3, 1, 16),
            Block::residual_add("c", "a", "b"),
        ]);
        let err = spec.block_shapes().unwrap_err().to_string();
        assert!(err.contains("a + b"), "{err}");
    }

    #[test]
    fn cycle_detected() {
        let spec = chain(vec![
            Block::conv("a", 1, 3, 1, 8).with_inputs(&["c"]),
            Block::conv("b", 1, 3, 1, 8),
            Block::conv("c", 1, 3, 1, 8),
        ]);
        assert!(spec.validate().unwrap_err().to_string().contains("cyclic"));
    }

    #[test]
    fn dangling_sink_rejected() {
        let spec = chain(vec![
            Block::conv("a", 1, 3, 1, 8),
            Block::conv("b", 1, 3, 1, 8),
            Block::conv("c", 1, 3, 1, 8).with_inputs(&["a"]),
        ]);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn stride_restricted() {
        let spec = chain(vec![Block::conv("a", 1, 3, 3, 8)]);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn output_conv_is_linear() {
        let spec = chain(vec![Block::conv("a", 2, 3, 1, 8), Block::conv("b", 2, 1, 1, 10)]);
        let units = spec.conv_units().unwrap();
        let flags: Vec<bool> = units.iter().map(|(_, u)| u.bn_relu).collect();
        assert_eq!(flags, vec![true, true, true, false]);
        assert_eq!(units[2].1.in_channels, 8);
    }

    #[test]
    fn scaling_divides_hidden_widths() {
        let spec = chain(vec![Block::conv("a", 1, 3, 1, 64), Block::conv("b", 1, 1, 1, 10)]);
        let s = spec.scaled(4).unwrap();
        assert_eq!(s.block_shapes().unwrap()[0].c, 16);
        assert_eq!(s.classes().unwrap(), 10);
        assert!(spec.scaled(3).is_err());
    }
}
