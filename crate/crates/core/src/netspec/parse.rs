//! Line-oriented text format for [`NetSpec`].
//!
//! ```text
//! # comment (also allowed after any line)
//! net: design4
//! input: 28 x 28 x 3
//! block1: 2 x conv3x3, 1, 64
//! block2: 1 x conv3x3, 2, 64
//! block2_1: 1 x conv1x1, 2, 128 <- block1
//! block3: 3 x conv3x3, 1, 128 <- block2
//! block3_1: block2_1 + block3
//! block7_1: dropout 0.5
//! block9: 1 x conv1x1, 1, 10
//! ```
//!
//! Block bodies:
//!
//! * `[R x] conv KxK, [STRIDE,] CHANNELS [, linear]`: a composition of `R`
//!   convolutions (default 1, stride default 1). `linear` drops the batch
//!   norm and ReLU after each conv. A space is allowed between `conv` and
//!   `KxK`.
//! * `max_pool`: 2×2 max pooling, stride 2.
//! * `dropout [RATE]`: dropout with the given rate (default 0.5).
//! * `A + B`: residual addition of two blocks.
//!
//! `<- A[, B]` names the predecessors explicitly; otherwise a block reads
//! the block declared just before it (the network input for the first).
//! `net:` defaults to `net`, `input:` to `28 x 28 x 3`.

use std::fmt::Write as _;

use super::{Block, BlockKind, NetSpec, Shape3};
use crate::error::{Error, Result};

const DEFAULT_DROPOUT: f64 = 0.5;

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn is_ident(s: &str) -> bool {
    !s.is_empty()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !s.starts_with(|c: char| c.is_ascii_digit())
}

fn parse_usize(tok: &str, line: usize, what: &str) -> Result<usize> {
    tok.trim()
        .parse::<usize>()
        .map_err(|_| perr(line, format!("expected {what}, found '{}'", tok.trim())))
}

fn parse_shape(text: &str, line: usize) -> Result<Shape3> {
    let dims: Vec<&str> = text.split(['x', 'X', '×']).map(str::trim).collect();
    if dims.len() != 3 {
        return Err(perr(line, format!("input shape must be H x W x C, found '{text}'")));
    }
    Ok(Shape3::new(
        parse_usize(dims[0], line, "height")?,
        parse_usize(dims[1], line, "width")?,
        parse_usize(dims[2], line, "channels")?,
    ))
}

fn parse_conv(body: &str, line: usize) -> Result<BlockKind> {
    let (repeat, rest) = match body.split_once("conv") {
        Some((pre, rest)) => {
            let pre = pre.trim();
            let repeat = if pre.is_empty() {
                1
            } else {
                let count = pre
                    .strip_suffix(['x', 'X', '×'])
                    .ok_or_else(|| perr(line, format!("expected 'R x' before conv, found '{pre}'")))?;
                parse_usize(count, line, "repeat count")?
            };
            (repeat, rest)
        }
        None => return Err(perr(line, "not a conv block")),
    };
    let mut parts = rest.split(',').map(str::trim);
    let size = parts.next().unwrap_or_default().replace(' ', "");
    let (kh, kw) = size
        .split_once(['x', 'X', '×'])
        .ok_or_else(|| perr(line, format!("expected kernel size KxK, found '{size}'")))?;
    let kernel = parse_usize(kh, line, "kernel size")?;
    if parse_usize(kw, line, "kernel size")? != kernel {
        return Err(perr(line, format!("only square kernels are supported, found '{size}'")));
    }
    let mut nums = Vec::new();
    let mut linear = false;
    for p in parts {
        if p == "linear" {
            linear = true;
        } else if linear {
            return Err(perr(line, "'linear' must be the last conv argument"));
        } else {
            nums.push(parse_usize(p, line, "stride or channel count")?);
        }
    }
    let (stride, out_channels) = match nums[..] {
        [c] => (1, c),
        [s, c] => (s, c),
        _ => {
            return Err(perr(
                line,
                "conv takes '[stride,] channels' after the kernel size",
            ))
        }
    };
    Ok(BlockKind::ConvComposition {
        repeat,
        kernel,
        stride,
        out_channels,
        with_bn_relu: !linear,
    })
}

fn parse_block(name: &str, body: &str, line: usize) -> Result<Block> {
    let (body, explicit) = match body.split_once("<-") {
        Some((b, refs)) => {
            let refs: Vec<String> = refs.split(',').map(|r| r.trim().to_string()).collect();
            if let Some(bad) = refs.iter().find(|r| !is_ident(r)) {
                return Err(perr(line, format!("invalid input name '{bad}'")));
            }
            (b.trim(), refs)
        }
        None => (body.trim(), Vec::new()),
    };

    if let Some((a, b)) = body.split_once('+') {
        let (a, b) = (a.trim(), b.trim());
        if !is_ident(a) || !is_ident(b) {
            return Err(perr(line, format!("residual add needs two block names, found '{body}'")));
        }
        if !explicit.is_empty() {
            return Err(perr(line, "residual add takes its inputs from 'A + B' only"));
        }
        return Ok(Block::residual_add(name, a, b));
    }

    let kind = if body == "max_pool" {
        BlockKind::MaxPool
    } else if let Some(rest) = body.strip_prefix("dropout") {
        let rest = rest.trim();
        let rate = if rest.is_empty() {
            DEFAULT_DROPOUT
        } else {
            rest.parse::<f64>()
                .map_err(|_| perr(line, format!("invalid dropout rate '{rest}'")))?
        };
        BlockKind::Dropout { rate }
    } else if body.contains("conv") {
        parse_conv(body, line)?
    } else {
        let word = body.split_whitespace().next().unwrap_or("");
        return Err(perr(line, format!("unknown block kind '{word}'")));
    };
    Ok(Block {
        name: name.to_string(),
        kind,
        inputs: explicit,
    })
}

/// Parses the text format described in the module docs.
pub fn parse_spec(text: &str) -> Result<NetSpec> {
    let mut name = "net".to_string();
    let mut input_shape = Shape3::new(28, 28, 3);
    let mut blocks = Vec::new();
    let mut lines = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once(':')
            .ok_or_else(|| perr(line, format!("expected 'name: body', found '{content}'")))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "net" => {
                if value.is_empty() {
                    return Err(perr(line, "empty network name"));
                }
                name = value.to_string();
            }
            "input" => input_shape = parse_shape(value, line)?,
            _ if is_ident(key) => {
                blocks.push(parse_block(key, value, line)?);
                lines.push(line);
            }
            _ => return Err(perr(line, format!("invalid block name '{key}'"))),
        }
    }

    let spec = NetSpec {
        name,
        input_shape,
        blocks,
    };
    if spec.blocks.is_empty() {
        return Err(perr(last_line.max(1), "network has no blocks"));
    }
    spec.validate_with_lines(&lines)?;
    Ok(spec)
}

/// Canonical text form; `parse_spec(&render_spec(s))` reproduces `s`.
pub fn render_spec(spec: &NetSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "net: {}", spec.name);
    let s = spec.input_shape;
    let _ = writeln!(out, "input: {} x {} x {}", s.h, s.w, s.c);
    for b in &spec.blocks {
        let body = match &b.kind {
            BlockKind::ConvComposition {
                repeat,
                kernel,
                stride,
                out_channels,
                with_bn_relu,
            } => {
                let mut t = format!("{repeat} x conv{kernel}x{kernel}, {stride}, {out_channels}");
                if !with_bn_relu {
                    t.push_str(", linear");
                }
                t
            }
            BlockKind::MaxPool => "max_pool".to_string(),
            BlockKind::Dropout { rate } => format!("dropout {rate}"),
            BlockKind::ResidualAdd => format!("{} + {}", b.inputs[0], b.inputs[1]),
        };
        let _ = write!(out, "{}: {body}", b.name);
        if !b.inputs.is_empty() && b.kind != BlockKind::ResidualAdd {
            let _ = write!(out, " <- {}", b.inputs.join(", "));
        }
        out.push('\n');
    }
    out
}
