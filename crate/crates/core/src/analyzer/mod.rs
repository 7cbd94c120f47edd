//! Static analysis of a [`NetSpec`]: parameter counts, shapes, receptive
//! fields, reduction-rate lints and capacity expressions.

mod bounds;

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netspec::{BlockKind, NetSpec, Pred, Shape3};
use crate::tensor::{POOL_STRIDE, POOL_WINDOW};

pub use bounds::{fat_shattering_bound, vc_bound, FatParams};

/// Longest run of stride-1 convolutions allowed without a residual add.
pub const MAX_PLAIN_COMPOSITION: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockParams {
    pub name: String,
    /// Kernel weights (convolutions carry no bias).
    pub conv: usize,
    /// Batch-norm gamma and beta. Running statistics are not parameters.
    pub batch_norm: usize,
}

impl BlockParams {
    pub fn total(&self) -> usize {
        self.conv + self.batch_norm
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub per_block: Vec<BlockParams>,
    pub total: usize,
}

impl ParamCount {
    /// Total in thousands, rounded to nearest.
    pub fn total_k(&self) -> usize {
        to_k(self.total)
    }
}

fn to_k(n: usize) -> usize {
    (n + 500) / 1000
}

/// Counts `k·k·in·out` per convolution plus `2·out` per batch norm.
pub fn count_params(spec: &NetSpec) -> Result<ParamCount> {
    let units = spec.conv_units()?;
    let mut per_block: Vec<BlockParams> = spec
        .blocks
        .iter()
        .map(|b| BlockParams {
            name: b.name.clone(),
            conv: 0,
            batch_norm: 0,
        })
        .collect();
    for (i, u) in units {
        per_block[i].conv += u.weights();
        if u.bn_relu {
            per_block[i].batch_norm += 2 * u.out_channels;
        }
    }
    let total = per_block.iter().map(BlockParams::total).sum();
    Ok(ParamCount { per_block, total })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeTrace {
    pub input: Shape3,
    pub blocks: Vec<(String, Shape3)>,
}

impl ShapeTrace {
    /// Shape of the network output (the input for an empty network).
    pub fn output(&self) -> Shape3 {
        self.blocks.last().map_or(self.input, |(_, s)| *s)
    }

    pub fn get(&self, name: &str) -> Option<Shape3> {
        self.blocks.iter().find(|(n, _)| n == name).map(|(_, s)| *s)
    }
}

/// Output shape of every block for the given input shape.
pub fn trace_shapes(spec: &NetSpec, input: Shape3) -> Result<ShapeTrace> {
    if spec.blocks.is_empty() {
        return Ok(ShapeTrace {
            input,
            blocks: Vec::new(),
        });
    }
    let spec = NetSpec {
        input_shape: input,
        ..spec.clone()
    };
    let shapes = spec
        .block_shapes()
        .map_err(|e| Error::Analysis(format!("{}: {e}", spec.name)))?;
    Ok(ShapeTrace {
        input,
        blocks: spec
            .blocks
            .iter()
            .zip(shapes)
            .map(|(b, s)| (b.name.clone(), s))
            .collect(),
    })
}

/// Receptive field `r` and jump `j` (input pixels between adjacent output
/// units) of a feature map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rf {
    pub r: usize,
    pub j: usize,
}

impl Rf {
    pub const INPUT: Rf = Rf { r: 1, j: 1 };

    /// Applies one sliding-window layer with kernel `k` and stride `s`.
    pub fn through(self, k: usize, s: usize) -> Rf {
        Rf {
            r: self.r + (k - 1) * self.j,
            j: self.j * s,
        }
    }
}

/// `(r, j)` after each `(kernel, stride)` layer of a plain chain.
pub fn rf_chain(layers: &[(usize, usize)]) -> Vec<Rf> {
    layers
        .iter()
        .scan(Rf::INPUT, |rf, &(k, s)| {
            *rf = rf.through(k, s);
            Some(*rf)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRf {
    pub name: String,
    /// Raw value of the recurrence.
    pub r: usize,
    /// `r` limited to the input extent.
    pub r_clipped: usize,
    pub j: usize,
}

/// Receptive field at every block output. Max pooling counts as a 2×2
/// window with stride 2; a residual add takes the larger field of its
/// inputs.
pub fn receptive_field(spec: &NetSpec) -> Result<Vec<BlockRf>> {
    let order = spec.validate()?;
    let extent = spec.input_shape.h.max(spec.input_shape.w);
    let mut rf: Vec<Option<Rf>> = vec![None; spec.blocks.len()];
    for i in order {
        let mut cur = spec
            .preds(i)
            .into_iter()
            .map(|p| match p {
                Pred::Input => Rf::INPUT,
                Pred::Block(j) => rf[j].expect("topological order"),
            })
            .fold(Rf { r: 0, j: 0 }, |a, b| Rf {
                r: a.r.max(b.r),
                j: a.j.max(b.j),
            });
        match spec.blocks[i].kind {
            BlockKind::ConvComposition {
                repeat,
                kernel,
                stride,
                ..
            } => {
                for u in 0..repeat {
                    cur = cur.through(kernel, if u == 0 { stride } else { 1 });
                }
            }
            BlockKind::MaxPool => cur = cur.through(POOL_WINDOW, POOL_STRIDE),
            BlockKind::Dropout { .. } | BlockKind::ResidualAdd => {}
        }
        rf[i] = Some(cur);
    }
    Ok(spec
        .blocks
        .iter()
        .zip(rf)
        .map(|(b, rf)| {
            let rf = rf.expect("all visited");
            BlockRf {
                name: b.name.clone(),
                r: rf.r,
                r_clipped: rf.r.min(extent),
                j: rf.j,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LintRule {
    #[serde(rename = "RULE-MIN-CONV")]
    MinConv,
    #[serde(rename = "RULE-MAX-COMP")]
    MaxComp,
    #[serde(rename = "RULE-POOL-INFO")]
    PoolInfo,
}

impl LintRule {
    pub fn id(self) -> &'static str {
        match self {
            LintRule::MinConv => "RULE-MIN-CONV",
            LintRule::MaxComp => "RULE-MAX-COMP",
            LintRule::PoolInfo => "RULE-POOL-INFO",
        }
    }

    pub fn severity(self) -> Severity {
        match self {
            LintRule::MinConv | LintRule::MaxComp => Severity::Error,
            LintRule::PoolInfo => Severity::Info,
        }
    }
}

impl fmt::Display for LintRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lint {
    pub rule: LintRule,
    pub severity: Severity,
    pub block: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionAudit {
    pub lints: Vec<Lint>,
    /// Blocks that shrink the spatial extent, in topological order.
    pub reductions: Vec<String>,
    pub stride1_convs: usize,
    /// `reductions / stride1_convs`; infinite when reductions have no
    /// stride-1 convs at all.
    pub reduction_rate: f64,
}

impl ReductionAudit {
    pub fn violations(&self) -> impl Iterator<Item = &Lint> {
        self.lints.iter().filter(|l| l.severity == Severity::Error)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Walk {
    /// Stride-1 convs since the last reduction.
    since_reduction: usize,
    /// Stride-1 convs since the last reduction or residual add.
    plain_run: usize,
}

/// Walks every path of the network and flags spatial reductions that are
/// not preceded by a stride-1 conv since the previous reduction
/// (`RULE-MIN-CONV`), runs of more than four stride-1 convs without a
/// residual add (`RULE-MAX-COMP`), and notes every max pool
/// (`RULE-POOL-INFO`).
pub fn audit_reduction(spec: &NetSpec) -> Result<ReductionAudit> {
    let order = spec.validate()?;
    let mut state: Vec<Walk> = vec![Walk::default(); spec.blocks.len()];
    let mut lints = Vec::new();
    let mut reductions = Vec::new();
    let mut stride1_convs = 0;

    for i in order {
        let b = &spec.blocks[i];
        let ins: Vec<Walk> = spec
            .preds(i)
            .into_iter()
            .map(|p| match p {
                Pred::Input => Walk::default(),
                Pred::Block(j) => state[j],
            })
            .collect();
        let mut w = Walk {
            since_reduction: ins.iter().map(|w| w.since_reduction).min().unwrap_or(0),
            plain_run: ins.iter().map(|w| w.plain_run).max().unwrap_or(0),
        };
        let mut reduce = |w: &mut Walk, what: &str| {
            if w.since_reduction == 0 {
                lints.push(Lint {
                    rule: LintRule::MinConv,
                    severity: LintRule::MinConv.severity(),
                    block: b.name.clone(),
                    message: format!(
                        "{what} is not preceded by a stride-1 convolution since the previous reduction"
                    ),
                });
            }
            reductions.push(b.name.clone());
            *w = Walk::default();
        };
        match b.kind {
            BlockKind::ConvComposition { repeat, stride, .. } => {
                let mut crossed = false;
                for u in 0..repeat {
                    if u == 0 && stride > 1 {
                        reduce(&mut w, &format!("stride-{stride} convolution"));
                    } else {
                        stride1_convs += 1;
                        w.since_reduction += 1;
                        w.plain_run += 1;
                        crossed |= w.plain_run == MAX_PLAIN_COMPOSITION + 1;
                    }
                }
                if crossed {
                    lints.push(Lint {
                        rule: LintRule::MaxComp,
                        severity: LintRule::MaxComp.severity(),
                        block: b.name.clone(),
                        message: format!(
                            "{} stacked stride-1 convolutions without a residual connection (max {MAX_PLAIN_COMPOSITION})",
                            w.plain_run
                        ),
                    });
                }
            }
            BlockKind::MaxPool => {
                reduce(&mut w, "max pooling");
                lints.push(Lint {
                    rule: LintRule::PoolInfo,
                    severity: LintRule::PoolInfo.severity(),
                    block: b.name.clone(),
                    message: "max pooling discards 3 of every 4 activations with a fixed rule; \
                              a stride-2 convolution learns the reduction instead"
                        .into(),
                });
            }
            BlockKind::ResidualAdd => {
                w.since_reduction = ins.iter().map(|w| w.since_reduction).max().unwrap_or(0);
                w.plain_run = 0;
            }
            BlockKind::Dropout { .. } => {}
        }
        state[i] = w;
    }

    let reduction_rate = match (reductions.len(), stride1_convs) {
        (0, _) => 0.0,
        (_, 0) => f64::INFINITY,
        (r, s) => r as f64 / s as f64,
    };
    Ok(ReductionAudit {
        lints,
        reductions,
        stride1_convs,
        reduction_rate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub name: String,
    pub params: usize,
    pub out_shape: Shape3,
    pub receptive_field: usize,
    pub receptive_field_raw: usize,
    pub jump: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    /// Weight layers used for the capacity expressions.
    pub layers: usize,
    pub vc_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fat_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub name: String,
    pub input_shape: Shape3,
    pub per_block: Vec<BlockReport>,
    pub total_params: usize,
    pub total_params_k: usize,
    pub lints: Vec<Lint>,
    pub reductions: Vec<String>,
    pub reduction_rate: f64,
    pub bounds: Bounds,
}

/// Runs every analysis. `fat` supplies the norm parameters of the
/// fat-shattering expression; its layer count is taken from the network
/// when `fat.l` is 0.
pub fn analyze(spec: &NetSpec, fat: Option<FatParams>) -> Result<AnalysisReport> {
    let params = count_params(spec)?;
    let shapes = trace_shapes(spec, spec.input_shape)?;
    let rfs = receptive_field(spec)?;
    let audit = audit_reduction(spec)?;
    let layers = spec.conv_units()?.len();

    let fat_value = match fat {
        Some(mut p) => {
            if p.l == 0 {
                p.l = layers as u32;
            }
            Some(fat_shattering_bound(&p)?)
        }
        None => None,
    };
    let per_block = params
        .per_block
        .iter()
        .zip(&shapes.blocks)
        .zip(&rfs)
        .map(|((p, (_, shape)), rf)| BlockReport {
            name: p.name.clone(),
            params: p.total(),
            out_shape: *shape,
            receptive_field: rf.r_clipped,
            receptive_field_raw: rf.r,
            jump: rf.j,
        })
        .collect();
    Ok(AnalysisReport {
        name: spec.name.clone(),
        input_shape: spec.input_shape,
        per_block,
        total_params: params.total,
        total_params_k: params.total_k(),
        lints: audit.lints,
        reductions: audit.reductions,
        reduction_rate: audit.reduction_rate,
        bounds: Bounds {
            layers,
            vc_value: vc_bound(params.total as u64, layers as u64),
            fat_value,
        },
    })
}

impl AnalysisReport {
    pub fn has_errors(&self) -> bool {
        self.lints.iter().any(|l| l.severity == Severity::Error)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }

    /// Aligned plain-text table followed by lints and summary lines.
    pub fn to_table(&self) -> String {
        let header = ["block", "params", "output", "rf", "rf_raw", "jump"];
        let rows: Vec<[String; 6]> = self
            .per_block
            .iter()
            .map(|b| {
                [
                    b.name.clone(),
                    b.params.to_string(),
                    b.out_shape.to_string(),
                    b.receptive_field.to_string(),
                    b.receptive_field_raw.to_string(),
                    b.jump.to_string(),
                ]
            })
            .collect();
        let mut width = header.map(str::len);
        for row in &rows {
            for (w, cell) in width.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let _ = writeln!(out, "{}  (input {})", self.name, self.input_shape);
        let line = |out: &mut String, cells: &[&str]| {
            let mut s = String::new();
            for (i, (cell, w)) in cells.iter().zip(width).enumerate() {
                if i == 0 {
                    let _ = write!(s, "{cell:<w$}");
                } else {
                    let _ = write!(s, "  {cell:>w$}");
                }
            }
            let _ = writeln!(out, "{}", s.trim_end());
        };
        line(&mut out, &header);
        for row in &rows {
            let cells: Vec<&str> = row.iter().map(String::as_str).collect();
            line(&mut out, &cells);
        }
        let _ = writeln!(out, "total params: {} ({}K)", self.total_params, self.total_params_k);
        let _ = writeln!(
            out,
            "reductions: {} [{}], rate {:.3}",
            self.reductions.len(),
            self.reductions.join(", "),
            self.reduction_rate
        );
        let _ = writeln!(
            out,
            "capacity expression: vc {:.6e} over {} layers",
            self.bounds.vc_value, self.bounds.layers
        );
        if let Some(f) = self.bounds.fat_value {
            let _ = writeln!(out, "capacity expression: fat-shattering {f:.6e}");
        }
        for l in &self.lints {
            let sev = match l.severity {
                Severity::Info => "info",
                Severity::Error => "error",
            };
            let _ = writeln!(out, "{sev}: {} {}: {}", l.rule, l.block, l.message);
        }
        out
    }
}
