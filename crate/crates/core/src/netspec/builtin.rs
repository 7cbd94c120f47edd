use super::{Block, NetSpec, Shape3};
use crate::error::{Error, Result};

pub const BUILTIN_DESIGNS: [&str; 6] = [
    "design1",
    "design1_conv",
    "design1_conv_stride",
    "design2",
    "design3",
    "design4",
];

/// Dropout rate of the two wide 1×1 head blocks.
const HEAD_DROPOUT: f64 = 0.5;

fn head() -> Vec<Block> {
    vec![
        Block::conv("block7", 1, 1, 1, 4096),
        Block::dropout("block7_1", HEAD_DROPOUT),
        Block::conv("block8", 1, 1, 1, 4096),
        Block::dropout("block8_1", HEAD_DROPOUT),
        Block::conv("block9", 1, 1, 1, 10),
    ]
}

fn design(name: &str, mut body: Vec<Block>) -> NetSpec {
    body.extend(head());
    NetSpec {
        name: name.to_string(),
        input_shape: Shape3::new(28, 28, 3),
        blocks: body,
    }
}

/// One of the reference CIFAR-10 architectures.
///
/// * `design1`: compositions of 1, 2 and 4 convs, each followed by max-pool.
/// * `design1_conv`: `design1` with every max-pool replaced by a stride-2
///   3×3 convolution.
/// * `design1_conv_stride`: `design1_conv` with the first reduction moved
///   into block1 (block1 stride 2, block2 stride 1).
/// * `design2`: same parameters as `design1`, but four reductions.
/// * `design3`: `design1` with one fewer 128-channel conv.
/// * `design4`: deeper `design1_conv` with a strided 1×1 shortcut added
///   around block3.
pub fn builtin_design(name: &str) -> Result<NetSpec> {
    let spec = match name {
        "design1" => design(
            name,
            vec![
                Block::conv("block1", 1, 3, 1, 64),
                Block::max_pool("block2"),
                Block::conv("block3", 2, 3, 1, 128),
                Block::max_pool("block4"),
                Block::conv("block5", 4, 3, 1, 256),
                Block::max_pool("block6"),
            ],
        ),
        "design1_conv" => design(
            name,
            vec![
                Block::conv("block1", 1, 3, 1, 64),
                Block::conv("block2", 1, 3, 2, 64),
                Block::conv("block3", 2, 3, 1, 128),
                Block::conv("block4", 1, 3, 2, 128),
                Block::conv("block5", 4, 3, 1, 256),
                Block::conv("block6", 1, 3, 2, 256),
            ],
        ),
        "design1_conv_stride" => design(
            name,
            vec![
                Block::conv("block1", 1, 3, 2, 64),
                Block::conv("block2", 1, 3, 1, 64),
                Block::conv("block3", 2, 3, 1, 128),
                Block::conv("block4", 1, 3, 2, 128),
                Block::conv("block5", 4, 3, 1, 256),
                Block::conv("block6", 1, 3, 2, 256),
            ],
        ),
        "design2" => design(
            name,
            vec![
                Block::conv("block1", 1, 3, 1, 64),
                Block::max_pool("block2"),
                Block::conv("block3", 1, 3, 1, 128),
                Block::max_pool("block3_1"),
                Block::conv("block3_2", 1, 3, 1, 128),
                Block::max_pool("block4"),
                Block::conv("block5", 4, 3, 1, 256),
                Block::max_pool("block6"),
            ],
        ),
        "design3" => design(
            name,
            vec![
                Block::conv("block1", 1, 3, 1, 64),
                Block::max_pool("block2"),
                Block::conv("block3", 1, 3, 1, 128),
                Block::max_pool("block4"),
                Block::conv("block5", 4, 3, 1, 256),
                Block::max_pool("block6"),
            ],
        ),
        "design4" => design(
            name,
            vec![
                Block::conv("block1", 2, 3, 1, 64),
                Block::conv("block2", 1, 3, 2, 64),
                Block::conv("block2_1", 1, 1, 2, 128).with_inputs(&["block1"]),
                Block::conv("block3", 3, 3, 1, 128).with_inputs(&["block2"]),
                Block::residual_add("block3_1", "block2_1", "block3"),
                Block::conv("block3_2", 3, 3, 1, 128),
                Block::conv("block4", 1, 3, 2, 128),
                Block::conv("block5", 4, 3, 1, 256),
                Block::conv("block6", 1, 3, 2, 256),
            ],
        ),
        _ => {
            return Err(Error::Param(format!(
                "unknown design '{name}'; valid names: {}",
                BUILTIN_DESIGNS.join(", ")
            )))
        }
    };
    Ok(spec)
}
