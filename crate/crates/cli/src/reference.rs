//! Published CIFAR-10 results of the reference designs, shown next to
//! measured numbers in ablation tables. Accuracies are percentages of the
//! full-width networks trained on all 50k images.

/// One published row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub params_k: Option<u32>,
    pub test_acc: f64,
}

const fn r(params_k: Option<u32>, test_acc: f64) -> Reference {
    Reference { params_k, test_acc }
}

pub const DESIGN1: Reference = r(Some(20173), 89.4);
pub const DESIGN2: Reference = r(Some(20173), 86.8);
pub const DESIGN3: Reference = r(Some(20025), 87.9);
pub const DESIGN1_CONV: Reference = r(Some(20948), 91.7);
pub const DESIGN1_CONV_NO_BN: Reference = r(None, 88.2);
pub const DESIGN1_CONV_NO_DROPOUT: Reference = r(None, 90.1);
pub const DESIGN1_CONV_STEP: Reference = r(None, 90.1);
pub const DESIGN1_CONV_STRIDE: Reference = r(None, 89.4);
pub const DESIGN4: Reference = r(Some(21573), 89.3);
