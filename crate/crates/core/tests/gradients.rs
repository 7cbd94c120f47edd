//! Central finite-difference checks of every backward pass.

use featspace::verify::{self, CaseReport};

const INSTANCES: u64 = 20;

fn assert_passed(rep: featspace::Result<CaseReport>) {
    let rep = rep.unwrap();
    assert!(rep.passed(), "{}: {:?}", rep.name, rep.failures);
    assert!(rep.checks > 0);
}

#[test]
fn conv_small_example() {
    assert_passed(verify::conv_example());
}

#[test]
fn conv_random_geometries() {
    assert_passed(verify::conv(INSTANCES));
}

#[test]
fn maxpool_random() {
    assert_passed(verify::maxpool(INSTANCES));
}

#[test]
fn batchnorm_random() {
    assert_passed(verify::batchnorm(INSTANCES));
}

#[test]
fn relu_random() {
    assert_passed(verify::relu_case(INSTANCES));
}

#[test]
fn softmax_cross_entropy_random() {
    assert_passed(verify::softmax_ce(INSTANCES));
}

#[test]
fn global_avg_pool_random() {
    assert_passed(verify::global_avg_pool_case(INSTANCES));
}

#[test]
fn dropout_random() {
    assert_passed(verify::dropout_case(INSTANCES));
}

#[test]
fn penalties_random() {
    assert_passed(verify::penalties(INSTANCES));
}

#[test]
fn whole_model_random() {
    let rep = verify::whole_model(INSTANCES).unwrap();
    assert_eq!(rep.instances, INSTANCES as usize);
    assert_passed(Ok(rep));
}

#[test]
fn broken_gradient_is_caught() {
    use featspace::tensor::{grad_check, Tensor};
    let x = Tensor::<f64>::from_vec(&[3], vec![1.0, 2.0, 3.0]).unwrap();
    let wrong = x.scale(3.0);
    let r = grad_check(|t| Ok(t.sum_sq()), &x, &wrong, verify::H, verify::TOL).unwrap();
    assert!(!r.passed);
}
