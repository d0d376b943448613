use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.1;

#[inline]
pub fn leaky<S: Scalar>(x: S, alpha: S) -> S {
    if x >= S::zero() {
        x
    } else {
        alpha * x
    }
}

pub fn leaky_relu<S: Scalar>(t: &Tensor<S>, alpha: S) -> Tensor<S> {
    t.map(|x| leaky(x, alpha))
}

pub fn leaky_relu_in_place<S: Scalar>(t: &mut Tensor<S>, alpha: S) {
    for x in t.data_mut() {
        *x = leaky(*x, alpha);
    }
}

/// Logistic sigmoid, evaluated on the side that cannot overflow.
#[inline]
pub fn logistic<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

/// Max-shifted softmax.
pub fn softmax<S: Scalar>(logits: &[S]) -> Vec<S> {
    let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: S = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}
