//! Dense f64 numeric kernel: 2-D tensors, forward ops, and the matching
//! analytic backward passes.
//!
//! Everything is row-major f64. Vectors are represented as 1xN tensors.
//! Backward functions accumulate into caller-owned gradient buffers;
//! zeroing gradients between steps is the caller's job, which lets a
//! mini-batch sum per-example gradients by just running backward
//! repeatedly.

mod gradcheck;
mod params;
mod tensor;

pub use gradcheck::{grad_check, GradCheckReport};
pub use params::{ParamStore, CHECKPOINT_MAGIC};
pub use tensor::Tensor2;

/// Errors from tensor ops and parameter-store plumbing.
#[derive(Debug, thiserror::Error)]
pub enum NumError {
    #[error("dimension mismatch: {op} on {lhs_rows}x{lhs_cols} and {rhs_rows}x{rhs_cols}")]
    DimMismatch {
        op: &'static str,
        lhs_rows: usize,
        lhs_cols: usize,
        rhs_rows: usize,
        rhs_cols: usize,
    },
    #[error("index {index} out of range for {what} of size {size}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },
    #[error("data length {got} does not match shape {rows}x{cols}")]
    DataLength { rows: usize, cols: usize, got: usize },
    #[error("parameter {0:?} already registered")]
    DuplicateParam(String),
    #[error("unknown parameter {0:?}")]
    UnknownParam(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("{0}")]
    Invalid(String),
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint parse error at line {line}: {message}")]
    CheckpointParse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, NumError>;

/// Unary elementwise ops with analytic local derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Relu,
    Tanh,
    Sigmoid,
}

/// Binary elementwise ops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Mul,
}

pub fn sigmoid(x: f64) -> f64 {
    // Split on sign so exp never overflows.
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Apply a unary elementwise op.
pub fn unary(op: UnaryOp, x: &Tensor2) -> Tensor2 {
    let f = match op {
        UnaryOp::Relu => |v: f64| if v > 0.0 { v } else { 0.0 },
        UnaryOp::Tanh => f64::tanh,
        UnaryOp::Sigmoid => sigmoid,
    };
    x.map(f)
}

/// Backward of [`unary`]: local derivative evaluated from the forward
/// *input* `x`, times the upstream gradient `dy`.
pub fn unary_backward(op: UnaryOp, x: &Tensor2, dy: &Tensor2) -> Result<Tensor2> {
    if x.shape() != dy.shape() {
        return Err(shape_err("unary_backward", x, dy));
    }
    let mut out = dy.clone();
    for (g, &v) in out.data_mut().iter_mut().zip(x.data()) {
        let local = match op {
            UnaryOp::Relu => {
                if v > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            UnaryOp::Tanh => {
                let t = v.tanh();
                1.0 - t * t
            }
            UnaryOp::Sigmoid => {
                let s = sigmoid(v);
                s * (1.0 - s)
            }
        };
        *g *= local;
    }
    Ok(out)
}

/// Apply a binary elementwise op; shapes must match.
pub fn binary(op: BinaryOp, a: &Tensor2, b: &Tensor2) -> Result<Tensor2> {
    if a.shape() != b.shape() {
        return Err(shape_err("binary", a, b));
    }
    let mut out = a.clone();
    for (o, &r) in out.data_mut().iter_mut().zip(b.data()) {
        match op {
            BinaryOp::Add => *o += r,
            BinaryOp::Mul => *o *= r,
        }
    }
    Ok(out)
}

/// Backward of [`binary`]: accumulates into `da` and `db`.
pub fn binary_backward(
    op: BinaryOp,
    a: &Tensor2,
    b: &Tensor2,
    dy: &Tensor2,
    da: &mut Tensor2,
    db: &mut Tensor2,
) -> Result<()> {
    if a.shape() != b.shape() || a.shape() != dy.shape() {
        return Err(shape_err("binary_backward", a, dy));
    }
    match op {
        BinaryOp::Add => {
            da.add_assign(dy)?;
            db.add_assign(dy)?;
        }
        BinaryOp::Mul => {
            for i in 0..dy.data().len() {
                da.data_mut()[i] += dy.data()[i] * b.data()[i];
                db.data_mut()[i] += dy.data()[i] * a.data()[i];
            }
        }
    }
    Ok(())
}

/// `a (m x k) * b (k x n) -> (m x n)`.
pub fn matmul(a: &Tensor2, b: &Tensor2) -> Result<Tensor2> {
    if a.cols() != b.rows() {
        return Err(shape_err("matmul", a, b));
    }
    let (m, k) = a.shape();
    let n = b.cols();
    let mut out = Tensor2::zeros(m, n);
    for i in 0..m {
        for p in 0..k {
            let av = a.data()[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b.data()[p * n..(p + 1) * n];
            let orow = &mut out.data_mut()[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Ok(out)
}

/// Backward of [`matmul`]: `da += dy * b^T`, `db += a^T * dy`.
pub fn matmul_backward(
    a: &Tensor2,
    b: &Tensor2,
    dy: &Tensor2,
    da: &mut Tensor2,
    db: &mut Tensor2,
) -> Result<()> {
    let (m, k) = a.shape();
    let n = b.cols();
    if dy.shape() != (m, n) || da.shape() != (m, k) || db.shape() != (k, n) {
        return Err(shape_err("matmul_backward", a, dy));
    }
    // da[i,p] += sum_j dy[i,j] * b[p,j]
    for i in 0..m {
        let dyrow = &dy.data()[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b.data()[p * n..(p + 1) * n];
            let mut acc = 0.0;
            for (dv, bv) in dyrow.iter().zip(brow) {
                acc += dv * bv;
            }
            da.data_mut()[i * k + p] += acc;
        }
    }
    // db[p,j] += sum_i a[i,p] * dy[i,j]
    for i in 0..m {
        let dyrow = &dy.data()[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a.data()[i * k + p];
            if av == 0.0 {
                continue;
            }
            let dbrow = &mut db.data_mut()[p * n..(p + 1) * n];
            for (o, &dv) in dbrow.iter_mut().zip(dyrow) {
                *o += av * dv;
            }
        }
    }
    Ok(())
}

/// Cross entropy of a 1xV logits row against a single target index,
/// normalized with log-sum-exp so saturated logits stay finite.
///
/// Returns `-log p(target)`.
pub fn softmax_xent(logits: &Tensor2, target: usize) -> Result<f64> {
    if logits.rows() != 1 || logits.cols() == 0 {
        return Err(NumError::Invalid(format!(
            "softmax_xent expects a 1xV row with V >= 1, got {}x{}",
            logits.rows(),
            logits.cols()
        )));
    }
    if target >= logits.cols() {
        return Err(NumError::IndexOutOfRange {
            what: "softmax target",
            index: target,
            size: logits.cols(),
        });
    }
    let z = logits.data();
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = z.iter().map(|&v| (v - m).exp()).sum();
    Ok(m + sum.ln() - z[target])
}

/// Backward of [`softmax_xent`]: `dz += scale * (softmax(z) - onehot(target))`.
pub fn softmax_xent_backward(
    logits: &Tensor2,
    target: usize,
    scale: f64,
    dz: &mut Tensor2,
) -> Result<()> {
    if dz.shape() != logits.shape() {
        return Err(shape_err("softmax_xent_backward", logits, dz));
    }
    if target >= logits.cols() {
        return Err(NumError::IndexOutOfRange {
            what: "softmax target",
            index: target,
            size: logits.cols(),
        });
    }
    let z = logits.data();
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = z.iter().map(|&v| (v - m).exp()).sum();
    for (j, g) in dz.data_mut().iter_mut().enumerate() {
        let p = (z[j] - m).exp() / sum;
        let delta = if j == target { 1.0 } else { 0.0 };
        *g += scale * (p - delta);
    }
    Ok(())
}

fn shape_err(op: &'static str, lhs: &Tensor2, rhs: &Tensor2) -> NumError {
    NumError::DimMismatch {
        op,
        lhs_rows: lhs.rows(),
        lhs_cols: lhs.cols(),
        rhs_rows: rhs.rows(),
        rhs_cols: rhs.cols(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(rows: usize, cols: usize, data: &[f64]) -> Tensor2 {
        Tensor2::from_vec(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let i = t(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let v = t(2, 1, &[3.0, 4.0]);
        assert_eq!(matmul(&i, &v).unwrap().data(), &[3.0, 4.0]);
    }

    #[test]
    fn matmul_forced() {
        let a = t(1, 2, &[1.0, 2.0]);
        let b = t(2, 1, &[3.0, 4.0]);
        assert_eq!(matmul(&a, &b).unwrap().data(), &[11.0]);
    }

    #[test]
    fn matmul_matches_naive_triple_loop() {
        // Independent oracle: naive triple loop in the plainest possible form.
        let mut rng = crate::testutil::rng(7);
        let a = Tensor2::uniform(3, 4, 1.0, &mut rng);
        let b = Tensor2::uniform(4, 2, 1.0, &mut rng);
        let got = matmul(&a, &b).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                let mut want = 0.0;
                for p in 0..4 {
                    want += a.get(i, p) * b.get(p, j);
                }
                assert!((got.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let a = t(1, 2, &[1.0, 2.0]);
        let b = t(3, 1, &[1.0, 2.0, 3.0]);
        let err = matmul(&a, &b).unwrap_err().to_string();
        assert!(err.contains("1x2") && err.contains("3x1"), "{err}");
    }

    #[test]
    fn identity_matmul_is_exact() {
        let mut rng = crate::testutil::rng(3);
        let a = Tensor2::uniform(4, 4, 2.0, &mut rng);
        let i = Tensor2::identity(4);
        assert_eq!(matmul(&i, &a).unwrap().data(), a.data());
        assert_eq!(matmul(&a, &i).unwrap().data(), a.data());
    }

    #[test]
    fn unary_definitions() {
        let x = t(1, 3, &[-1.0, 0.0, 2.0]);
        assert_eq!(unary(UnaryOp::Relu, &x).data(), &[0.0, 0.0, 2.0]);
        assert_eq!(unary(UnaryOp::Tanh, &t(1, 1, &[0.0])).data(), &[0.0]);
        assert_eq!(unary(UnaryOp::Sigmoid, &t(1, 1, &[0.0])).data(), &[0.5]);
    }

    #[test]
    fn binary_shape_mismatch() {
        let a = t(1, 2, &[1.0, 2.0]);
        let b = t(2, 1, &[1.0, 2.0]);
        assert!(binary(BinaryOp::Add, &a, &b).is_err());
    }

    #[test]
    fn softmax_xent_uniform_logits() {
        let z = Tensor2::zeros(1, 10);
        for target in 0..10 {
            let loss = softmax_xent(&z, target).unwrap();
            assert!((loss - 10.0f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_xent_saturated_is_stable() {
        let z = t(1, 2, &[1000.0, 0.0]);
        let loss = softmax_xent(&z, 0).unwrap();
        assert!(loss.is_finite());
        assert!(loss.abs() < 1e-9);
    }

    #[test]
    fn softmax_xent_matches_direct_formula() {
        // Direct-formula oracle, safe here because the logits are small.
        let mut rng = crate::testutil::rng(11);
        let z = Tensor2::uniform(1, 7, 3.0, &mut rng);
        let target = 4;
        let num = z.get(0, target).exp();
        let den: f64 = z.data().iter().map(|v| v.exp()).sum();
        let want = -(num / den).ln();
        let got = softmax_xent(&z, target).unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn softmax_xent_target_out_of_range() {
        let z = Tensor2::zeros(1, 3);
        assert!(softmax_xent(&z, 3).is_err());
    }

    proptest! {
        #[test]
        fn softmax_xent_translation_invariant(shift in -50.0f64..50.0, seed in 0u64..1000) {
            let mut rng = crate::testutil::rng(seed);
            let z = Tensor2::uniform(1, 6, 4.0, &mut rng);
            let shifted = z.map(|v| v + shift);
            let a = softmax_xent(&z, 2).unwrap();
            let b = softmax_xent(&shifted, 2).unwrap();
            prop_assert!((a - b).abs() < 1e-10);
        }

        #[test]
        fn ops_stay_finite_on_finite_inputs(seed in 0u64..500) {
            let mut rng = crate::testutil::rng(seed);
            let a = Tensor2::uniform(3, 3, 100.0, &mut rng);
            let b = Tensor2::uniform(3, 3, 100.0, &mut rng);
            for op in [UnaryOp::Relu, UnaryOp::Tanh, UnaryOp::Sigmoid] {
                prop_assert!(unary(op, &a).data().iter().all(|v| v.is_finite()));
            }
            prop_assert!(matmul(&a, &b).unwrap().data().iter().all(|v| v.is_finite()));
            let big = a.map(|v| v * 1e4);
            prop_assert!(softmax_xent(&Tensor2::from_vec(1, 9, big.data().to_vec()).unwrap(), 0).unwrap().is_finite());
        }
    }
}
