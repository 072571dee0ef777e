//! Reverse-mode gradients on the tape, checked against a finite difference,
//! and a checkpoint roundtrip.

use spargcp::autodiff::{read_checkpoint, write_checkpoint, Matrix, Tape};

pub fn run_example() -> spargcp::Result<()> {
    let x = Matrix::from_rows(&[[0.5, -1.0, 2.0], [1.5, 0.0, -0.5]])?;
    let w = Matrix::from_rows(&[[0.1, 0.2], [-0.3, 0.4], [0.5, -0.6]])?;
    let labels = [1, 0];

    let loss_at = |w: &Matrix| -> spargcp::Result<f64> {
        let tape = Tape::new();
        let logits = tape.constant(x.clone()).matmul(tape.constant(w.clone()))?;
        Ok(logits.cross_entropy(&labels)?.scalar())
    };

    let tape = Tape::new();
    let wt = tape.param(w.clone());
    let loss = tape.constant(x.clone()).matmul(wt)?.cross_entropy(&labels)?;
    let grad = loss.backward()?.wrt(wt);
    println!("loss {:.6}\ngrad {grad:?}", loss.scalar());

    let h = 1e-6;
    let mut plus = w.clone();
    plus.set(2, 1, w.get(2, 1) + h);
    let mut minus = w.clone();
    minus.set(2, 1, w.get(2, 1) - h);
    let numeric = (loss_at(&plus)? - loss_at(&minus)?) / (2.0 * h);
    println!("d loss / d w[2,1]: tape {:.8}, finite difference {numeric:.8}", grad.get(2, 1));
    assert!((numeric - grad.get(2, 1)).abs() < 1e-6);

    // The quantile op routes its gradient to the selected order statistic.
    let tape = Tape::new();
    let scores = tape.param(Matrix::column(&[0.4, 0.9, 0.1, 0.7]));
    let q = scores.quantile_value(0.75)?;
    println!("0.75-quantile {} grad {:?}", q.scalar(), q.backward()?.wrt(scores).data());

    let mut buf = Vec::new();
    write_checkpoint(&mut buf, &[("w".to_string(), w.clone())])?;
    let back = read_checkpoint(buf.as_slice())?;
    assert_eq!(back[0].1, w);
    println!("checkpoint: {} bytes", buf.len());
    Ok(())
}

fn main() -> spargcp::Result<()> {
    run_example()
}
