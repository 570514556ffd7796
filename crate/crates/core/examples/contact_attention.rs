//! Contact-guided attention: beats with foot contacts draw more attention and
//! contribute amplified values.
//!
//! cargo run --release --example contact_attention

use motionbeat::model::contact_attention;
use motionbeat::Matrix;

fn main() -> motionbeat::Result<()> {
    let q = Matrix::from_rows(&[vec![0.2, 0.1], vec![-0.3, 0.4], vec![0.5, -0.2], vec![0.1, 0.1]])?;
    let k = q.clone();
    let v = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![-1.0, 0.5]])?;
    let contacts = [0.9, 0.0, 0.1, 0.8];

    let plain = contact_attention(&q, &k, &v, None, 0.0, 0.0)?;
    let guided = contact_attention(&q, &k, &v, Some(&contacts), 1.5, 0.3)?;
    println!("contacts {contacts:?}");
    for t in 0..q.rows() {
        let fmt = |m: &Matrix| m.row(t).iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
        println!("beat {t}: plain weights [{}]  guided weights [{}]", fmt(&plain.weights), fmt(&guided.weights));
    }
    let mass = |m: &Matrix, u: usize| (0..m.rows()).map(|t| m.get(t, u)).sum::<f64>() / m.rows() as f64;
    for u in 0..4 {
        println!("mean attention on beat {u}: {:.3} -> {:.3}", mass(&plain.weights, u), mass(&guided.weights, u));
    }

    let off = contact_attention(&q, &k, &v, Some(&contacts), 0.0, 0.0)?;
    let diff = off.output.as_slice().iter().zip(plain.output.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("zero contact scalars vs plain attention: max output difference {diff:.1e}");
    Ok(())
}
