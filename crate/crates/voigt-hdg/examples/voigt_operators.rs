//! The Voigt operators on a sample velocity gradient and normal.
//!
//! cargo run --example voigt_operators

use voigt_hdg::voigt::VoigtOps;

fn show(name: &str, m: &nalgebra::DMatrix<f64>) {
    println!("{name} =");
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:>8.4}", m[(r, c)])).collect();
        println!("  [{}]", row.join(" "));
    }
}

fn main() -> voigt_hdg::Result<()> {
    let v = VoigtOps::new(2)?;
    let nu = 0.1;
    let n = [0.6, 0.8];
    let g = vec![vec![1.0, 2.0], vec![-3.0, -1.0]];

    show("N (normal)", &v.normal_matrix(&n));
    show("T (tangent)", &v.tangent_matrix(&n));
    show("D", &v.d_matrix(nu));
    println!("E = {:?}", v.e_vector());

    let e = v.strain_from_gradient(&g);
    println!("grad u = {g:?}");
    println!("Voigt strain (11, 22, 12) = {e:?}");
    println!("back to a tensor = {:?}", v.strain_to_tensor(&e));
    println!("L = -D^1/2 grad_s u = {:?}", v.mixed_variable(&g, nu));

    let nt = v.normal_matrix(&n).transpose() * nalgebra::DVector::from_vec(v.e_vector());
    println!("N^T E = {:?} (the normal)", nt.as_slice());
    let tn = v.tangent_matrix(&n) * nalgebra::DVector::from_row_slice(&n);
    println!("T n = {:?}", tn.as_slice());
    Ok(())
}
