//! Dense operator toolkit: Kronecker products, exponentials, row-stacked
//! vectorization and the fidelity metric.

use envsteer::linalg::{expm, fidelity, kron, trace_distance, vec, Operator, SuperOperator};
use envsteer::model::pauli;
use envsteer::Result;

fn main() -> Result<()> {
    let [sx, sy, sz] = pauli();

    // σ_z ⊗ σ_x on two qubits.
    let zx = kron(&sz, &sx);
    println!("σz⊗σx is {}×{}, trace {:.1}", zx.dim(), zx.dim(), zx.trace().re);

    // e^{−iσ_y π/4} rotates |0⟩ onto the x axis.
    let u = expm(&sy, std::f64::consts::FRAC_PI_4)?;
    let rho = u.sandwich(&Operator::basis_projector(2, 0));
    println!("⟨σx⟩ after rotation = {:.6}", sx.matmul(&rho).trace().re);

    // vec(XρY) = (X ⊗ Yᵀ) vec(ρ)
    let lhs = vec(&sx.matmul(&rho).matmul(&sz));
    let rhs = SuperOperator::sandwich(&sx, &sz).apply_vec(vec(&rho).entries());
    let err: f64 = lhs.entries().iter().zip(&rhs).map(|(a, b)| (a - b).norm()).sum();
    println!("vec identity residual {err:.1e}");

    let mixed = Operator::maximally_mixed(2);
    println!(
        "F(|0⟩⟨0|, I/2) = {:.6}, trace distance {:.3}",
        fidelity(&Operator::basis_projector(2, 0), &mixed)?,
        trace_distance(&Operator::basis_projector(2, 0), &mixed)?
    );
    Ok(())
}
