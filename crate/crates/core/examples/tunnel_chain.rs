//! Limiting Markov chain between the deep wells and one of its trajectories.
//!
//! `cargo run --release --example tunnel_chain`

use smallnoise::landscape::{analyze, laplace_partition};
use smallnoise::model::library::asymmetric_saddles;
use smallnoise::tunnel::{build_rate_matrix, chain_invariant, simulate_chain};

fn main() -> smallnoise::Result<()> {
    let v = asymmetric_saddles(-2.5, 1.5);
    let d = analyze(&v)?;
    let chain = build_rate_matrix(&d, &laplace_partition(&d, 0.5)?)?;
    let k = chain.len();
    println!("states {:?}", chain.states);
    for i in 0..k {
        println!("Q[{i}] = {:?}", &chain.q[i * k..(i + 1) * k]);
    }
    println!("mu {:?}, from Q {:?}", chain.mu, chain_invariant(&chain)?);
    let path = simulate_chain(&chain, 0, 1e4, 3)?;
    println!("{} jumps, occupation {:?}", path.jumps(), path.occupation(k));
    Ok(())
}
