//! Entropies, mutual information and Chernoff distances of a small joint pmf.

use abcx::metrics::chernoff_distance;
use abcx::prob::{conditional_mutual_info, entropy, mutual_info, Alphabet, Axis, ChannelModel, CondPmf, JointPmf};

fn main() -> abcx::Result<()> {
    let p_x = JointPmf::new(vec![Alphabet::new(Axis::X, 2)], vec![0.3, 0.7])?;
    let ch = ChannelModel::bsc_pair(0.1, 0.25)?;
    // X -> (Y, Z) through the two components of the broadcast channel.
    let q = p_x.compose(ch.w1())?.compose(&CondPmf::bsc(Axis::X, Axis::Z, 0.25)?)?;
    println!("H(X)      = {:.6} nats", entropy(&q, &[Axis::X])?);
    println!("I(X;Y)    = {:.6}", mutual_info(&q, &[Axis::X], &[Axis::Y])?);
    println!("I(X;Z)    = {:.6}", mutual_info(&q, &[Axis::X], &[Axis::Z])?);
    println!(
        "I(X;Z|Y)  = {:.6}",
        conditional_mutual_info(&q, &[Axis::X], &[Axis::Z], &[Axis::Y])?
    );

    let pair = JointPmf::new(
        vec![Alphabet::new(Axis::X, 2), Alphabet::new(Axis::Xp, 2)],
        vec![0.0, 0.5, 0.5, 0.0],
    )?;
    for s in [0.0, 0.25, 0.5, 0.75, 1.0] {
        println!("D_{s:<4} on BSC(0.1) = {:.6}", chernoff_distance(&pair, ch.w1(), s)?);
    }
    Ok(())
}
