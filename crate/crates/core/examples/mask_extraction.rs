//! Attaches a mask to a small network, prunes a few units and extracts the
//! smaller network, which computes the same function as the binary-masked
//! original.

use maskpool::gradcore::Tensor;
use maskpool::maskednet::{count_flops, Architecture, MaskState, MaskedNetwork};

fn main() -> maskpool::Result<()> {
    let arch = Architecture::parse_descriptor("in=1x8x8;conv=6/3/1/1/pool;dense=16;out=4")?;
    let mut net = MaskedNetwork::new("demo", arch.clone(), 7)?;
    let dense_flops = count_flops(&net)?;
    let retained: Vec<bool> = (0..arch.num_units()).map(|u| u % 3 != 0).collect();
    net.set_mask(Some(MaskState::binary(&arch, &retained)?))?;
    let sub = net.extract_subnetwork()?;

    let x = Tensor::from_fn(&[5, 1, 8, 8], |i| ((i * 37) % 11) as f64 / 5.0 - 1.0);
    let diff = sub.forward_unmasked(&x)?.max_abs_diff(&net.masked_forward(&x)?);
    println!("units {} -> {}", net.num_units(), sub.num_units());
    println!("flops {} -> {}", dense_flops, count_flops(&sub)?);
    println!("max |extracted - masked| = {diff:e}");
    Ok(())
}
