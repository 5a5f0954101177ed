use super::arch::LayerSpec;
use super::network::MaskedNetwork;
use crate::error::Result;

/// Forward FLOPs per sample for the retained units of `net`.
///
/// Conv: `2·kh·kw·C_in·C_out·H_out·W_out`; dense: `2·n_in·n_out`, where the
/// channel/node counts only include retained units. Pooling, bias and
/// activation costs are not counted.
pub fn count_flops(net: &MaskedNetwork) -> Result<u64> {
    let arch = net.arch();
    let geo = arch.geometry()?;
    let retained: Vec<usize> = match net.mask() {
        Some(m) => (0..arch.num_layers()).map(|l| m.layer_retained(l)).collect(),
        None => arch.hidden.iter().map(LayerSpec::units).collect(),
    };
    let mut total: u64 = 0;
    let mut prev_units = arch.input.channels;
    for ((layer, g), &out) in arch.hidden.iter().zip(&geo).zip(&retained) {
        let flops = match *layer {
            LayerSpec::Conv { kernel, .. } => {
                2 * kernel * kernel * prev_units * out * g.out_hw.0 * g.out_hw.1
            }
            LayerSpec::Dense { .. } => 2 * prev_units * g.in_block * out,
        };
        total += flops as u64;
        prev_units = out;
    }
    let (_, block) = arch.head_input()?;
    total += (2 * prev_units * block * arch.num_classes) as u64;
    Ok(total)
}

/// Running FLOPs tally for one training run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FlopsLedger {
    pub forward_flops_per_sample: u64,
    pub cumulative_training_flops: u64,
    pub steps: u64,
}

impl FlopsLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one optimizer step: forward plus backward counted as three
    /// forward passes over the batch.
    pub fn track_step(&mut self, forward_flops_per_sample: u64, batch_size: usize) {
        self.forward_flops_per_sample = forward_flops_per_sample;
        self.cumulative_training_flops += 3 * forward_flops_per_sample * batch_size as u64;
        self.steps += 1;
    }

    pub fn track_training_flops(&mut self, net: &MaskedNetwork, batch_size: usize) -> Result<()> {
        self.track_step(count_flops(net)?, batch_size);
        Ok(())
    }

    pub fn merge(&mut self, other: &FlopsLedger) {
        self.cumulative_training_flops += other.cumulative_training_flops;
        self.steps += other.steps;
        self.forward_flops_per_sample = other.forward_flops_per_sample;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ledger_step_arithmetic() {
        let mut l = FlopsLedger::new();
        assert_eq!(l.cumulative_training_flops, 0);
        l.track_step(100, 2);
        assert_eq!(l.cumulative_training_flops, 600);
        let mut many = FlopsLedger::new();
        for _ in 0..100 {
            many.track_step(100, 2);
        }
        assert_eq!(many.cumulative_training_flops, 100 * 600);
    }
}
