use std::fmt;

use crate::error::{Error, Result};

pub const DESK_CNN_ID: &str = "desk-cnn";
pub const DESK_MLP_ID: &str = "desk-mlp";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct InputShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl InputShape {
    pub fn numel(&self) -> usize {
        self.channels * self.height * self.width
    }
}

/// One prunable hidden layer. Every conv filter or dense node is a unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LayerSpec {
    Conv {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        pool: bool,
    },
    Dense {
        width: usize,
    },
}

impl LayerSpec {
    pub fn units(&self) -> usize {
        match *self {
            LayerSpec::Conv { out_channels, .. } => out_channels,
            LayerSpec::Dense { width } => width,
        }
    }

    pub fn with_units(self, units: usize) -> Self {
        match self {
            LayerSpec::Conv {
                kernel,
                stride,
                padding,
                pool,
                ..
            } => LayerSpec::Conv {
                out_channels: units,
                kernel,
                stride,
                padding,
                pool,
            },
            LayerSpec::Dense { .. } => LayerSpec::Dense { width: units },
        }
    }

    pub fn is_conv(&self) -> bool {
        matches!(self, LayerSpec::Conv { .. })
    }
}

/// Hidden layers followed by a dense classifier that is never pruned.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Architecture {
    pub input: InputShape,
    pub hidden: Vec<LayerSpec>,
    pub num_classes: usize,
}

/// Shape bookkeeping for one hidden layer, derived from the architecture.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerGeometry {
    /// Channels (conv input) or flattened width (dense input).
    pub in_units: usize,
    /// Spatial size each input unit spans: `H·W` after a conv, 1 otherwise.
    pub in_block: usize,
    /// Conv output spatial dims before pooling; `(1, 1)` for dense.
    pub out_hw: (usize, usize),
    /// Spatial size of each output unit as seen by the next layer.
    pub out_block: usize,
}

impl Architecture {
    /// 2 conv layers (8 and 16 3×3 filters, stride 1, 2×2 max pool), a dense
    /// layer of 32, then the classifier.
    pub fn desk_cnn(input: InputShape, num_classes: usize) -> Self {
        let conv = |out_channels| LayerSpec::Conv {
            out_channels,
            kernel: 3,
            stride: 1,
            padding: 1,
            pool: true,
        };
        Self {
            input,
            hidden: vec![conv(8), conv(16), LayerSpec::Dense { width: 32 }],
            num_classes,
        }
    }

    /// Two hidden dense layers of 64 nodes.
    pub fn desk_mlp(input: InputShape, num_classes: usize) -> Self {
        Self {
            input,
            hidden: vec![LayerSpec::Dense { width: 64 }, LayerSpec::Dense { width: 64 }],
            num_classes,
        }
    }

    pub fn preset(id: &str, input: InputShape, num_classes: usize) -> Result<Self> {
        match id {
            DESK_CNN_ID | "cnn" => Ok(Self::desk_cnn(input, num_classes)),
            DESK_MLP_ID | "mlp" => Ok(Self::desk_mlp(input, num_classes)),
            other => Err(Error::InvalidArchitecture(format!("unknown preset `{other}`"))),
        }
    }

    pub fn num_layers(&self) -> usize {
        self.hidden.len()
    }

    /// Total prunable units `n`.
    pub fn num_units(&self) -> usize {
        self.hidden.iter().map(LayerSpec::units).sum()
    }

    /// First global unit index of each hidden layer, plus `n` at the end.
    pub fn layer_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.hidden.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for layer in &self.hidden {
            acc += layer.units();
            offsets.push(acc);
        }
        offsets
    }

    /// Units to prune for ratio `r`: `k = ⌈n·r⌉`. Errors unless
    /// `0 ≤ r < 1` and `k` leaves at least one unit in every layer.
    pub fn prune_count(&self, ratio: f64) -> Result<usize> {
        let n = self.num_units();
        let layers = self.num_layers();
        let infeasible = Error::InfeasibleRatio {
            ratio,
            units: n,
            layers,
        };
        if !(0.0..1.0).contains(&ratio) {
            return Err(infeasible);
        }
        // The epsilon keeps products like 100·0.9 = 90.00000000000001 at 90.
        let k = ((n as f64) * ratio - 1e-9).ceil().max(0.0) as usize;
        if k + layers > n {
            return Err(infeasible);
        }
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry().map(|_| ())
    }

    /// Per-layer shape bookkeeping; fails on inconsistent specs.
    pub fn geometry(&self) -> Result<Vec<LayerGeometry>> {
        let bad = |msg: String| Err(Error::InvalidArchitecture(msg));
        if self.input.numel() == 0 || self.num_classes == 0 {
            return bad("input and classifier sizes must be positive".into());
        }
        let mut geo = Vec::with_capacity(self.hidden.len());
        // (units, height, width, spatial) of the running activation.
        let (mut units, mut h, mut w) = (self.input.channels, self.input.height, self.input.width);
        let mut spatial = true;
        for (idx, layer) in self.hidden.iter().enumerate() {
            if layer.units() == 0 {
                return bad(format!("layer {idx} has no units"));
            }
            match *layer {
                LayerSpec::Conv {
                    out_channels,
                    kernel,
                    stride,
                    padding,
                    pool,
                } => {
                    if !spatial {
                        return bad(format!("conv layer {idx} follows a dense layer"));
                    }
                    if kernel == 0 || stride == 0 || h + 2 * padding < kernel || w + 2 * padding < kernel {
                        return bad(format!("conv layer {idx} has invalid geometry"));
                    }
                    let ho = (h + 2 * padding - kernel) / stride + 1;
                    let wo = (w + 2 * padding - kernel) / stride + 1;
                    let (ph, pw) = if pool { (ho / 2, wo / 2) } else { (ho, wo) };
                    if ph == 0 || pw == 0 {
                        return bad(format!("conv layer {idx} pools to an empty map"));
                    }
                    geo.push(LayerGeometry {
                        in_units: units,
                        in_block: 1,
                        out_hw: (ho, wo),
                        out_block: ph * pw,
                    });
                    units = out_channels;
                    h = ph;
                    w = pw;
                }
                LayerSpec::Dense { width } => {
                    let (in_units, in_block) = if spatial { (units, h * w) } else { (units, 1) };
                    geo.push(LayerGeometry {
                        in_units,
                        in_block,
                        out_hw: (1, 1),
                        out_block: 1,
                    });
                    spatial = false;
                    units = width;
                    h = 1;
                    w = 1;
                }
            }
        }
        Ok(geo)
    }

    /// `(units, block)` feeding the classifier.
    pub fn head_input(&self) -> Result<(usize, usize)> {
        let geo = self.geometry()?;
        Ok(match (self.hidden.last(), geo.last()) {
            (Some(layer), Some(g)) => (layer.units(), g.out_block),
            _ => (self.input.channels, self.input.height * self.input.width),
        })
    }

    /// Compact text form, e.g. `in=1x16x16;conv=8/3/1/1/pool;dense=32;out=20`.
    pub fn descriptor(&self) -> String {
        self.to_string()
    }

    pub fn parse_descriptor(text: &str) -> Result<Self> {
        let bad = || Error::InvalidArchitecture(format!("cannot parse descriptor `{text}`"));
        let mut input = None;
        let mut hidden = Vec::new();
        let mut num_classes = None;
        for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(bad)?;
            match key {
                "in" => {
                    let dims: Vec<usize> = value
                        .split('x')
                        .map(|d| d.parse().map_err(|_| bad()))
                        .collect::<Result<_>>()?;
                    let [channels, height, width] = dims[..] else {
                        return Err(bad());
                    };
                    input = Some(InputShape {
                        channels,
                        height,
                        width,
                    });
                }
                "conv" => {
                    let fields: Vec<&str> = value.split('/').collect();
                    if fields.len() != 5 {
                        return Err(bad());
                    }
                    let num = |s: &str| s.parse::<usize>().map_err(|_| bad());
                    let pool = match fields[4] {
                        "pool" => true,
                        "nopool" => false,
                        _ => return Err(bad()),
                    };
                    hidden.push(LayerSpec::Conv {
                        out_channels: num(fields[0])?,
                        kernel: num(fields[1])?,
                        stride: num(fields[2])?,
                        padding: num(fields[3])?,
                        pool,
                    });
                }
                "dense" => hidden.push(LayerSpec::Dense {
                    width: value.parse().map_err(|_| bad())?,
                }),
                "out" => num_classes = Some(value.parse().map_err(|_| bad())?),
                _ => return Err(bad()),
            }
        }
        let arch = Self {
            input: input.ok_or_else(bad)?,
            hidden,
            num_classes: num_classes.ok_or_else(bad)?,
        };
        arch.validate()?;
        Ok(arch)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = self.input;
        write!(f, "in={}x{}x{}", i.channels, i.height, i.width)?;
        for layer in &self.hidden {
            match *layer {
                LayerSpec::Conv {
                    out_channels,
                    kernel,
                    stride,
                    padding,
                    pool,
                } => write!(
                    f,
                    ";conv={out_channels}/{kernel}/{stride}/{padding}/{}",
                    if pool { "pool" } else { "nopool" }
                )?,
                LayerSpec::Dense { width } => write!(f, ";dense={width}")?,
            }
        }
        write!(f, ";out={}", self.num_classes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const IN: InputShape = InputShape {
        channels: 1,
        height: 16,
        width: 16,
    };

    #[test]
    fn desk_unit_counts() {
        assert_eq!(Architecture::desk_cnn(IN, 20).num_units(), 56);
        assert_eq!(Architecture::desk_mlp(IN, 20).num_units(), 128);
        assert_eq!(Architecture::desk_cnn(IN, 20).layer_offsets(), vec![0, 8, 24, 56]);
    }

    #[test]
    fn cnn_geometry() {
        let geo = Architecture::desk_cnn(IN, 20).geometry().unwrap();
        assert_eq!(geo[0].out_hw, (16, 16));
        assert_eq!(geo[0].out_block, 64);
        assert_eq!(geo[1].in_units, 8);
        assert_eq!(geo[1].out_hw, (8, 8));
        assert_eq!(geo[2].in_units, 16);
        assert_eq!(geo[2].in_block, 16);
    }

    #[test]
    fn descriptor_round_trip() {
        for arch in [Architecture::desk_cnn(IN, 20), Architecture::desk_mlp(IN, 7)] {
            let text = arch.descriptor();
            assert_eq!(Architecture::parse_descriptor(&text).unwrap(), arch);
        }
        assert_eq!(
            Architecture::desk_cnn(IN, 20).descriptor(),
            "in=1x16x16;conv=8/3/1/1/pool;conv=16/3/1/1/pool;dense=32;out=20"
        );
    }

    #[test]
    fn conv_after_dense_is_rejected() {
        let arch = Architecture {
            input: IN,
            hidden: vec![
                LayerSpec::Dense { width: 4 },
                LayerSpec::Conv {
                    out_channels: 2,
                    kernel: 3,
                    stride: 1,
                    padding: 1,
                    pool: false,
                },
            ],
            num_classes: 2,
        };
        assert!(arch.validate().is_err());
    }
}
