use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Contraction stages as (first conv, second conv) widths.
pub const CONTRACTION: [(usize, usize); 3] = [(16, 32), (32, 64), (64, 128)];
pub const BOTTLENECK: (usize, usize) = (128, 256);
/// Expansion stages, deepest first, as (deconv, conv) widths. The last conv
/// width is replaced by the class count.
pub const EXPANSION: [(usize, usize); 3] = [(128, 128), (64, 64), (32, 0)];

/// Three 2x poolings.
pub const DIVISOR: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Deconv,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub relu: bool,
}

impl LayerSpec {
    pub fn taps(&self) -> usize {
        match self.kind {
            LayerKind::Conv => 27,
            LayerKind::Deconv => 8,
        }
    }

    pub fn weight_shape(&self) -> Vec<usize> {
        let k = match self.kind {
            LayerKind::Conv => 3,
            LayerKind::Deconv => 2,
        };
        vec![self.out_channels, self.in_channels, k, k, k]
    }

    pub fn weight_name(&self) -> String {
        format!("{}.weight", self.name)
    }

    pub fn bias_name(&self) -> String {
        format!("{}.bias", self.name)
    }

    pub fn parameter_count(&self) -> usize {
        self.out_channels * self.in_channels * self.taps() + self.out_channels
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UNetConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    /// Multiplies every hidden width; the class count is never scaled.
    pub width_scale: f64,
}

impl UNetConfig {
    pub fn new(in_channels: usize, out_channels: usize, width_scale: f64) -> Result<Self> {
        let c = UNetConfig { in_channels, out_channels, width_scale };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::Config(format!(
                "channel counts must be positive (in {}, out {})",
                self.in_channels, self.out_channels
            )));
        }
        let smallest = CONTRACTION[0].0 as f64;
        if !(self.width_scale.is_finite() && self.width_scale * smallest >= 1.0) {
            return Err(Error::Config(format!(
                "width_scale {} leaves a layer with fewer than one kernel",
                self.width_scale
            )));
        }
        Ok(())
    }

    pub fn width(&self, nominal: usize) -> usize {
        ((nominal as f64 * self.width_scale).round() as usize).max(1)
    }

    /// Every layer in execution order.
    pub fn layers(&self) -> Vec<LayerSpec> {
        let conv = |name: String, cin, cout, relu| LayerSpec { name, kind: LayerKind::Conv, in_channels: cin, out_channels: cout, relu };
        let mut out = Vec::with_capacity(14);
        let mut skips = Vec::new();
        let mut c = self.in_channels;
        for (i, &(a, b)) in CONTRACTION.iter().enumerate() {
            let (a, b) = (self.width(a), self.width(b));
            out.push(conv(format!("down{}.conv1", i + 1), c, a, true));
            out.push(conv(format!("down{}.conv2", i + 1), a, b, true));
            skips.push(b);
            c = b;
        }
        let (a, b) = (self.width(BOTTLENECK.0), self.width(BOTTLENECK.1));
        out.push(conv("bottom.conv1".into(), c, a, true));
        out.push(conv("bottom.conv2".into(), a, b, true));
        c = b;
        for (j, &(d, k)) in EXPANSION.iter().enumerate() {
            let level = EXPANSION.len() - j;
            let last = level == 1;
            let d = self.width(d);
            out.push(LayerSpec {
                name: format!("up{level}.deconv"),
                kind: LayerKind::Deconv,
                in_channels: c,
                out_channels: d,
                relu: true,
            });
            let k = if last { self.out_channels } else { self.width(k) };
            out.push(conv(format!("up{level}.conv"), d + skips[level - 1], k, !last));
            c = k;
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().iter().map(LayerSpec::parameter_count).sum()
    }

    pub fn check_dims(&self, dims: [usize; 3]) -> Result<()> {
        if dims.iter().any(|&d| d == 0 || d % DIVISOR != 0) {
            return Err(Error::IndivisibleDims { dims, by: DIVISOR });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_sub_unit_widths() {
        assert!(UNetConfig::new(1, 7, 1.0 / 16.0).is_ok());
        assert!(UNetConfig::new(1, 7, 0.05).is_err());
        assert!(UNetConfig::new(0, 7, 1.0).is_err());
        assert!(UNetConfig::new(1, 7, f64::NAN).is_err());
    }

    #[test]
    fn class_count_is_not_scaled() {
        let l = UNetConfig::new(2, 5, 0.25).unwrap().layers();
        assert_eq!(l.last().unwrap().out_channels, 5);
        assert!(!l.last().unwrap().relu);
        assert_eq!(l[0].in_channels, 2);
        assert_eq!(l[0].out_channels, 4);
    }
}
