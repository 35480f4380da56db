use std::fmt;
use std::str::FromStr;

use cardiorefine_core::{LabelSchema, Structure};
use serde::{Deserialize, Serialize};

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    #[serde(rename = "UNET1")]
    Unet1,
    #[serde(rename = "REFINE_LABELS")]
    RefineLabels,
    #[serde(rename = "UNET1_NO_PA")]
    Unet1NoPa,
    #[serde(rename = "UNET2_EXTRAPOLATE")]
    Unet2Extrapolate,
    #[serde(rename = "UNET3_PARCELLATE")]
    Unet3Parcellate,
    #[serde(rename = "FUSE")]
    Fuse,
    #[serde(rename = "UNET4")]
    Unet4,
}

/// LA sub-labels predicted by the parcellation network, in class order
/// after background.
pub const LA_PARTS: [Structure; 4] = [Structure::LAbody, Structure::LPV, Structure::RPV, Structure::LAA];

/// What a network stage consumes.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum StageInput {
    /// Standardised intensity, one channel.
    Image,
    /// One-hot label map of the given schema.
    Labels(LabelSchema),
    /// Background/LA indicator channels.
    LaMask,
}

/// What a network stage produces.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum StageOutput {
    Labels(LabelSchema),
    /// Background plus [`LA_PARTS`].
    LaParts,
}

impl StageOutput {
    pub fn channels(self) -> usize {
        match self {
            StageOutput::Labels(s) => s.num_channels(),
            StageOutput::LaParts => LA_PARTS.len() + 1,
        }
    }
}

impl StageInput {
    pub fn channels(self) -> usize {
        match self {
            StageInput::Image => 1,
            StageInput::Labels(s) => s.num_channels(),
            StageInput::LaMask => 2,
        }
    }
}

/// Whether a stage works on the whole heart window or the LA window.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Window {
    Heart,
    Atrium,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct StageSpec {
    pub stage: Stage,
    pub input: StageInput,
    pub output: StageOutput,
    pub window: Window,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Unet1,
        Stage::RefineLabels,
        Stage::Unet1NoPa,
        Stage::Unet2Extrapolate,
        Stage::Unet3Parcellate,
        Stage::Fuse,
        Stage::Unet4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Unet1 => "UNET1",
            Stage::RefineLabels => "REFINE_LABELS",
            Stage::Unet1NoPa => "UNET1_NO_PA",
            Stage::Unet2Extrapolate => "UNET2_EXTRAPOLATE",
            Stage::Unet3Parcellate => "UNET3_PARCELLATE",
            Stage::Fuse => "FUSE",
            Stage::Unet4 => "UNET4",
        }
    }

    pub fn is_network(self) -> bool {
        !matches!(self, Stage::RefineLabels | Stage::Fuse)
    }

    /// Input and output of a network stage; `None` for the rule-based ones.
    pub fn spec(self) -> Option<StageSpec> {
        use StageInput as I;
        use StageOutput as O;
        let (input, output, window) = match self {
            Stage::Unet1 => (I::Image, O::Labels(LabelSchema::Six), Window::Heart),
            Stage::Unet1NoPa => (I::Image, O::Labels(LabelSchema::SixNoPaRefined), Window::Heart),
            Stage::Unet2Extrapolate => {
                (I::Labels(LabelSchema::SixNoPaRefined), O::Labels(LabelSchema::Seven), Window::Heart)
            }
            Stage::Unet3Parcellate => (I::LaMask, O::LaParts, Window::Atrium),
            Stage::Unet4 => (I::Image, O::Labels(LabelSchema::Ten), Window::Heart),
            Stage::RefineLabels | Stage::Fuse => return None,
        };
        Some(StageSpec { stage: self, input, output, window })
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == norm)
            .ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(s.name().parse::<Stage>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
        }
        assert_eq!("unet3-parcellate".parse::<Stage>().unwrap(), Stage::Unet3Parcellate);
    }

    #[test]
    fn parcellation_channel_arithmetic() {
        let s = Stage::Unet3Parcellate.spec().unwrap();
        assert_eq!((s.input.channels(), s.output.channels()), (2, 5));
        let s = Stage::Unet2Extrapolate.spec().unwrap();
        assert_eq!((s.input.channels(), s.output.channels()), (7, 8));
        assert_eq!(Stage::Unet4.spec().unwrap().output.channels(), 11);
        assert!(Stage::Fuse.spec().is_none());
    }
}
