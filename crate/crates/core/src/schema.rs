//! Anatomical label sets and the merge maps between them.
//!
//! Label IDs are contiguous from 1 in the order listed by
//! [`LabelSchema::structures`]; 0 is always background.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named cardiac structure.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Structure {
    LV,
    LVMyo,
    RV,
    LA,
    RA,
    AA,
    PA,
    LAbody,
    LPV,
    RPV,
    LAA,
}

impl Structure {
    pub const ALL: [Structure; 11] = [
        Structure::LV,
        Structure::LVMyo,
        Structure::RV,
        Structure::LA,
        Structure::RA,
        Structure::AA,
        Structure::PA,
        Structure::LAbody,
        Structure::LPV,
        Structure::RPV,
        Structure::LAA,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Structure::LV => "LV",
            Structure::LVMyo => "LVMyo",
            Structure::RV => "RV",
            Structure::LA => "LA",
            Structure::RA => "RA",
            Structure::AA => "AA",
            Structure::PA => "PA",
            Structure::LAbody => "LAbody",
            Structure::LPV => "LPV",
            Structure::RPV => "RPV",
            Structure::LAA => "LAA",
        }
    }

    /// True for the four parts the left atrium is parcellated into.
    pub fn is_la_part(self) -> bool {
        matches!(
            self,
            Structure::LAbody | Structure::LPV | Structure::RPV | Structure::LAA
        )
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Structure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Structure::ALL
            .iter()
            .copied()
            .find(|st| st.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown structure '{s}'")))
    }
}

/// Structures expected to form one connected object. The veins are left
/// out: several vessels may share one vein label.
pub const SINGLE_OBJECT: [Structure; 8] = [
    Structure::LV,
    Structure::LVMyo,
    Structure::RV,
    Structure::RA,
    Structure::AA,
    Structure::PA,
    Structure::LAbody,
    Structure::LAA,
];

/// The label-set variants used along the refinement flow.
///
/// `SixNoPaRefined` shares IDs with `Six`, but its RV excludes the
/// pulmonary artery section (those voxels are background).
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LabelSchema {
    Six,
    SixNoPaRefined,
    Seven,
    Ten,
}

const SIX: [Structure; 6] = [
    Structure::LV,
    Structure::LVMyo,
    Structure::RV,
    Structure::LA,
    Structure::RA,
    Structure::AA,
];

const SEVEN: [Structure; 7] = [
    Structure::LV,
    Structure::LVMyo,
    Structure::RV,
    Structure::LA,
    Structure::RA,
    Structure::AA,
    Structure::PA,
];

const TEN: [Structure; 10] = [
    Structure::LV,
    Structure::LVMyo,
    Structure::RV,
    Structure::RA,
    Structure::AA,
    Structure::PA,
    Structure::LAbody,
    Structure::LPV,
    Structure::RPV,
    Structure::LAA,
];

impl LabelSchema {
    pub const ALL: [LabelSchema; 4] = [
        LabelSchema::Six,
        LabelSchema::SixNoPaRefined,
        LabelSchema::Seven,
        LabelSchema::Ten,
    ];

    pub fn structures(self) -> &'static [Structure] {
        match self {
            LabelSchema::Six | LabelSchema::SixNoPaRefined => &SIX,
            LabelSchema::Seven => &SEVEN,
            LabelSchema::Ten => &TEN,
        }
    }

    /// Number of non-background labels.
    pub fn num_labels(self) -> usize {
        self.structures().len()
    }

    /// Background plus one channel per label.
    pub fn num_channels(self) -> usize {
        self.num_labels() + 1
    }

    pub fn max_id(self) -> u8 {
        self.num_labels() as u8
    }

    pub fn id_of(self, structure: Structure) -> Option<u8> {
        self.structures()
            .iter()
            .position(|&s| s == structure)
            .map(|p| p as u8 + 1)
    }

    /// Like [`id_of`](Self::id_of) but reports a schema mismatch on absence.
    pub fn require(self, structure: Structure) -> Result<u8> {
        self.id_of(structure).ok_or_else(|| Error::SchemaMismatch {
            expected: format!("a schema containing {structure}"),
            found: self.to_string(),
        })
    }

    pub fn structure_of(self, id: u8) -> Option<Structure> {
        if id == 0 {
            return None;
        }
        self.structures().get(id as usize - 1).copied()
    }

    /// Ordered `(id, structure)` pairs.
    pub fn entries(self) -> impl Iterator<Item = (u8, Structure)> {
        self.structures()
            .iter()
            .enumerate()
            .map(|(i, &s)| (i as u8 + 1, s))
    }

    pub fn contains(self, structure: Structure) -> bool {
        self.id_of(structure).is_some()
    }

    /// Lookup table mapping every ID of `self` to an ID of `coarse`.
    ///
    /// LA parts fold into LA, PA folds into RV for `Six` and into
    /// background for `SixNoPaRefined`. Fails when a structure of `self`
    /// has no counterpart in `coarse` (for instance LA into `Ten`).
    pub fn merge_map(self, coarse: LabelSchema) -> Result<Vec<u8>> {
        let mut table = vec![0u8; self.num_channels()];
        for (id, s) in self.entries() {
            let target = if coarse.contains(s) {
                coarse.id_of(s)
            } else if s.is_la_part() {
                coarse.id_of(Structure::LA)
            } else if s == Structure::PA && coarse == LabelSchema::Six {
                coarse.id_of(Structure::RV)
            } else if s == Structure::PA && coarse == LabelSchema::SixNoPaRefined {
                Some(0)
            } else {
                None
            };
            table[id as usize] = target.ok_or_else(|| Error::SchemaMismatch {
                expected: format!("a schema that {s} can merge into"),
                found: coarse.to_string(),
            })?;
        }
        Ok(table)
    }
}

impl fmt::Display for LabelSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelSchema::Six => "SIX",
            LabelSchema::SixNoPaRefined => "SIX_NO_PA_REFINED",
            LabelSchema::Seven => "SEVEN",
            LabelSchema::Ten => "TEN",
        })
    }
}

impl FromStr for LabelSchema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LabelSchema::ALL
            .iter()
            .copied()
            .find(|v| v.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown label schema '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_contiguous() {
        for schema in LabelSchema::ALL {
            let ids: Vec<u8> = schema.entries().map(|(id, _)| id).collect();
            let expected: Vec<u8> = (1..=schema.max_id()).collect();
            assert_eq!(ids, expected);
            for (id, s) in schema.entries() {
                assert_eq!(schema.id_of(s), Some(id));
                assert_eq!(schema.structure_of(id), Some(s));
            }
            assert_eq!(schema.structure_of(0), None);
        }
    }

    #[test]
    fn ten_to_six_folds_parts_and_pa() {
        let table = LabelSchema::Ten.merge_map(LabelSchema::Six).unwrap();
        let la = LabelSchema::Six.id_of(Structure::LA).unwrap();
        let rv = LabelSchema::Six.id_of(Structure::RV).unwrap();
        for part in [
            Structure::LAbody,
            Structure::LPV,
            Structure::RPV,
            Structure::LAA,
        ] {
            assert_eq!(table[LabelSchema::Ten.id_of(part).unwrap() as usize], la);
        }
        assert_eq!(
            table[LabelSchema::Ten.id_of(Structure::PA).unwrap() as usize],
            rv
        );
        assert_eq!(table[0], 0);
    }

    #[test]
    fn ten_to_seven_keeps_pa() {
        let table = LabelSchema::Ten.merge_map(LabelSchema::Seven).unwrap();
        let pa_ten = LabelSchema::Ten.id_of(Structure::PA).unwrap();
        assert_eq!(
            table[pa_ten as usize],
            LabelSchema::Seven.id_of(Structure::PA).unwrap()
        );
        let lpv = LabelSchema::Ten.id_of(Structure::LPV).unwrap();
        assert_eq!(
            table[lpv as usize],
            LabelSchema::Seven.id_of(Structure::LA).unwrap()
        );
    }

    #[test]
    fn seven_to_refined_drops_pa() {
        let table = LabelSchema::Seven
            .merge_map(LabelSchema::SixNoPaRefined)
            .unwrap();
        assert_eq!(table[7], 0);
        assert_eq!(&table[..7], &[0, 1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn coarse_to_fine_is_rejected() {
        assert!(LabelSchema::Six.merge_map(LabelSchema::Ten).is_err());
    }

    #[test]
    fn parse_round_trip() {
        for schema in LabelSchema::ALL {
            assert_eq!(schema.to_string().parse::<LabelSchema>().unwrap(), schema);
        }
        assert_eq!("lpv".parse::<Structure>().unwrap(), Structure::LPV);
    }
}
