use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Number of revolute joints reported by every index.
pub const N_JOINTS: usize = 7;

/// The reported joints, ordered along the chain from the foot to the hand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Joint {
    Ankle,
    Knee,
    Hip,
    Back,
    Shoulder,
    Elbow,
    Wrist,
}

impl Joint {
    pub const ALL: [Joint; N_JOINTS] = [
        Joint::Ankle,
        Joint::Knee,
        Joint::Hip,
        Joint::Back,
        Joint::Shoulder,
        Joint::Elbow,
        Joint::Wrist,
    ];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Joint> {
        Self::ALL.get(i).copied()
    }

    pub const fn name(self) -> &'static str {
        match self {
            Joint::Ankle => "ankle",
            Joint::Knee => "knee",
            Joint::Hip => "hip",
            Joint::Back => "back",
            Joint::Shoulder => "shoulder",
            Joint::Elbow => "elbow",
            Joint::Wrist => "wrist",
        }
    }

    /// One-letter label used on polar plots.
    pub const fn short(self) -> char {
        match self {
            Joint::Ankle => 'A',
            Joint::Knee => 'K',
            Joint::Hip => 'H',
            Joint::Back => 'B',
            Joint::Shoulder => 'S',
            Joint::Elbow => 'E',
            Joint::Wrist => 'W',
        }
    }

    pub fn from_name(name: &str) -> Option<Joint> {
        Self::ALL
            .into_iter()
            .find(|j| j.name().eq_ignore_ascii_case(name))
    }
}

impl fmt::Display for Joint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
