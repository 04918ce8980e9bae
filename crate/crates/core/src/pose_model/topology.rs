use serde::{Deserialize, Serialize};

use super::{BODY_JOINTS, NECK};
use crate::error::{Error, Result};

/// Hand skeleton over the 21-point hand layout: wrist (0) then four joints per finger.
pub const HAND_EDGES: [(usize, usize); 20] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 4),
    (0, 5),
    (5, 6),
    (6, 7),
    (7, 8),
    (0, 9),
    (9, 10),
    (10, 11),
    (11, 12),
    (0, 13),
    (13, 14),
    (14, 15),
    (15, 16),
    (0, 17),
    (17, 18),
    (18, 19),
    (19, 20),
];

const BODY18_EDGES: [(usize, usize); 17] = [
    (1, 2),
    (2, 3),
    (3, 4),
    (1, 5),
    (5, 6),
    (6, 7),
    (1, 8),
    (8, 9),
    (9, 10),
    (1, 11),
    (11, 12),
    (12, 13),
    (1, 0),
    (0, 14),
    (14, 16),
    (0, 15),
    (15, 17),
];

/// Parent-to-child limb list over body joint indices, rooted at the neck.
///
/// Edge order is both the retargeting traversal order and the drawing order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimbTopology {
    pub name: String,
    pub edges: Vec<(usize, usize)>,
}

impl Default for LimbTopology {
    fn default() -> Self {
        Self::body18()
    }
}

impl LimbTopology {
    /// The 17-edge BODY-18 tree.
    pub fn body18() -> Self {
        LimbTopology {
            name: "body18".to_string(),
            edges: BODY18_EDGES.to_vec(),
        }
    }

    /// Builds a topology after checking it is a tree in topological order rooted at the neck.
    pub fn new(name: impl Into<String>, edges: Vec<(usize, usize)>) -> Result<Self> {
        let t = LimbTopology {
            name: name.into(),
            edges,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn root(&self) -> usize {
        NECK
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Index of the edge whose child is `joint`.
    pub fn edge_into(&self, joint: usize) -> Option<usize> {
        self.edges.iter().position(|&(_, c)| c == joint)
    }

    pub fn validate(&self) -> Result<()> {
        let mut reached = [false; BODY_JOINTS];
        reached[NECK] = true;
        for (k, &(p, c)) in self.edges.iter().enumerate() {
            if p >= BODY_JOINTS || c >= BODY_JOINTS {
                return Err(Error::Contract(format!(
                    "topology `{}` edge {k} ({p}->{c}) indexes past {BODY_JOINTS} body joints",
                    self.name
                )));
            }
            if !reached[p] {
                return Err(Error::Contract(format!(
                    "topology `{}` edge {k} ({p}->{c}): parent not reached by an earlier edge",
                    self.name
                )));
            }
            if reached[c] {
                return Err(Error::Contract(format!(
                    "topology `{}` edge {k} ({p}->{c}): child already in the tree",
                    self.name
                )));
            }
            reached[c] = true;
        }
        Ok(())
    }
}
