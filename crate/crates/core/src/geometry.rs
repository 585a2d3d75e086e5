//! Grid positions and L1 movement.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridPos {
    pub x: u32,
    pub y: u32,
}

impl GridPos {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    pub fn in_bounds(&self, width: u32, height: u32) -> bool {
        self.x < width && self.y < height
    }
}

impl fmt::Display for GridPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

pub fn manhattan_distance(a: GridPos, b: GridPos) -> u32 {
    a.x.abs_diff(b.x) + a.y.abs_diff(b.y)
}

/// Walks at most `budget` cells from `from` toward `to` along the L-shaped
/// route that covers the x leg first, then the y leg.
///
/// Returns the new position and the number of cells actually moved.
pub fn step_along_l_path(from: GridPos, to: GridPos, budget: u32) -> (GridPos, u32) {
    let mut remaining = budget;
    let mut pos = from;

    let dx = from.x.abs_diff(to.x).min(remaining);
    pos.x = if to.x >= from.x { from.x + dx } else { from.x - dx };
    remaining -= dx;

    let dy = from.y.abs_diff(to.y).min(remaining);
    pos.y = if to.y >= from.y { from.y + dy } else { from.y - dy };
    remaining -= dy;

    (pos, budget - remaining)
}
