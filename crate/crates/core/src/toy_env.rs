//! Cell-unlocking toy learner.
//!
//! The unit square is split into a `side × side` grid. One cell starts
//! unlocked (the student's type). Sampling an unlocked cell increments its
//! counter and pays `min(counter, reward_cap)`; sampling a locked cell pays
//! nothing. Once a counter reaches `unlock_threshold` the four edge-adjacent
//! cells unlock.

use serde::{Deserialize, Serialize};

use crate::alp::TaskParams;
use crate::meta::{KcVector, StudentMeta};
use crate::student::{Student, StudentError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyEnvConfig {
    pub side: usize,
    pub unlock_threshold: u32,
    pub reward_cap: u32,
}

impl Default for ToyEnvConfig {
    fn default() -> Self {
        Self {
            side: 20,
            unlock_threshold: 75,
            reward_cap: 100,
        }
    }
}

impl ToyEnvConfig {
    pub fn cells(&self) -> usize {
        self.side * self.side
    }

    pub fn cell_index(&self, row: usize, col: usize) -> usize {
        row * self.side + col
    }

    /// The four fixed types: one cell near each corner of the grid.
    pub fn four_types(&self) -> Vec<usize> {
        let near = 2.min(self.side - 1);
        let far = self.side - 1 - near;
        vec![
            self.cell_index(near, near),
            self.cell_index(near, far),
            self.cell_index(far, near),
            self.cell_index(far, far),
        ]
    }

    pub fn all_types(&self) -> Vec<usize> {
        (0..self.cells()).collect()
    }

    /// Cell containing `coords`, with the top edge mapped to the last cell.
    pub fn cell_of(&self, coords: &[f64]) -> usize {
        let axis = |v: f64| ((v * self.side as f64).floor() as usize).min(self.side - 1);
        self.cell_index(axis(coords[0]), axis(coords[1]))
    }

    /// Center of a cell in task coordinates.
    pub fn cell_center(&self, cell: usize) -> TaskParams {
        let w = 1.0 / self.side as f64;
        let (row, col) = (cell / self.side, cell % self.side);
        TaskParams::new(vec![(row as f64 + 0.5) * w, (col as f64 + 0.5) * w])
            .expect("cell centers lie in the unit box")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToyStudent {
    config: ToyEnvConfig,
    counts: Vec<u32>,
    unlocked: Vec<bool>,
    student_type: usize,
    episodes: u64,
}

impl ToyStudent {
    pub fn new(student_type: usize) -> Result<Self, StudentError> {
        Self::with_config(ToyEnvConfig::default(), student_type)
    }

    pub fn with_config(config: ToyEnvConfig, student_type: usize) -> Result<Self, StudentError> {
        let cells = config.cells();
        if student_type >= cells {
            return Err(StudentError::InvalidType {
                index: student_type,
                cells,
            });
        }
        let mut unlocked = vec![false; cells];
        unlocked[student_type] = true;
        Ok(Self {
            config,
            counts: vec![0; cells],
            unlocked,
            student_type,
            episodes: 0,
        })
    }

    pub fn config(&self) -> &ToyEnvConfig {
        &self.config
    }

    pub fn student_type(&self) -> usize {
        self.student_type
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn count(&self, cell: usize) -> u32 {
        self.counts[cell]
    }

    pub fn is_unlocked(&self, cell: usize) -> bool {
        self.unlocked[cell]
    }

    pub fn unlocked_cells(&self) -> usize {
        self.unlocked.iter().filter(|&&u| u).count()
    }

    /// Plays one episode on `params` and returns the reward.
    pub fn play(&mut self, params: &[f64]) -> Result<f64, StudentError> {
        if params.len() != 2 || params.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(StudentError::OutOfBounds(params.to_vec()));
        }
        self.episodes += 1;
        let cell = self.config.cell_of(params);
        if !self.unlocked[cell] {
            return Ok(0.0);
        }
        self.counts[cell] += 1;
        let count = self.counts[cell];
        if count >= self.config.unlock_threshold {
            self.unlock_neighbours(cell);
        }
        Ok(count.min(self.config.reward_cap) as f64)
    }

    fn unlock_neighbours(&mut self, cell: usize) {
        let side = self.config.side;
        let (row, col) = (cell / side, cell % side);
        if row > 0 {
            self.unlocked[cell - side] = true;
        }
        if row + 1 < side {
            self.unlocked[cell + side] = true;
        }
        if col > 0 {
            self.unlocked[cell - 1] = true;
        }
        if col + 1 < side {
            self.unlocked[cell + 1] = true;
        }
    }

    /// Cell counters in row-major order.
    pub fn kc(&self) -> KcVector {
        KcVector::new(self.counts.iter().map(|&c| c as f64).collect())
    }

    /// Percentage of unlocked cells.
    pub fn perf(&self) -> f64 {
        100.0 * self.unlocked_cells() as f64 / self.config.cells() as f64
    }
}

impl Student for ToyStudent {
    fn episode(&mut self, params: &TaskParams) -> Result<f64, StudentError> {
        self.play(params.coords())
    }

    fn knowledge_components(&self) -> KcVector {
        self.kc()
    }

    fn performance(&self) -> f64 {
        self.perf()
    }

    fn meta(&self) -> StudentMeta {
        StudentMeta {
            student_type: self.student_type,
        }
    }

    fn reset(&mut self) {
        *self = Self::with_config(self.config, self.student_type)
            .expect("type was validated at construction");
    }
}
