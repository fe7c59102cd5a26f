//! Runtime choice between the two dynamic structures.

use crate::error::Result;
use crate::hierarchy::{self, Family};
use crate::highdim::HighDim;
use crate::lowdim::LowDim;
use crate::model::{Config, Mode, Point, PointId, PointRecord};

#[derive(Debug, Clone)]
pub enum Backend {
    Low(LowDim),
    High(HighDim),
}

macro_rules! each {
    ($self:expr, $b:ident => $e:expr) => {
        match $self {
            Backend::Low($b) => $e,
            Backend::High($b) => $e,
        }
    };
}

impl Backend {
    pub fn new(cfg: &Config) -> Result<Self> {
        Ok(match cfg.mode {
            Mode::LowDim => Backend::Low(LowDim::new(cfg)?),
            Mode::HighDim => Backend::High(HighDim::new(cfg)?),
        })
    }

    pub fn mode(&self) -> Mode {
        match self {
            Backend::Low(_) => Mode::LowDim,
            Backend::High(_) => Mode::HighDim,
        }
    }

    pub fn insert(&mut self, point: Point) -> Result<PointId> {
        each!(self, b => b.insert(point))
    }

    pub fn delete(&mut self, point: &Point) -> Result<()> {
        each!(self, b => b.delete(point))
    }

    pub fn cluster(&self, point: &Point, k: usize) -> Result<PointRecord> {
        hierarchy::representative(self, point, k)
    }

    /// Parent factor the structure guarantees.
    pub fn alpha(&self) -> f64 {
        match self {
            Backend::Low(_) => 2.0,
            // A parent chain takes up to ell + 1 hops inside one cell each.
            Backend::High(h) => 2.0 * h.dim() as f64 * (h.ell() + 1) as f64,
        }
    }
}

impl Family for Backend {
    fn dim(&self) -> usize {
        each!(self, b => b.dim())
    }

    fn delta(&self) -> i64 {
        each!(self, b => b.delta())
    }

    fn max_level(&self) -> usize {
        each!(self, b => b.max_level())
    }

    fn distinct_len(&self) -> usize {
        each!(self, b => b.distinct_len())
    }

    fn total_len(&self) -> u64 {
        each!(self, b => b.total_len())
    }

    fn lookup(&self, point: &Point) -> Option<PointId> {
        each!(self, b => b.lookup(point))
    }

    fn record(&self, id: PointId) -> Option<&PointRecord> {
        each!(self, b => b.record(id))
    }

    fn ids(&self) -> Vec<PointId> {
        each!(self, b => b.ids())
    }

    fn level_size(&self, level: usize) -> usize {
        each!(self, b => b.level_size(level))
    }

    fn is_member(&self, level: usize, id: PointId) -> bool {
        each!(self, b => b.is_member(level, id))
    }

    fn level_members(&self, level: usize) -> Vec<PointId> {
        each!(self, b => b.level_members(level))
    }

    fn parent(&self, level: usize, id: PointId) -> Result<PointId> {
        each!(self, b => b.parent(level, id))
    }

    fn diff_rank(&self, level: usize, id: PointId) -> Option<usize> {
        each!(self, b => b.diff_rank(level, id))
    }

    fn diff_len(&self, level: usize) -> usize {
        each!(self, b => b.diff_len(level))
    }
}
