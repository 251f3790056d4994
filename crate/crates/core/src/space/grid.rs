use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Extent of one axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Domain {
    /// Closed interval `[a, b]`, discretised by cell centres.
    Interval { a: f64, b: f64 },
    /// Circle of length `period` starting at `origin`, discretised by vertices.
    Torus {
        period: f64,
        #[serde(default)]
        origin: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Neumann,
}

/// Geometry of a 1D or 2D tensor grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dimension: usize,
    pub domain: Vec<Domain>,
    pub nodes_per_axis: usize,
    pub boundary: Boundary,
}

impl GridSpec {
    pub fn torus_1d(period: f64, nodes: usize) -> Self {
        Self::torus(1, period, nodes)
    }

    pub fn torus(dimension: usize, period: f64, nodes: usize) -> Self {
        GridSpec {
            dimension,
            domain: vec![Domain::Torus { period, origin: 0.0 }; dimension],
            nodes_per_axis: nodes,
            boundary: Boundary::Periodic,
        }
    }

    pub fn interval_1d(a: f64, b: f64, nodes: usize) -> Self {
        Self::interval(1, a, b, nodes)
    }

    pub fn interval(dimension: usize, a: f64, b: f64, nodes: usize) -> Self {
        GridSpec {
            dimension,
            domain: vec![Domain::Interval { a, b }; dimension],
            nodes_per_axis: nodes,
            boundary: Boundary::Neumann,
        }
    }

    pub fn with_nodes(&self, nodes: usize) -> Self {
        GridSpec { nodes_per_axis: nodes, ..self.clone() }
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_axis.pow(self.dimension as u32)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dimension) {
            return Err(Error::domain(format!("dimension must be 1 or 2, got {}", self.dimension)));
        }
        if self.domain.len() != self.dimension {
            return Err(Error::domain(format!(
                "{} axis domains given for dimension {}",
                self.domain.len(),
                self.dimension
            )));
        }
        if self.nodes_per_axis < 4 {
            return Err(Error::domain(format!("need at least 4 nodes per axis, got {}", self.nodes_per_axis)));
        }
        for d in &self.domain {
            match (d, self.boundary) {
                (Domain::Interval { a, b }, Boundary::Neumann) => {
                    if !(a.is_finite() && b.is_finite() && b > a) {
                        return Err(Error::domain(format!("interval requires a < b, got [{a}, {b}]")));
                    }
                }
                (Domain::Torus { period, origin }, Boundary::Periodic) => {
                    if !(period.is_finite() && *period > 0.0 && origin.is_finite()) {
                        return Err(Error::domain(format!("torus period must be positive, got {period}")));
                    }
                }
                (Domain::Interval { .. }, Boundary::Periodic) => {
                    return Err(Error::domain("periodic boundary requires a torus domain"));
                }
                (Domain::Torus { .. }, Boundary::Neumann) => {
                    return Err(Error::domain("neumann boundary requires an interval domain"));
                }
            }
        }
        Ok(())
    }
}
