//! The 3×6 worked example: scalar memories, `x[v,t] = v + t + 1` (zero-based),
//! key `x`, value `2x`, every retention gate 0.5 and every rate 0.01.

use crate::error::Result;
use crate::grid::{run_grid, AnchorConvention, Head, Trajectory};
use crate::projection::{
    init_projections, GateBundle, GateSource, InitMode, ModelDims, ProjectionSet,
};
use crate::series::SeriesTensor;

pub const VARIATES: usize = 3;
pub const STEPS: usize = 6;

/// Published final linear head-1 memory, rounded to three decimals.
pub const HEAD1: [[f64; STEPS]; VARIATES] = [
    [1.020, 1.103, 1.286, 1.574, 1.890, 2.100],
    [1.083, 1.288, 1.617, 1.949, 2.058, 2.077],
    [1.197, 1.590, 1.957, 2.026, 2.020, 2.023],
];

/// Published final linear head-2 memory.
pub const HEAD2: [[f64; STEPS]; VARIATES] = [
    [1.020, 1.082, 1.177, 1.279, 1.332, 1.323],
    [1.105, 1.286, 1.546, 1.749, 1.769, 1.814],
    [1.310, 1.634, 1.919, 1.930, 1.949, 1.979],
];

/// Published head-1 log states as zero-based `(v, t, value)`.
pub const HEAD1_LOG: [(usize, usize, f64); 8] = [
    (0, 0, 0.02000),
    (0, 1, 0.09838),
    (0, 2, 0.25174),
    (0, 3, 0.45335),
    (0, 4, 0.63652),
    (0, 5, 0.74172),
    (1, 0, 0.08000),
    (1, 1, 0.25304),
];

pub const FINAL_TOL: f64 = 5e-3;
pub const LOG_TOL: f64 = 5e-5;

pub fn gates() -> GateBundle {
    GateBundle::uniform(0.5, 0.01)
}

pub fn series() -> SeriesTensor {
    let columns: Vec<Vec<f64>> = (0..VARIATES)
        .map(|v| (0..STEPS).map(|t| (v + t + 1) as f64).collect())
        .collect();
    SeriesTensor::from_columns(&columns).expect("finite example")
}

/// `k = q = x`, `value = 2x`, identity readout.
pub fn projections() -> ProjectionSet {
    init_projections(
        ModelDims::square(1, 1),
        0,
        InitMode::Identity {
            gate_biases: [0.0; 8],
        },
    )
    .0
}

pub fn run(conv: AnchorConvention, gates: GateBundle) -> Result<Trajectory> {
    run_grid(&series(), &projections(), &GateSource::Fixed(gates), conv)
}

/// One compared entry.
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub label: String,
    pub got: f64,
    pub want: f64,
    pub tol: f64,
}

impl Entry {
    pub fn diff(&self) -> f64 {
        (self.got - self.want).abs()
    }

    pub fn ok(&self) -> bool {
        self.diff() <= self.tol
    }
}

#[derive(Clone, Debug)]
pub struct GoldenCheck {
    pub head1: Vec<Vec<f64>>,
    pub head2: Vec<Vec<f64>>,
    pub finals: Vec<Entry>,
    pub logs: Vec<Entry>,
}

impl GoldenCheck {
    pub fn passed(&self) -> bool {
        self.finals.iter().chain(&self.logs).all(Entry::ok)
    }

    pub fn max_final_diff(&self) -> f64 {
        self.finals.iter().map(Entry::diff).fold(0.0, f64::max)
    }

    pub fn max_log_diff(&self) -> f64 {
        self.logs.iter().map(Entry::diff).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Entry> {
        self.finals.iter().chain(&self.logs).filter(|e| !e.ok())
    }
}

/// Runs the example and compares it with the published numbers; `tol`
/// overrides both tolerances when given.
pub fn check(conv: AnchorConvention, tol: Option<f64>) -> Result<GoldenCheck> {
    let traj = run(conv, gates())?;
    let head1 = traj.linear_scalar_grid(Head::First);
    let head2 = traj.linear_scalar_grid(Head::Second);
    let mut finals = Vec::new();
    for (name, got, want) in [("M1", &head1, &HEAD1), ("M2", &head2, &HEAD2)] {
        for v in 0..VARIATES {
            for t in 0..STEPS {
                finals.push(Entry {
                    label: format!("{name}[{},{}]", v + 1, t + 1),
                    got: got[v][t],
                    want: want[v][t],
                    tol: tol.unwrap_or(FINAL_TOL),
                });
            }
        }
    }
    let logs = HEAD1_LOG
        .iter()
        .map(|&(v, t, want)| Entry {
            label: format!("log M1[{},{}]", v + 1, t + 1),
            got: traj.get(v, t).m1[(0, 0)],
            want,
            tol: tol.unwrap_or(LOG_TOL),
        })
        .collect();
    Ok(GoldenCheck {
        head1,
        head2,
        finals,
        logs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_the_example() {
        let c = check(AnchorConvention::PrevTimeBoth, None).unwrap();
        assert!(c.passed(), "{:?}", c.failures().collect::<Vec<_>>());
        assert_eq!(c.finals.len(), 36);
    }

    #[test]
    fn other_convention_and_tight_tolerance_fail() {
        assert!(!check(AnchorConvention::PerHeadPredecessor, None)
            .unwrap()
            .passed());
        assert!(!check(AnchorConvention::PrevTimeBoth, Some(1e-9))
            .unwrap()
            .passed());
    }
}
