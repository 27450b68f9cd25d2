//! Transport through an Aharonov-Bohm ring with an Andreev-reflecting
//! superconducting contact.
//!
//! The stack is bottom-up: [`lattice`] builds the tight-binding Hamiltonian,
//! [`selfenergy`] the lead and Andreev self-energies, [`greens`] inverts,
//! [`observables`] reduces to transmission, contrast, LDOS and dephasing.
//! [`pipeline::Device`] strings these together for one device, [`sweeps`]
//! runs grids of devices and energies, and [`verify`] holds analytic checks.

pub mod config;
pub mod greens;
pub mod lattice;
pub mod matrix;
pub mod observables;
pub mod output;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod selfenergy;
pub mod sweeps;
pub mod verify;

pub use greens::{GreensError, GreensFunctions, Stage};
pub use lattice::{Geometry, Hamiltonian, LatticeError, PeierlsGauge, TightBindingParams};
pub use matrix::{CMatrix, MatrixError};
pub use observables::{ObservableError, ObservableRecord};
pub use pipeline::Device;
pub use selfenergy::{AndreevCoupling, SelfEnergyError};
pub use sweeps::{Experiment, SweepConfig};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    SelfEnergy(#[from] SelfEnergyError),
    #[error(transparent)]
    Greens(#[from] GreensError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Sweep(#[from] sweeps::SweepError),
    #[error(transparent)]
    Output(#[from] output::OutputError),
    #[error(transparent)]
    Plot(#[from] plot::PlotError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
