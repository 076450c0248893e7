//! Simulation and analysis toolkit for cavity-enhanced Raman quantum memories
//! in warm alkali vapour.
//!
//! The crate is split along the lines of the experiment:
//!
//! - [`physics`]: closed-form forward model of the memory (couplings, noise
//!   suppression, cavity design numbers, efficiency and noise floor).
//! - [`spectrum`]: ring-cavity transmission with an intracavity atomic medium,
//!   fringe visibility and the triple-resonance search.
//! - [`lock`]: discrete-time simulation of the polarisation-analysis cavity lock.
//! - [`analysis`]: time-tag ingestion, windowed counting, estimators, fits and
//!   the synthetic data generator used to validate them.
//!
//! Units throughout: GHz for frequencies, ns for times, nJ for pulse energies,
//! mm for cavity lengths (nm for lock length errors).

pub mod analysis;
pub mod error;
pub mod lock;
pub mod physics;
pub mod spectrum;
pub mod units;

pub use error::{Error, Result};
