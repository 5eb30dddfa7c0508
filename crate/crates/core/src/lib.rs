//! Entanglement-assisted quantum polar codes for arbitrary qubit-input channels.
//!
//! The crate is organized around the pipeline used by the coding scheme:
//!
//! - [`linalg`]: dense complex operators, tensor products, partial traces,
//!   fidelity and von Neumann entropy — the numeric substrate.
//! - [`channel`]: quantum channels as Kraus families with Stinespring
//!   extensions, plus the built-in channel zoo.
//! - [`cqsynth`]: the three binary classical-quantum channels induced by a
//!   qubit-input channel (amplitude to the receiver, phase with side
//!   information, amplitude to the environment) and their F/I parameters.
//! - [`polar`]: exact channel combining/splitting at small blocklength,
//!   good/bad classification, and the rate/uncertainty reports.
//! - [`protosim`]: pure-state simulation of the full coherent protocol —
//!   encoder, quantum successive cancellation for both variables, and the
//!   final CNOT correction — with end-to-end ebit fidelity.
//! - [`multilevel`]: per-level rate decomposition for channels with multiple
//!   qubit inputs, including the joint-channel superactivation probe.
//!
//! All values are immutable after construction; every operation is a pure
//! function, so callers may parallelize freely.
//!
//! Conventions fixed project-wide (the literature leaves them free):
//!
//! - The leftmost tensor factor is the most significant part of a composite
//!   index, for both operators and state vectors.
//! - Entropies and rates are base-2 (bits / qubits).
//! - The environment is the rightmost factor of an isometric extension
//!   output, and the erasure flag is the last basis vector of the enlarged
//!   output space.

pub mod channel;
pub mod cqsynth;
mod error;
pub mod linalg;
pub mod multilevel;
pub mod polar;
pub mod protosim;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, DensityOperator, DimCap, IsometryMatrix, PureStateVector};
pub use channel::{ChannelSpec, Degradability, QuantumChannel};
pub use cqsynth::{BinaryCqChannel, CqLabel, JointChannelState};
pub use polar::{
    ChannelPartition, Direction, EncoderMatrix, RateReport, SynthesisConfig,
    SynthesizedChannelTable,
};
pub use protosim::{DecoderPovm, GlobalState, ProtocolConfig, ProtocolReport};
pub use multilevel::{LevelRates, MultiQubitChannel, SuperactivationReport};
