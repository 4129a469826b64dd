//! Construct registry and rule engine.
//!
//! The [`Registry`] holds primitives and user operators and evaluates functional ones;
//! the [`Engine`] steps control structures over a [`lob_core::State`], recording every
//! firing as state deltas so a run can be replayed from its trace.

pub mod effects;
pub mod engine;
pub mod error;
pub mod gates;
pub mod kernels;
pub mod registry;
pub mod trace;

pub use engine::{Engine, EngineConfig, Firing, HaltReason, Refraction, RunReport, Slice, StepOutcome};
pub use error::{EngineError, EvalError, RegistryError};
pub use registry::{EffectCtx, EffectFn, Invocation, KernelFn, Registry, Template};
pub use trace::{read_trace, replay, write_trace, GateRecord, TraceEvent};
