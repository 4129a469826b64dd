//! Three instantiations of the kernel.
//!
//! - [`woad`]: templates of placed datoms, documents with a fill history, and mechanisms
//!   that restyle documents as they are filled in.
//! - [`casmas`]: entities that coordinate by posting facts into community spaces and
//!   reacting to them in snapshot rounds.
//! - [`flow`]: publish/subscribe components wired into dataflow workspaces.

pub mod casmas;
pub mod clock;
pub mod flow;
pub mod woad;

pub use clock::{Clock, SystemClock, TickClock};

/// Primitives, the sixteen gates, and every profile's operators: one vocabulary that
/// validates and runs any bundle.
pub fn registry() -> lob_engine::Registry {
    let mut r = lob_engine::Registry::with_primitives();
    lob_engine::gates::register_gates(&mut r).expect("gate names are fresh");
    woad::install(&mut r);
    casmas::install(&mut r);
    flow::install(&mut r);
    r
}
