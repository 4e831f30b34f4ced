//! Streams motion programs to a printer endpoint over a windowed,
//! acknowledged protocol, under live operator control.
//!
//! [`session::handle`] is a pure state machine; [`service`] wires it to a TCP
//! printer endpoint and WebSocket operators.

pub mod protocol;
pub mod service;
pub mod session;
pub mod virtual_printer;

pub use protocol::{Message, Phase};
pub use session::{handle, Effect, Event, Input, Origin, SessionConfig, SessionState};
