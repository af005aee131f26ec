//! Model of the SAE (WPA3) handshake at two levels: the commit/confirm
//! exchange and the device state machines that run it, plus an adversarial
//! network simulator and a bounded state-space explorer.

pub mod cli;
pub mod device;
pub mod explorer;
pub mod group;
pub mod mode;
pub mod netsim;
pub mod scenarios;
pub mod session;
pub mod terms;
pub mod verdict;
