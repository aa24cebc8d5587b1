//! DRAM device model: organization, timing, command legality and the
//! offline protocol/retention checkers.

pub mod audit;
pub mod command;
pub mod org;
pub mod state;
pub mod timing;
pub mod verify;

pub use audit::{retention_audit, retention_audit_text, AuditViolation, RefreshSchedule};
pub use command::{Command, CommandKind, RefreshRecord};
pub use org::{decode_address, encode_address, AddressMapping, DecodedAddr, DramOrg};
pub use state::{BankPhase, DramChannel, Legality, PowerState, Rule};
pub use timing::{
    derive_timing, sarp_scaled_constraints, CurrentParams, FgrMode, RefreshMode, TimingParams,
};
pub use verify::{verify_command_log, verify_command_log_text, Violation};
