//! Software pipeline for flying a quadrotor with a one-handed motion controller.
//!
//! Controller state is mapped onto RC channels ([`mapping`]), carried over a
//! CRSF-framed, ELRS-style link ([`crsf`], [`link`]), flown by an angle-mode
//! quadrotor model ([`dynamics`]) and scored on a training course ([`course`]).
//! [`session`] ties the stages together, records and replays sessions and runs the
//! network service. [`ueq`] scores UEQ-S questionnaires.

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod course;
pub mod crsf;
pub mod dynamics;
pub mod link;
pub mod mapping;
pub mod session;
pub mod ueq;

pub use crsf::{ChannelSet, CrsfFrame, CrsfParser};
pub use mapping::{ControllerState, MappingConfig};
