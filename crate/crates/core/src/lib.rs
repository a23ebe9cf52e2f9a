//! Dual-tier RIS downlink: zero-forcing beamforming, water-filling power
//! allocation and stable-matching device–RIS association, plus the Monte
//! Carlo harness that compares the joint scheme against exhaustive, greedy
//! and random association.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod association;
pub mod beamforming;
pub mod channel;
pub mod config;
pub mod error;
pub mod geometry;
pub mod numerics;
pub mod power;
pub mod simulation;

pub use error::{Error, Result};
