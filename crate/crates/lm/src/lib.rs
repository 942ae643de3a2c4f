#![allow(clippy::result_large_err)]

//! Service, storage and file formats around [`lm_core`].

pub mod config;
pub mod csvio;
pub mod service;
pub mod store;
