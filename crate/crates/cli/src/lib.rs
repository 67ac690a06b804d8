//! IO, file formats, and pipelines for the charge-jump toolkit.

pub mod config;
pub mod layout;
pub mod pipeline;
pub mod records;
pub mod tables;
