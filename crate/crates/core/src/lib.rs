//! Activity recognition from ambient sensor streams.
//!
//! The pipeline detrends raw channels with a Hodrick-Prescott filter, cuts
//! them into fixed windows and summarizes each window with twelve statistics
//! per channel ([`signal`]). Feature rows are classified by reconstruction
//! error against per-activity dictionaries learned jointly with a shared
//! subspace ([`mtdl`], [`recognizer`]). Recognized activities, locations and
//! object use become timestamped events ([`events`]) that trigger-action
//! rules lift into complex activities and alerts ([`rules`]). [`simhome`]
//! generates labeled synthetic homes for testing all of it.

pub mod error;
pub mod events;
pub mod mtdl;
pub mod recognizer;
pub mod rules;
pub mod scaler;
pub mod signal;
pub mod simhome;

pub use error::{Result, WitsError};
