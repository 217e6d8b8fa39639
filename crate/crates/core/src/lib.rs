//! Inner-bound rate regions for keyed message authentication over a noisy
//! channel watched by an active adversary, plus exact small-blocklength
//! simulation of the codes that achieve them.

pub mod infofn;
pub mod iproject;
pub mod probcore;
pub mod regions;
pub mod simkit;
pub mod typelab;
