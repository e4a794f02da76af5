//! Test-only companions to the main library: a brute-force reference
//! decoder, a synthetic bilingual corpus generator, a peak-tracking
//! allocator, and a mock translation HTTP server.

pub mod alloc;
pub mod grammar;
pub mod mock;
pub mod reference;
