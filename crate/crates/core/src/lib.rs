//! Language-conditioned last-mile navigation toolkit.

pub mod annotate;
pub mod error;
pub mod geom;
pub mod objective;
pub mod planner;
pub mod policy;
pub mod sim;

pub use error::{Error, Result};

/// Mixes a base seed with two indices into an independent stream seed.
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base
        ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ b.wrapping_mul(0xc2b2_ae3d_27d4_eb4f).rotate_left(17);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
