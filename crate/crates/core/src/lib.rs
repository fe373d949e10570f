//! Symbolic geometric diagrams: a logic-form language, a synthetic diagram
//! generator, a deterministic renderer, verifiable rewards and GRPO reward
//! shaping.

pub mod geometry;
pub mod logic_form;
pub mod metrics;
pub mod renderer;
pub mod reward_engine;
pub mod rl_shaping;
pub mod synthgen;

/// Independent child seed for item `index` of a run seeded with `base`
/// (one SplitMix64 step over the mixed pair).
pub fn sub_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
