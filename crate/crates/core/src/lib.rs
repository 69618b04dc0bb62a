//! Intrinsic-fear deep Q-learning: a DQN whose targets are penalized by a
//! learned danger classifier, plus exact tabular checks of the return
//! guarantees that shaping carries.

pub mod agent;
pub mod envs;
pub mod fear;
pub mod harness;
pub mod memory;
pub mod numerics;
pub mod par;
pub mod seeding;
pub mod theory;
