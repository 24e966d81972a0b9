//! Bundled example instances.

pub const EX1_TBOX: &str = include_str!("../fixtures/ex1.tbox");
pub const EX1_POLICY: &str = include_str!("../fixtures/ex1.pol");
pub const EX1_ABOX: &str = include_str!("../fixtures/ex1.abox");
pub const EX1_Q1: &str = include_str!("../fixtures/q1.q");
pub const EX1_Q2: &str = include_str!("../fixtures/q2.q");
pub const EX3_TBOX: &str = include_str!("../fixtures/ex3.tbox");
pub const EX3_POLICY: &str = include_str!("../fixtures/ex3.pol");
pub const EX3_ABOX: &str = include_str!("../fixtures/ex3.abox");
pub const O2B_TBOX: &str = include_str!("../fixtures/o2b.tbox");
pub const O2B_QUERIES: &str = include_str!("../fixtures/o2b.queries");
pub const POLICY_A: &str = include_str!("../fixtures/pa.pol");
pub const POLICY_B: &str = include_str!("../fixtures/pb.pol");
