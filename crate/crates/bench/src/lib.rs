//! Shared inputs for the criterion benches.

pub const DEMO: &str = include_str!("../../core/fixtures/demo.bl");
pub const COUNTER: &str = include_str!("../../core/fixtures/counter.bl");
pub const CALLGRAPH: &str = include_str!("../../core/fixtures/callgraph.bl");
pub const GUARDS: &str = include_str!("../../core/fixtures/guards.pl");
pub const TANK: &str = include_str!("../../core/fixtures/tank.cosim");

/// A module of `n` functions, each calling the next two, for scaling runs.
pub fn chain_module(n: usize) -> String {
    let mut s = String::from("module Chain\nfunctions\n");
    for i in 0..n {
        let a = (i + 1) % n;
        let b = (i + 2) % n;
        s.push_str(&format!(
            "  f{i}: int -> int\n  f{i}(x) == if x <= 0 then {i} * 2 + 1 else f{a}(x - 1) + f{b}(x div 2)\n"
        ));
    }
    s
}
