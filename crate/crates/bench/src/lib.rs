//! Shared fixtures for the criterion benches.

use heim_core::{parse_hw_model, parse_spec, AccuracySpec, Expr, HardwareModel, SetDecl, Targets};

/// Edge queries over small knowledge graphs of degree at most 4.
pub fn knowledge_graph() -> AccuracySpec {
    parse_spec(include_str!("../../../specs/knowledge_graph.heim")).expect("bundled spec parses")
}

pub fn rram_2bpc() -> HardwareModel {
    parse_hw_model(include_str!("../../../specs/rram_2bpc.hw")).expect("bundled model parses")
}

/// Membership in a set of `m` codes drawn from `2m`.
pub fn set_spec(m: usize) -> AccuracySpec {
    let codebooks = [("codes".to_string(), 2 * m)].into_iter().collect();
    SetDecl::new(codebooks, Expr::code("codes"), m)
        .expect("valid set declaration")
        .with_in_set(Targets::symmetric(0.99))
        .emit_spec()
}
