//! Scenario kinds and the example files shipped with the binary.

use crate::scenario::Kind;

/// `(file name, contents)` of every shipped scenario, sorted by name.
pub const SHIPPED: &[(&str, &str)] = &[
    ("badness_decimation_checkerboard.toml", include_str!("../scenarios/badness_decimation_checkerboard.toml")),
    ("badness_glauber_control.toml", include_str!("../scenarios/badness_glauber_control.toml")),
    ("badness_glauber_short_time.toml", include_str!("../scenarios/badness_glauber_short_time.toml")),
    ("betac_kac_unit_range.toml", include_str!("../scenarios/betac_kac_unit_range.toml")),
    ("cw_threshold.toml", include_str!("../scenarios/cw_threshold.toml")),
    ("degeneracy_two_chains.toml", include_str!("../scenarios/degeneracy_two_chains.toml")),
    ("lp_kac_chain.toml", include_str!("../scenarios/lp_kac_chain.toml")),
    ("oracle_crosscheck.toml", include_str!("../scenarios/oracle_crosscheck.toml")),
    ("quenched_random_field.toml", include_str!("../scenarios/quenched_random_field.toml")),
];

pub fn render() -> String {
    let mut out = String::from("scenario kinds:\n");
    for k in Kind::ALL {
        out.push_str(&format!("  {:<18} {}\n", k.as_str(), k.description()));
        out.push_str(&format!("  {:<18} params: {}\n", "", k.parameters()));
    }
    out.push_str("\nshipped scenarios:\n");
    for (file, text) in SHIPPED {
        let kind = text
            .lines()
            .find_map(|l| l.strip_prefix("kind = "))
            .map(|k| k.trim_matches('"'))
            .unwrap_or("?");
        out.push_str(&format!("  {file:<40} {kind}\n"));
    }
    out
}
