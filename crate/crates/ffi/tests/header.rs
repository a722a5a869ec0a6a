const HEADER: &str = include_str!("../include/rankscope.h");
const SOURCE: &str = include_str!("../src/lib.rs");

#[test]
fn header_declares_every_export() {
    let exports: Vec<&str> = SOURCE
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .filter_map(|rest| rest.split('(').next())
        .collect();
    assert!(exports.len() >= 15, "{exports:?}");
    for name in exports {
        assert!(HEADER.contains(&format!("{name}(")), "{name} missing from header");
    }
    for handle in ["RankscopeQrels", "RankscopeRuns", "RankscopeMatrix"] {
        assert!(HEADER.contains(&format!("typedef struct {handle} {handle};")), "{handle} is not opaque");
    }
    assert!(HEADER.contains("RANKSCOPE_STATUS_OK = 0"));
}
