//! CLI entry point.

pub fn cli_main() -> i32 {
    0
}
