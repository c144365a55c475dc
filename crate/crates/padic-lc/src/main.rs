fn main() {
    std::process::exit(padic_lc::runner::cli_main());
}
