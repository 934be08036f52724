fn main() {
    std::process::exit(avenlab::cli_main());
}
