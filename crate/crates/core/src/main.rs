fn main() {
    std::process::exit(cookie_trees::cli::main_entry());
}
