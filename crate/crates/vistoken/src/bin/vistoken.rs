fn main() {
    std::process::exit(vistoken::cli::main_with_env());
}
