fn main() {
    std::process::exit(hardedge::cli::run(std::env::args_os()));
}
