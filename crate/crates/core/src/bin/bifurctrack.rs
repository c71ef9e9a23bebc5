fn main() {
    std::process::exit(bifurctrack::cli::run(std::env::args_os()));
}
