fn main() { std::process::exit(mfou::cli::run(std::env::args_os())) }
