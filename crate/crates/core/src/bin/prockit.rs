fn main() { std::process::exit(prockit::cli::run(std::env::args_os())); }
