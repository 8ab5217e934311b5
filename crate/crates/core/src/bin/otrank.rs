fn main() { std::process::exit(otrank::cli::main()) }
