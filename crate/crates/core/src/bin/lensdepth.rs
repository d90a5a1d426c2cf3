fn main() -> std::process::ExitCode { lensdepth::cli::main() }
