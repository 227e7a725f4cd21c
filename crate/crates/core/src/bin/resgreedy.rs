fn main() -> std::process::ExitCode {
    resgreedy_core::cli::main()
}
