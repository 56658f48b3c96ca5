fn main() -> std::process::ExitCode {
    wavegal::cli::main()
}
