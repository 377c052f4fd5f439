fn main() -> std::process::ExitCode {
    idrmap::cli::main()
}
