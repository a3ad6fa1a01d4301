fn main() -> std::process::ExitCode {
    hashrag::cli::main()
}
