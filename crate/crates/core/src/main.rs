fn main() -> std::process::ExitCode {
    streamlda::cli::main()
}
