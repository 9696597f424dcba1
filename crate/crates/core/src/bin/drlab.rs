fn main() -> std::process::ExitCode {
    drlab::lab::cli::main()
}
