fn main() -> std::process::ExitCode {
    dit_reuse::cli::main()
}
