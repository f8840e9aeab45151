fn main() -> std::process::ExitCode {
    eegpipe::cli::main()
}
