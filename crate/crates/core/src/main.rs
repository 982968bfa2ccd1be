fn main() -> std::process::ExitCode {
    smallnoise::cli::main()
}
