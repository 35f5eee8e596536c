fn main() -> std::process::ExitCode {
    steinloss::cli::main_with(std::env::args_os())
}
