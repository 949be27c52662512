use std::process::ExitCode;

fn main() -> ExitCode {
    sgda_lab::cli::main()
}
