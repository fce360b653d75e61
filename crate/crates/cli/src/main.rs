use std::process::ExitCode;

fn main() -> ExitCode {
    match fusemetrics_cli::run(std::env::args_os()) {
        Ok(report) => {
            print!("{}", report.render());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
