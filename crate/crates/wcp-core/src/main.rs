use wcp_core::cli;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cfg = match cli::parse_args(&args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(1);
        }
    };
    match cli::run(&cfg) {
        Ok(report) => {
            if let Err(e) = cli::emit(&cfg, &report) {
                eprintln!("{e}");
                std::process::exit(1);
            }
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(if e.is_hypothesis_failure() { 2 } else { 1 });
        }
    }
}
