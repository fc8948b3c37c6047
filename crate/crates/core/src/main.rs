use clap::Parser;
use dfmc::cli::{execute, Cli};

fn main() {
    // clap exits 0 for --help/--version and 2 for usage errors
    let cli = Cli::parse();
    match execute(cli) {
        Ok(summary) => {
            for note in &summary.notes {
                eprintln!("{note}");
            }
            println!("wrote {} rows to {}", summary.rows, summary.out.display());
        }
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
