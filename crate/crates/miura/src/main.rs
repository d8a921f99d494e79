use miura::cli;

fn main() {
    std::process::exit(cli::run());
}
