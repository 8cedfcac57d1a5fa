use clap::Parser;

fn main() {
    let cli = abcx::cli::Cli::parse();
    let code = abcx::cli::run(cli, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}
