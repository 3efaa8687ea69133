fn main() {
    let mut stdout = std::io::stdout().lock();
    std::process::exit(cyclemine_cli::run(std::env::args(), &mut stdout));
}
