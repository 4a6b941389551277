fn main() {
    std::process::exit(histmatch::run(std::env::args_os()));
}
