fn main() {
    std::process::exit(harnack_lab::cli::run(std::env::args_os()));
}
