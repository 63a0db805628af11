fn main() {
    std::process::exit(rblab::cli::dispatch(std::env::args_os()));
}
