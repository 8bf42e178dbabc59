fn main() {
    std::process::exit(rclab_cli::dispatch(std::env::args_os()));
}
