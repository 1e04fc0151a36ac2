fn main() {
    std::process::exit(vod::cli::run(std::env::args_os()));
}
