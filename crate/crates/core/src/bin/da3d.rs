fn main() {
    std::process::exit(da3d::cli::run(std::env::args_os()));
}
