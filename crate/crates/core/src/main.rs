fn main() {
    std::process::exit(nvdeer::cli::run(std::env::args_os()));
}
