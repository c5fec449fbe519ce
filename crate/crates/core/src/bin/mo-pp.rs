fn main() {
    std::process::exit(mo_pointproc::cli::run(std::env::args_os()));
}
