fn main() {
    std::process::exit(hopf_cw::cli::run(std::env::args_os()));
}
