fn main() {
    std::process::exit(lmsv::cli::main_exit());
}
