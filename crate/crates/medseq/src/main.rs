fn main() {
    std::process::exit(medseq::cli::main_with(std::env::args_os()));
}
