fn main() {
    std::process::exit(placenta_sr::cli::main_entry());
}
