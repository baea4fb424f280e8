fn main() {
    std::process::exit(satfusion::runner::main_with_args(std::env::args_os()));
}
