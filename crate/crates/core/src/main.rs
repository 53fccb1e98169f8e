fn main() {
    std::process::exit(mitoseg::cli::main())
}
