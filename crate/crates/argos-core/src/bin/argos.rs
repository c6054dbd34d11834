fn main() {
    std::process::exit(argos_core::run());
}
