fn main() {
    std::process::exit(planecurve::cli::run(std::env::args()));
}
