fn main() {
    std::process::exit(lodsplat_bench::run(std::env::args_os()));
}
