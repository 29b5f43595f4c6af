fn main() {
    std::process::exit(treelink::cli::run(std::env::args_os()));
}
