fn main() {
    let mut out = String::new();
    let code = sae_core::cli::main_with(std::env::args_os(), &mut out);
    print!("{out}");
    std::process::exit(code);
}
