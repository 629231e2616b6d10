use std::io::{self, Write};

fn main() {
    let code = {
        let mut out = io::stdout().lock();
        let mut err = io::stderr().lock();
        let code = lis_core::cli::run(std::env::args_os(), &mut out, &mut err);
        let _ = out.flush();
        code
    };
    std::process::exit(code);
}
