fn main() {
    if let Err(e) = safescreen::cli::run(std::env::args_os()) {
        match e.downcast_ref::<clap::Error>() {
            Some(c) => c.exit(),
            None => {
                eprintln!("error: {e:#}");
                std::process::exit(1);
            }
        }
    }
}
