fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    std::process::exit(conncbf::cli_io::cli_run(std::env::args_os()));
}
