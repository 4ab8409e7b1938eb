fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let env_seed = std::env::var(sizeshare::config::SEED_ENV).ok();
    let code = sizeshare::main_with(
        std::env::args_os(),
        env_seed.as_deref(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    std::process::exit(code);
}
