//! Acceptance suite. Set `ACCEPTANCE_ONLY=1,4,7` to run a subset.

fn main() {
    let only: Vec<u32> = std::env::var("ACCEPTANCE_ONLY")
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect())
        .unwrap_or_default();
    let checks = tunnel_loc::selftest::run(&only);
    let failed = checks.iter().filter(|c| !c.pass).count();
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
