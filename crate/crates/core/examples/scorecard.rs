use std::time::Instant;

fn main() {
    let ids: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let ids = if ids.is_empty() { (1..=9).collect() } else { ids };
    for id in ids {
        let t = Instant::now();
        let o = mrd::acceptance::run(id);
        print!("{o}");
        println!("  ({:.1}s)", t.elapsed().as_secs_f64());
    }
}
