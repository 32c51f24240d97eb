use eag_core::normed::decide_universal;
use eag_core::parse;
use eag_core::rcf::Budget;

#[test]
fn probe_separator() {
    let p = parse("forall x:V, y:V. norm(x) = norm(y) & norm(x + y) = norm(x) + norm(y) -> x = y")
        .unwrap();
    let b = Budget::new(20_000_000);
    let t = std::time::Instant::now();
    let r = decide_universal(&p, &b, 8);
    eprintln!("{:?} used={} -> {:?}", t.elapsed(), b.used(), r.map(|v| format!("{v:?}").chars().take(80).collect::<String>()));
}
