use std::time::Instant;
use strata::algebra::Space;
use strata::graphs::{enumerate_stable_graphs, GraphFilter};

fn main() {
    for n in [2u32, 3, 4] {
        let sp = Space::new(2, n);
        let t = Instant::now();
        let all = enumerate_stable_graphs(2, &sp.marks, GraphFilter::All);
        let ext = enumerate_stable_graphs(2, &sp.marks, GraphFilter::Extended);
        let ct = enumerate_stable_graphs(2, &sp.marks, GraphFilter::CompactType);
        println!(
            "(2,{}): all={} ext={} ct={} in {:?}",
            n, all.len(), ext.len(), ct.len(), t.elapsed()
        );
    }
}
