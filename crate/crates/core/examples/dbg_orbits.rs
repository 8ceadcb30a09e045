use nuhlab_core::billiard::{BilliardTable, Disc};
use nuhlab_core::orbits::{enumerate_orbits, EnumOptions};
use nuhlab_core::Vec2;

fn main() {
    let table = BilliardTable::new(vec![
        Disc { center: Vec2::new(0.0, 0.0), radius: 0.245 },
        Disc { center: Vec2::new(0.26, 0.4277), radius: 0.245 },
        Disc { center: Vec2::new(0.74, 0.5723), radius: 0.245 },
    ], 4.0).unwrap();
    let set = enumerate_orbits(&table, 2, EnumOptions { chord_cap: 0.05 });
    println!("attempted {} solved {}", set.attempted, set.orbits.len());
    for o in &set.orbits {
        println!("orbit {} rate {} gaps {}", o.itinerary.label(), o.expansion_rate, o.min_angle_gap);
    }
    for (itin, err) in &set.failures {
        println!("FAIL {} : {err}", itin.label());
    }
    let set4 = enumerate_orbits(&table, 4, EnumOptions::default());
    println!("--- default p<=4: attempted {} solved {} failures {}", set4.attempted, set4.orbits.len(), set4.failures.len());
    for o in set4.orbits.iter().take(12) {
        println!("orbit {} rate {:.6}", o.itinerary.label(), o.expansion_rate);
    }
    let mut fail_counts = std::collections::BTreeMap::new();
    for (_, e) in &set4.failures {
        *fail_counts.entry(e.split('(').next().unwrap_or(e).to_string()).or_insert(0usize) += 1;
    }
    println!("failure kinds: {fail_counts:?}");
}
