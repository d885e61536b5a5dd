use curvesig::curves::random_curve;
use curvesig::sigmaps::MapId;
use curvesig::tracking::TrackerSettings;
use curvesig::witness::compute_pws;

fn main() {
    let settings = TrackerSettings::default();
    for (label, degree, cseed, id, seeds) in [
        ("conic joint", 2u32, 555u64, MapId::EuclidJoint, [5u64, 6, 7]),
        ("cubic joint", 3, 77, MapId::EuclidJoint, [5, 6, 7]),
        ("quartic joint", 4, 41, MapId::EuclidJoint, [5, 6, 7]),
    ] {
        for s in seeds {
            let curve = random_curve(degree, cseed);
            match compute_pws(id, &curve, s, &settings) {
                Ok(p) => println!("{label} seed {s}: e {} e_img {}", p.e, p.e_img),
                Err(e) => println!("{label} seed {s}: ERR {e}"),
            }
        }
    }
}
