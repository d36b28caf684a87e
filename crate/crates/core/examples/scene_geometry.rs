//! Default tunnel, anchor arrays and reflector panels, with frame round trips.

use tunnel_loc::harness::Scenario;
use tunnel_loc::raygen::mirror_image;
use tunnel_loc::scene::build_ura_layout;
use tunnel_loc::Vec3;

fn main() {
    let sc = Scenario::default();
    let scene = sc.scene();
    let t = &scene.tunnel;
    println!("tunnel {} x {} x {} m", t.length, t.width, t.height);
    println!("anchor at {:?}", scene.anchor.position.as_slice());

    let layout = build_ura_layout(&scene.anchor);
    for i in 0..scene.anchor.arrays.len() {
        let pose = scene.anchor.array_pose(i);
        let bore = pose.dir_to_global(&Vec3::z());
        println!("array {i}: {} elements, boresight ({:+.3}, {:+.3}, {:+.3})", layout.len(), bore.x, bore.y, bore.z);
    }

    let ue = Vec3::new(35.0, 2.5, 1.0);
    println!("UE at {:?} is served by array {}", ue.as_slice(), scene.anchor.facing_array(&ue));
    for p in &scene.panels {
        let v = mirror_image(&ue, p);
        println!(
            "panel {} {:<6} normal ({:+.3}, {:+.3}, {:+.3})  image of UE ({:.2}, {:.2}, {:.2})",
            p.id,
            if p.rrm { "marker" } else { "wall" },
            p.unit_normal.x,
            p.unit_normal.y,
            p.unit_normal.z,
            v.x,
            v.y,
            v.z
        );
    }

    let pose = scene.anchor.array_pose(0);
    let back = pose.local_to_global(&pose.global_to_local(&ue));
    println!("frame round trip error {:.2e} m", (back - ue).norm());
}
