//! Runs every example end to end so they cannot rot.

#[allow(dead_code)]
#[path = "../examples/lazy_fields.rs"]
mod lazy_fields;

#[test]
fn example_lazy_fields() {
    lazy_fields::run_example().unwrap();
}


#[test]
fn example_pipeline() {
    pipeline::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/video_windows.rs"]
mod video_windows;

#[test]
fn example_video_windows() {
    video_windows::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/cats_vs_dogs.rs"]
mod cats_vs_dogs;

#[test]
fn example_cats_vs_dogs() {
    cats_vs_dogs::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/sharding.rs"]
mod sharding;

#[test]
fn example_sharding() {
    sharding::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/disk_cache.rs"]
mod disk_cache;

#[test]
fn example_disk_cache() {
    disk_cache::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/monad_laws.rs"]
mod monad_laws;

#[test]
fn example_monad_laws() {
    monad_laws::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/sources.rs"]
mod sources;

#[test]
fn example_sources() {
    sources::run_example().unwrap();
}
