//! Loads an MNIST split from IDX files and draws one digit.
//!
//! MNIST_DIR=data/mnist cargo run --example idx_loading -- [index]

use std::path::Path;

use ttfs::io::{default_mnist_dir, DatasetHandle, Split};

fn main() -> ttfs::Result<()> {
    let index: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0);
    let root = default_mnist_dir(Path::new("."));
    for split in [Split::Train, Split::Validation, Split::Test] {
        let ds = DatasetHandle::new(&root, split).load()?;
        let mean = ds.images.iter().sum::<f64>() / ds.images.len() as f64;
        println!("{split:?}: {} images of {}x{}, mean pixel {mean:.4}", ds.len(), ds.height, ds.width);
    }
    let test = DatasetHandle::new(&root, Split::Test).load()?;
    println!("\ntest image {index}, label {}", test.labels[index]);
    for row in test.image(index).chunks(test.width) {
        let line: String = row
            .iter()
            .map(|&v| match v {
                v if v > 0.75 => '#',
                v if v > 0.4 => '+',
                v if v > 0.1 => '.',
                _ => ' ',
            })
            .collect();
        println!("{line}");
    }
    Ok(())
}
