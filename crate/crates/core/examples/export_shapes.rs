//! Writes a training set for the shape network: one byte of class index
//! followed by 1024 pixel bytes, per image.

use std::io::Write;

use deskbot_core::vision::shapes::shape_dataset;

fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "shapes_train.bin".into());
    let n: usize = args.next().map_or(8000, |s| s.parse().expect("count"));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));
    let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
    for (k, px) in shape_dataset(seed, n) {
        f.write_all(&[k.index() as u8])?;
        f.write_all(&px)?;
    }
    f.flush()
}
