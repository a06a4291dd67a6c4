//! Regenerates the checked-in sample data file. Run from the repo root:
//!
//! ```text
//! cargo run -p ecnn-cli --example gen_fixture
//! ```

use ecnn_core::data::write_csv;
use ecnn_core::synthetic::synthetic_ohlcv;

fn main() {
    let bars = synthetic_ohlcv(500, 20020102);
    let path = "data/synthetic_ohlcv.csv";
    std::fs::create_dir_all("data").expect("create data dir");
    write_csv(path, &bars).expect("write fixture");
    println!(
        "wrote {path}: {} rows, {} to {}",
        bars.len(),
        bars.first().unwrap().date,
        bars.last().unwrap().date
    );
}
