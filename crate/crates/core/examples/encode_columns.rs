//! Fit column codecs on a table, encode it, and decode it back.
//!
//!     cargo run --example encode_columns

use relsynth::encoding::{decode, encode, fit_codec, ColumnCodec};
use relsynth::fixture::{demo_database, DemoSize};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let db = demo_database(DemoSize::default(), 1);
    let users = db.tables[0].project(&["gender", "age"])?;
    let codec = fit_codec(&users, 10, 0)?;
    for c in &codec.columns {
        match &c.codec {
            ColumnCodec::Categorical(k) => println!("{:<8} one-hot {:?}", c.name, k.categories),
            ColumnCodec::Numerical(m) => {
                println!("{:<8} {} modes", c.name, m.n_modes());
                for ((w, mu), sd) in m.weights.iter().zip(&m.means).zip(&m.stds) {
                    println!("         weight {w:.3} mean {mu:.2} std {sd:.2}");
                }
            }
        }
    }
    let x = encode(&codec, &users)?;
    println!("encoded width {}; first row {:?}", x.ncols(), x.row(0).to_vec());
    let back = decode(&codec, x.view())?;
    let exact = back.column("gender") == users.column("gender");
    println!("categorical round trip exact: {exact}");
    Ok(())
}
