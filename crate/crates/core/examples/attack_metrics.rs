//! ADR and AER from scalar readings and from masked map means.

use lensdepth::estimation::{masked_mean, ScalarMap};
use lensdepth::imaging::{Mask, PixelRect};
use lensdepth::metrics::{adr, aer};

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("ADR(0.36 vs 0.28) = {:.3}", adr(0.36, 0.28)?);
    println!("AER(11.57 vs target 11.79) = {:.4}", aer(11.57, 11.79)?);

    let (w, h) = (64, 48);
    let benign = ScalarMap::filled(w, h, 0.25)?;
    let mut attacked = benign.clone();
    let vehicle = PixelRect::new(20, 16, 44, 36)?;
    for y in vehicle.y_min..vehicle.y_max {
        for x in vehicle.x_min..vehicle.x_max {
            attacked.set(x, y, 0.40);
        }
    }
    let mask = Mask::from_rect(w, h, vehicle);
    let (a, b) = (masked_mean(&attacked, &mask)?, masked_mean(&benign, &mask)?);
    println!("vehicle box mean {a:.3} vs {b:.3}: ADR {:.3}", adr(a, b)?);
    println!("against target 0.43: AER {:.4}", aer(a, 0.43)?);
    Ok(())
}
