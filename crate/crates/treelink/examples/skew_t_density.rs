//! Tabulates the standardized skewed t density and checks by quadrature that
//! it integrates to one with the requested mean and variance.

use treelink::growth::skewt_logpdf;

fn main() -> treelink::Result<()> {
    let (mu, tau) = (1.0, 0.5);
    println!("delta omega   mass      mean      variance");
    for delta in [-0.5, 0.0, 0.5] {
        for omega in [3.0, 8.0, 200.0] {
            // x = mu + tan(t) maps the line onto (-pi/2, pi/2)
            let n = 400_000;
            let h = std::f64::consts::PI / n as f64;
            let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
            for i in 1..n {
                let t = -std::f64::consts::FRAC_PI_2 + i as f64 * h;
                let x = mu + t.tan();
                let w = skewt_logpdf(x, mu, tau, delta, omega)?.exp() / t.cos().powi(2) * h;
                m0 += w;
                m1 += w * x;
                m2 += w * x * x;
            }
            let mean = m1 / m0;
            println!("{delta:5.1} {omega:5.0}  {m0:.7}  {mean:.6}  {:.6}", m2 / m0 - mean * mean);
        }
    }

    println!("\n   z    skew-t(0.5, 8)   normal");
    for z in [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0] {
        let normal = -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * z * z;
        println!("{z:4.1}  {:14.4}  {normal:8.4}", skewt_logpdf(z, 0.0, 1.0, 0.5, 8.0)?);
    }
    Ok(())
}
