// scratch diagnostic — not part of the crate
use eegfc_core::ml::mlp::{MlpNet, Activation};
use ndarray::Array2;
use rand::Rng;

fn main() {
    let mut rng = eegfc_core::rng::seeded_rng(42);
    let centers = [(0.0, 0.0), (6.0, 0.0), (0.0, 6.0)];
    let per = 10;
    let n = 30;
    let mut x = Array2::<f64>::zeros((n, 2));
    let mut y = Vec::new();
    for (c, ctr) in centers.iter().enumerate() {
        for i in 0..per {
            let r = c * per + i;
            x[[r,0]] = ctr.0 + rng.gen_range(-1.0..1.0);
            x[[r,1]] = ctr.1 + rng.gen_range(-1.0..1.0);
            y.push(c);
        }
    }
    // manual training loop, no early stop, print losses
    let mut net = MlpNet::new_random(2, 1, 50, 3, Activation::Relu, 7);
    for epoch in 0..2001 {
        if epoch % 250 == 0 {
            let loss = net.loss(&x, &y, 0.1);
            let hits = (0..n).filter(|&r| net.predict(&x.row(r).to_vec()) == y[r]).count();
            println!("epoch {epoch}: full loss {loss:.5}, train acc {}/{n}", hits);
        }
        let (_, g) = net.loss_and_gradients_flat(&x, &y, 0.1);
        let mut p = net.flat_params();
        for (pi, gi) in p.iter_mut().zip(&g) { *pi -= 1e-3 * gi; } // plain GD to gauge scale
        net.set_flat_params(&p);
    }
}
