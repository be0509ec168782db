// Paths serialize to JSON and can be checked again later. A tampered copy
// is caught by the verifier.
//
//     cargo run --example verify_stored_path

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sublevel::config::generate_data;
use sublevel::net::{loss, Activation, LossKind, NetworkSpec, Theta};
use sublevel::path::{connect_sublevel, verify_path, ParamPath, PathConfig, PathDescription, Verdict};

pub fn run_example() -> sublevel::Result<(Verdict, Verdict)> {
    let spec = NetworkSpec::new(vec![2, 4, 1], Activation::leaky_relu(0.5)?, LossKind::Square)?;
    let data = generate_data(&spec, 3, 8)?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = Theta::random(&spec, &mut rng);
    let b = Theta::random(&spec, &mut rng);
    let alpha = loss(&spec, &a, &data)?.max(loss(&spec, &b, &data)?);
    let cfg = PathConfig::default();
    let (path, _) = connect_sublevel(&spec, &data, &a, &b, alpha, &cfg)?;

    let stored = sublevel::json::to_string(&path)?;
    let description = sublevel::json::to_string(&PathDescription::of(&path))?;
    println!("path JSON {} bytes, description {} bytes", stored.len(), description.len());

    let loaded: ParamPath = serde_json::from_str(&stored)?;
    let honest = verify_path(&spec, &data, &loaded, (&a, &b), alpha, 100, &cfg.tol);
    println!("reloaded path: {:?}", honest.verdict);

    // detour through a point with a blown-up last layer; the chain still
    // closes but the loss along it leaves the sublevel set
    let mut segments = loaded.segments().to_vec();
    let last = segments.len() - 1;
    let mut bent = segments[last].end().clone();
    bent.weights[1] *= 25.0;
    segments[last] = sublevel::path::Segment::linear(segments[last].start().clone(), bent, false);
    segments.push(sublevel::path::Segment::linear(segments[last].end().clone(), b.clone(), false));
    let tampered = ParamPath::new(spec.clone(), segments)?;
    let caught = verify_path(&spec, &data, &tampered, (&a, &b), alpha, 100, &cfg.tol);
    println!("tampered path: {:?} {:?}", caught.verdict, caught.failures);
    Ok((honest.verdict, caught.verdict))
}

fn main() -> sublevel::Result<()> {
    run_example().map(|_| ())
}
