//! Composition, inversion and action of feedback transformations.

use ensemble_feedback::feedback_group::{equivalence_residual, SampledTransform};
use ensemble_feedback::param_core::{ParamArc, ParamGrid};
use ensemble_feedback::random;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ensemble_feedback::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let arc = ParamArc::new(-1.0, 1.0)?;
    let grid = ParamGrid::uniform(arc, 21)?;
    let (n, m) = (3, 2);

    let g1 = random::restricted_transform(&mut rng, n, m, arc);
    let g2 = random::restricted_transform(&mut rng, n, m, arc);
    let pair = random::pair_samples(&mut rng, &grid, n, m);

    let (s1, s2) = (g1.sample(&grid)?, g2.sample(&grid)?);
    let moved = s1.act(&s2.act(&pair)?)?;
    let at_once = g1.compose(&g2)?.act(&pair)?;
    let gap = (0..grid.len())
        .map(|k| (moved.a(k) - at_once.a(k)).norm().max((moved.b(k) - at_once.b(k)).norm()))
        .fold(0.0, f64::max);
    println!("g1 . (g2 . pair) vs (g1 g2) . pair: {gap:.2e}");

    let back = s1.inverse()?.act(&s1.act(&pair)?)?;
    let gap = (0..grid.len()).map(|k| (back.a(k) - pair.a(k)).norm()).fold(0.0, f64::max);
    println!("g1^-1 . (g1 . pair) vs pair: {gap:.2e}");

    let res = equivalence_residual(&s1, &pair, &s1.act(&pair)?)?;
    let worst = res.iter().map(|r| r.state.max(r.input)).fold(0.0, f64::max);
    println!("equivalence relations between pair and g1 . pair: {worst:.2e}");

    let id = SampledTransform::identity(grid.clone(), n, m);
    println!("identity is restricted: {:?}", id.kind());
    Ok(())
}
