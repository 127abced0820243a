use softbot_web::Demo;

#[test]
fn walker_grows_walks_and_regrows() {
    let mut d = Demo::new();
    let n = d.width() * d.height();
    let steps = d.grow().unwrap();
    assert_eq!(steps.len(), 11 * n);
    let body = d.body();
    assert_eq!(body.iter().filter(|&&c| c != 0).count(), 25);

    let sim = d.simulate().unwrap();
    let (frames, masses) = (sim[0] as usize, sim[1] as usize);
    assert_eq!(frames, 26);
    assert_eq!(sim.len(), 3 + frames * masses * 2);
    assert!(sim[2] > 0.0);

    let regrowth = d.damage_and_regrow().unwrap();
    assert_eq!(regrowth.len(), 11 * n);
    assert!(regrowth[..n].iter().filter(|&&c| c != 0).count() < 25);
    assert_eq!(d.body(), body);
}

#[test]
fn random_genomes_are_seeded() {
    let (mut a, mut b) = (Demo::new(), Demo::new());
    a.randomize(3, 2.0);
    b.randomize(3, 2.0);
    assert_eq!(a.grow().unwrap(), b.grow().unwrap());
}
