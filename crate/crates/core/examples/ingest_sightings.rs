//! Raw sightings to pseudo-visits and a confirmed-presence matrix.
//!
//! Run with `cargo run --example ingest_sightings`.

use occupancy::ingest::{
    build_confirmed_presence, derive_visits, parse_sightings, split_observer_streams, ColumnMap, GridSpec,
    ListLengthCuts, StudyWindow,
};

const CSV: &str = "\
observer,species,date,x,y,validated,countable
ann,iris,2021-06-27,250,250,0,1
ann,ilia,2021-06-27,300,120,0,1
ann,rhamni,2021-06-27,400,900,0,1
ann,rhamni,2021-07-02,1250,250,0,1
bob,iris,2021-07-04,1800,1900,0,0
bob,io,2021-07-04,1700,1600,0,1
cid,iris,2022-06-30,1200,1500,1,1
ann,iris,2022-13-01,250,250,0,1
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let parsed = parse_sightings(CSV.as_bytes(), &ColumnMap::default())?;
    for e in &parsed.errors {
        println!("skipped line {}: {}", e.line, e.message);
    }
    let grid = GridSpec {
        origin_x: 0.0,
        origin_y: 0.0,
        cell_size: 1000.0,
        ncols: 2,
        nrows: 2,
    };
    let window = StudyWindow::years(2021, 2022)?;

    // two sightings make an observer proficient in this toy
    let streams = split_observer_streams(&parsed.sightings, 2)?;
    println!("proficient: {:?}, other: {:?}", streams.proficient, streams.other);

    let visits = derive_visits(&parsed.sightings, "iris", &streams.proficient, &grid, &ListLengthCuts::default())?;
    for v in &visits {
        println!(
            "site {} year {} week {:2} observer {} list {:6} y={}",
            v.site,
            v.year,
            v.week,
            v.observer,
            v.list_length.label(),
            v.y as u8
        );
    }
    let a = build_confirmed_presence(&visits, &parsed.sightings, "iris", &streams.proficient, &grid, &window)?;
    for s in 0..a.n_sites {
        let row: Vec<u8> = (0..a.n_years).map(|t| a.get_idx(s, t) as u8).collect();
        println!("site {s}: {row:?}");
    }
    Ok(())
}
