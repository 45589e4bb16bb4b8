//! Writes the synthetic etudes as `.mid` files into the given directory
//! (default `corpus/toy`).

use polystream::midi_io::write_midi;
use polystream::toy::toy_corpus;

fn main() -> std::io::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "corpus/toy".into());
    std::fs::create_dir_all(&dir)?;
    for track in toy_corpus() {
        let path = std::path::Path::new(&dir).join(format!("{}.mid", track.source_id));
        std::fs::write(&path, write_midi(&track))?;
        println!("{}", path.display());
    }
    Ok(())
}
