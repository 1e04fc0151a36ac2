//! Index a few documents and build the truncated proposal for a query with an
//! attached answer.

use vod::scoring::{tokenize, Collection, Corpus};
use vod::training::hybrid_proposal;

fn main() -> vod::Result<()> {
    let corpus = Corpus::from_texts([
        "aortic stenosis causes a systolic murmur",
        "mitral regurgitation is heard at the apex",
        "aortic regurgitation gives a diastolic murmur",
        "the tricuspid valve sits on the right",
        "chest pain and syncope suggest aortic stenosis",
    ])?;
    let collection = Collection::with_defaults(corpus)?;
    let question = tokenize("which lesion gives a systolic murmur");
    let answer = tokenize("aortic stenosis");

    for (d, s) in collection.index.score_all(&question).iter().enumerate() {
        println!("bm25(q, d{d}) = {s:.3}");
    }
    let r = hybrid_proposal(&collection, &question, &answer, None, 3, 5.0)?;
    for (d, p) in r.support.iter().zip(r.probs()) {
        println!("r(d{d} | [q; a]) = {p:.3}");
    }
    Ok(())
}
