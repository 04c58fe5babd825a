//! Render label and activity prompts and tokenize them.

use clef::text::{builtin_labels, render_prompt, LabelSet, TemplateKind, TemplateSet, Tokenizer};
use clef::train::Prompts;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let prompts = Prompts::builtin();
    let labels = builtin_labels(LabelSet::Fe);
    let tok = Tokenizer::default();

    for l in labels.iter().take(2) {
        let name = render_prompt(&prompts.label_name, 0, &l.name)?;
        let desc = render_prompt(&prompts.fe_description, 0, &l.description)?;
        let t = tok.tokenize(&desc);
        println!("{name}\n  {desc}\n  {} tokens, eos at {}: {:?}", t.true_len, t.end_index, &t.ids[..t.true_len.min(8)]);
    }
    println!("{} description templates, {} activity templates", prompts.fe_description.len(), prompts.activity.len());

    let custom = TemplateSet::parse(TemplateKind::ActivityDescription, "while {}, the person reacts\n")?;
    println!("{}", render_prompt(&custom, 0, "listening to a joke")?);
    assert!(TemplateSet::parse(TemplateKind::LabelName, "no placeholder").is_err());
    Ok(())
}
