//! Offline template translator from English to candidate programs.
//!
//! Handles the few-shot example shapes plus "contains X and Y", "no X",
//! "X left/right of Y" and "X but not Y". Words the translator cannot place
//! become constants; the parser later turns unknown ones into holes.
//! Output always parses.

use crate::dsl::{canonicalize, is_identifier, BUILTIN_EMOTIONS, BUILTIN_PROPERTIES, KEYWORDS};

const IMAGE_NOUNS: &[&str] = &[
    "image", "images", "photo", "photos", "picture", "pictures", "pic", "pics", "shot", "shots",
];

const LEAD_FILLERS: &[&str] = &[
    "find", "show", "me", "get", "give", "search", "for", "i", "want", "of", "that", "which", "where", "whose",
    "contain", "contains", "containing", "with", "there", "is", "are", "has", "have", "featuring", "include",
    "includes", "including", "the", "a", "an", "some", "any", "only", "please",
];

/// Words skipped inside noun groups.
const SKIP: &[&str] = &["a", "an", "the", "some", "any", "is", "are", "being", "of", "one", "who", "that", ","];

const UNIVERSALS: &[&str] = &["all", "every", "each"];
const EVERYONE: &[&str] = &["everyone", "everybody"];

/// Word sequences naming spatial relations, longest first within a prefix.
const RELATION_PHRASES: &[(&[&str], &str)] = &[
    (&["to", "the", "left", "of"], "Left"),
    (&["on", "the", "left", "of"], "Left"),
    (&["left", "of"], "Left"),
    (&["to", "the", "right", "of"], "Right"),
    (&["on", "the", "right", "of"], "Right"),
    (&["right", "of"], "Right"),
    (&["next", "to"], "NextTo"),
    (&["beside"], "NextTo"),
    (&["besides"], "NextTo"),
    (&["near"], "NextTo"),
    (&["alongside"], "NextTo"),
    (&["by"], "NextTo"),
    (&["on", "top", "of"], "Above"),
    (&["above"], "Above"),
    (&["over"], "Above"),
    (&["below"], "Below"),
    (&["under"], "Below"),
    (&["underneath"], "Below"),
    (&["beneath"], "Below"),
    (&["inside", "of"], "Inside"),
    (&["inside"], "Inside"),
    (&["within"], "Inside"),
    (&["in"], "Inside"),
    (&["containing"], "Contains"),
    (&["contains"], "Contains"),
];

const PROPERTY_VERBS: &[&str] = &["is", "are", "has", "have", "their", "his", "her", "its", "wearing", "wear", "wears", "with", "a", "an", ","];

fn normalize(query: &str) -> Vec<String> {
    let lower = query.to_lowercase().replace("n't", " not").replace("'s", "");
    let mut words = Vec::new();
    // commas separate clauses like "and" does
    for (i, chunk) in lower.split([',', ';']).enumerate() {
        if i > 0 {
            words.push(",".to_owned());
        }
        words.extend(
            chunk
                .split(|c: char| !c.is_alphanumeric())
                .filter(|w| !w.is_empty())
                .map(str::to_owned),
        );
    }
    words
}

fn strip_location(words: &mut Vec<String>) {
    loop {
        let n = words.len();
        let is_img = |w: &String| IMAGE_NOUNS.contains(&w.as_str());
        if n >= 3 && ["in", "on"].contains(&words[n - 3].as_str()) && words[n - 2] == "the" && is_img(&words[n - 1]) {
            words.truncate(n - 3);
        } else if n >= 2 && words[n - 2] == "in" && is_img(&words[n - 1]) {
            words.truncate(n - 2);
        } else {
            return;
        }
    }
}

fn strip_leading(words: &mut Vec<String>) {
    loop {
        match words.first().map(String::as_str) {
            Some("all") if words.get(1).is_some_and(|w| IMAGE_NOUNS.contains(&w.as_str())) => {
                words.drain(..2);
            }
            Some(w) if LEAD_FILLERS.contains(&w) || IMAGE_NOUNS.contains(&w) || w == "," => {
                words.remove(0);
            }
            _ => return,
        }
    }
}

fn singular(word: &str) -> String {
    match word {
        "people" => return "person".into(),
        "men" => return "man".into(),
        "women" => return "woman".into(),
        "children" => return "child".into(),
        _ => {}
    }
    if let Some(stem) = word.strip_suffix("ies").filter(|s| s.len() > 1) {
        return format!("{stem}y");
    }
    for suffix in ["sses", "ches", "shes", "xes"] {
        if word.ends_with(suffix) {
            return word[..word.len() - 2].to_owned();
        }
    }
    if word.len() > 3 && word.ends_with('s') && !["ss", "us", "is"].iter().any(|s| word.ends_with(s)) {
        return word[..word.len() - 1].to_owned();
    }
    word.to_owned()
}

/// Source text for a constant: CamelCase when it lexes as one, quoted otherwise.
fn constant(words: &[&str]) -> String {
    let camel: String = words
        .iter()
        .map(|w| {
            let mut c = w.chars();
            c.next().map_or(String::new(), |f| f.to_uppercase().chain(c).collect())
        })
        .collect();
    let canonical = canonicalize(&camel);
    if is_identifier(&camel) && !KEYWORDS.contains(&canonical.as_str()) {
        camel
    } else {
        format!("\"{}\"", canonical.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

fn squash(words: &[&str]) -> String {
    words.concat()
}

/// A property or emotion atom for a descriptive phrase, if it has content.
fn attribute_atom(var: &str, phrase: &[&str]) -> Option<String> {
    let words: Vec<&str> = phrase.iter().copied().filter(|w| !PROPERTY_VERBS.contains(w)).collect();
    if words.is_empty() {
        return None;
    }
    let key = squash(&words);
    if BUILTIN_EMOTIONS.contains(&key.as_str()) {
        Some(format!("HasEmotion({var}, {})", constant(&words)))
    } else {
        Some(format!("HasProperty({var}, {})", constant(&words)))
    }
}

fn is_known_attribute(word: &str) -> bool {
    BUILTIN_PROPERTIES.contains(&word) || BUILTIN_EMOTIONS.contains(&word)
}

fn match_relation(words: &[&str], at: usize) -> Option<(usize, &'static str)> {
    RELATION_PHRASES
        .iter()
        .filter(|(phrase, _)| words[at..].starts_with(phrase))
        .map(|(phrase, token)| (phrase.len(), *token))
        .max_by_key(|(len, _)| *len)
}

struct Vars(usize);

impl Vars {
    fn fresh(&mut self) -> String {
        const NAMES: [&str; 6] = ["x", "y", "z", "w", "v", "u"];
        let k = self.0;
        self.0 += 1;
        NAMES.get(k).map_or_else(|| format!("x{k}"), |n| (*n).to_owned())
    }
}

#[derive(Debug, Default)]
struct Group {
    adjectives: Vec<String>,
    noun: Option<String>,
}

#[derive(Debug)]
struct Link {
    relation: String,
    target: usize,
}

/// Noun groups joined by relation phrases or participles.
#[derive(Debug, Default)]
struct Entity {
    groups: Vec<Group>,
    links: Vec<Link>,
}

fn parse_entity(words: &[&str]) -> Entity {
    let mut entity = Entity::default();
    let mut current = Group::default();
    let mut pending: Option<String> = None;
    let close = |entity: &mut Entity, current: &mut Group, pending: &mut Option<String>| {
        let group = std::mem::take(current);
        if group.noun.is_none() {
            return;
        }
        entity.groups.push(group);
        if let Some(relation) = pending.take() {
            if entity.groups.len() > 1 {
                entity.links.push(Link {
                    relation,
                    target: entity.groups.len() - 1,
                });
            }
        }
    };
    let mut i = 0;
    while i < words.len() {
        let w = words[i];
        if let Some((len, token)) = match_relation(words, i) {
            close(&mut entity, &mut current, &mut pending);
            pending = Some(token.to_owned());
            i += len;
            continue;
        }
        let has_object = words[i + 1..].iter().any(|w| !SKIP.contains(w));
        if w.ends_with("ing") && w.len() > 4 && !is_known_attribute(w) && has_object {
            close(&mut entity, &mut current, &mut pending);
            pending = Some(constant(&[w]));
            i += 1;
            continue;
        }
        if !SKIP.contains(&w) && !IMAGE_NOUNS.contains(&w) {
            if let Some(previous) = current.noun.replace(w.to_owned()) {
                current.adjectives.push(previous);
            }
        }
        i += 1;
    }
    close(&mut entity, &mut current, &mut pending);
    entity
}

/// One translated clause: binders and atoms to conjoin at top level, or a
/// self-contained formula.
enum Part {
    Open { vars: Vec<String>, atoms: Vec<String> },
    Closed(String),
}

fn group_atoms(var: &str, group: &Group, atoms: &mut Vec<String>) {
    let noun = group.noun.as_deref().expect("closed groups have nouns");
    atoms.push(format!("HasType({var}, {})", constant(&[&singular(noun)])));
    for adj in &group.adjectives {
        if is_known_attribute(adj) {
            atoms.extend(attribute_atom(var, &[adj]));
        }
    }
}

/// `chain` attaches each relation to the preceding group instead of the head.
fn entity_part(entity: &Entity, vars: &mut Vars, chain: bool) -> Option<(Vec<String>, Vec<String>)> {
    if entity.groups.is_empty() {
        return None;
    }
    let names: Vec<String> = entity.groups.iter().map(|_| vars.fresh()).collect();
    let mut atoms = Vec::new();
    for (name, group) in names.iter().zip(&entity.groups) {
        group_atoms(name, group, &mut atoms);
    }
    for link in &entity.links {
        let subject = if chain { &names[link.target - 1] } else { &names[0] };
        atoms.push(format!("HasRelation({subject}, {}, {})", names[link.target], link.relation));
    }
    Some((names, atoms))
}

fn close_existential(vars: &[String], atoms: &[String]) -> String {
    let binders: String = vars.iter().map(|v| format!("exists {v}. ")).collect();
    format!("{binders}{}", atoms.join(" && "))
}

/// `every N <rest>`: a property, a negated property, or a relation to a
/// second group.
fn universal_part(noun: &str, rest: &[&str], vars: &mut Vars) -> Option<String> {
    let x = vars.fresh();
    let guard = format!("HasType({x}, {})", constant(&[&singular(noun)]));
    let rest: Vec<&str> = rest.iter().copied().filter(|w| !["do", "does", "is", "are"].contains(w)).collect();
    let (negated, rest) = match rest.as_slice() {
        ["not", tail @ ..] => (true, tail.to_vec()),
        ["have", "no", tail @ ..] | ["has", "no", tail @ ..] => (true, tail.to_vec()),
        _ => (false, rest),
    };
    let body = if rest.first().is_some_and(|_| match_relation(&rest, 0).is_some()) {
        let (len, token) = match_relation(&rest, 0).expect("checked");
        let target = parse_entity(&rest[len..]);
        let (tvars, mut tatoms) = entity_part(&target, vars, false)?;
        tatoms.push(format!("HasRelation({x}, {}, {token})", tvars[0]));
        close_existential(&tvars, &tatoms)
    } else {
        attribute_atom(&x, &rest)?
    };
    let body = if negated { format!("!({body})") } else { body };
    let body = if negated && !body.contains(" && ") && !body.starts_with("!(exists") {
        // a single negated atom needs no parentheses
        format!("!{}", &body[2..body.len() - 1])
    } else {
        body
    };
    Some(format!("forall {x}. {guard} -> {body}"))
}

fn clause_part(mut words: Vec<&str>, vars: &mut Vars, chain: bool) -> Option<Part> {
    let mut negated = false;
    loop {
        match words.first() {
            Some(&"not") | Some(&"no") | Some(&"without") => {
                negated = true;
                words.remove(0);
            }
            Some(w) if LEAD_FILLERS.contains(w) => {
                words.remove(0);
            }
            _ => break,
        }
    }
    let mut owned: Vec<String> = words.iter().map(|w| (*w).to_owned()).collect();
    strip_location(&mut owned);
    // "jane is" on its own is a presence claim
    while owned.last().is_some_and(|w| ["is", "are"].contains(&w.as_str())) {
        owned.pop();
    }
    let words: Vec<&str> = owned.iter().map(String::as_str).collect();
    let first = *words.first()?;

    let universal = if EVERYONE.contains(&first) {
        Some(universal_part("face", &words[1..], vars)?)
    } else if UNIVERSALS.contains(&first) && words.len() >= 2 {
        let skip = usize::from(words[1] == "the");
        let noun = *words.get(1 + skip)?;
        Some(universal_part(noun, &words[2 + skip..], vars)?)
    } else {
        None
    };
    if let Some(formula) = universal {
        return Some(Part::Closed(if negated { format!("!({formula})") } else { formula }));
    }

    // "a face that is smiling and has their eyes open"
    if let Some(rel) = words.iter().position(|w| ["that", "who", "whose"].contains(w)) {
        let head = parse_entity(&words[..rel]);
        if head.groups.len() == 1 && head.links.is_empty() {
            let x = vars.fresh();
            let mut atoms = Vec::new();
            let noun = head.groups[0].noun.as_deref().unwrap_or("face");
            if singular(noun) != "face" {
                group_atoms(&x, &head.groups[0], &mut atoms);
            }
            for phrase in words[rel + 1..].split(|w| ["and", ","].contains(w)) {
                atoms.extend(attribute_atom(&x, phrase));
            }
            if atoms.is_empty() {
                group_atoms(&x, &head.groups[0], &mut atoms);
            }
            let vars = vec![x];
            return Some(if negated {
                Part::Closed(format!("!({})", close_existential(&vars, &atoms)))
            } else {
                Part::Open { vars, atoms }
            });
        }
    }

    let entity = parse_entity(&words);
    let (names, atoms) = entity_part(&entity, vars, chain)?;
    Some(if negated {
        Part::Closed(format!("!({})", close_existential(&names, &atoms)))
    } else {
        Part::Open { vars: names, atoms }
    })
}

/// Splits at clause boundaries, keeping relative clauses ("a face that is
/// smiling and has ...") whole.
fn clauses<'a>(words: &[&'a str]) -> Vec<Vec<&'a str>> {
    let mut out: Vec<Vec<&str>> = vec![Vec::new()];
    let mut relative = false;
    for &w in words {
        match w {
            "that" | "who" | "whose" => {
                relative = true;
                out.last_mut().expect("nonempty").push(w);
            }
            "and" | "," | "also" | "while" if relative => out.last_mut().expect("nonempty").push(w),
            "and" | "," | "but" | "also" | "while" | "although" => out.push(Vec::new()),
            "without" => {
                relative = false;
                out.push(vec!["without"]);
            }
            _ => out.last_mut().expect("nonempty").push(w),
        }
        if matches!(w, "but" | "although") {
            relative = false;
        }
    }
    out.retain(|c| c.iter().any(|w| *w != ","));
    out
}

fn assemble(parts: Vec<Part>) -> Option<String> {
    let mut vars = Vec::new();
    let mut atoms = Vec::new();
    let mut closed = Vec::new();
    for part in parts {
        match part {
            Part::Open { vars: v, atoms: a } => {
                vars.extend(v);
                atoms.extend(a);
            }
            Part::Closed(f) => closed.push(f),
        }
    }
    let n = closed.len();
    let tails = closed.into_iter().enumerate().map(|(i, f)| {
        // a quantifier swallows everything to its right unless it is last
        let bare = f.starts_with('!') || !(f.starts_with("forall") || f.starts_with("exists"));
        if i + 1 == n || bare {
            f
        } else {
            format!("({f})")
        }
    });
    let conjuncts: Vec<String> = atoms.into_iter().chain(tails).collect();
    if conjuncts.is_empty() {
        return None;
    }
    Some(close_existential(&vars, &conjuncts))
}

fn translate_with(words: &[&str], chain: bool) -> Option<String> {
    let mut vars = Vars(0);
    let parts: Vec<Part> = clauses(words)
        .into_iter()
        .filter_map(|c| clause_part(c, &mut vars, chain))
        .collect();
    assemble(parts)
}

/// One to three candidate programs for `query`; empty when no noun phrase
/// is recognizable.
pub fn translate(query: &str) -> Vec<String> {
    let mut owned = normalize(query);
    strip_location(&mut owned);
    strip_leading(&mut owned);
    let words: Vec<&str> = owned.iter().map(String::as_str).collect();
    let mut out: Vec<String> = Vec::new();
    for chain in [false, true] {
        if let Some(candidate) = translate_with(&words, chain) {
            if !out.contains(&candidate) {
                out.push(candidate);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse, parse_with_holes, KnownVocabulary};
    use crate::nlbridge::corpus::PROMPT_PAIRS;
    use proptest::prelude::*;

    #[test]
    fn reproduces_every_prompt_example() {
        for (nl, dsl) in PROMPT_PAIRS {
            let got = translate(nl);
            assert_eq!(got.len(), 1, "{nl}: {got:?}");
            assert_eq!(parse(&got[0]).unwrap(), parse(dsl).unwrap(), "{nl}: {}", got[0]);
        }
    }

    #[test]
    fn conjunction_of_existentials() {
        assert_eq!(
            translate("find all images that contain a guitar and a microphone"),
            ["exists x. exists y. HasType(x, Guitar) && HasType(y, Microphone)"]
        );
    }

    #[test]
    fn relation_shapes() {
        assert_eq!(
            translate("a dog to the right of a car"),
            ["exists x. exists y. HasType(x, Dog) && HasType(y, Car) && HasRelation(x, y, Right)"]
        );
        assert_eq!(
            translate("photos with a cake left of the bride"),
            ["exists x. exists y. HasType(x, Cake) && HasType(y, Bride) && HasRelation(x, y, Left)"]
        );
    }

    #[test]
    fn negation_shapes() {
        assert_eq!(translate("images with no people"), ["!(exists x. HasType(x, Person))"]);
        assert_eq!(translate("no faces"), ["!(exists x. HasType(x, Face))"]);
        assert_eq!(
            translate("Alice but not Bob"),
            ["exists x. HasType(x, Alice) && !(exists y. HasType(y, Bob))"]
        );
        assert_eq!(
            translate("the bride without the groom"),
            ["exists x. HasType(x, Bride) && !(exists y. HasType(y, Groom))"]
        );
    }

    #[test]
    fn participles_become_relations_on_the_head() {
        let got = translate("Alice next to Bob holding flowers");
        assert_eq!(
            got[0],
            "exists x. exists y. exists z. HasType(x, Alice) && HasType(y, Bob) && HasType(z, Flower) \
             && HasRelation(x, y, NextTo) && HasRelation(x, z, Holding)"
        );
        assert_eq!(got.len(), 2);
        assert!(got[1].ends_with("HasRelation(y, z, Holding)"));
        assert_eq!(
            translate("Alice is holding flowers"),
            ["exists x. exists y. HasType(x, Alice) && HasType(y, Flower) && HasRelation(x, y, Holding)"]
        );
    }

    #[test]
    fn adjectives_that_are_attributes_are_kept() {
        assert_eq!(
            translate("a smiling face next to a happy dog"),
            ["exists x. exists y. HasType(x, Face) && HasProperty(x, Smiling) && HasType(y, Dog) \
              && HasEmotion(y, Happy) && HasRelation(x, y, NextTo)"]
        );
    }

    #[test]
    fn nothing_recognizable_gives_nothing() {
        assert!(translate("").is_empty());
        assert!(translate("the images, please").is_empty());
    }

    #[test]
    fn keywords_are_quoted() {
        let got = translate("a forall next to an exists");
        assert!(got[0].contains("\"forall\""), "{got:?}");
        parse(&got[0]).unwrap();
    }

    proptest! {
        #[test]
        fn output_always_parses(query in "[a-zA-Z ,.'!?]{0,60}") {
            let vocab = KnownVocabulary::builtin();
            for candidate in translate(&query) {
                prop_assert!(parse_with_holes(&candidate, &vocab).is_ok(), "{query:?} -> {candidate}");
            }
        }

        #[test]
        fn output_always_parses_from_phrase_soup(words in proptest::collection::vec(
            prop::sample::select(vec![
                "a", "the", "and", "but", "not", "no", "every", "all", "everyone", "is", "are", "next", "to",
                "left", "of", "right", "above", "in", "image", "that", "who", "has", "smiling", "eyes", "open",
                "holding", "dog", "cat", "alice", "with", "without", ",", "do", "have", "exists", "forall",
            ]),
            0..14,
        )) {
            let query = words.join(" ");
            let vocab = KnownVocabulary::builtin();
            for candidate in translate(&query) {
                prop_assert!(parse_with_holes(&candidate, &vocab).is_ok(), "{query:?} -> {candidate}");
            }
        }
    }
}
