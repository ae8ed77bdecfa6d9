//! Few-shot prompt examples and prompt assembly.

/// Description/program pairs shown to the language model, in prompt order.
pub const PROMPT_PAIRS: [(&str, &str); 8] = [
    ("There is a tree in the image.", "exists x. HasType(x, Tree)"),
    (
        "The image contains a chair and a table.",
        "exists x. exists y. HasType(x, Chair) && HasType(y, Table)",
    ),
    (
        "The image contains a chair to the left of a table.",
        "exists x. exists y. HasType(x, Chair) && HasType(y, Table) && HasRelation(x, y, Left)",
    ),
    (
        "All faces do not have eyes open.",
        "forall x. HasType(x, Face) -> !HasProperty(x, EyesOpen)",
    ),
    (
        "The image contains a cat inside a box.",
        "exists x. exists y. HasType(x, Cat) && HasType(y, Box) && HasRelation(x, y, Inside)",
    ),
    (
        "Jane is in the image and everyone is smiling.",
        "exists x. HasType(x, Jane) && forall y. HasType(y, face) -> HasProperty(y, Smiling)",
    ),
    (
        "The image contains a face that is smiling, and has their eyes open.",
        "exists x. HasProperty(x, Smiling) && HasProperty(x, EyesOpen)",
    ),
    (
        "Every person is next to a cat.",
        "forall x. HasType(x, Person) -> exists y. HasType(y, Cat) && HasRelation(x, y, NextTo)",
    ),
];

const PROMPT_HEADER: &str = "Translate each image description into a program of the query language. \
Answer with the program only, on one line.\n\n";

const EXPLAIN_HEADER: &str = "Describe in one plain English sentence which images each program selects.\n\n";

/// An immutable ordered list of (description, program) pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptCorpus {
    pairs: Vec<(String, String)>,
}

impl Default for PromptCorpus {
    fn default() -> Self {
        Self::new(PROMPT_PAIRS.iter().map(|(nl, dsl)| (nl.to_string(), dsl.to_string())))
    }
}

impl PromptCorpus {
    pub fn new(pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        Self {
            pairs: pairs.into_iter().collect(),
        }
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    /// Header, one `Input:`/`Output:` block per pair, then the open query.
    pub fn build_prompt(&self, query: &str) -> String {
        let mut prompt = String::from(PROMPT_HEADER);
        for (nl, dsl) in &self.pairs {
            prompt.push_str(&block(nl, dsl));
        }
        prompt.push_str(&format!("Input: {}\nOutput:", query.trim()));
        prompt
    }

    /// The same pairs reversed, asking for a description of `program`.
    pub fn build_explain_prompt(&self, program: &str) -> String {
        let mut prompt = String::from(EXPLAIN_HEADER);
        for (nl, dsl) in &self.pairs {
            prompt.push_str(&format!("Program: {dsl}\nDescription: {nl}\n\n"));
        }
        prompt.push_str(&format!("Program: {program}\nDescription:"));
        prompt
    }
}

/// The prompt text for one pair.
pub fn block(nl: &str, dsl: &str) -> String {
    format!("Input: {nl}\nOutput: {dsl}\n\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_snapshot() {
        let prompt = PromptCorpus::default().build_prompt("  Alice is holding flowers ");
        let expected = "\
Translate each image description into a program of the query language. Answer with the program only, on one line.

Input: There is a tree in the image.
Output: exists x. HasType(x, Tree)

Input: The image contains a chair and a table.
Output: exists x. exists y. HasType(x, Chair) && HasType(y, Table)

Input: The image contains a chair to the left of a table.
Output: exists x. exists y. HasType(x, Chair) && HasType(y, Table) && HasRelation(x, y, Left)

Input: All faces do not have eyes open.
Output: forall x. HasType(x, Face) -> !HasProperty(x, EyesOpen)

Input: The image contains a cat inside a box.
Output: exists x. exists y. HasType(x, Cat) && HasType(y, Box) && HasRelation(x, y, Inside)

Input: Jane is in the image and everyone is smiling.
Output: exists x. HasType(x, Jane) && forall y. HasType(y, face) -> HasProperty(y, Smiling)

Input: The image contains a face that is smiling, and has their eyes open.
Output: exists x. HasProperty(x, Smiling) && HasProperty(x, EyesOpen)

Input: Every person is next to a cat.
Output: forall x. HasType(x, Person) -> exists y. HasType(y, Cat) && HasRelation(x, y, NextTo)

Input: Alice is holding flowers
Output:";
        assert_eq!(prompt, expected);
    }

    #[test]
    fn prompt_is_byte_stable() {
        let c = PromptCorpus::default();
        assert_eq!(c.build_prompt("a dog"), c.build_prompt("a dog"));
        assert_eq!(c.pairs().len(), 8);
    }

    #[test]
    fn explain_prompt_ends_open() {
        let p = PromptCorpus::default().build_explain_prompt("exists x. HasType(x, Dog)");
        assert!(p.ends_with("Program: exists x. HasType(x, Dog)\nDescription:"));
        assert!(p.contains("Description: Every person is next to a cat.\n"));
    }
}
