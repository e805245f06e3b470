//! Prompt templates. Placeholders are written `{{name}}`.
//!
//! The segment, infer-strategies, categorize, protagonist and emotions
//! templates are the published analysis prompts, reproduced verbatim. The
//! turning-point, revise, continue and reflect templates are our own.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::schema::SchemaId;
use super::GatewayError;
use crate::model::TurningPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateId {
    Segment,
    InferStrategies,
    Categorize,
    Protagonist,
    Emotions,
    TurningPoint(TurningPoint),
    Revise,
    Continue,
    Reflect,
}

/// Which configured model a template is sent to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelRole {
    /// Segmentation and strategy work.
    Strategy,
    /// Everything else.
    General,
}

impl TemplateId {
    pub fn key(&self) -> String {
        match self {
            TemplateId::Segment => "segment".into(),
            TemplateId::InferStrategies => "infer-strategies".into(),
            TemplateId::Categorize => "categorize".into(),
            TemplateId::Protagonist => "protagonist".into(),
            TemplateId::Emotions => "emotions".into(),
            TemplateId::TurningPoint(t) => format!("turning-point/{t:?}"),
            TemplateId::Revise => "revise".into(),
            TemplateId::Continue => "continue".into(),
            TemplateId::Reflect => "reflect".into(),
        }
    }

    /// Generation templates sample; analysis templates decode greedily.
    pub fn is_generation(&self) -> bool {
        matches!(self, TemplateId::Revise | TemplateId::Continue | TemplateId::Reflect)
    }

    pub fn model_role(&self) -> ModelRole {
        match self {
            TemplateId::Segment | TemplateId::InferStrategies | TemplateId::Categorize => ModelRole::Strategy,
            _ => ModelRole::General,
        }
    }

    pub fn schema(&self) -> Option<SchemaId> {
        match self {
            TemplateId::Segment => Some(SchemaId::Plots),
            TemplateId::InferStrategies => Some(SchemaId::Strategies),
            TemplateId::Categorize => Some(SchemaId::Category),
            TemplateId::TurningPoint(_) => Some(SchemaId::YesNo),
            TemplateId::Reflect => Some(SchemaId::Reflection),
            TemplateId::Protagonist | TemplateId::Emotions | TemplateId::Revise | TemplateId::Continue => None,
        }
    }

    fn parts(&self) -> (&'static str, &'static str) {
        match self {
            TemplateId::Segment => (SEGMENT_SYSTEM, SEGMENT_CONTEXT),
            TemplateId::InferStrategies => (STRATEGIES_SYSTEM, STRATEGIES_CONTEXT),
            TemplateId::Categorize => (CATEGORIZE_SYSTEM, CATEGORIZE_CONTEXT),
            TemplateId::Protagonist => (PROTAGONIST_SYSTEM, PROTAGONIST_CONTEXT),
            TemplateId::Emotions => (EMOTIONS_SYSTEM, EMOTIONS_CONTEXT),
            TemplateId::TurningPoint(_) => (TURNING_POINT_SYSTEM, TURNING_POINT_CONTEXT),
            TemplateId::Revise => (REVISE_SYSTEM, REVISE_CONTEXT),
            TemplateId::Continue => (CONTINUE_SYSTEM, CONTINUE_CONTEXT),
            TemplateId::Reflect => (REFLECT_SYSTEM, REFLECT_CONTEXT),
        }
    }

    /// Bindings this template fills in by itself.
    fn implicit_bindings(&self) -> Vec<(&'static str, String)> {
        match self {
            TemplateId::TurningPoint(t) => vec![
                ("turning_point", t.label().to_string()),
                ("definition", t.definition().to_string()),
            ],
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub template: TemplateId,
    pub system: String,
    pub context: String,
    pub schema: Option<SchemaId>,
}

pub type Bindings = BTreeMap<String, String>;

/// Convenience constructor: `bindings([("story", text)])`.
pub fn bindings<K, V, I>(pairs: I) -> Bindings
where
    K: Into<String>,
    V: Into<String>,
    I: IntoIterator<Item = (K, V)>,
{
    pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect()
}

pub fn render(template: TemplateId, bindings: &Bindings) -> Result<RenderedPrompt, GatewayError> {
    let mut all = bindings.clone();
    for (k, v) in template.implicit_bindings() {
        all.entry(k.to_string()).or_insert(v);
    }
    let (system, context) = template.parts();
    Ok(RenderedPrompt {
        template,
        system: fill(system, &all)?,
        context: fill(context, &all)?,
        schema: template.schema(),
    })
}

fn fill(template: &str, bindings: &Bindings) -> Result<String, GatewayError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        let Some(close) = after.find("}}") else {
            out.push_str(&rest[open..]);
            return Ok(out);
        };
        let name = &after[..close];
        let value = bindings
            .get(name)
            .ok_or_else(|| GatewayError::UnboundPlaceholder(name.to_string()))?;
        out.push_str(value);
        rest = &after[close + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

const SEGMENT_SYSTEM: &str = r#"You are an expert story analyst. Your task is to segment a given story into coherent plot segments that represent distinct narrative beats.

**Segment Criteria:**
- Each segment should be self-contained enough to understand independently
- Aim for 5-10 segments depending on story length and complexity
- Each segment should represent a meaningful story progression
- Avoid overly short segments (less than 50 words) or overly long segments (more than 300 words)

**Output Format:**
Return your response as a JSON object with this exact structure:
{"plots": [{"title": "Brief, descriptive title (3-8 words)", "plot": "Original text content from this story segment (extracted verbatim from the source)", "summary": "Concise summary of what happens in this segment"}]}."#;

const SEGMENT_CONTEXT: &str = "The story title is {{title}} and the story is: {{story}}";

const PROTAGONIST_SYSTEM: &str = "Who is the main character of the this story?
The output should just be a name or a short phrase. Do not include any other information or context.";

const PROTAGONIST_CONTEXT: &str = "The story is: {{story}}";

const EMOTIONS_SYSTEM: &str = "Use three different words to describe the character's feeling in a given story plot.
The output should be a list of words. For example, [happy, sad, joyful]. Do not include other outputs.";

const EMOTIONS_CONTEXT: &str = "How does {{protagonist}} feel in this plot? {{plot}}";

const STRATEGIES_SYSTEM: &str = r#"You are an expert literary analyst tasked with identifying creative strategies used in story plots. Creative strategies are any storytelling techniques, narrative devices, plot mechanisms, stylistic choices, or structural elements that authors use to create compelling narratives, engage readers, or achieve specific artistic effects.

**Your task:**
Analyze the given plot and identify all creative strategies employed. For each strategy, provide:
1. A concise phrase describing the strategy (2-6 words)
2. A detailed explanation of how and why this strategy is used effectively
3. Specific lexical features (words, phrases, linguistic patterns) that contribute to or signal this strategy

**What Constitutes a Creative Strategy:**
Any deliberate creative choice that serves a narrative purpose, including but not limited to:
- How information is revealed or withheld
- Character development and interaction patterns
- Structural and pacing decisions
- Language and tone choices
- Conflict creation and resolution approaches
- Thematic development techniques
- Reader engagement mechanisms
- Innovative or unexpected narrative elements

**Lexical Features to Identify:**
For each strategy, extract EXACT verbatim text from the original plot that contributes to or signals the strategy:
- Copy exact words, phrases, or sentences as they appear in the plot
- Include direct quotes from dialogue exactly as written
- Extract precise descriptive language or imagery
- Identify specific repeated words or phrases
- Copy transitional phrases or structural markers verbatim
- Quote any language that contributes to the strategy's effectiveness
- Do NOT paraphrase, interpret, or modify the original text - use exact quotations only Return output

**Output Format:**
Return your response as a JSON object with this exact structure:
{"strategies":[{"strategy":"Brief strategy name (2--6 words)","reasoning":"1--3 sentence explanation of how this strategy functions and why it's effective.","lexicon":["word1","phrase2","linguistic pattern3"]}]}."#;

const STRATEGIES_CONTEXT: &str = "The story plot is: {{plot}}

Please analyze this plot and identify all creative strategies employed. Look for any storytelling techniques, narrative choices, or creative elements that serve a purpose in the story - don't limit yourself to traditional categories.

For each strategy you identify:
1. Name the strategy clearly and concisely
2. Explain how it functions in the plot and why it's effective
3. Extract EXACT verbatim words, phrases, or sentences from the plot text above that contribute to or signal this strategy - use precise quotations only, do not paraphrase or modify the original text

Be thorough and creative in your analysis. Consider both obvious techniques and subtle creative choices that make this plot work.";

const CATEGORIZE_SYSTEM: &str = r#"You are an expert literary analyst tasked with categorizing creative strategies according to a comprehensive taxonomy. Each strategy should be assigned to one or two primary categories based on its main functions and effects.

**Your task:**
For each creative strategy provided, determine the PRIMARY CATEGORY (or two categories if the strategy serves multiple major functions) that best describes the strategy's main function(s).

**Taxonomy Categories:**
{{taxonomy}}

**Guidelines:**
- Choose 1-2 categories that represent the strategy's primary functions
- If a strategy clearly serves two major narrative purposes, assign both categories
- Focus on what the strategy DOES rather than what it contains
- Consider the strategy's main purpose(s) in the narrative context
- Only use two categories if the strategy genuinely has dual primary functions - avoid over-categorizing

**Output Format:**
Return your response as a JSON object with only the category assignment(s):
{"category": ["PRIMARY_CATEGORY"]} or {"category": ["CATEGORY_1","CATEGORY_2"]}."#;

const CATEGORIZE_CONTEXT: &str = "Please categorize the following creative strategy: {{strategy}} used in the plot: {{plot}}.

The explanation for this strategy is: {{explanation}}.

Assign it to one or two primary categories based on its main function(s) and narrative purpose(s). Use two categories only when the strategy genuinely serves dual major functions.";

const TURNING_POINT_SYSTEM: &str = r#"You are an expert story analyst. Decide whether a given story block contains one specific turning point.

**Turning Point:**
{{turning_point}}: {{definition}}

A story block may contain zero or more turning points. Judge only this turning point.

**Output Format:**
Return your response as a JSON object: {"answer": "yes"} or {"answer": "no"}."#;

const TURNING_POINT_CONTEXT: &str = "The story block is: {{plot}}";

const REVISE_SYSTEM: &str = "You are a creative writing assistant helping a writer revise one block of their story draft by applying selected narrative strategies.

**Rules:**
- Rewrite ONLY the target block; do not rewrite, summarize, or continue any other block
- Keep character names, tense, and point of view consistent with the surrounding blocks
- Apply each listed strategy; use the example cues as models of how the strategy is realized, not as text to copy
- Preserve the events of the target block while maintaining narrative coherence with the rest of the draft
- Return only the revised block as plain text, without titles, quotes, or commentary";

const REVISE_CONTEXT: &str = "The full draft is:
{{draft}}

The target block (block {{block_number}}) is:
{{target}}

Apply these strategies:
{{strategies}}";

const CONTINUE_SYSTEM: &str = "You are a creative writing assistant helping a writer continue their story draft by applying selected narrative strategies.

**Rules:**
- Write exactly one new story block that follows the last block of the draft
- Keep character names, tense, and point of view consistent with the draft
- Apply each listed strategy; use the example cues as models of how the strategy is realized, not as text to copy
- Return only the new block as plain text, without titles, quotes, or commentary";

const CONTINUE_CONTEXT: &str = "The draft so far is:
{{draft}}

Apply these strategies in the next block:
{{strategies}}{{hint}}";

const REFLECT_SYSTEM: &str = r#"You are a writing coach comparing how one narrative strategy is realized in an example story block and in a writer's revised block.

**Your task:**
Describe the key differences and similarities between the two realizations of the strategy in 2-4 sentences, then quote the exact words or phrases in each text that realize the strategy. Copy quotations verbatim; do not paraphrase.

**Output Format:**
Return your response as a JSON object with this exact structure:
{"commentary": "2-4 sentences", "example_cues": ["verbatim phrase from the example"], "revised_cues": ["verbatim phrase from the revision"]}."#;

const REFLECT_CONTEXT: &str = "The strategy is: {{strategy}}
Its explanation is: {{explanation}}

The example block is:
{{example}}

The revised block is:
{{revised}}";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protagonist_prompt_asks_for_main_character() {
        let p = render(TemplateId::Protagonist, &bindings([("story", "Once...")])).unwrap();
        assert!(p.system.contains("Who is the main character"));
        assert_eq!(p.context, "The story is: Once...");
        assert_eq!(p.schema, None);
    }

    #[test]
    fn emotions_prompt_names_protagonist() {
        let p = render(
            TemplateId::Emotions,
            &bindings([("protagonist", "Maya"), ("plot", "She ran.")]),
        )
        .unwrap();
        assert!(p.context.contains("How does Maya feel in this plot?"));
        assert!(p.system.contains("Use three different words"));
        assert!(p.system.contains("[happy, sad, joyful]"));
    }

    #[test]
    fn missing_binding_is_an_error() {
        assert!(matches!(
            render(TemplateId::Segment, &Bindings::new()),
            Err(GatewayError::UnboundPlaceholder(_))
        ));
    }

    #[test]
    fn bound_values_are_not_rescanned() {
        let p = render(TemplateId::Protagonist, &bindings([("story", "{{title}} is literal")])).unwrap();
        assert_eq!(p.context, "The story is: {{title}} is literal");
    }

    #[test]
    fn turning_point_template_binds_its_definition() {
        let p = render(
            TemplateId::TurningPoint(TurningPoint::Climax),
            &bindings([("plot", "The end.")]),
        )
        .unwrap();
        assert!(p.system.contains("Climax: The peak of the narrative arc"));
        assert_eq!(p.schema, Some(SchemaId::YesNo));
    }

    #[test]
    fn analysis_templates_keep_published_wording() {
        let seg = render(TemplateId::Segment, &bindings([("title", "T"), ("story", "S")])).unwrap();
        assert!(seg
            .system
            .contains("Aim for 5-10 segments depending on story length and complexity"));
        assert!(seg.system.contains("(less than 50 words)"));
        assert_eq!(seg.context, "The story title is T and the story is: S");

        let inf = render(TemplateId::InferStrategies, &bindings([("plot", "P")])).unwrap();
        assert!(inf.system.starts_with("You are an expert literary analyst"));
        assert!(inf.system.contains("use exact quotations only"));
        assert!(inf.context.starts_with("The story plot is: P\n\n"));

        let cat = render(
            TemplateId::Categorize,
            &bindings([
                ("taxonomy", "TAX"),
                ("strategy", "N"),
                ("plot", "P"),
                ("explanation", "E"),
            ]),
        )
        .unwrap();
        assert!(cat.system.contains("one or two primary categories"));
        assert!(cat.system.contains("**Taxonomy Categories:**\nTAX\n"));
        assert!(cat
            .context
            .starts_with("Please categorize the following creative strategy: N used in the plot: P."));
    }
}
