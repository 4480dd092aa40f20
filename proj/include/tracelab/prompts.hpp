#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tracelab::judge {

// The embedded templates below are the measurement instrument and must not be
// edited: downstream annotations are only comparable if every run renders the
// same bytes. The acceptance suite pins a SHA-256 checksum for each template.
//
// Templates whose body contains doubled braces follow str.format conventions:
// "{{" and "}}" denote literal braces and the named slot is substituted.
// Slotless templates take the payload appended at the end.

inline constexpr std::string_view kConversationalBehaviorsPrompt =
    R"TPL(Your task is to analyze the following text and count how many times behaviors corresponding to each of the four dimensions appear.

**Text to Analyze:**

{chain_of_thought}

---

You must output a single valid JSON object with the exact schema below and nothing else.

{{

"Question_and_Answering": <int>,

"Perspective_Shift": <int>,

"Conflict_of_Perspectives": <int>,

"Reconciliation": <int>

}}

Use the following definitions:

1. **Question and Answering** --- A question is posed and later answered, as in conversations.

(e.g., "Why...? Because...", "What if...? Then...", "How do we know? Well...", "Let's try X...? This gives us Y")

2. **Perspective Shift** --- A transition to a different idea, viewpoint, assumption, or approach, as in conversations.

3. **Conflict of Perspectives** --- Expressions of disagreement, correction, or tension with another perspective.

(e.g., "Wait, that can't be right...", "No, actually...", "This contradicts...")

4. **Reconciliation** --- Conflicting views are integrated or resolved into a coherent synthesis.

(e.g., "So perhaps both are true if...", "Combining these insights...", "This resolves the tension...")

For each category, count the number of distinct times the behavior occurs in the chain of thought and return the result as integers. If none are present, use 0.)TPL";

inline constexpr std::string_view kIpaRolesPrompt =
    R"TPL(You are an expert in Bales' Interaction Process Analysis (IPA). Your task is to analyze the following chain-of-thought or group interaction transcript and count how many times behaviors corresponding to each of the 12 IPA categories appear in the transcript.

Transcript:

{chain_of_thought}

You must output a single valid JSON object with the exact schema below and nothing else.

{{

"IPA_counts": {{

"1_Shows_solidarity": <int>,

"2_Shows_tension_release": <int>,

"3_Agrees": <int>,

"4_Gives_suggestion": <int>,

"5_Gives_opinion": <int>,

"6_Gives_orientation": <int>,

"7_Asks_for_orientation": <int>,

"8_Asks_for_opinion": <int>,

"9_Asks_for_suggestion": <int>,

"10_Disagrees": <int>,

"11_Shows_tension": <int>,

"12_Shows_antagonism": <int>

}}

}}

Use the following definitions:

1. **Shows solidarity** --- raises other's status, gives help, reward

2. **Shows tension release** --- jokes, laughs, shows satisfaction

3. **Agrees** --- shows passive acceptance, understands, concurs, complies

4. **Gives suggestion** --- gives direction, implying autonomy (e.g., "should...", "need to...", "let us...")

5. **Gives opinion** --- gives evaluation, analysis, expresses feeling or wish

6. **Gives orientation** --- provides objective or verifiable information, repeats, clarifies, confirms

7. **Asks for orientation** --- requests information, repetition, or confirmation

8. **Asks for opinion** --- requests evaluation, analysis, or expression of feeling

9. **Asks for suggestion** --- requests possible ways of action or direction

10. **Disagrees** --- shows passive rejection, formality, or withholds help

11. **Shows tension** --- expresses uncertainty, asks for help, withdraws from the field

12. **Shows antagonism** --- deflates other's status, defends or asserts self

For each category, count the number of distinct times the behavior occurs in the transcript and return the result as integers. If none are present, use 0.)TPL";

inline constexpr std::string_view kProblemComplexityPrompt =
    R"TPL(You are an impartial evaluator. Your task is to rate the intrinsic difficulty of the problem

for a capable language model under zero-shot conditions.

Use the following scale:

1 = very easy

2 = easy

3 = somewhat easy

4 = moderate

5 = somewhat difficult

6 = difficult

7 = very difficult

Return ONLY a JSON object in the form:

{"difficulty": <integer from 1 to 7>}

Problem: )TPL";

inline constexpr std::string_view kCognitiveBehaviorsPrompt =
    R"TPL(Here is a chain-of-reasoning that a Language Model generated.

Model's reasoning:

{chain_of_thought}

Evaluate whether the chain-of-reasoning contains any of the following behaviors.

1) Answer Verification

We want to mark instances where the chain-of-reasoning explicitly checks the current result against the target solution.

Examples:

- "This sequence results in 1, which is not equal to 22"

- "Since 25 is not equal to 22"

If you find any answer-verification steps, please count them and provide the count as "verification_count". If the chain-of-reasoning does not contain any answer-verification steps, please provide a count of 0.

2) Backtracking

Evaluate whether the chain-of-reasoning contains any backtracking behavior, where the model realizes a path won't work and explicitly goes back to try a different approach. We want to mark instances where the chain-of-reasoning is abandoned and the model backtracks to a previous reasoning step.

Examples:

- "Let me try again"

- "We need to try a different sequence"

Count the number of distinct backtracking instances and provide the count as "backtracking_count". If the chain-of-reasoning does not contain any backtracking behavior, please provide a count of 0.

3) Subgoal Setting

Evaluate whether the chain-of-reasoning contains any explicit subgoal setting, where the model breaks down the problem into smaller, intermediate goals.

Example:

- "First, I'll try to get close to half the target, then..."

Count the number of distinct subgoals set and provide the count as "subgoal_count". If the chain-of-reasoning does not contain any subgoal setting, please provide a count of 0.

4) Backward-Chaining

Evaluate whether the chain-of-reasoning contains any backward-chaining behavior, where the model starts from the target solution and works backwards to the initial problems.

Examples:

- "Let's work backwards from the target. 24/2 = 12. So, 12*2 = 24."

- "Since the target is 22, and 22 + 3 = 25, ..."

Count the number of distinct backward-chaining instances and provide the count as "backward_count". If the chain-of-reasoning does not contain any backward-chaining behavior, please provide a count of 0.

Output ONLY a single valid JSON object with EXACTLY these keys:

{{

"verification_count": <int>,

"backtracking_count": <int>,

"subgoal_count": <int>,

"backward_count": <int>

}})TPL";

inline constexpr std::string_view kPersonaIdentificationPrompt =
    R"TPL(Your task is to analyze the following text to identify the number of distinct perspectives (agents or voices).

A perspective is defined as a distinct cognitive perspective or reasoning role within the text. Indicators of a perspective may include:

- Transitional markers (e.g., "however," "but," "alternatively," "wait," "let me check," "actually," "on the other hand")

- Shifts between cognitive roles (e.g., problem setup, calculation, verification, error correction, summarization)

- Changes in rhetorical purpose or approach

- Corrections or reconsiderations

- Movement between subproblems

- Domain knowledge

- Personality traits

For each distinct perspective, you will infer its personality by answering the 10 questions of the BFI-10 questionnaire as if you were that agent. You will also provide a concise profile of its domain expertise.

Your final output must be a single, valid JSON object and nothing else. Do not include any text or explanations before or after the JSON object.

**Text to Analyze:**

{chain_of_thought}

---

## **Analysis Instructions**

1. **Identify Perspectives:** Analyze the text to determine the number of distinct voices (n_perspectives). Apply the definition above consistently, treating each identifiable shift as a boundary between perspectives.

2. **Answer Questionnaire:** For each perspective, answer the 10 BFI-10 questions below from that perspective's point of view. You must use one of these five exact strings for each answer:

- "Disagree strongly"

- "Disagree a little"

- "Neither agree nor disagree"

- "Agree a little"

- "Agree strongly"

3. **Profile Expertise:** For each perspective, write a short, open-ended string describing its domain expertise and cognitive function.

### **BFI-10 Questionnaire**

Rate the extent to which you, as the identified perspective, agree or disagree with the following statements.

I see myself as someone who...

1. Is reserved.

2. Is generally trusting.

3. Tends to be lazy.

4. Is relaxed, handles stress well.

5. Has few artistic interests.

6. Is outgoing, sociable.

7. Tends to find fault with others.

8. Does a thorough job.

9. Gets nervous easily.

10. Has an active imagination.

---

## **Required JSON Output Format**

{{

"n_perspectives": N,

"personality": [

[

"Answer to Q1 for Perspective 1",

"Answer to Q2 for Perspective 1",

"...",

"Answer to Q10 for Perspective 1"

],

[

"Answer to Q1 for Perspective 2",

"Answer to Q2 for Perspective 2",

"...",

"Answer to Q10 for Perspective 2"

],

...

],

"domain_expertise": [

"Open-ended description for Perspective 1.",

"Open-ended description for Perspective 2.",

...

]

}})TPL";

inline constexpr std::string_view kPersonaSegmentationPrompt =
    R"TPL(Based on the perspectives you identified above, now segment the original text by turn-taking.

---

## Task

Go through the transcript **sequentially** and identify each turn:

1. The **exact** starting point of each turn (verbatim from the text)

2. Which perspective (by index, starting from 1) is it

**Notes:**

- The same perspective may appear in multiple non-consecutive segments

- Preserve the sequential order of the transcript

- Include moderator interjections, short time warnings (e.g., one minute), or brief transitions as separate segments

---

## Output Format

Return only a valid JSON object:

{

"segments": [

{

"perspective_id": 1,

"start_text": "<EXACT first 10 words copied verbatim from the text>"

},

{

"perspective_id": 2,

"start_text": "<EXACT first 10 words copied verbatim from the text>"

},

{

"perspective_id": 1,

"start_text": "<EXACT first 10 words copied verbatim from the text>"

},

...

]

}

**Critical:** The `start_text` must be copied **exactly** as it appears in the original text, character-for-character, including punctuation and capitalization. Do not paraphrase or summarize.)TPL";

inline constexpr std::string_view kConversationContextPrompt =
    R"TPL(Text:

{text}

Return a score from 0 to 100.

Scale definition:

0 = clearly a single-person thought

100 = clearly a conversation or a response to someone

Respond with exactly one JSON object in this format and nothing else:

{{"answer": 0-100}})TPL";

inline constexpr std::string_view kSaePersonalityPrompt =
    R"TPL(Analyze the AI model feature description (SAE feature) and score for PERSONALITY TRAIT relevance.

Feature description:

{feature}

Personality traits include behavioral and psychological patterns such as:

- Introversion/Extraversion patterns

- Agreeableness/Disagreeableness

- Conscientiousness

- Openness to experience

- Neuroticism/Emotional stability

- Confidence/Assertiveness

- Empathy/Social sensitivity

- Risk-taking vs. Cautious behavior

- Competitiveness

- Intellectual curiosity

Provide a score from 0-100:

- 0 = not related to personality traits at all

- 100 = completely related to personality traits

Return your response as a JSON object:

{{"answer": score}})TPL";

inline constexpr std::string_view kSaeExpertisePrompt =
    R"TPL(Analyze the AI model feature description (SAE feature) and score for DOMAIN EXPERTISE relevance.

Feature description:

{feature}

Domain expertise refers to specialized knowledge in specific professional or academic fields such as:

- Medical/Healthcare knowledge

- Legal expertise

- Scientific/Technical knowledge

- Financial/Economic expertise

- Academic disciplines

- Professional skills

- Specialized terminology and concepts

Provide a score from 0-100:

- 0 = not related to domain expertise at all

- 100 = completely related to domain expertise

Return your response as a JSON object:

{{"answer": score}})TPL";

enum class JudgeKind {
    ConversationalBehaviors,
    IpaRoles,
    CognitiveBehaviors,
    Complexity,
    PersonaIdentification,
    PersonaSegmentation,
    ConversationContext,
    SaePersonalityScore,
    SaeExpertiseScore,
};

inline constexpr JudgeKind kAllJudgeKinds[] = {
    JudgeKind::ConversationalBehaviors, JudgeKind::IpaRoles,
    JudgeKind::CognitiveBehaviors,      JudgeKind::Complexity,
    JudgeKind::PersonaIdentification,   JudgeKind::PersonaSegmentation,
    JudgeKind::ConversationContext,     JudgeKind::SaePersonalityScore,
    JudgeKind::SaeExpertiseScore,
};

inline std::string_view kind_name(JudgeKind kind) {
    switch (kind) {
        case JudgeKind::ConversationalBehaviors: return "conversational_behaviors";
        case JudgeKind::IpaRoles: return "ipa_roles";
        case JudgeKind::CognitiveBehaviors: return "cognitive_behaviors";
        case JudgeKind::Complexity: return "complexity";
        case JudgeKind::PersonaIdentification: return "persona_identification";
        case JudgeKind::PersonaSegmentation: return "persona_segmentation";
        case JudgeKind::ConversationContext: return "conversation_context";
        case JudgeKind::SaePersonalityScore: return "sae_personality_score";
        case JudgeKind::SaeExpertiseScore: return "sae_expertise_score";
    }
    throw std::invalid_argument("bad JudgeKind");
}

inline JudgeKind kind_from_name(std::string_view name) {
    for (JudgeKind k : kAllJudgeKinds)
        if (kind_name(k) == name) return k;
    throw std::invalid_argument("unknown judge kind: " + std::string(name));
}

namespace detail {

enum class SlotMode { Inline, Append, AppendParagraph };

struct TemplateInfo {
    std::string_view body;
    std::string_view slot;  // empty for Append modes
    SlotMode mode;
    bool format_escaped;  // body uses {{ }} for literal braces
};

inline TemplateInfo template_info(JudgeKind kind) {
    switch (kind) {
        case JudgeKind::ConversationalBehaviors:
            return {kConversationalBehaviorsPrompt, "{chain_of_thought}", SlotMode::Inline, true};
        case JudgeKind::IpaRoles:
            return {kIpaRolesPrompt, "{chain_of_thought}", SlotMode::Inline, true};
        case JudgeKind::CognitiveBehaviors:
            return {kCognitiveBehaviorsPrompt, "{chain_of_thought}", SlotMode::Inline, true};
        case JudgeKind::Complexity:
            return {kProblemComplexityPrompt, "", SlotMode::Append, false};
        case JudgeKind::PersonaIdentification:
            return {kPersonaIdentificationPrompt, "{chain_of_thought}", SlotMode::Inline, true};
        case JudgeKind::PersonaSegmentation:
            return {kPersonaSegmentationPrompt, "", SlotMode::AppendParagraph, false};
        case JudgeKind::ConversationContext:
            return {kConversationContextPrompt, "{text}", SlotMode::Inline, true};
        case JudgeKind::SaePersonalityScore:
            return {kSaePersonalityPrompt, "{feature}", SlotMode::Inline, true};
        case JudgeKind::SaeExpertiseScore:
            return {kSaeExpertisePrompt, "{feature}", SlotMode::Inline, true};
    }
    throw std::invalid_argument("bad JudgeKind");
}

}  // namespace detail

inline std::string_view prompt_template(JudgeKind kind) { return detail::template_info(kind).body; }

/// Fills the template's substitution slot with `payload` and resolves the
/// {{ }} brace escapes. Nothing else is rewritten, so rendering is
/// deterministic byte for byte.
inline std::string render_prompt(JudgeKind kind, std::string_view payload) {
    auto info = detail::template_info(kind);
    std::string out;
    out.reserve(info.body.size() + payload.size() + 2);
    const std::string_view body = info.body;
    for (std::size_t i = 0; i < body.size();) {
        if (info.format_escaped && i + 1 < body.size() &&
            (body[i] == '{' || body[i] == '}') && body[i + 1] == body[i]) {
            out.push_back(body[i]);
            i += 2;
            continue;
        }
        if (!info.slot.empty() && body[i] == '{' &&
            body.substr(i, info.slot.size()) == info.slot) {
            out += payload;
            i += info.slot.size();
            continue;
        }
        out.push_back(body[i]);
        ++i;
    }
    if (info.mode == detail::SlotMode::Append) {
        out += payload;
    } else if (info.mode == detail::SlotMode::AppendParagraph) {
        out += "\n\n";
        out += payload;
    }
    return out;
}

}  // namespace tracelab::judge
