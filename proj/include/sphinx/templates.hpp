#pragma once

#include <string_view>

// Stored prompt templates. These are the canonical template bytes: the golden
// files under tests/golden/ pin their rendered form, so any edit here must be
// deliberate. Placeholders use {name} syntax; the selective-translation
// template uses {language}, the judge template {LANGUAGE_NAME} / {INSTRUCTION}
// / {COMPLETION A} / {COMPLETION B}. Known quirks of the source material
// ("ths newly translated", "If the both answers", the doubled "Option1:"
// label) are kept as-is.

namespace sphinx::templates {

/// Selective translated augmentation prompt. The record to convert is
/// appended as a JSON object on the line after the final sentence.
inline constexpr std::string_view kSelectiveTranslation =
    R"TPL(Please carefully convert a conversation between a human and an AI assistant from English to {language}.
The dialogue will be presented in JSON format, where 'system' denotes system instructions, 'human' indicates user queries, and 'assistant' refers to the AI's response.
You should approach this task as if the 'human' original language is {language}.
Translate the 'system' instructions fully into {language}. For the 'human' input, however, carefully discern which segments require translation into {language}, while leaving other parts in their original form.

For instance:
1. If the human contains a mix of languages, only translate the instruction part.
2. If the task is about language correction do not translate the target passage.

For the 'assistant' part, generate the 'assistant' response as you were prompted with ths newly translated system and assistant instructions.
The outcome should retain the JSON format. Your response should solely contain the JSON.
Do not translate the JSON keys.
)TPL";

/// Pairwise preference (win-rate) judge prompt.
inline constexpr std::string_view kPreferenceJudge =
    R"TPL(System: You are a helpful following assistant whose goal is to select the preferred (least wrong) output for a given instruction in {LANGUAGE_NAME}.
User: Which of the following answers is the best one for given instruction in {LANGUAGE_NAME}.
A good answer should follow these rules:
1) It should be in {LANGUAGE_NAME}.
2) It should answer the request in the instruction.
3) It should be factually and semantically comprehensible.
4) It should be grammatically correct and fluent.

Instruction: {INSTRUCTION}
Answer (A): {COMPLETION A}
Answer (B): {COMPLETION B}

FIRST provide a one-sentence comparison of the two answers, explaining which you prefer and why. SECOND, on a new line, state only 'Answer (A)' or 'Answer (B)' to indicate your choice. If the both answers are equally good or bad, state 'TIE'. Your response should use the format:
Comparison: <one-sentence comparison and explanation>
Preferred: <'Answer (A)' or 'Answer (B)' or 'TIE'>)TPL";

// --- Evaluation task templates ---

inline constexpr std::string_view kXquad =
    R"TPL(The task is to solve reading comprehension problems. You will be provided questions on a set of passages and you will need to provide the answer as it appears in the passage. The answer should be in the same language as the question and the passage.
Context:
{context}
Question:
{question}
Referring to the passage above, the correct answer to the given question is {answer})TPL";

inline constexpr std::string_view kXstorycloze =
    R"TPL({input_sentence_1} {input_sentence_2}
{input_sentence_3} {input_sentence_4}
What is a possible continuation for the story given the following options?
Option1: {sentence_quiz1}
Option1: {sentence_quiz2})TPL";

inline constexpr std::string_view kXwinograd =
    R"TPL(Select the correct option out of option1 and option2 that will fill in the _ in the below sentence:
{sentence}
Choices:
-option1: {option1}
-option2: {option2})TPL";

/// The trailing conditional picks " a cause" or " an effect" from the
/// `question` field at render time.
inline constexpr std::string_view kXcopa =
    R"TPL(The task is to perform open-domain commonsense causal reasoning. You will be provided a premise and two alternatives, where the task is to select the alternative that more plausibly has a causal relation with the premise. Answer as concisely as possible in the same format as the examples below:
Given this premise:
{premise}
What's the best option?
-choice1 : {choice1}
-choice2 : {choice2}
We are looking for{% if question == "cause" %} a cause {% else %} an effect {% endif %})TPL";

inline constexpr std::string_view kBelebele =
    R"TPL(The task is to perform reading comprehension task. Given the following passage, query, and answer choices, output only the letter corresponding to the correct answer. Do not give me any explanations to your answer. Just a single letter corresponding to the correct answer will suffice.
Passage: {flores_passage}
Query: {question}
Choices:
A: {mc_answer1}
B: {mc_answer2}
C: {mc_answer3}
D: {mc_answer4})TPL";

inline constexpr std::string_view kTranslation =
    R"TPL(Translate the following sentence pairs:
{Source Language}: {Source Phrase} {Target Language}: {Target Phrase})TPL";

}  // namespace sphinx::templates
