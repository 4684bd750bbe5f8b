#include "clarion/judge.hpp"

#include <algorithm>

#include "clarion/remote.hpp"
#include "clarion/text.hpp"

namespace clarion {

namespace {

std::string normalized_words(std::string_view s)
{
    std::string out;
    for (auto const &t : text::tokenize(text::normalize(s))) {
        if (!out.empty()) {
            out += ' ';
        }
        out += t;
    }
    return out;
}

std::string trim(std::string s)
{
    auto const first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
        return {};
    }
    auto const last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

constexpr char const *kInitialExamples =
    "Examples:\n"
    "Example 1:\n"
    "Facet: How to fix a car engine.\n"
    "Question: Do you want to buy a car? Answer: No, I am not looking to buy a car.\n"
    "Example 2:\n"
    "Facet: Find coffee shops near me.\n"
    "Question: Would you like to make a cup of coffee? Answer: No, thank you, I want to buy one.\n";

constexpr char const *kPartialExamples =
    "Examples:\n"
    "Example 1:\n"
    "Facet: The user wants to buy a red car.\n"
    "Question: Are you looking for a specific color? Answer: I am considering a color, but I haven't "
    "decided fully yet.\n"
    "Example 2:\n"
    "Facet: I'm looking for the car-part.com website.\n"
    "Question: Do you want to sell used car parts? Answer: For now, I am mainly focused on finding a "
    "website.\n";

constexpr char const *kFinalExamples =
    "Examples:\n"
    "Example 1:\n"
    "Facet: The user wants to buy a red car.\n"
    "Question: Are you looking for a specific color? Answer: Yes, I am looking for a red car to buy.\n"
    "Example 2:\n"
    "Facet: I'm looking for the car-part.com website.\n"
    "Question: Do you want to sell used car parts? Answer: No, I am just looking for the car-part.com "
    "website.\n";

} // namespace

char const *to_string(RefineStage stage)
{
    switch (stage) {
    case RefineStage::Initial:
        return "initial";
    case RefineStage::Partial:
        return "partial";
    case RefineStage::Final:
        return "final";
    }
    return "unknown";
}

bool StubJudge::is_duplicate(Turn const &a, Turn const &b)
{
    return normalized_words(a.question) == normalized_words(b.question);
}

bool StubJudge::reveals_intent(Facet const &facet, Turn const &turn)
{
    auto const needle = text::to_lower(text::normalize(facet.description));
    auto const hay = text::to_lower(text::normalize(turn.answer));
    return !needle.empty() && hay.find(needle) != std::string::npos;
}

std::string StubJudge::refine(RefineStage stage, Facet const &, Turn const &turn)
{
    switch (stage) {
    case RefineStage::Initial:
        return "[I] " + turn.answer;
    case RefineStage::Partial:
        return "[P] " + turn.answer;
    case RefineStage::Final:
        return "[F] " + turn.answer;
    }
    return turn.answer;
}

std::string duplicate_prompt(Turn const &a, Turn const &b)
{
    return "I will provide you with two pairs of questions and answers. Determine if these two "
           "question-answer pairs contain similar information. Output \"yes\" or \"no\" and explain why.\n"
           "Question 1: "
           + a.question + " Answer 1: " + a.answer + ", Question 2: " + b.question
           + " Answer 2: " + b.answer;
}

std::string reveal_prompt(Facet const &facet, Turn const &turn)
{
    return "I will provide you a pair of question-answer and a facet (user's hidden intention). "
           "Judge whether the answer aligns with the facet intention. If yes, generate: "
           "\"intention reached\".\n"
           "Facet intention: "
           + facet.description + ", Question: " + turn.question + ", Answer: " + turn.answer;
}

std::string refine_prompt(RefineStage stage, Facet const &facet, Turn const &turn)
{
    // The trailing {examples} slot of each template is left empty: the
    // two-shot examples already lead the prompt.
    switch (stage) {
    case RefineStage::Initial:
        return std::string(kInitialExamples)
               + "\nI provided you with some examples above. Now, modify the following answer so that "
                 "it is connected to the question and doesn't reveal the hidden intention of the facet "
                 "like in the examples. Ensure your answer doesn't violate the facet.\n\n"
                 "Prompt:\n"
                 "Imagine you are a user answering an agent question. Modify this answer without "
                 "revealing any hidden intention of the facet and without violating the facet.\n\n"
                 "Facet: "
               + facet.description + ", Question 1: " + turn.question + ", Answer 1: " + turn.answer;
    case RefineStage::Partial:
        return std::string(kPartialExamples)
               + "\nI provided you with some examples above. Now, modify the following answer to "
                 "reveal only a partial abstract of the hidden intention (facet) and hint at the "
                 "user's interests without revealing the full intention\n\n"
                 "Prompt:\n"
                 "Imagine you are a user answering an agent question. Modify the following answer to "
                 "reveal only a partial abstract of the hidden intention (facet). Do NOT reveal the "
                 "full hidden intention.\n\n"
                 "Facet: "
               + facet.description + " Question 3: " + turn.question + " Answer 3: " + turn.answer;
    case RefineStage::Final:
        return std::string(kFinalExamples)
               + "\nI provided you with some examples above. Now, modify the following answer to "
                 "fully reveal the hidden intention in a clear and direct manner, and ensure that the "
                 "answer reflects the facet without ambiguity.\n\n"
                 "Prompt:\n"
                 "Imagine you are a user answering an agent question. Modify the following answer to "
                 "fully reveal the hidden facet. Ensure that the answer clearly reflects the facet.\n\n"
                 "Facet: "
               + facet.description + ", Question 3: " + turn.question + ", Answer 3: " + turn.answer;
    }
    return {};
}

bool RemoteJudge::is_duplicate(Turn const &a, Turn const &b)
{
    auto const reply = text::to_lower(trim(client_.complete(duplicate_prompt(a, b))));
    return reply.rfind("yes", 0) == 0 || reply.rfind("\"yes\"", 0) == 0;
}

bool RemoteJudge::reveals_intent(Facet const &facet, Turn const &turn)
{
    auto const reply = text::to_lower(client_.complete(reveal_prompt(facet, turn)));
    return reply.find("intention reached") != std::string::npos;
}

std::string RemoteJudge::refine(RefineStage stage, Facet const &facet, Turn const &turn)
{
    auto reply = trim(client_.complete(refine_prompt(stage, facet, turn)));
    return reply.empty() ? turn.answer : reply;
}

} // namespace clarion
