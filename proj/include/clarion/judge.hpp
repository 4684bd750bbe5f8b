#pragma once

#include <string>

#include "clarion/conversation.hpp"

namespace clarion {

enum class RefineStage { Initial, Partial, Final };

char const *to_string(RefineStage stage);

/// Judge/refiner used while forging conversations. Implementations must
/// tolerate concurrent calls.
class JudgeClient {
  public:
    virtual ~JudgeClient() = default;
    /// Do the two question-answer pairs carry similar information?
    virtual bool is_duplicate(Turn const &a, Turn const &b) = 0;
    /// Does the answer already reveal the hidden facet?
    virtual bool reveals_intent(Facet const &facet, Turn const &turn) = 0;
    /// Rewritten answer for `turn` under the given refinement stage.
    virtual std::string refine(RefineStage stage, Facet const &facet, Turn const &turn) = 0;
};

/// Deterministic judge for offline runs and tests: duplicate = identical
/// normalized question, reveal = facet description contained in the answer
/// (case-folded), refine = answer prefixed with "[I] ", "[P] " or "[F] ".
class StubJudge final : public JudgeClient {
  public:
    bool is_duplicate(Turn const &a, Turn const &b) override;
    bool reveals_intent(Facet const &facet, Turn const &turn) override;
    std::string refine(RefineStage stage, Facet const &facet, Turn const &turn) override;
};

class ChatClient;

/// Judge backed by a chat endpoint, using the dataset-creation prompts.
class RemoteJudge final : public JudgeClient {
  public:
    explicit RemoteJudge(ChatClient &client) : client_(client) {}
    bool is_duplicate(Turn const &a, Turn const &b) override;
    bool reveals_intent(Facet const &facet, Turn const &turn) override;
    std::string refine(RefineStage stage, Facet const &facet, Turn const &turn) override;

  private:
    ChatClient &client_;
};

std::string duplicate_prompt(Turn const &a, Turn const &b);
std::string reveal_prompt(Facet const &facet, Turn const &turn);
std::string refine_prompt(RefineStage stage, Facet const &facet, Turn const &turn);

} // namespace clarion
