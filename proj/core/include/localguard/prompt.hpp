#pragma once

#include <string>
#include <string_view>

namespace localguard {

/// Which optional prompt blocks to include. The task block (criteria
/// definitions) and the closing instruction are always present.
struct PromptToggles {
  bool context = true;
  bool fewshot = true;
  bool cot = true;

  static PromptToggles full() { return {}; }
  static PromptToggles none() { return {false, false, false}; }
};

/// Labelling prompt built from four blocks, emitted in the order
/// context, task, chain-of-thought, few-shot, followed by the closing line
/// that carries the comment under evaluation.
class PromptTemplate {
 public:
  static constexpr std::string_view kPlaceholder = "<insert statement here>";

  /// The default Singlish labelling prompt.
  static const PromptTemplate& standard();

  PromptTemplate(std::string context_block, std::string task_block, std::string cot_block,
                 std::string fewshot_block, std::string closing);

  /// Enabled blocks each followed by a blank line, then the closing line with
  /// the placeholder replaced by `text`. Throws std::invalid_argument for an
  /// empty text.
  std::string render(std::string_view text, PromptToggles toggles = {}) const;

  /// Same layout with the placeholder left in place; this is what the golden
  /// files under prompts/ contain.
  std::string render_template(PromptToggles toggles = {}) const;

  const std::string& context_block() const { return context_; }
  const std::string& task_block() const { return task_; }
  const std::string& cot_block() const { return cot_; }
  const std::string& fewshot_block() const { return fewshot_; }
  const std::string& closing() const { return closing_; }

 private:
  std::string context_;
  std::string task_;
  std::string cot_;
  std::string fewshot_;
  std::string closing_;  // contains kPlaceholder exactly once
};

/// Convenience wrapper over PromptTemplate::standard().render().
std::string render_prompt(std::string_view text, PromptToggles toggles = {});

}  // namespace localguard
