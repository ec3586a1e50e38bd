#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace cotbert {

struct Literal {
  std::string text;
  bool operator==(const Literal&) const = default;
};
struct SentenceSlot {
  bool operator==(const SentenceSlot&) const = default;
};
struct MaskSlot {
  bool operator==(const MaskSlot&) const = default;
};

using Segment = std::variant<Literal, SentenceSlot, MaskSlot>;

/// One prompt template: literal text interleaved with exactly one sentence
/// slot and at least one mask slot.
class TemplateSpec {
 public:
  TemplateSpec() = default;
  /// Throws ErrorKind::config when the segment list breaks the slot invariants.
  TemplateSpec(std::string name, std::vector<Segment> segments);

  /// Parses the `[X]` / `[MASK]` shorthand, e.g. `The sentence of "[X]" means [MASK].`
  static TemplateSpec parse(std::string name, std::string_view pattern);

  const std::string& name() const noexcept { return name_; }
  const std::vector<Segment>& segments() const noexcept { return segments_; }
  std::size_t mask_count() const noexcept;

  /// Back to the `[X]` / `[MASK]` shorthand.
  std::string pattern() const;

  bool operator==(const TemplateSpec&) const = default;

 private:
  std::string name_;
  std::vector<Segment> segments_;
};

enum class TemplateVariant { full, prefix_only, suffix_only, irrelevant_prefix, static_prefix, reversed };

inline constexpr std::array<TemplateVariant, 6> kAllTemplateVariants = {
    TemplateVariant::full,          TemplateVariant::prefix_only,   TemplateVariant::suffix_only,
    TemplateVariant::irrelevant_prefix, TemplateVariant::static_prefix, TemplateVariant::reversed};

std::string_view to_string(TemplateVariant v);
/// Throws ErrorKind::config on an unknown name.
TemplateVariant parse_template_variant(std::string_view name);

struct TemplateSet {
  TemplateSpec anchor;
  TemplateSpec positive;
  TemplateSpec negative;
  TemplateVariant variant = TemplateVariant::full;

  bool operator==(const TemplateSet&) const = default;
};

TemplateSet builtin_template_set(TemplateVariant variant);

/// Substitutes the sentence verbatim and each mask slot with `mask_token`.
/// Throws ErrorKind::input when the sentence is blank.
std::string render(const TemplateSpec& tmpl, std::string_view sentence, std::string_view mask_token);

// Structured config form:
//   {"variant": "full",
//    "anchor": {"name": "...", "segments": [{"kind": "literal", "text": "..."},
//                                           {"kind": "sentence"}, {"kind": "mask"}]},
//    "positive": {...}, "negative": {...}}
nlohmann::json to_json(const TemplateSpec& tmpl);
nlohmann::json to_json(const TemplateSet& set);
TemplateSpec template_spec_from_json(const nlohmann::json& j);
TemplateSet template_set_from_json(const nlohmann::json& j);
TemplateSet load_template_set(const std::filesystem::path& path);

}  // namespace cotbert
