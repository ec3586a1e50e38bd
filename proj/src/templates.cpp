#include "cotbert/templates.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "cotbert/error.hpp"

namespace cotbert {
namespace {

constexpr std::string_view kSentenceMarker = "[X]";
constexpr std::string_view kMaskMarker = "[MASK]";

struct Patterns {
  std::string_view anchor;
  std::string_view positive;
  std::string_view negative;
};

// The anchor/positive pair differs only in the connector after "sentence"
// ("of" vs ":"); the hard negative negates both clauses.
Patterns builtin_patterns(TemplateVariant variant) {
  switch (variant) {
    case TemplateVariant::full:
      return {R"(The sentence of "[X]" means [MASK], so it can be summarized as [MASK].)",
              R"(The sentence : "[X]" means [MASK], so it can be summarized as [MASK].)",
              R"(The sentence : "[X]" does not mean [MASK], so it cannot be summarized as [MASK].)"};
    case TemplateVariant::prefix_only:
      return {R"(The sentence of "[X]" means [MASK].)",
              R"(The sentence : "[X]" means [MASK].)",
              R"(The sentence : "[X]" does not mean [MASK].)"};
    case TemplateVariant::suffix_only:
      return {R"(The sentence of "[X]" can be summarized as [MASK].)",
              R"(The sentence : "[X]" can be summarized as [MASK].)",
              R"(The sentence : "[X]" cannot be summarized as [MASK].)"};
    case TemplateVariant::irrelevant_prefix:
      return {R"(Penguin is a flightless bird, and the sentence of "[X]" can be summarized as [MASK].)",
              R"(Penguin is a flightless bird, and the sentence : "[X]" can be summarized as [MASK].)",
              R"(Penguin is a flightless bird, and the sentence : "[X]" cannot be summarized as [MASK].)"};
    case TemplateVariant::static_prefix:
      return {R"(The sentence of "[X]" means something, so it can be summarized as [MASK].)",
              R"(The sentence : "[X]" means something, so it can be summarized as [MASK].)",
              R"(The sentence : "[X]" does not mean something, so it cannot be summarized as [MASK].)"};
    case TemplateVariant::reversed:
      return {R"(The sentence of "[X]" can be summarized as [MASK], so it means [MASK].)",
              R"(The sentence : "[X]" can be summarized as [MASK], so it means [MASK].)",
              R"(The sentence : "[X]" cannot be summarized as [MASK], so it does not mean [MASK].)"};
  }
  fail(ErrorKind::config, "unknown template variant");
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

TemplateSpec::TemplateSpec(std::string name, std::vector<Segment> segments)
    : name_(std::move(name)), segments_(std::move(segments)) {
  const auto sentences = std::count_if(segments_.begin(), segments_.end(), [](const Segment& s) {
    return std::holds_alternative<SentenceSlot>(s);
  });
  require(sentences == 1, ErrorKind::config,
          "template '" + name_ + "' must contain exactly one sentence slot, found " + std::to_string(sentences));
  require(mask_count() >= 1, ErrorKind::config, "template '" + name_ + "' has no mask slot");
}

TemplateSpec TemplateSpec::parse(std::string name, std::string_view pattern) {
  std::vector<Segment> segments;
  std::string literal;
  auto flush = [&] {
    if (!literal.empty()) segments.emplace_back(Literal{std::move(literal)});
    literal.clear();
  };
  std::size_t i = 0;
  while (i < pattern.size()) {
    if (pattern.substr(i).starts_with(kSentenceMarker)) {
      flush();
      segments.emplace_back(SentenceSlot{});
      i += kSentenceMarker.size();
    } else if (pattern.substr(i).starts_with(kMaskMarker)) {
      flush();
      segments.emplace_back(MaskSlot{});
      i += kMaskMarker.size();
    } else {
      literal.push_back(pattern[i++]);
    }
  }
  flush();
  return TemplateSpec(std::move(name), std::move(segments));
}

std::size_t TemplateSpec::mask_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(segments_.begin(), segments_.end(), [](const Segment& s) {
    return std::holds_alternative<MaskSlot>(s);
  }));
}

std::string TemplateSpec::pattern() const {
  std::string out;
  for (const auto& seg : segments_) {
    if (const auto* lit = std::get_if<Literal>(&seg)) out += lit->text;
    else if (std::holds_alternative<SentenceSlot>(seg)) out += kSentenceMarker;
    else out += kMaskMarker;
  }
  return out;
}

std::string_view to_string(TemplateVariant v) {
  switch (v) {
    case TemplateVariant::full: return "full";
    case TemplateVariant::prefix_only: return "prefix_only";
    case TemplateVariant::suffix_only: return "suffix_only";
    case TemplateVariant::irrelevant_prefix: return "irrelevant_prefix";
    case TemplateVariant::static_prefix: return "static_prefix";
    case TemplateVariant::reversed: return "reversed";
  }
  return "unknown";
}

TemplateVariant parse_template_variant(std::string_view name) {
  for (auto v : kAllTemplateVariants) {
    if (to_string(v) == name) return v;
  }
  fail(ErrorKind::config, "unknown template variant '" + std::string(name) + "'");
}

TemplateSet builtin_template_set(TemplateVariant variant) {
  const Patterns p = builtin_patterns(variant);
  const std::string prefix(to_string(variant));
  return TemplateSet{TemplateSpec::parse(prefix + ".anchor", p.anchor),
                     TemplateSpec::parse(prefix + ".positive", p.positive),
                     TemplateSpec::parse(prefix + ".negative", p.negative), variant};
}

std::string render(const TemplateSpec& tmpl, std::string_view sentence, std::string_view mask_token) {
  require(!is_blank(sentence), ErrorKind::input, "cannot render template '" + tmpl.name() + "' with an empty sentence");
  std::string out;
  for (const auto& seg : tmpl.segments()) {
    if (const auto* lit = std::get_if<Literal>(&seg)) out += lit->text;
    else if (std::holds_alternative<SentenceSlot>(seg)) out += sentence;
    else out += mask_token;
  }
  return out;
}

nlohmann::json to_json(const TemplateSpec& tmpl) {
  nlohmann::json segments = nlohmann::json::array();
  for (const auto& seg : tmpl.segments()) {
    if (const auto* lit = std::get_if<Literal>(&seg)) segments.push_back({{"kind", "literal"}, {"text", lit->text}});
    else if (std::holds_alternative<SentenceSlot>(seg)) segments.push_back({{"kind", "sentence"}});
    else segments.push_back({{"kind", "mask"}});
  }
  return {{"name", tmpl.name()}, {"pattern", tmpl.pattern()}, {"segments", segments}};
}

nlohmann::json to_json(const TemplateSet& set) {
  return {{"variant", to_string(set.variant)},
          {"anchor", to_json(set.anchor)},
          {"positive", to_json(set.positive)},
          {"negative", to_json(set.negative)}};
}

TemplateSpec template_spec_from_json(const nlohmann::json& j) {
  require(j.is_object() && j.contains("segments") && j.at("segments").is_array(), ErrorKind::config,
          "template entry needs a 'segments' array");
  std::vector<Segment> segments;
  for (const auto& s : j.at("segments")) {
    require(s.is_object() && s.contains("kind") && s.at("kind").is_string(), ErrorKind::config,
            "template segment needs a string 'kind'");
    const auto kind = s.at("kind").get<std::string>();
    if (kind == "literal") {
      require(s.contains("text") && s.at("text").is_string(), ErrorKind::config, "literal segment needs 'text'");
      segments.emplace_back(Literal{s.at("text").get<std::string>()});
    } else if (kind == "sentence") {
      segments.emplace_back(SentenceSlot{});
    } else if (kind == "mask") {
      segments.emplace_back(MaskSlot{});
    } else {
      fail(ErrorKind::config, "unknown segment kind '" + kind + "'");
    }
  }
  const std::string name = j.contains("name") ? j.at("name").get<std::string>() : std::string("custom");
  return TemplateSpec(name, std::move(segments));
}

TemplateSet template_set_from_json(const nlohmann::json& j) {
  require(j.is_object(), ErrorKind::config, "template set must be a JSON object");
  for (const char* key : {"anchor", "positive", "negative"}) {
    require(j.contains(key), ErrorKind::config, std::string("template set is missing '") + key + "'");
  }
  TemplateSet set{template_spec_from_json(j.at("anchor")), template_spec_from_json(j.at("positive")),
                  template_spec_from_json(j.at("negative")), TemplateVariant::full};
  if (j.contains("variant")) set.variant = parse_template_variant(j.at("variant").get<std::string>());
  return set;
}

TemplateSet load_template_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::io, "cannot open template file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, "template file " + path.string() + ": " + e.what());
  }
  return template_set_from_json(j);
}

}  // namespace cotbert
