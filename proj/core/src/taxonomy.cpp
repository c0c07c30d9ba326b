#include "localguard/taxonomy.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <stdexcept>

#include "localguard/util.hpp"

namespace localguard {
namespace {

constexpr std::array<std::string_view, kNumCategories> kNames = {
    "hateful", "harassment", "public_harm", "self_harm", "sexual", "toxic", "violent",
};

constexpr std::array<std::string_view, kNumCategories> kDefinitions = {
    "Content that expresses, incites, or promotes hate based on race, gender, ethnicity, "
    "religion, nationality, sexual orientation, disability status, or caste. Hateful content "
    "aimed at non-protected groups (e.g., chess players) is harrassment. Hateful content that "
    "also includes violence or serious harm towards the targeted group based on race, gender, "
    "ethnicity, religion, nationality, sexual orientation, disability status, or caste.",

    "Content that expresses, incites, or promotes harassing language towards any "
    "target/individual. Without mention of violence or harm, content that results in "
    "prolonged mental or emotional suffering for the target, enduring for more than an hour. "
    "Any harassment content that includes violence or serious harm towards any "
    "target/individual.",

    "Content that promotes, facilitates, or encourages harmful public acts, vice or organized "
    "crime.",

    "Content that promotes, encourages, or depicts acts of self-harm, such as suicide, cutting, "
    "and eating disorders. Content that encourages performing acts of self-harm, such as "
    "suicide, cutting, and eating disorders, or that gives instructions or advice on how to "
    "commit such acts.",

    "Content meant to arouse sexual excitement, such as the description of sexual activity, or "
    "that promotes sexual services (excluding sex education and wellness). Sexual content that "
    "includes an individual who is under 18 years old.",

    "Content that is rude, disrespectful, or profane, including the use of slurs. A very "
    "hateful, aggressive, disrespectful comment or otherwise very likely to make a user leave a "
    "discussion or give up on sharing their perspective.",

    "Content that depicts death, violence, or physical injury.",
};

constexpr std::string_view kBuiltinMapping = R"({
  "version": 1,
  "providers": {
    "openai_moderation": {
      "hate": ["hateful"],
      "harassment": ["harassment"],
      "self_harm": ["self_harm"],
      "sexual": ["sexual"],
      "violence": ["violent"]
    },
    "perspective": {
      "identity_attack": ["hateful"],
      "insult": ["harassment"],
      "toxicity": ["toxic"],
      "profanity": ["toxic"],
      "threat": ["violent"]
    },
    "llamaguard": {
      "violence_and_hate": ["hateful", "violent"],
      "crime": ["public_harm"],
      "guns_and_illegal_weapons": ["public_harm"],
      "regulated_or_controlled_substances": ["public_harm"],
      "criminal_planning": ["public_harm"],
      "self_harm": ["self_harm"],
      "sexual": ["sexual"]
    }
  }
}
)";

}  // namespace

std::string_view category_name(Category c) { return kNames.at(index_of(c)); }

std::string_view category_definition(Category c) { return kDefinitions.at(index_of(c)); }

std::optional<Category> parse_category(std::string_view name) {
  std::string key = fold_case(trim(name));
  std::replace(key.begin(), key.end(), '-', '_');
  std::replace(key.begin(), key.end(), ' ', '_');
  for (size_t i = 0; i < kNumCategories; ++i) {
    if (key == kNames[i]) return static_cast<Category>(i);
  }
  return std::nullopt;
}

std::string_view tri_state_name(TriState s) {
  switch (s) {
    case TriState::kNo:
      return "no";
    case TriState::kYes:
      return "yes";
    case TriState::kUndetermined:
      return "undetermined";
  }
  return "undetermined";
}

std::optional<TriState> parse_tri_state(std::string_view name) {
  const std::string key = fold_case(name);
  if (key == "no") return TriState::kNo;
  if (key == "yes") return TriState::kYes;
  if (key == "undetermined") return TriState::kUndetermined;
  return std::nullopt;
}

TriState derive_binary(const std::array<TriState, kNumCategories>& labels) {
  bool any_undetermined = false;
  for (TriState s : labels) {
    if (s == TriState::kYes) return TriState::kYes;
    if (s == TriState::kUndetermined) any_undetermined = true;
  }
  return any_undetermined ? TriState::kUndetermined : TriState::kNo;
}

bool LabelVector::consistent() const {
  const TriState derived = derive_binary(categories);
  if (derived == TriState::kUndetermined) return true;
  return unsafe == derived;
}

std::string Target::name() const {
  return category ? std::string(category_name(*category)) : std::string("unsafe");
}

std::optional<Target> Target::parse(std::string_view name) {
  const std::string key = fold_case(trim(name));
  if (key == "unsafe" || key == "binary") return Target::binary();
  if (auto c = parse_category(key)) return Target::of(*c);
  return std::nullopt;
}

std::array<Target, kNumCategories + 1> all_targets() {
  std::array<Target, kNumCategories + 1> out{};
  out[0] = Target::binary();
  for (size_t i = 0; i < kNumCategories; ++i) out[i + 1] = Target::of(kAllCategories[i]);
  return out;
}

std::string_view provider_name(Provider p) {
  switch (p) {
    case Provider::kOpenAiModeration:
      return "openai_moderation";
    case Provider::kPerspective:
      return "perspective";
    case Provider::kLlamaGuard:
      return "llamaguard";
  }
  return "unknown";
}

std::optional<Provider> parse_provider(std::string_view name) {
  const std::string key = fold_case(trim(name));
  if (key == "openai_moderation") return Provider::kOpenAiModeration;
  if (key == "perspective") return Provider::kPerspective;
  if (key == "llamaguard") return Provider::kLlamaGuard;
  return std::nullopt;
}

std::string normalize_provider_category(std::string_view name) {
  std::string key = fold_case(trim(name));
  for (char& c : key) {
    if (c == ' ' || c == '-' || c == '/') c = '_';
  }
  return key;
}

ProviderMapping ProviderMapping::from_json(std::string_view json_text) {
  const auto doc = nlohmann::json::parse(json_text);
  ProviderMapping mapping;
  mapping.version_ = doc.at("version").get<int>();
  for (const auto& [provider_key, cats] : doc.at("providers").items()) {
    const auto provider = parse_provider(provider_key);
    if (!provider) throw std::runtime_error("provider mapping: unknown provider " + provider_key);
    auto& table = mapping.entries_[*provider];
    for (const auto& [name, targets] : cats.items()) {
      std::vector<Category> mapped;
      for (const auto& t : targets) {
        const auto c = parse_category(t.get<std::string>());
        if (!c) {
          throw std::runtime_error("provider mapping: unknown category " + t.get<std::string>());
        }
        mapped.push_back(*c);
      }
      table[normalize_provider_category(name)] = std::move(mapped);
    }
  }
  return mapping;
}

ProviderMapping ProviderMapping::load(const std::string& path) { return from_json(read_file(path)); }

const ProviderMapping& ProviderMapping::builtin() {
  static const ProviderMapping mapping = from_json(kBuiltinMapping);
  return mapping;
}

std::string_view ProviderMapping::builtin_json() { return kBuiltinMapping; }

std::vector<Category> ProviderMapping::map_all(Provider provider, std::string_view name) const {
  const auto table = entries_.find(provider);
  if (table == entries_.end()) return {};
  const auto it = table->second.find(normalize_provider_category(name));
  if (it == table->second.end()) return {};
  return it->second;
}

std::optional<Category> ProviderMapping::map(Provider provider, std::string_view name) const {
  const auto all = map_all(provider, name);
  if (all.empty()) return std::nullopt;
  return all.front();
}

std::optional<Category> ProviderMapping::map(std::string_view provider, std::string_view name) const {
  const auto p = parse_provider(provider);
  if (!p) throw std::invalid_argument("unknown provider: " + std::string(provider));
  return map(*p, name);
}

std::vector<std::string> ProviderMapping::sources_for(Provider provider, Category c) const {
  std::vector<std::string> out;
  const auto table = entries_.find(provider);
  if (table == entries_.end()) return out;
  for (const auto& [name, cats] : table->second) {
    if (std::find(cats.begin(), cats.end(), c) != cats.end()) out.push_back(name);
  }
  return out;
}

std::vector<std::string> ProviderMapping::provider_categories(Provider provider) const {
  std::vector<std::string> out;
  const auto table = entries_.find(provider);
  if (table == entries_.end()) return out;
  for (const auto& [name, cats] : table->second) out.push_back(name);
  return out;
}

}  // namespace localguard
