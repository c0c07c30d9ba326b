#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace localguard {

/// The seven safety-risk categories. Order is stable and used for indexing
/// every per-category array in the project.
enum class Category : uint8_t {
  kHateful = 0,
  kHarassment,
  kPublicHarm,
  kSelfHarm,
  kSexual,
  kToxic,
  kViolent,
};

inline constexpr size_t kNumCategories = 7;

inline constexpr std::array<Category, kNumCategories> kAllCategories = {
    Category::kHateful,  Category::kHarassment, Category::kPublicHarm, Category::kSelfHarm,
    Category::kSexual,   Category::kToxic,      Category::kViolent,
};

inline constexpr size_t index_of(Category c) { return static_cast<size_t>(c); }

/// Machine name, e.g. "public_harm".
std::string_view category_name(Category c);

/// Full-text definition used in labelling instructions.
std::string_view category_definition(Category c);

/// Parses a machine name ("self_harm"). Also accepts "self-harm" and
/// "public harm" spellings.
std::optional<Category> parse_category(std::string_view name);

enum class TriState : uint8_t { kNo = 0, kYes = 1, kUndetermined = 2 };

std::string_view tri_state_name(TriState s);
std::optional<TriState> parse_tri_state(std::string_view name);

/// Tri-state OR: yes dominates, then undetermined, then no.
TriState derive_binary(const std::array<TriState, kNumCategories>& labels);

/// Seven category states plus the derived `unsafe` flag.
struct LabelVector {
  std::array<TriState, kNumCategories> categories{};
  TriState unsafe = TriState::kNo;

  TriState at(Category c) const { return categories[index_of(c)]; }

  /// True when `unsafe` is consistent with the categories: any yes forces
  /// yes, all no forces no.
  bool consistent() const;
};

/// A classification target: the binary unsafe label or one category.
struct Target {
  std::optional<Category> category;

  static Target binary() { return {}; }
  static Target of(Category c) { return Target{c}; }

  bool is_binary() const { return !category.has_value(); }
  /// "unsafe" for the binary target, else the category name.
  std::string name() const;
  /// Parses "unsafe" / "binary" or a category name.
  static std::optional<Target> parse(std::string_view name);

  friend bool operator==(const Target&, const Target&) = default;
};

/// Binary target followed by the seven categories in canonical order.
std::array<Target, kNumCategories + 1> all_targets();

enum class Provider : uint8_t { kOpenAiModeration, kPerspective, kLlamaGuard };

std::string_view provider_name(Provider p);
std::optional<Provider> parse_provider(std::string_view name);

/// Maps external moderation providers' category names onto ours.
///
/// Provider category names are normalised before lookup: lowercased, with
/// spaces and hyphens turned into underscores ("Self-harm" -> "self_harm").
/// A provider category may span several of ours (LlamaGuard's "violence and
/// hate" maps to both hateful and violent).
class ProviderMapping {
 public:
  /// Parses the JSON mapping document. Throws std::runtime_error on schema
  /// errors.
  static ProviderMapping from_json(std::string_view json_text);
  static ProviderMapping load(const std::string& path);
  /// Mapping compiled into the library; identical to data/provider_mapping.json.
  static const ProviderMapping& builtin();
  static std::string_view builtin_json();

  int version() const { return version_; }

  /// All categories the provider category maps to; empty if unmapped.
  std::vector<Category> map_all(Provider provider, std::string_view name) const;
  /// First listed category, or nullopt when unmapped.
  std::optional<Category> map(Provider provider, std::string_view name) const;

  /// Overload taking the provider by name; throws std::invalid_argument for
  /// an unknown provider.
  std::optional<Category> map(std::string_view provider, std::string_view name) const;

  /// Provider categories that map onto `c`. Empty means the provider has no
  /// equivalent for `c`.
  std::vector<std::string> sources_for(Provider provider, Category c) const;

  /// Every provider category name listed for the provider (normalised).
  std::vector<std::string> provider_categories(Provider provider) const;

 private:
  int version_ = 0;
  std::map<Provider, std::map<std::string, std::vector<Category>>> entries_;
};

std::string normalize_provider_category(std::string_view name);

}  // namespace localguard
