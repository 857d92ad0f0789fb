#pragma once

// Featurized knowledge of one data-driven AM solution: six AM levels and five
// ML levels, serialized as a versioned JSON document.

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "amxfer/error.hpp"

namespace amxfer {

using Json = nlohmann::json;

enum class Level {
  AM_P,  // process
  AM_MT, // material
  AM_S,  // system
  AM_M,  // model
  AM_A,  // activity
  AM_C,  // concern
  ML_T,  // task
  ML_M,  // model
  ML_I,  // input
  ML_P,  // preprocessing
  ML_O,  // output
};

inline constexpr std::size_t kLevelCount = 11;

inline constexpr std::array<Level, kLevelCount> kAllLevels = {
    Level::AM_P, Level::AM_MT, Level::AM_S, Level::AM_M, Level::AM_A, Level::AM_C,
    Level::ML_T, Level::ML_M,  Level::ML_I, Level::ML_P, Level::ML_O};

inline constexpr std::string_view level_name(Level l) {
  constexpr std::array<std::string_view, kLevelCount> names = {
      "AM_P", "AM_MT", "AM_S", "AM_M", "AM_A", "AM_C",
      "ML_T", "ML_M",  "ML_I", "ML_P", "ML_O"};
  return names[static_cast<std::size_t>(l)];
}

inline std::optional<Level> parse_level(std::string_view name) {
  for (Level l : kAllLevels)
    if (level_name(l) == name)
      return l;
  return std::nullopt;
}

inline bool is_am_level(Level l) { return static_cast<int>(l) <= static_cast<int>(Level::AM_C); }

struct KnowledgeComponent {
  Level level = Level::AM_P;
  std::string value;
  std::map<std::string, std::string> attributes;
  bool present = false;

  static KnowledgeComponent absent(Level l) { return {l, {}, {}, false}; }

  friend bool operator==(const KnowledgeComponent &, const KnowledgeComponent &) = default;
};

class KnowledgeContext {
public:
  std::string context_id;
  bool artifacts_available = false;
  int publication_rank = 1;
  int performance_rank = 1;

  KnowledgeContext() {
    for (Level l : kAllLevels)
      components_[index(l)] = KnowledgeComponent::absent(l);
  }

  const KnowledgeComponent &operator[](Level l) const { return components_[index(l)]; }

  void set(KnowledgeComponent c) {
    if (!c.present && (!c.value.empty() || !c.attributes.empty()))
      throw ValidationError(std::string("component ") + std::string(level_name(c.level)) +
                            ": absent component must have empty value and attributes");
    components_[index(c.level)] = std::move(c);
  }

  void set(Level l, std::string value, std::map<std::string, std::string> attributes = {}) {
    set(KnowledgeComponent{l, std::move(value), std::move(attributes), true});
  }

  void clear(Level l) { components_[index(l)] = KnowledgeComponent::absent(l); }

  bool has(Level l) const { return (*this)[l].present; }

  const std::array<KnowledgeComponent, kLevelCount> &components() const { return components_; }

  /// Checks the context-level invariants; components are checked on set().
  void validate() const {
    if (context_id.empty())
      throw ValidationError("context_id: must be non-empty");
    if (publication_rank < 1)
      throw ValidationError("publication_rank: must be >= 1");
    if (performance_rank < 1)
      throw ValidationError("performance_rank: must be >= 1");
  }

  friend bool operator==(const KnowledgeContext &, const KnowledgeContext &) = default;

private:
  static std::size_t index(Level l) { return static_cast<std::size_t>(l); }
  std::array<KnowledgeComponent, kLevelCount> components_;
};

inline constexpr int kContextSchemaVersion = 1;

namespace detail {

inline const Json &require(const Json &doc, const char *key, const std::string &where) {
  auto it = doc.find(key);
  if (it == doc.end())
    throw ValidationError(where + key + ": missing");
  return *it;
}

} // namespace detail

inline KnowledgeContext load_context(const Json &doc) {
  if (!doc.is_object())
    throw ValidationError("document: expected a JSON object");
  const Json &version = detail::require(doc, "schema_version", "");
  if (!version.is_number_integer() || version.get<int>() != kContextSchemaVersion)
    throw ValidationError("schema_version: unsupported (expected 1)");

  KnowledgeContext ctx;
  const Json &id = detail::require(doc, "context_id", "");
  if (!id.is_string() || id.get<std::string>().empty())
    throw ValidationError("context_id: must be a non-empty string");
  ctx.context_id = id.get<std::string>();

  if (auto it = doc.find("artifacts_available"); it != doc.end()) {
    if (!it->is_boolean())
      throw ValidationError("artifacts_available: must be boolean");
    ctx.artifacts_available = it->get<bool>();
  }
  for (const char *key : {"publication_rank", "performance_rank"}) {
    if (auto it = doc.find(key); it != doc.end()) {
      if (!it->is_number_integer() || it->get<int>() < 1)
        throw ValidationError(std::string(key) + ": must be an integer >= 1");
      (std::string_view(key) == "publication_rank" ? ctx.publication_rank
                                                   : ctx.performance_rank) = it->get<int>();
    }
  }

  const Json &comps = detail::require(doc, "components", "");
  if (!comps.is_object())
    throw ValidationError("components: expected an object keyed by level id");
  std::array<bool, kLevelCount> seen{};
  for (const auto &[key, body] : comps.items()) {
    auto level = parse_level(key);
    if (!level)
      throw ValidationError("components." + key + ": unknown level id");
    const std::string where = "components." + key + ".";
    if (!body.is_object())
      throw ValidationError(where + ": expected an object");
    KnowledgeComponent c;
    c.level = *level;
    const Json &present = detail::require(body, "present", where);
    if (!present.is_boolean())
      throw ValidationError(where + "present: must be boolean");
    c.present = present.get<bool>();
    if (auto it = body.find("value"); it != body.end()) {
      if (!it->is_string())
        throw ValidationError(where + "value: must be a string");
      c.value = it->get<std::string>();
    }
    if (auto it = body.find("attributes"); it != body.end()) {
      if (!it->is_object())
        throw ValidationError(where + "attributes: must be an object");
      for (const auto &[ak, av] : it->items()) {
        if (!av.is_string())
          throw ValidationError(where + "attributes." + ak + ": must be a string");
        c.attributes[ak] = av.get<std::string>();
      }
    }
    if (!c.present && (!c.value.empty() || !c.attributes.empty()))
      throw ValidationError(where + "present: absent component must carry no value or attributes");
    seen[static_cast<std::size_t>(*level)] = true;
    ctx.set(std::move(c));
  }
  // nlohmann objects cannot hold duplicate keys, so a count check suffices
  // for duplicates that survive parsing.
  for (Level l : kAllLevels)
    if (!seen[static_cast<std::size_t>(l)])
      throw ValidationError("components." + std::string(level_name(l)) + ": missing");
  ctx.validate();
  return ctx;
}

inline Json save_context(const KnowledgeContext &ctx) {
  ctx.validate();
  Json comps = Json::object();
  for (const auto &c : ctx.components()) {
    Json body = {{"present", c.present}};
    if (c.present)
      body["value"] = c.value;
    if (!c.attributes.empty())
      body["attributes"] = c.attributes;
    comps[std::string(level_name(c.level))] = std::move(body);
  }
  return Json{{"schema_version", kContextSchemaVersion},
              {"context_id", ctx.context_id},
              {"artifacts_available", ctx.artifacts_available},
              {"publication_rank", ctx.publication_rank},
              {"performance_rank", ctx.performance_rank},
              {"components", std::move(comps)}};
}

namespace detail {

// Rejects duplicate keys, which nlohmann's default parser would silently
// collapse into the last occurrence.
inline Json parse_strict(const std::string &text) {
  std::vector<std::set<std::string>> scopes;
  std::string duplicate;
  Json::parser_callback_t cb = [&](int, Json::parse_event_t event, Json &parsed) {
    switch (event) {
    case Json::parse_event_t::object_start:
      scopes.emplace_back();
      break;
    case Json::parse_event_t::object_end:
      scopes.pop_back();
      break;
    case Json::parse_event_t::key:
      if (!scopes.empty() && !scopes.back().insert(parsed.get<std::string>()).second &&
          duplicate.empty())
        duplicate = parsed.get<std::string>();
      break;
    default:
      break;
    }
    return true;
  };
  Json doc;
  try {
    doc = Json::parse(text, cb);
  } catch (const Json::parse_error &e) {
    throw ValidationError(std::string("document: JSON parse error: ") + e.what());
  }
  if (!duplicate.empty())
    throw ValidationError(duplicate + ": duplicate key");
  return doc;
}

} // namespace detail

inline KnowledgeContext load_context_text(const std::string &text) {
  return load_context(detail::parse_strict(text));
}

inline KnowledgeContext load_context_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open context file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return load_context_text(ss.str());
}

inline void save_context_file(const KnowledgeContext &ctx, const std::filesystem::path &path) {
  Json doc = save_context(ctx);
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot write context file " + path.string());
  out << doc.dump(2) << '\n';
}

} // namespace amxfer
