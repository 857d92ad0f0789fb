#pragma once

// TL domain/task formalization of two contexts and the "when / what to
// transfer" decision: scenario from (domain, task) equality, method family
// from a configurable decision table.

#include <array>
#include <optional>
#include <string>

#include "amxfer/pretransfer.hpp"

namespace amxfer {

enum class Scenario { traditional_ml, inductive, transductive, unsupervised };
enum class MethodFamily { none, instance_based, feature_based, parameter_based, relation_based };

inline std::string_view to_string(Scenario s) {
  switch (s) {
  case Scenario::traditional_ml: return "traditional_ml";
  case Scenario::inductive: return "inductive";
  case Scenario::transductive: return "transductive";
  case Scenario::unsupervised: return "unsupervised";
  }
  return "?";
}

inline std::string_view to_string(MethodFamily m) {
  switch (m) {
  case MethodFamily::none: return "none";
  case MethodFamily::instance_based: return "instance_based";
  case MethodFamily::feature_based: return "feature_based";
  case MethodFamily::parameter_based: return "parameter_based";
  case MethodFamily::relation_based: return "relation_based";
  }
  return "?";
}

inline MethodFamily parse_method_family(std::string_view s) {
  for (auto m : {MethodFamily::none, MethodFamily::instance_based, MethodFamily::feature_based,
                 MethodFamily::parameter_based, MethodFamily::relation_based})
    if (to_string(m) == s)
      return m;
  throw ArgumentError("unknown method family '" + std::string(s) + "'");
}

struct DomainDescriptor {
  std::string feature_space_key;
  std::array<std::string, 3> marginal_keys; // AM_P, AM_S, AM_MT

  friend bool operator==(const DomainDescriptor &, const DomainDescriptor &) = default;
};

struct TaskDescriptor {
  std::string label_space_key;
  std::array<std::string, 2> conditional_keys; // AM_A, AM_C

  friend bool operator==(const TaskDescriptor &, const TaskDescriptor &) = default;
};

namespace detail {
inline std::string key_of(const KnowledgeContext &ctx, Level l) {
  return ctx.has(l) ? canonical(ctx[l].value) : std::string();
}

inline bool truthy(const KnowledgeComponent &c, const std::string &attr) {
  auto it = c.attributes.find(attr);
  if (it == c.attributes.end())
    return false;
  auto v = canonical(it->second);
  return v == "true" || v == "yes" || v == "1";
}
} // namespace detail

/// ML input types recognized as feature spaces.
inline constexpr std::array<std::string_view, 4> kInputTypes = {"graphic", "3d", "tabular",
                                                                 "sequence"};

inline DomainDescriptor domain_of(const KnowledgeContext &ctx) {
  if (!ctx.has(Level::ML_I))
    throw DescriptorError("domain undefined without ML input (" + ctx.context_id + ": ML_I absent)");
  const auto &mli = ctx[Level::ML_I];
  auto it = mli.attributes.find("input_type");
  std::string type = canonical(it != mli.attributes.end() ? it->second : mli.value);
  if (std::find(kInputTypes.begin(), kInputTypes.end(), type) == kInputTypes.end())
    throw DescriptorError(ctx.context_id + ": ML_I input type '" + type +
                          "' is not one of graphic, 3d, tabular, sequence");
  return DomainDescriptor{type,
                          {detail::key_of(ctx, Level::AM_P), detail::key_of(ctx, Level::AM_S),
                           detail::key_of(ctx, Level::AM_MT)}};
}

inline TaskDescriptor task_of(const KnowledgeContext &ctx) {
  if (!ctx.has(Level::ML_O))
    throw DescriptorError("task undefined without ML output (" + ctx.context_id + ": ML_O absent)");
  return TaskDescriptor{canonical(ctx[Level::ML_O].value),
                        {detail::key_of(ctx, Level::AM_A), detail::key_of(ctx, Level::AM_C)}};
}

inline Scenario scenario_for(bool domain_equal, bool task_equal) {
  if (domain_equal)
    return task_equal ? Scenario::traditional_ml : Scenario::inductive;
  return task_equal ? Scenario::transductive : Scenario::unsupervised;
}

struct MethodChoice {
  MethodFamily family = MethodFamily::none;
  bool anchored = false; // true only for the case-study-backed cell
};

/// "What to transfer" decision table. Each cell is overridable; only the
/// transductive-with-source-model cell is backed by the published case study.
struct MethodTable {
  MethodChoice transductive_with_model{MethodFamily::parameter_based, true};
  MethodChoice transductive_without_model{MethodFamily::feature_based, false};
  MethodChoice inductive_with_labels{MethodFamily::parameter_based, false};
  MethodChoice inductive_without_labels{MethodFamily::instance_based, false};
  MethodChoice unsupervised{MethodFamily::feature_based, false};
  MethodChoice traditional{MethodFamily::none, false};

  MethodChoice select(Scenario s, bool source_model, bool target_labels) const {
    switch (s) {
    case Scenario::transductive:
      return source_model ? transductive_with_model : transductive_without_model;
    case Scenario::inductive:
      return target_labels ? inductive_with_labels : inductive_without_labels;
    case Scenario::unsupervised: return unsupervised;
    case Scenario::traditional_ml: return traditional;
    }
    return traditional;
  }

  /// Applies {"cell": "family"} overrides; overridden cells lose the anchor.
  static MethodTable from_json(const Json &j) {
    MethodTable t;
    const std::map<std::string, MethodChoice *> cells = {
        {"transductive_with_model", &t.transductive_with_model},
        {"transductive_without_model", &t.transductive_without_model},
        {"inductive_with_labels", &t.inductive_with_labels},
        {"inductive_without_labels", &t.inductive_without_labels},
        {"unsupervised", &t.unsupervised},
        {"traditional", &t.traditional}};
    for (const auto &[k, v] : j.items()) {
      auto it = cells.find(k);
      if (it == cells.end())
        throw ArgumentError("method table: unknown cell '" + k + "'");
      auto fam = parse_method_family(v.get<std::string>());
      if (fam != it->second->family)
        *it->second = MethodChoice{fam, false};
    }
    return t;
  }
};

struct TransferPlan {
  bool domain_equal = false;
  bool feature_space_equal = false;
  bool task_equal = false;
  bool label_space_equal = false;
  Scenario scenario = Scenario::traditional_ml;
  MethodFamily method_family = MethodFamily::none;
  bool method_anchored = false;
  bool source_model_available = false;
  bool target_labels_available = false;
  std::string model_family;
  std::string notes;
};

inline std::string model_family_for(MethodFamily m) {
  switch (m) {
  case MethodFamily::parameter_based:
    return "fine-tune the pre-trained source model on target data (layer-group schedules)";
  case MethodFamily::feature_based:
    return "shared/aligned feature representation between source and target";
  case MethodFamily::instance_based:
    return "re-weighted source instances for target training";
  case MethodFamily::relation_based:
    return "relational knowledge mapping (label only; not executed)";
  case MethodFamily::none:
    return "no transfer needed; train and test in one setting";
  }
  return {};
}

inline TransferPlan compare(const KnowledgeContext &source, const KnowledgeContext &target,
                            const MethodTable &table = {}) {
  const auto ds = domain_of(source), dt = domain_of(target);
  const auto ts = task_of(source), tt = task_of(target);
  TransferPlan p;
  p.feature_space_equal = ds.feature_space_key == dt.feature_space_key;
  p.domain_equal = p.feature_space_equal && ds.marginal_keys == dt.marginal_keys;
  p.label_space_equal = ts.label_space_key == tt.label_space_key;
  p.task_equal = p.label_space_equal && ts.conditional_keys == tt.conditional_keys;
  p.scenario = scenario_for(p.domain_equal, p.task_equal);
  p.source_model_available = source.has(Level::ML_M);
  p.target_labels_available = detail::truthy(target[Level::ML_O], "labels_available");
  auto choice = table.select(p.scenario, p.source_model_available, p.target_labels_available);
  p.method_family = choice.family;
  p.method_anchored = choice.anchored;
  p.model_family = model_family_for(p.method_family);

  std::string notes;
  if (!p.domain_equal)
    notes += p.feature_space_equal ? "feature spaces equal, marginal distributions differ; "
                                   : "feature spaces differ; ";
  if (!p.task_equal)
    notes += p.label_space_equal ? "label spaces equal, conditional distributions differ; "
                                 : "label spaces differ; ";
  notes += p.method_anchored ? "method choice anchored by case-study evidence"
                             : "method choice: default, not case-study-anchored";
  p.notes = std::move(notes);
  return p;
}

inline Json to_json(const TransferPlan &p) {
  return Json{{"domain_equal", p.domain_equal},
              {"feature_space_equal", p.feature_space_equal},
              {"task_equal", p.task_equal},
              {"label_space_equal", p.label_space_equal},
              {"scenario", std::string(to_string(p.scenario))},
              {"method_family", std::string(to_string(p.method_family))},
              {"method_anchored", p.method_anchored},
              {"source_model_available", p.source_model_available},
              {"target_labels_available", p.target_labels_available},
              {"model_family", p.model_family},
              {"notes", p.notes}};
}

} // namespace amxfer
