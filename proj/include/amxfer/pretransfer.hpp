#pragma once

// Pre-transfer analysis: one-to-one component comparison, similarity index S,
// maturity factor M, availability factor A and the score S x M x A.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "amxfer/knowledge.hpp"

namespace amxfer {

/// Lower-cases, trims and collapses internal whitespace.
inline std::string canonical(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space)
      out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

/// Levels scored on applicability: a present source component counts as
/// transferable even when the target has nothing at that level.
inline bool is_applicability_level(Level l) {
  return l == Level::AM_M || l == Level::ML_M || l == Level::ML_P;
}

struct ComponentScore {
  Level level = Level::AM_P;
  int score = 0;
  std::string rationale;
  bool overridden = false;

  friend bool operator==(const ComponentScore &, const ComponentScore &) = default;
};

using ScoreOverrides = std::map<Level, int>;

inline std::vector<ComponentScore> compare_components(const KnowledgeContext &source,
                                                      const KnowledgeContext &target,
                                                      const ScoreOverrides &overrides = {}) {
  std::vector<ComponentScore> scores;
  scores.reserve(kLevelCount);
  for (Level l : kAllLevels) {
    const auto &s = source[l];
    const auto &t = target[l];
    ComponentScore cs{l, 0, {}, false};
    if (s.present && t.present && canonical(s.value) == canonical(t.value)) {
      cs.score = 1;
      cs.rationale = "source and target descriptors match";
    } else if (is_applicability_level(l) && s.present) {
      cs.score = 1;
      cs.rationale = t.present ? "source knowledge applicable to target"
                               : "target has none; source knowledge can be adapted";
    } else if (!s.present && !t.present) {
      cs.rationale = "absent in both contexts";
    } else if (!s.present || !t.present) {
      cs.rationale = std::string("absent in ") + (s.present ? "target" : "source");
    } else {
      cs.rationale = "descriptors differ";
    }
    if (auto it = overrides.find(l); it != overrides.end()) {
      if (it->second != 0 && it->second != 1)
        throw ArgumentError("override for " + std::string(level_name(l)) + " must be 0 or 1");
      cs.score = it->second;
      cs.overridden = true;
      cs.rationale = "analyst override (default rule: " + cs.rationale + ")";
    }
    scores.push_back(std::move(cs));
  }
  return scores;
}

struct Maturity {
  double newness = 1.0;
  double performance = 1.0;
  double factor = 1.0;
};

inline Maturity maturity(int newness_rank, int performance_rank) {
  if (newness_rank < 1 || performance_rank < 1)
    throw ArgumentError("maturity ranks must be >= 1");
  // Decrement of 0.1 per rank, floored so the factor stays in (0, 1].
  auto metric = [](int rank) { return std::max(1.0 - 0.1 * (rank - 1), 0.1); };
  Maturity m;
  m.newness = metric(newness_rank);
  m.performance = metric(performance_rank);
  m.factor = (m.newness + m.performance) / 2.0;
  return m;
}

struct PreTransferReport {
  std::string source_id;
  std::string target_id;
  std::vector<ComponentScore> component_scores;
  int am_similarity = 0; // sum of S_AM
  int ml_similarity = 0; // sum of S_ML
  int kc_total = static_cast<int>(kLevelCount);
  double similarity_index = 0.0;
  double newness_score = 1.0;
  double performance_score = 1.0;
  double maturity_factor = 1.0;
  int availability_factor = 0;
  double pre_transfer_score = 0.0;
  bool significant = false;
};

/// Two-decimal display rounding; stored values keep full precision.
inline std::string display2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline PreTransferReport pretransfer_score(const KnowledgeContext &source,
                                           const KnowledgeContext &target,
                                           const ScoreOverrides &overrides = {}) {
  source.validate();
  target.validate();
  PreTransferReport r;
  r.source_id = source.context_id;
  r.target_id = target.context_id;
  r.component_scores = compare_components(source, target, overrides);
  for (const auto &cs : r.component_scores)
    (is_am_level(cs.level) ? r.am_similarity : r.ml_similarity) += cs.score;
  r.similarity_index =
      static_cast<double>(r.am_similarity + r.ml_similarity) / static_cast<double>(r.kc_total);
  Maturity m = maturity(source.publication_rank, source.performance_rank);
  r.newness_score = m.newness;
  r.performance_score = m.performance;
  r.maturity_factor = m.factor;
  r.availability_factor = source.artifacts_available ? 1 : 0;
  r.pre_transfer_score = r.similarity_index * r.maturity_factor * r.availability_factor;
  r.significant = r.pre_transfer_score > 0.5;
  return r;
}

/// Descending by score, then by S, then by source id.
inline std::vector<PreTransferReport> rank_sources(const std::vector<KnowledgeContext> &sources,
                                                   const KnowledgeContext &target,
                                                   const ScoreOverrides &overrides = {}) {
  if (sources.empty())
    throw ArgumentError("rank_sources: at least one source context is required");
  std::vector<PreTransferReport> reports;
  reports.reserve(sources.size());
  for (const auto &s : sources)
    reports.push_back(pretransfer_score(s, target, overrides));
  std::stable_sort(reports.begin(), reports.end(), [](const auto &a, const auto &b) {
    if (a.pre_transfer_score != b.pre_transfer_score)
      return a.pre_transfer_score > b.pre_transfer_score;
    if (a.similarity_index != b.similarity_index)
      return a.similarity_index > b.similarity_index;
    return a.source_id < b.source_id;
  });
  return reports;
}

inline Json to_json(const ComponentScore &cs) {
  return Json{{"level_id", std::string(level_name(cs.level))},
              {"score", cs.score},
              {"rationale", cs.rationale},
              {"overridden", cs.overridden}};
}

inline Json to_json(const PreTransferReport &r) {
  Json scores = Json::array();
  for (const auto &cs : r.component_scores)
    scores.push_back(to_json(cs));
  return Json{
      {"source_id", r.source_id},
      {"target_id", r.target_id},
      {"component_scores", std::move(scores)},
      {"am_similarity", r.am_similarity},
      {"ml_similarity", r.ml_similarity},
      {"kc_total", r.kc_total},
      {"similarity_index", r.similarity_index},
      {"newness_score", r.newness_score},
      {"performance_score", r.performance_score},
      {"maturity_factor", r.maturity_factor},
      {"availability_factor", r.availability_factor},
      {"pre_transfer_score", r.pre_transfer_score},
      {"significant", r.significant},
      {"display",
       {{"similarity_index", display2(r.similarity_index)},
        {"maturity_factor", display2(r.maturity_factor)},
        {"pre_transfer_score", display2(r.pre_transfer_score)}}},
      {"comparison_rule",
       "case-insensitive value equality; AM_M, ML_M and ML_P also score 1 when the source "
       "component is present (applicability)"},
  };
}

/// Plain-text table: component, source value, target value, score, rationale.
inline std::string render_table(const PreTransferReport &r, const KnowledgeContext &source,
                                const KnowledgeContext &target) {
  auto cell = [](const KnowledgeComponent &c) { return c.present ? c.value : std::string("None"); };
  std::size_t wsrc = 14, wtgt = 14;
  for (Level l : kAllLevels) {
    wsrc = std::max(wsrc, cell(source[l]).size());
    wtgt = std::max(wtgt, cell(target[l]).size());
  }
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(s.size(), w), ' ');
    return s;
  };
  std::ostringstream os;
  os << pad("Component", 10) << " | " << pad("Source: " + r.source_id, wsrc) << " | "
     << pad("Target: " + r.target_id, wtgt) << " | Score | Rationale\n";
  os << std::string(10 + wsrc + wtgt + 30, '-') << '\n';
  for (const auto &cs : r.component_scores) {
    os << pad(std::string(level_name(cs.level)), 10) << " | " << pad(cell(source[cs.level]), wsrc)
       << " | " << pad(cell(target[cs.level]), wtgt) << " | (" << cs.score << ")   | "
       << cs.rationale << '\n';
  }
  os << '\n'
     << "Similarity index S = (" << r.am_similarity << " + " << r.ml_similarity << ") / "
     << r.kc_total << " = " << display2(r.similarity_index) << '\n'
     << "Maturity factor  M = (" << display2(r.newness_score) << " + "
     << display2(r.performance_score) << ") / 2 = " << display2(r.maturity_factor) << '\n'
     << "Availability     A = " << r.availability_factor << '\n'
     << "Pre-transfer score = " << display2(r.pre_transfer_score)
     << (r.significant ? " (significant overlap)" : " (not significant)") << '\n';
  return os.str();
}

} // namespace amxfer
