#pragma once

#include <cstdio>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "decolab/circuit.hpp"
#include "decolab/common.hpp"
#include "decolab/vnalgebra.hpp"

namespace decolab {

// ---------------------------------------------------------------------------
// Deterministic report records. Structured output is JSON with sorted keys;
// text output tabulates algebras with the trivial algebra rendered as "⋆".
// ---------------------------------------------------------------------------

using json = nlohmann::json;

inline constexpr const char* kToolVersion = "decolab 1.0.0";

inline std::string format_probability(double p) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12f", p);
  return buf;
}

/// Deterministic fingerprint of an operator span: hash of the rounded
/// entries of the orthonormal basis.
inline std::string algebra_fingerprint(const OperatorAlgebra& a) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[64];
  for (const Mat& b : a.basis)
    for (int c = 0; c < b.cols(); ++c)
      for (int r = 0; r < b.rows(); ++r) {
        std::snprintf(buf, sizeof(buf), "%.9e %.9e", b(r, c).real(),
                      b(r, c).imag());
        h = fnv1a64(buf, std::strlen(buf), h);
      }
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

/// Short human-readable tag: "⋆" for the trivial algebra, "full" for the
/// whole wire algebra, otherwise the dimension.
inline std::string algebra_tag(const OperatorAlgebra& a) {
  if (a.dim() == 1) return "⋆";
  int d = a.ambient_dim();
  if (a.dim() == d * d) return "full";
  return "dim " + std::to_string(a.dim());
}

inline json algebra_to_json(const OperatorAlgebra& a,
                            std::uint64_t seed = kDefaultSeed) {
  json j;
  j["dimension"] = a.dim();
  j["ambient_dim"] = a.ambient_dim();
  j["fingerprint"] = algebra_fingerprint(a);
  j["trivial"] = a.is_trivial();
  json blocks = json::array();
  for (const Block& b : block_structure(a, seed).blocks)
    blocks.push_back({{"left_dim", b.left_dim}, {"right_dim", b.right_dim}});
  j["blocks"] = blocks;
  return j;
}

inline json decomposition_to_json(const SubspaceDecomposition& dec) {
  json j = json::array();
  for (int i = 0; i < dec.size(); ++i) {
    json e;
    e["label"] = dec.labels[i];
    e["rank"] = static_cast<int>(
        std::lround(dec.projectors[i].trace().real()));
    j.push_back(e);
  }
  return j;
}

inline json system_analysis_to_json(const SystemAnalysis& an,
                                    std::uint64_t seed) {
  json j;
  j["label"] = an.label;
  j["wire"] = an.ref.wire;
  j["slot"] = an.ref.slot;
  for (bool up : {true, false}) {
    json dir;
    dir["pacc"] = algebra_to_json(up ? an.up_pacc : an.down_pacc, seed);
    dir["acc"] = algebra_to_json(up ? an.up_acc : an.down_acc, seed);
    dir["dec"] = algebra_to_json(up ? an.up_dec : an.down_dec, seed);
    dir["events"] = decomposition_to_json(up ? an.up_events : an.down_events);
    j[up ? "up" : "down"] = dir;
  }
  return j;
}

inline json history_to_json(const HistoryDistribution& hd) {
  json j;
  j["ambient_dim"] = hd.ambient_dim;
  json vars = json::array();
  for (const auto& v : hd.variables)
    vars.push_back({{"name", v.name}, {"arity", v.arity}});
  j["variables"] = vars;
  json rows = json::array();
  double sum = 0.0;
  for (int idx = 0; idx < hd.table_size(); ++idx) {
    std::vector<int> a = hd.unflatten(idx);
    json row;
    json assignment = json::object();
    for (size_t k = 0; k < hd.variables.size(); ++k)
      if (hd.variables[k].arity > 1) assignment[hd.variables[k].name] = a[k];
    row["events"] = assignment;
    row["prob"] = format_probability(hd.table[idx]);
    sum += hd.table[idx];
    rows.push_back(row);
  }
  j["table"] = rows;
  j["total"] = format_probability(sum);
  return j;
}

inline json consistency_to_json(const ConsistencyReport& rep) {
  json j;
  j["passed"] = rep.passed();
  j["nonnegative"] = rep.nonnegative;
  j["normalized"] = rep.normalized;
  j["additive"] = rep.additive;
  j["strongly_consistent"] = rep.strongly_consistent;
  j["min_entry"] = rep.min_entry;
  j["normalization_error"] = rep.normalization_error;
  j["max_additivity_violation"] = rep.max_additivity_violation;
  j["max_interference"] = rep.max_interference;
  j["violations"] = rep.violations;
  return j;
}

inline json oracle_to_json(const OracleReport& rep) {
  json j;
  j["all_match"] = rep.all_match();
  json entries = json::array();
  for (const auto& e : rep.entries) {
    entries.push_back({{"system", e.label},
                       {"direction", e.up ? "up" : "down"},
                       {"span_match", e.span_match},
                       {"noninterference_ok", e.noninterference_ok},
                       {"incompatible_checked", e.incompatible_checked},
                       {"incompatible_influencing", e.incompatible_influencing}});
  }
  j["entries"] = entries;
  return j;
}

// ---------------------------------------------------------------------------
// Text rendering.
// ---------------------------------------------------------------------------

inline std::string render_text_analysis(const json& report) {
  std::ostringstream os;
  os << report.value("tool", "") << "\n";
  if (report.contains("input_digest"))
    os << "input " << report["input_digest"].get<std::string>() << "\n";
  if (report.contains("systems")) {
    os << "\nsystem  dir   pacc        acc         dec         events\n";
    for (const auto& sys : report["systems"]) {
      for (const char* dir : {"up", "down"}) {
        const auto& d = sys[dir];
        auto tag = [](const json& alg) {
          if (alg["trivial"].get<bool>()) return std::string("⋆");
          std::string s = "dim " + std::to_string(alg["dimension"].get<int>());
          return s;
        };
        char line[160];
        std::string events;
        for (const auto& e : d["events"])
          events += std::to_string(e["rank"].get<int>()) + " ";
        std::snprintf(line, sizeof(line), "%-7s %-5s %-11s %-11s %-11s %s",
                      sys["label"].get<std::string>().c_str(), dir,
                      tag(d["pacc"]).c_str(), tag(d["acc"]).c_str(),
                      tag(d["dec"]).c_str(), events.c_str());
        os << line << "\n";
      }
    }
  }
  if (report.contains("history")) {
    os << "\nhistories (d = "
       << report["history"]["ambient_dim"].get<int>() << ")\n";
    for (const auto& row : report["history"]["table"]) {
      for (auto it = row["events"].begin(); it != row["events"].end(); ++it)
        os << it.key() << "=" << it.value().get<int>() << " ";
      os << " prob " << row["prob"].get<std::string>() << "\n";
    }
    os << "total " << report["history"]["total"].get<std::string>() << "\n";
  }
  if (report.contains("consistency")) {
    os << "\nconsistency: "
       << (report["consistency"]["passed"].get<bool>() ? "pass" : "FAIL")
       << "\n";
    for (const auto& v : report["consistency"]["violations"])
      os << "  violation: " << v.get<std::string>() << "\n";
  }
  if (report.contains("oracle")) {
    os << "\npreferred-decomposition oracle: "
       << (report["oracle"]["all_match"].get<bool>() ? "match" : "MISMATCH")
       << "\n";
  }
  if (report.contains("conditional")) {
    os << "\nconditional distribution\n";
    for (const auto& row : report["conditional"]["distribution"]) {
      for (auto it = row["target"].begin(); it != row["target"].end(); ++it)
        os << it.key() << "=" << it.value().get<int>() << " ";
      os << " prob " << row["prob"].get<std::string>() << "\n";
    }
  }
  if (report.contains("prob"))
    os << "\nprob " << report["prob"].get<std::string>() << "\n";
  return os.str();
}

/// Structured output: stable-ordered JSON bytes.
inline std::string emit(const json& report, const std::string& format) {
  if (format == "structured") return report.dump(2) + "\n";
  return render_text_analysis(report);
}

}  // namespace decolab
