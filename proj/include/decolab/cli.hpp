#pragma once

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "decolab/bipartite.hpp"
#include "decolab/circuit.hpp"
#include "decolab/common.hpp"
#include "decolab/hamiltonian.hpp"
#include "decolab/qcdl.hpp"
#include "decolab/report.hpp"
#include "decolab/sieve.hpp"

namespace decolab {
namespace cli {

namespace detail {

inline std::string read_input(const std::string& path) {
  if (path == "-") {
    std::ostringstream os;
    os << std::cin.rdbuf();
    return os.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NumericalError("cannot open input file '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::string digest(const std::string& bytes) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

/// Matrix files are JSON arrays of rows of [re, im] pairs.
inline Mat load_matrix(const std::string& path) {
  json j;
  try {
    j = json::parse(read_input(path));
  } catch (const json::exception& e) {
    throw NumericalError("matrix file '" + path + "': " + e.what());
  }
  if (!j.is_array() || j.empty())
    throw NumericalError("matrix file must hold a nonempty array of rows");
  const size_t rows = j.size();
  const size_t cols = j[0].size();
  Mat m(rows, cols);
  for (size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw NumericalError("matrix file has ragged rows");
    for (size_t c = 0; c < cols; ++c) {
      const auto& e = j[r][c];
      if (!e.is_array() || e.size() != 2)
        throw NumericalError("matrix entries must be [re, im] pairs");
      m(r, c) = cxd(e[0].get<double>(), e[1].get<double>());
    }
  }
  return m;
}

inline std::vector<int> parse_split(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

inline std::map<std::string, int> parse_assignments(
    const std::vector<std::string>& args) {
  std::map<std::string, int> out;
  for (const std::string& chunk : args) {
    std::stringstream ss(chunk);
    std::string item;
    while (std::getline(ss, item, ',')) {
      auto eq = item.find('=');
      if (eq == std::string::npos)
        throw NumericalError("assignment '" + item + "' is not name=value");
      out[item.substr(0, eq)] = std::stoi(item.substr(eq + 1));
    }
  }
  return out;
}

inline std::vector<std::string> parse_list(
    const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (const std::string& chunk : args) {
    std::stringstream ss(chunk);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
  }
  return out;
}

inline void write_output(const std::string& bytes, const std::string& out) {
  if (out.empty()) {
    std::cout << bytes;
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw NumericalError("cannot open output file '" + out + "'");
  f << bytes;
}

struct CommonArgs {
  std::string circuit_path;
  std::string systems = "all";
  std::string format = "text";
  std::string out;
  std::uint64_t seed = kDefaultSeed;
  bool seed_set = false;
};

inline void resolve_seed(CommonArgs& args) {
  if (args.seed_set) return;  // flag wins over the environment
  if (const char* env = std::getenv("DECOLAB_SEED"))
    args.seed = std::strtoull(env, nullptr, 10);
}

struct LoadedCircuit {
  qcdl::Document doc;
  qcdl::Compiled compiled;
  std::string digest;
};

inline LoadedCircuit load_circuit(const std::string& path) {
  LoadedCircuit out;
  std::string text = read_input(path);
  out.digest = digest(text);
  out.doc = qcdl::parse_document(text);
  out.compiled = qcdl::compile(out.doc);
  return out;
}

/// "all" expands to every declared system-of-interest label.
inline SystemsOfInterest select_systems(const qcdl::Compiled& compiled,
                                        const std::string& selector) {
  if (selector == "all") return compiled.systems;
  std::vector<std::pair<std::string, SystemRef>> picked;
  std::stringstream ss(selector);
  std::string label;
  while (std::getline(ss, label, ',')) {
    int idx = compiled.systems.index_of_label(label);
    if (idx < 0)
      throw NumericalError("unknown system label '" + label + "'");
    picked.emplace_back(label, compiled.systems.refs[idx]);
  }
  if (picked.empty()) throw NumericalError("no systems selected");
  return make_systems_of_interest(compiled.circuit, std::move(picked));
}

inline int variable_index(const HistoryDistribution& hd,
                          const std::string& name) {
  for (size_t i = 0; i < hd.variables.size(); ++i)
    if (hd.variables[i].name == name) return static_cast<int>(i);
  throw NumericalError("unknown event variable '" + name + "'");
}

inline json report_header(const std::string& input_digest,
                          std::uint64_t seed) {
  json j;
  j["tool"] = kToolVersion;
  j["input_digest"] = input_digest;
  j["seed"] = seed;
  return j;
}

inline UnitaryChannel builtin_channel(const std::string& name) {
  if (name == "cnot") return UnitaryChannel::square(cnot_mat(), 2, 2);
  if (name == "swap") return UnitaryChannel::square(swap_mat(2, 2), 2, 2);
  if (name == "identity")
    return UnitaryChannel::square(identity_mat(4), 2, 2);
  throw NumericalError("unknown builtin channel '" + name +
                       "'; choices: identity, swap, cnot");
}

inline json conditional_report(const HistoryDistribution& hd,
                               const std::vector<std::string>& target_names,
                               const std::map<std::string, int>& given_names) {
  std::vector<int> targets;
  for (const std::string& t : target_names)
    targets.push_back(variable_index(hd, t));
  std::map<int, int> given;
  for (const auto& [name, value] : given_names)
    given[variable_index(hd, name)] = value;
  std::vector<double> dist = conditional(hd, targets, given);
  json rows = json::array();
  for (size_t idx = 0; idx < dist.size(); ++idx) {
    int rem = static_cast<int>(idx);
    json tgt = json::object();
    for (int k = static_cast<int>(targets.size()) - 1; k >= 0; --k) {
      tgt[hd.variables[targets[k]].name] =
          rem % hd.variables[targets[k]].arity;
      rem /= hd.variables[targets[k]].arity;
    }
    rows.push_back({{"target", tgt}, {"prob", format_probability(dist[idx])}});
  }
  json j;
  j["distribution"] = rows;
  return j;
}

}  // namespace detail

/// Front-end entry point. Exit codes: 0 success, 1 input error, 2 internal
/// consistency failure.
inline int run(std::vector<std::string> args) {
  CLI::App app{"causal-decoherence analysis of unitary interactions"};
  app.require_subcommand(1);

  detail::CommonArgs common;
  std::string builtin, matrix_path, split, scenario_name;
  std::vector<std::string> given_args, target_args;
  bool with_oracle = false;
  int samples = 8;

  auto add_common = [&](CLI::App* sub, bool with_circuit) {
    if (with_circuit)
      sub->add_option("--circuit", common.circuit_path,
                      "qcdl circuit file (- for stdin)")
          ->required();
    sub->add_option("--format", common.format, "text | structured")
        ->check(CLI::IsMember({"text", "structured"}));
    sub->add_option("--out", common.out, "write the report to a file");
    sub->add_option_function<std::uint64_t>(
        "--seed",
        [&common](const std::uint64_t& s) {
          common.seed = s;
          common.seed_set = true;
        },
        "seed for generic-element sampling (wins over DECOLAB_SEED)");
  };

  CLI::App* cmd_bipartite =
      app.add_subcommand("bipartite", "analyze a two-party unitary channel");
  cmd_bipartite->add_option("--builtin", builtin, "identity | swap | cnot");
  cmd_bipartite->add_option("--matrix", matrix_path,
                            "JSON matrix file for the unitary");
  cmd_bipartite->add_option("--split", split, "dims ds,df[,dt,dg]");
  add_common(cmd_bipartite, false);

  CLI::App* cmd_analyze =
      app.add_subcommand("analyze", "per-system decoherence analysis");
  cmd_analyze->add_option("--systems", common.systems,
                          "comma-separated labels or 'all'");
  cmd_analyze->add_flag("--oracle", with_oracle,
                        "cross-check against the broken-wire oracle");
  add_common(cmd_analyze, true);

  CLI::App* cmd_histories =
      app.add_subcommand("histories", "derive the privileged history set");
  cmd_histories->add_option("--systems", common.systems,
                            "comma-separated labels or 'all'");
  add_common(cmd_histories, true);

  CLI::App* cmd_prob =
      app.add_subcommand("prob", "probability of one history assignment");
  cmd_prob->add_option("--systems", common.systems, "labels or 'all'");
  cmd_prob->add_option("--given", given_args, "full assignment k=v,...")
      ->required();
  add_common(cmd_prob, true);

  CLI::App* cmd_condition =
      app.add_subcommand("condition", "conditional event distribution");
  cmd_condition->add_option("--systems", common.systems, "labels or 'all'");
  cmd_condition->add_option("--target", target_args, "target variables v,...")
      ->required();
  cmd_condition->add_option("--given", given_args, "assignments k=v,...");
  add_common(cmd_condition, true);

  CLI::App* cmd_hamiltonian = app.add_subcommand(
      "hamiltonian", "continuous-time decoherence of a bipartite Hamiltonian");
  cmd_hamiltonian
      ->add_option("--matrix", matrix_path, "JSON Hermitian matrix file")
      ->required();
  cmd_hamiltonian->add_option("--split", split, "dims ds,df")->required();
  add_common(cmd_hamiltonian, false);

  CLI::App* cmd_sieve =
      app.add_subcommand("sieve", "predictability-sieve check of a channel");
  cmd_sieve->add_option("--builtin", builtin, "identity | swap | cnot");
  cmd_sieve->add_option("--matrix", matrix_path, "JSON matrix file");
  cmd_sieve->add_option("--split", split, "dims ds,df[,dt,dg]");
  cmd_sieve->add_option("--samples", samples, "number of random pure states");
  add_common(cmd_sieve, false);

  CLI::App* cmd_validate =
      app.add_subcommand("validate", "parse and validate a qcdl file");
  add_common(cmd_validate, true);

  CLI::App* cmd_scenario =
      app.add_subcommand("scenario", "emit a builtin scenario as qcdl text");
  cmd_scenario->add_option("name", scenario_name,
                           "single_measurement | two_measurements | wigner")
      ->required();
  add_common(cmd_scenario, false);

  std::vector<const char*> argv;
  argv.push_back("decolab");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    detail::resolve_seed(common);

    if (cmd_scenario->parsed()) {
      qcdl::Document doc = qcdl::builtin_scenario(scenario_name);
      detail::write_output(qcdl::serialize(doc), common.out);
      return 0;
    }

    if (cmd_validate->parsed()) {
      detail::LoadedCircuit lc = detail::load_circuit(common.circuit_path);
      json rep = detail::report_header(lc.digest, common.seed);
      rep["valid"] = true;
      rep["wires"] = lc.compiled.circuit.num_wires();
      rep["layers"] = static_cast<int>(lc.compiled.circuit.layers.size());
      rep["systems"] = lc.compiled.systems.size();
      detail::write_output(emit(rep, common.format), common.out);
      return 0;
    }

    if (cmd_bipartite->parsed() || cmd_sieve->parsed()) {
      UnitaryChannel ch;
      std::string input_tag = builtin;
      if (!builtin.empty()) {
        ch = detail::builtin_channel(builtin);
      } else if (!matrix_path.empty()) {
        Mat u = detail::load_matrix(matrix_path);
        std::vector<int> dims = detail::parse_split(split);
        if (dims.size() == 2)
          ch = UnitaryChannel(u, {dims[0], dims[1]}, {dims[0], dims[1]});
        else if (dims.size() == 4)
          ch = UnitaryChannel(u, {dims[0], dims[1]}, {dims[2], dims[3]});
        else
          throw NumericalError("--split must give 2 or 4 dimensions");
        input_tag = matrix_path;
      } else {
        throw NumericalError("provide --builtin or --matrix");
      }
      json rep = detail::report_header(detail::digest(input_tag), common.seed);
      if (cmd_bipartite->parsed()) {
        BipartiteAnalysis an = analyze(ch, common.seed);
        rep["acc"] = algebra_to_json(an.acc, common.seed);
        rep["pacc"] = algebra_to_json(an.pacc, common.seed);
        rep["dec"] = algebra_to_json(an.dec, common.seed);
        rep["events"] = decomposition_to_json(an.decomposition);
        BipartiteAnalysis dual = dual_analyze(ch, common.seed);
        rep["dual_dec"] = algebra_to_json(dual.dec, common.seed);
        if (ch.dim_s == ch.dim_t) {
          auto cf = detect_control_form(ch, common.seed);
          rep["maximally_decohering"] = cf.has_value();
        }
      } else {
        auto states = sieve_sample_states(ch.dim_s, samples, common.seed);
        json rows = json::array();
        bool all_equivalent = true;
        for (const SieveReport& r : sieve_check(ch, states, 3, common.seed)) {
          json losses = json::array();
          for (const auto& l : r.losses)
            losses.push_back(
                {{"rho_f", l.rho_f_id}, {"loss_nats", l.loss_nats}});
          rows.push_back({{"state", r.state_id},
                          {"losses", losses},
                          {"zero_loss_all", r.zero_loss_all},
                          {"in_pacc", r.in_pacc},
                          {"equivalent", r.equivalent},
                          {"epsilon", r.epsilon}});
          all_equivalent = all_equivalent && r.equivalent;
        }
        rep["sieve"] = rows;
        rep["equivalence_holds"] = all_equivalent;
        if (!all_equivalent)
          throw InternalError(
              "sieve verdicts disagree with potential accessibility");
      }
      detail::write_output(emit(rep, common.format), common.out);
      return 0;
    }

    if (cmd_hamiltonian->parsed()) {
      Mat h = detail::load_matrix(matrix_path);
      std::vector<int> dims = detail::parse_split(split);
      if (dims.size() != 2)
        throw NumericalError("--split must give dims ds,df");
      HamiltonianModel model(h, dims[0], dims[1]);
      HamiltonianDecoherence an = dec_h(model, common.seed);
      json rep =
          detail::report_header(detail::digest(matrix_path), common.seed);
      rep["pacc"] = algebra_to_json(an.pacc, common.seed);
      rep["acc"] = algebra_to_json(an.acc, common.seed);
      rep["dec"] = algebra_to_json(an.dec, common.seed);
      rep["robust"] = algebra_to_json(robust_algebra(model), common.seed);
      rep["rotating_frame_robust"] =
          algebra_to_json(rotating_frame_robust(model), common.seed);
      rep["events"] = decomposition_to_json(an.decomposition);
      auto cf = detect_control_form_h(model, common.seed);
      rep["maximally_decohering"] = cf.has_value();
      detail::write_output(emit(rep, common.format), common.out);
      return 0;
    }

    // Remaining commands consume a circuit + systems of interest.
    detail::LoadedCircuit lc = detail::load_circuit(common.circuit_path);
    SystemsOfInterest soi =
        detail::select_systems(lc.compiled, common.systems);
    json rep = detail::report_header(lc.digest, common.seed);
    AnalysisOptions opts{common.seed};

    if (cmd_analyze->parsed()) {
      CircuitAnalyzer analyzer(lc.compiled.circuit, soi, opts);
      json systems = json::array();
      for (int i = 0; i < soi.size(); ++i)
        systems.push_back(
            system_analysis_to_json(analyzer.analyze(i), common.seed));
      rep["systems"] = systems;
      if (with_oracle)
        rep["oracle"] =
            oracle_to_json(oracle_preferred_match(lc.compiled.circuit, soi,
                                                  opts));
      detail::write_output(emit(rep, common.format), common.out);
      return 0;
    }

    DerivedHistories derived =
        derive_history_set(lc.compiled.circuit, soi, opts);
    const HistoryDistribution& hd = derived.distribution;

    if (cmd_histories->parsed()) {
      json systems = json::array();
      for (const SystemAnalysis& an : derived.analyses)
        systems.push_back(system_analysis_to_json(an, common.seed));
      rep["systems"] = systems;
      rep["history"] = history_to_json(hd);
      rep["consistency"] = consistency_to_json(check_consistency(hd));
      json queries = json::array();
      for (const qcdl::Query& q : lc.compiled.queries) {
        if (q.kind == qcdl::Query::Kind::kProb) {
          std::vector<int> assignment(hd.variables.size(), 0);
          for (const auto& [name, value] : q.given)
            assignment[detail::variable_index(hd, name)] = value;
          queries.push_back(
              {{"kind", "prob"},
               {"prob", format_probability(probability(hd, assignment, true))}});
        } else {
          std::map<std::string, int> given(q.given.begin(), q.given.end());
          queries.push_back({{"kind", "condition"},
                             {"result",
                              detail::conditional_report(hd, q.targets, given)}});
        }
      }
      if (!queries.empty()) rep["queries"] = queries;
      detail::write_output(emit(rep, common.format), common.out);
      return 0;
    }

    if (cmd_prob->parsed()) {
      std::map<std::string, int> given = detail::parse_assignments(given_args);
      std::vector<int> assignment(hd.variables.size(), 0);
      std::vector<bool> assigned(hd.variables.size(), false);
      for (const auto& [name, value] : given) {
        int idx = detail::variable_index(hd, name);
        assignment[idx] = value;
        assigned[idx] = true;
      }
      for (size_t i = 0; i < hd.variables.size(); ++i)
        if (!assigned[i] && hd.variables[i].arity > 1)
          throw NumericalError("assignment misses nontrivial variable '" +
                               hd.variables[i].name + "'");
      rep["prob"] = format_probability(probability(hd, assignment, true));
      detail::write_output(emit(rep, common.format), common.out);
      return 0;
    }

    if (cmd_condition->parsed()) {
      std::map<std::string, int> given = detail::parse_assignments(given_args);
      std::vector<std::string> targets = detail::parse_list(target_args);
      rep["conditional"] = detail::conditional_report(hd, targets, given);
      detail::write_output(emit(rep, common.format), common.out);
      return 0;
    }

    throw NumericalError("no subcommand executed");
  } catch (const InternalError& e) {
    std::cerr << "decolab: error [internal] " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "decolab: error [input] " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "decolab: error [input] " << e.what() << "\n";
    return 1;
  }
}

inline int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(std::move(args));
}

}  // namespace cli
}  // namespace decolab
