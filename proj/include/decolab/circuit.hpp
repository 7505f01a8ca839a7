#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "decolab/bipartite.hpp"
#include "decolab/common.hpp"
#include "decolab/linops.hpp"
#include "decolab/vnalgebra.hpp"

namespace decolab {

// ---------------------------------------------------------------------------
// Layered unitary circuits over labelled wires, Heisenberg pullbacks, and the
// decoherence analysis relative to a chosen set of systems of interest.
//
// A system of interest is a wire segment: (wire, slot) addresses the piece of
// the wire between layers slot-1 and slot. Slot 0 is the input boundary.
// ---------------------------------------------------------------------------

struct Wire {
  std::string label;
  int dim = 2;
};

struct Gate {
  Mat u;                   // square on the bound wires, in listed order
  std::vector<int> wires;  // bound wire indices
};

struct Circuit {
  std::vector<Wire> wires;
  std::vector<std::vector<Gate>> layers;

  int num_wires() const { return static_cast<int>(wires.size()); }
  int num_slots() const { return static_cast<int>(layers.size()) + 1; }
  Dims wire_dims() const {
    Dims d;
    for (const Wire& w : wires) d.push_back(w.dim);
    return d;
  }
  int total_dim() const { return product(wire_dims()); }
};

inline void validate_circuit(const Circuit& c) {
  std::map<std::string, int> seen;
  for (const Wire& w : c.wires) {
    if (w.dim < 1) throw DimensionError("wire dimension must be positive");
    if (seen.count(w.label))
      throw DimensionError("duplicate wire label '" + w.label + "'");
    seen[w.label] = 1;
  }
  for (const auto& layer : c.layers) {
    std::vector<bool> bound(c.wires.size(), false);
    for (const Gate& g : layer) {
      int dim = 1;
      for (int w : g.wires) {
        if (w < 0 || w >= c.num_wires())
          throw DimensionError("gate bound to nonexistent wire");
        if (bound[w])
          throw DimensionError("gates within a layer must act on disjoint wires");
        bound[w] = true;
        dim *= c.wires[w].dim;
      }
      if (g.u.rows() != dim || g.u.cols() != dim)
        throw DimensionError("gate matrix does not match bound wire dims");
      if (!is_unitary(g.u))
        throw NumericalError("gate matrix is not unitary within tolerance");
    }
  }
}

struct SystemRef {
  int wire = 0;
  int slot = 0;
  bool operator==(const SystemRef& o) const {
    return wire == o.wire && slot == o.slot;
  }
  bool operator<(const SystemRef& o) const {
    return slot != o.slot ? slot < o.slot : wire < o.wire;
  }
};

struct SystemsOfInterest {
  std::vector<SystemRef> refs;       // topologically ordered
  std::vector<std::string> labels;   // parallel to refs

  int size() const { return static_cast<int>(refs.size()); }
  int index_of(const SystemRef& r) const {
    for (int i = 0; i < size(); ++i)
      if (refs[i] == r) return i;
    return -1;
  }
  int index_of_label(const std::string& label) const {
    for (int i = 0; i < size(); ++i)
      if (labels[i] == label) return i;
    return -1;
  }
};

/// Builds an ordered 𝔅 from labelled refs. Upward-path predecessors come
/// first because a path through gates strictly increases the slot.
inline SystemsOfInterest make_systems_of_interest(
    const Circuit& c, std::vector<std::pair<std::string, SystemRef>> systems) {
  std::stable_sort(systems.begin(), systems.end(),
                   [](const auto& a, const auto& b) {
                     return a.second < b.second;
                   });
  SystemsOfInterest out;
  for (auto& [label, ref] : systems) {
    if (ref.wire < 0 || ref.wire >= c.num_wires() || ref.slot < 0 ||
        ref.slot >= c.num_slots())
      throw DimensionError("system of interest outside the circuit: " + label);
    if (out.index_of(ref) >= 0)
      throw DimensionError("duplicate system of interest at wire " +
                           std::to_string(ref.wire) + ", slot " +
                           std::to_string(ref.slot));
    out.refs.push_back(ref);
    out.labels.push_back(label);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Local operators: dense matrices supported on a subset of wires. Gate
// conjugation only ever grows the support by the gate's wires, so circuit
// pullbacks never materialize on the full tensor product unless they must.
// ---------------------------------------------------------------------------

struct LocalOp {
  std::vector<int> wires;  // ascending wire indices
  Mat m;                   // on the tensor product of those wires, in order
};

namespace detail {

inline Dims subdims(const Dims& wire_dims, const std::vector<int>& wires) {
  Dims d;
  for (int w : wires) d.push_back(wire_dims[w]);
  return d;
}

/// Embeds op onto a superset support (ascending), padding with identities.
inline LocalOp embed_local(const LocalOp& op, const std::vector<int>& support,
                           const Dims& wire_dims) {
  if (op.wires == support) return op;
  std::vector<int> extra;
  for (int w : support)
    if (!std::binary_search(op.wires.begin(), op.wires.end(), w))
      extra.push_back(w);
  // Concatenated order: op wires then extra; permute into ascending order.
  std::vector<int> concat = op.wires;
  concat.insert(concat.end(), extra.begin(), extra.end());
  int extra_dim = 1;
  for (int w : extra) extra_dim *= wire_dims[w];
  Mat padded = kron_mat(op.m, Mat::Identity(extra_dim, extra_dim));
  std::vector<int> perm(support.size());
  for (size_t i = 0; i < support.size(); ++i) {
    auto it = std::find(concat.begin(), concat.end(), support[i]);
    perm[i] = static_cast<int>(it - concat.begin());
  }
  LocalOp out;
  out.wires = support;
  out.m = permute_subsystems_mat(padded, subdims(wire_dims, concat), perm);
  return out;
}

inline std::vector<int> union_support(const std::vector<int>& a,
                                      const std::vector<int>& b) {
  std::vector<int> u;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(),
                 std::back_inserter(u));
  return u;
}

}  // namespace detail

/// Aligns two local operators onto their common support.
inline std::pair<LocalOp, LocalOp> align_local(const LocalOp& a,
                                               const LocalOp& b,
                                               const Dims& wire_dims) {
  std::vector<int> u = detail::union_support(a.wires, b.wires);
  return {detail::embed_local(a, u, wire_dims),
          detail::embed_local(b, u, wire_dims)};
}

/// Trace over the full circuit space: pads the missing wires with identity.
inline cxd global_trace(const LocalOp& op, const Dims& wire_dims) {
  int rest = product(wire_dims);
  for (int w : op.wires) rest /= wire_dims[w];
  return op.m.trace() * static_cast<double>(rest);
}

/// Conjugates a local operator by one gate: pushforward g X g† or pullback
/// g† X g. Gates with disjoint support leave the operator untouched.
inline LocalOp conjugate_by_gate(const LocalOp& op, const Gate& gate,
                                 const Dims& wire_dims, bool pullback) {
  bool overlaps = false;
  for (int w : gate.wires)
    if (std::binary_search(op.wires.begin(), op.wires.end(), w))
      overlaps = true;
  if (!overlaps) return op;
  std::vector<int> gate_sorted = gate.wires;
  std::sort(gate_sorted.begin(), gate_sorted.end());
  std::vector<int> support = detail::union_support(op.wires, gate_sorted);
  LocalOp out = detail::embed_local(op, support, wire_dims);
  Dims sub = detail::subdims(wire_dims, support);
  std::vector<int> pos;
  for (int w : gate.wires) {
    auto it = std::find(support.begin(), support.end(), w);
    pos.push_back(static_cast<int>(it - support.begin()));
  }
  EmbedPlan plan = make_embed_plan(sub, pos);
  out.m = conjugate_embedded(out.m, gate.u, plan, pullback);
  return out;
}

/// Transports a local operator between layer boundaries: Heisenberg pullback
/// toward slot 0, pushforward toward later slots.
inline LocalOp transport_local(const Circuit& c, LocalOp op, int from_slot,
                               int to_slot) {
  Dims wd = c.wire_dims();
  if (from_slot > to_slot) {
    for (int layer = from_slot - 1; layer >= to_slot; --layer)
      for (const Gate& g : c.layers[layer])
        op = conjugate_by_gate(op, g, wd, /*pullback=*/true);
  } else {
    for (int layer = from_slot; layer < to_slot; ++layer)
      for (const Gate& g : c.layers[layer])
        op = conjugate_by_gate(op, g, wd, /*pullback=*/false);
  }
  return op;
}

/// Dense embedding of a local operator on the full circuit space.
inline Mat densify(const LocalOp& op, const Dims& wire_dims) {
  std::vector<int> all(wire_dims.size());
  for (size_t i = 0; i < wire_dims.size(); ++i) all[i] = static_cast<int>(i);
  return detail::embed_local(op, all, wire_dims).m;
}

// ---------------------------------------------------------------------------
// Reachability: "above" means reachable along an upward wire path through
// gates; "below" is the reverse.
// ---------------------------------------------------------------------------

namespace detail {

/// reach[w][s] = true if segment (w, s) is reachable from ref by a strictly
/// upward (or downward) path.
inline std::vector<std::vector<char>> reachable(const Circuit& c,
                                                SystemRef ref, bool upward) {
  const int nw = c.num_wires(), ns = c.num_slots();
  std::vector<std::vector<char>> reach(nw, std::vector<char>(ns, 0));
  std::vector<std::vector<char>> frontier(nw, std::vector<char>(ns, 0));
  frontier[ref.wire][ref.slot] = 1;
  if (upward) {
    for (int s = ref.slot; s + 1 < ns; ++s) {
      std::vector<char> next(nw, 0);
      for (int w = 0; w < nw; ++w) {
        if (!frontier[w][s]) continue;
        bool gated = false;
        for (const Gate& g : c.layers[s]) {
          if (std::find(g.wires.begin(), g.wires.end(), w) == g.wires.end())
            continue;
          gated = true;
          for (int w2 : g.wires) next[w2] = 1;
        }
        if (!gated) next[w] = 1;
      }
      for (int w = 0; w < nw; ++w)
        if (next[w]) {
          reach[w][s + 1] = 1;
          frontier[w][s + 1] = 1;
        }
    }
  } else {
    for (int s = ref.slot; s - 1 >= 0; --s) {
      std::vector<char> next(nw, 0);
      for (int w = 0; w < nw; ++w) {
        if (!frontier[w][s]) continue;
        bool gated = false;
        for (const Gate& g : c.layers[s - 1]) {
          if (std::find(g.wires.begin(), g.wires.end(), w) == g.wires.end())
            continue;
          gated = true;
          for (int w2 : g.wires) next[w2] = 1;
        }
        if (!gated) next[w] = 1;
      }
      for (int w = 0; w < nw; ++w)
        if (next[w]) {
          reach[w][s - 1] = 1;
          frontier[w][s - 1] = 1;
        }
    }
  }
  return reach;
}

}  // namespace detail

/// Indices of 𝔅-systems strictly above (or below) ref along wire paths.
inline std::vector<int> systems_in_direction(const Circuit& c,
                                             const SystemsOfInterest& soi,
                                             SystemRef ref, bool upward) {
  auto reach = detail::reachable(c, ref, upward);
  std::vector<int> out;
  for (int i = 0; i < soi.size(); ++i) {
    SystemRef r = soi.refs[i];
    if (r == ref) continue;
    if (reach[r.wire][r.slot]) out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pullback of a system's full wire algebra to the circuit input space.
// ---------------------------------------------------------------------------

namespace detail {

inline void check_ref(const Circuit& c, SystemRef ref) {
  if (ref.wire < 0 || ref.wire >= c.num_wires() || ref.slot < 0 ||
      ref.slot >= c.num_slots())
    throw DimensionError("system reference outside the circuit");
}

/// Pulled-back matrix units of the wire algebra of ref, at the input slice.
inline std::vector<LocalOp> pulled_units(const Circuit& c, SystemRef ref) {
  check_ref(c, ref);
  std::vector<LocalOp> out;
  for (const Mat& e : matrix_units(c.wires[ref.wire].dim)) {
    LocalOp op{{ref.wire}, e};
    out.push_back(transport_local(c, op, ref.slot, 0));
  }
  return out;
}

}  // namespace detail

/// The full matrix algebra on ref's wire, conjugated down to the circuit
/// input boundary, as a dense algebra on the global input space.
inline OperatorAlgebra pullback_algebra(const Circuit& c, SystemRef ref) {
  detail::check_ref(c, ref);
  Dims wd = c.wire_dims();
  const int d = c.total_dim();
  const int wdim = c.wires[ref.wire].dim;
  double rest = static_cast<double>(d) / wdim;
  std::vector<Mat> basis;
  for (const LocalOp& op : detail::pulled_units(c, ref))
    basis.push_back(densify(op, wd) / std::sqrt(rest));
  OperatorAlgebra out = algebra_from_orthonormal(wd, std::move(basis));
  return out;
}

// ---------------------------------------------------------------------------
// Per-system decoherence analysis relative to 𝔅.
// ---------------------------------------------------------------------------

struct SystemAnalysis {
  SystemRef ref;
  std::string label;
  OperatorAlgebra up_pacc, up_acc, up_dec;
  OperatorAlgebra down_pacc, down_acc, down_dec;
  SubspaceDecomposition up_events, down_events;
  std::vector<LocalOp> pulled_up;    // event projectors at the input slice
  std::vector<LocalOp> pulled_down;
};

struct AnalysisOptions {
  std::uint64_t seed = kDefaultSeed;
};

namespace detail {

/// Relative commutant of the pulled 𝔅-systems within ref's wire algebra:
/// the unknown lives on the wire, the constraints on the pulled supports.
/// commutant(join of algebras) = intersection of commutants, so each
/// constraint system contributes independently.
inline OperatorAlgebra directional_pacc(
    const Circuit& c, const std::vector<LocalOp>& ref_units,
    const std::vector<const std::vector<LocalOp>*>& constraint_systems,
    int wire_dim) {
  const int n = wire_dim * wire_dim;
  Dims wd = c.wire_dims();
  KernelAccumulator acc(n);
  for (const auto* sys : constraint_systems) {
    for (const LocalOp& target : *sys) {
      // Align once per (target); ref units share a support.
      std::vector<int> support =
          union_support(ref_units[0].wires, target.wires);
      LocalOp t = embed_local(target, support, wd);
      double tn = t.m.norm();
      if (tn < 1e-300) continue;
      const int du = static_cast<int>(t.m.rows());
      Mat rows(du * du, n);
      for (int i = 0; i < n; ++i) {
        LocalOp r = embed_local(ref_units[i], support, wd);
        Mat cm = comm(r.m, t.m) / (tn * r.m.norm());
        rows.col(i) = Eigen::Map<const Vec>(cm.data(), du * du);
      }
      acc.add_rows(rows);
    }
  }
  return algebra_from_orthonormal({wire_dim},
                                  mats_from_coefficients(acc.kernel(), wire_dim));
}

}  // namespace detail

/// Shared cache of pulled wire algebras for all systems in 𝔅.
class CircuitAnalyzer {
 public:
  CircuitAnalyzer(const Circuit& c, const SystemsOfInterest& soi,
                  AnalysisOptions opts = {})
      : circuit_(c), soi_(soi), opts_(opts) {
    validate_circuit(c);
    for (const SystemRef& r : soi.refs)
      pulled_.push_back(detail::pulled_units(c, r));
  }

  const Circuit& circuit() const { return circuit_; }
  const SystemsOfInterest& systems() const { return soi_; }
  const std::vector<LocalOp>& pulled_units(int i) const { return pulled_[i]; }

  SystemAnalysis analyze(int index) const {
    if (index < 0 || index >= soi_.size())
      throw DimensionError("system index out of range");
    SystemRef ref = soi_.refs[index];
    const int wdim = circuit_.wires[ref.wire].dim;
    SystemAnalysis out;
    out.ref = ref;
    out.label = soi_.labels[index];

    for (bool upward : {true, false}) {
      std::vector<int> others =
          systems_in_direction(circuit_, soi_, ref, upward);
      std::vector<const std::vector<LocalOp>*> constraints;
      for (int j : others) constraints.push_back(&pulled_[j]);
      OperatorAlgebra pacc = detail::directional_pacc(
          circuit_, pulled_[index], constraints, wdim);
      OperatorAlgebra acc = commutant(pacc);
      OperatorAlgebra dec = intersect(acc, pacc);
      SubspaceDecomposition events =
          subspace_decomposition(block_structure(dec, opts_.seed));
      validate_decomposition(events);
      std::vector<LocalOp> pulled_events;
      for (const Mat& p : events.projectors) {
        // The identity projector of a trivial decomposition transports to
        // itself exactly; keep its support to the single wire.
        if ((p - Mat::Identity(wdim, wdim)).norm() < 1e-12)
          pulled_events.push_back(LocalOp{{ref.wire}, p});
        else
          pulled_events.push_back(
              transport_local(circuit_, LocalOp{{ref.wire}, p}, ref.slot, 0));
      }
      if (upward) {
        out.up_pacc = std::move(pacc);
        out.up_acc = std::move(acc);
        out.up_dec = std::move(dec);
        out.up_events = std::move(events);
        out.pulled_up = std::move(pulled_events);
      } else {
        out.down_pacc = std::move(pacc);
        out.down_acc = std::move(acc);
        out.down_dec = std::move(dec);
        out.down_events = std::move(events);
        out.pulled_down = std::move(pulled_events);
      }
    }
    return out;
  }

 private:
  Circuit circuit_;
  SystemsOfInterest soi_;
  AnalysisOptions opts_;
  std::vector<std::vector<LocalOp>> pulled_;
};

inline SystemAnalysis system_analysis(const Circuit& c,
                                      const SystemsOfInterest& soi,
                                      SystemRef ref,
                                      AnalysisOptions opts = {}) {
  int index = soi.index_of(ref);
  if (index < 0)
    throw DimensionError("system_analysis: ref is not a system of interest");
  return CircuitAnalyzer(c, soi, opts).analyze(index);
}

// ---------------------------------------------------------------------------
// History distributions.
// ---------------------------------------------------------------------------

struct EventVariable {
  std::string name;   // f_<label> or e_<label>
  int system = 0;     // index into 𝔅
  bool up = false;    // e-variables come from decoherence (upward)
  int arity = 1;
};

enum class ProbabilityRule {
  kLinearTrace,    // (1/d) Tr(down... up...) over the maximally mixed input
  kChainSandwich,  // Tr(P_n..P_1 rho P_1..P_n): general, not always additive
};

struct HistoryDistribution {
  Dims wire_dims;
  int ambient_dim = 1;
  ProbabilityRule rule = ProbabilityRule::kLinearTrace;
  Mat rho;  // initial state for the chain rule; I/d for the linear rule
  std::vector<EventVariable> variables;  // (f_1, e_1, ..., f_n, e_n)
  std::vector<std::vector<LocalOp>> projectors;  // per variable, input slice
  std::vector<double> table;                     // clamped probabilities
  double raw_min_entry = 0.0;                    // before clamping

  int table_size() const {
    int n = 1;
    for (const auto& v : variables) n *= v.arity;
    return n;
  }

  int flat_index(const std::vector<int>& assignment) const {
    if (assignment.size() != variables.size())
      throw DimensionError("assignment length mismatch");
    int idx = 0;
    for (size_t k = 0; k < variables.size(); ++k) {
      if (assignment[k] < 0 || assignment[k] >= variables[k].arity)
        throw DimensionError("event index out of range for variable " +
                             variables[k].name);
      idx = idx * variables[k].arity + assignment[k];
    }
    return idx;
  }

  std::vector<int> unflatten(int idx) const {
    std::vector<int> a(variables.size());
    for (int k = static_cast<int>(variables.size()) - 1; k >= 0; --k) {
      a[k] = idx % variables[k].arity;
      idx /= variables[k].arity;
    }
    return a;
  }

  /// Exact re-evaluation from the stored projector families. `overrides`
  /// substitutes a (coarse-grained) projector for one variable.
  double evaluate(const std::vector<int>& assignment,
                  const std::map<int, LocalOp>* overrides = nullptr) const {
    auto proj = [&](int var) -> LocalOp {
      if (overrides) {
        auto it = overrides->find(var);
        if (it != overrides->end()) return it->second;
      }
      return projectors[var][assignment[var]];
    };
    if (rule == ProbabilityRule::kLinearTrace) {
      LocalOp acc{{}, Mat::Identity(1, 1)};
      for (size_t k = 0; k < variables.size(); ++k)
        if (!variables[k].up) acc = local_product(acc, proj(k));
      for (size_t k = 0; k < variables.size(); ++k)
        if (variables[k].up) acc = local_product(acc, proj(k));
      return global_trace(acc, wire_dims).real() / ambient_dim;
    }
    // Chain rule: P_n ... P_1 rho P_1 ... P_n, variables in listed order.
    Mat state = rho;
    for (size_t k = 0; k < variables.size(); ++k) {
      Mat p = densify(proj(k), wire_dims);
      state = p * state * p;
    }
    return state.trace().real();
  }

  double probability(const std::vector<int>& assignment) const {
    return table[flat_index(assignment)];
  }

 private:
  LocalOp local_product(const LocalOp& a, const LocalOp& b) const {
    if (a.wires.empty()) {
      LocalOp out = b;
      out.m *= a.m(0, 0);
      return out;
    }
    auto [ea, eb] = align_local(a, b, wire_dims);
    return LocalOp{ea.wires, ea.m * eb.m};
  }
};

struct DerivedHistories {
  HistoryDistribution distribution;
  std::vector<SystemAnalysis> analyses;
};

/// Assembles the privileged history set for 𝔅: per-system event families,
/// pairwise commutation of same-direction pulled projectors, and the
/// probability table (1/d) Tr(down-projectors, up-projectors).
inline DerivedHistories derive_history_set(const Circuit& c,
                                           const SystemsOfInterest& soi,
                                           AnalysisOptions opts = {}) {
  CircuitAnalyzer analyzer(c, soi, opts);
  DerivedHistories out;
  for (int i = 0; i < soi.size(); ++i)
    out.analyses.push_back(analyzer.analyze(i));

  HistoryDistribution& hd = out.distribution;
  hd.wire_dims = c.wire_dims();
  hd.ambient_dim = c.total_dim();
  hd.rule = ProbabilityRule::kLinearTrace;
  hd.rho = Mat::Identity(hd.ambient_dim, hd.ambient_dim) /
           static_cast<double>(hd.ambient_dim);

  for (int i = 0; i < soi.size(); ++i) {
    const SystemAnalysis& an = out.analyses[i];
    EventVariable down{"f_" + an.label, i, false,
                       static_cast<int>(an.pulled_down.size())};
    EventVariable up{"e_" + an.label, i, true,
                     static_cast<int>(an.pulled_up.size())};
    hd.variables.push_back(down);
    hd.projectors.push_back(an.pulled_down);
    hd.variables.push_back(up);
    hd.projectors.push_back(an.pulled_up);
  }

  // Prop 6.1: same-direction pulled projectors commute pairwise.
  Dims wd = hd.wire_dims;
  for (bool up : {false, true}) {
    for (size_t v1 = 0; v1 < hd.variables.size(); ++v1) {
      if (hd.variables[v1].up != up) continue;
      for (size_t v2 = v1 + 1; v2 < hd.variables.size(); ++v2) {
        if (hd.variables[v2].up != up) continue;
        for (const LocalOp& p : hd.projectors[v1])
          for (const LocalOp& q : hd.projectors[v2]) {
            auto [ep, eq] = align_local(p, q, wd);
            double scale = std::max(1.0, ep.m.norm() * eq.m.norm());
            if (comm(ep.m, eq.m).norm() > tol::alg * scale)
              throw InternalError(
                  "derived projector families fail to commute (" +
                  hd.variables[v1].name + " vs " + hd.variables[v2].name +
                  "); this indicates a bug in the analysis");
          }
      }
    }
  }

  hd.table.assign(hd.table_size(), 0.0);
  hd.raw_min_entry = 0.0;
  double sum = 0.0;
  for (int idx = 0; idx < hd.table_size(); ++idx) {
    double p = hd.evaluate(hd.unflatten(idx));
    hd.raw_min_entry = std::min(hd.raw_min_entry, p);
    if (p < -1e-12)
      throw InternalError("negative history probability beyond tolerance");
    hd.table[idx] = std::max(0.0, p);
    sum += hd.table[idx];
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw InternalError("history probabilities do not sum to one");
  return out;
}

/// Table lookup with an exact re-evaluation cross-check path.
inline double probability(const HistoryDistribution& hd,
                          const std::vector<int>& assignment,
                          bool reevaluate = false) {
  double p = hd.probability(assignment);
  if (reevaluate) {
    double q = hd.evaluate(assignment);
    if (std::abs(p - std::max(0.0, q)) > 1e-10)
      throw InternalError("stored and re-evaluated probabilities disagree");
  }
  return p;
}

/// Conditional distribution over the assignments of `targets` given fixed
/// values for some variables. Standard ratio of marginals.
inline std::vector<double> conditional(const HistoryDistribution& hd,
                                       const std::vector<int>& targets,
                                       const std::map<int, int>& given) {
  for (int t : targets)
    if (t < 0 || t >= static_cast<int>(hd.variables.size()))
      throw DimensionError("conditional: target variable out of range");
  for (const auto& [v, val] : given) {
    if (v < 0 || v >= static_cast<int>(hd.variables.size()))
      throw DimensionError("conditional: given variable out of range");
    if (val < 0 || val >= hd.variables[v].arity)
      throw DimensionError("conditional: given value out of range");
  }
  int target_size = 1;
  for (int t : targets) target_size *= hd.variables[t].arity;
  std::vector<double> joint(target_size, 0.0);
  double marginal = 0.0;
  for (int idx = 0; idx < hd.table_size(); ++idx) {
    std::vector<int> a = hd.unflatten(idx);
    bool match = true;
    for (const auto& [v, val] : given)
      if (a[v] != val) match = false;
    if (!match) continue;
    marginal += hd.table[idx];
    int tidx = 0;
    for (int t : targets) tidx = tidx * hd.variables[t].arity + a[t];
    joint[tidx] += hd.table[idx];
  }
  if (marginal <= 1e-12)
    throw NumericalError("conditioning on an event of (near-)zero probability");
  for (double& p : joint) p /= marginal;
  return joint;
}

// ---------------------------------------------------------------------------
// Consistency checking (classical sum rule and strong orthogonality).
// ---------------------------------------------------------------------------

struct ConsistencyReport {
  bool nonnegative = true;
  bool normalized = true;
  bool additive = true;
  bool strongly_consistent = true;
  double min_entry = 0.0;
  double normalization_error = 0.0;
  double max_additivity_violation = 0.0;
  double max_interference = 0.0;
  std::vector<std::string> violations;

  bool passed() const {
    return nonnegative && normalized && additive && strongly_consistent;
  }
};

inline ConsistencyReport check_consistency(const HistoryDistribution& hd) {
  ConsistencyReport rep;

  // (i) nonnegativity and normalization.
  rep.min_entry = hd.raw_min_entry;
  double sum = 0.0;
  for (int idx = 0; idx < hd.table_size(); ++idx) {
    double p = hd.evaluate(hd.unflatten(idx));
    rep.min_entry = std::min(rep.min_entry, p);
    sum += p;
  }
  rep.normalization_error = std::abs(sum - 1.0);
  if (rep.min_entry < -1e-9) {
    rep.nonnegative = false;
    rep.violations.push_back("negative probability " +
                             std::to_string(rep.min_entry));
  }
  if (rep.normalization_error > 1e-9) {
    rep.normalized = false;
    rep.violations.push_back("normalization off by " +
                             std::to_string(rep.normalization_error));
  }

  // (ii) additivity under coarse-graining of any single event variable.
  for (size_t v = 0; v < hd.variables.size(); ++v) {
    int arity = hd.variables[v].arity;
    if (arity < 2) continue;
    for (int a = 0; a < arity; ++a)
      for (int b = a + 1; b < arity; ++b) {
        auto [pa, pb] =
            align_local(hd.projectors[v][a], hd.projectors[v][b], hd.wire_dims);
        LocalOp merged{pa.wires, pa.m + pb.m};
        std::map<int, LocalOp> overrides{{static_cast<int>(v), merged}};
        for (int idx = 0; idx < hd.table_size(); ++idx) {
          std::vector<int> asg = hd.unflatten(idx);
          if (asg[v] != a) continue;
          double fine = hd.evaluate(asg);
          asg[v] = b;
          fine += hd.evaluate(asg);
          double coarse = hd.evaluate(asg, &overrides);
          double viol = std::abs(coarse - fine);
          rep.max_additivity_violation =
              std::max(rep.max_additivity_violation, viol);
        }
      }
  }
  if (rep.max_additivity_violation > 1e-9) {
    rep.additive = false;
    rep.violations.push_back(
        "coarse-graining additivity violated by " +
        std::to_string(rep.max_additivity_violation));
  }

  // (iii) strong consistency: cross terms between distinct same-direction
  // assignments vanish.
  if (hd.rule == ProbabilityRule::kLinearTrace) {
    std::vector<int> ups, downs;
    for (size_t v = 0; v < hd.variables.size(); ++v)
      (hd.variables[v].up ? ups : downs).push_back(static_cast<int>(v));
    auto family_products = [&](const std::vector<int>& vars) {
      std::vector<LocalOp> prods;
      int count = 1;
      for (int v : vars) count *= hd.variables[v].arity;
      for (int idx = 0; idx < count; ++idx) {
        int rem = idx;
        LocalOp acc{{}, Mat::Identity(1, 1)};
        std::vector<int> values(vars.size());
        for (int k = static_cast<int>(vars.size()) - 1; k >= 0; --k) {
          values[k] = rem % hd.variables[vars[k]].arity;
          rem /= hd.variables[vars[k]].arity;
        }
        for (size_t k = 0; k < vars.size(); ++k) {
          const LocalOp& p = hd.projectors[vars[k]][values[k]];
          if (acc.wires.empty()) {
            cxd scale = acc.m(0, 0);
            acc = p;
            acc.m *= scale;
          } else {
            auto [ea, eb] = align_local(acc, p, hd.wire_dims);
            acc = LocalOp{ea.wires, ea.m * eb.m};
          }
        }
        prods.push_back(acc);
      }
      return prods;
    };
    std::vector<LocalOp> up_prods = family_products(ups);
    std::vector<LocalOp> down_prods = family_products(downs);
    auto cross = [&](const std::vector<LocalOp>& outer,
                     const std::vector<LocalOp>& inner) {
      for (size_t e1 = 0; e1 < outer.size(); ++e1)
        for (size_t e2 = 0; e2 < outer.size(); ++e2) {
          if (e1 == e2) continue;
          for (const LocalOp& d : inner) {
            auto [a, b] = align_local(outer[e1], d, hd.wire_dims);
            LocalOp ab{a.wires, a.m * b.m};
            auto [x, y] = align_local(ab, outer[e2], hd.wire_dims);
            double val = std::abs(global_trace(LocalOp{x.wires, x.m * y.m},
                                               hd.wire_dims)) /
                         hd.ambient_dim;
            rep.max_interference = std::max(rep.max_interference, val);
          }
        }
    };
    cross(up_prods, down_prods);
    cross(down_prods, up_prods);
    if (rep.max_interference > 1e-9) {
      rep.strongly_consistent = false;
      rep.violations.push_back("interference cross-term of size " +
                               std::to_string(rep.max_interference));
    }
  }
  return rep;
}

/// Hand-built (non-derived) history family evaluated with the two-sided
/// chain rule of standard successive measurements; used to demonstrate
/// sum-rule violations for interfering projector families.
inline HistoryDistribution make_chain_history(
    const Circuit& c, const std::vector<std::vector<LocalOp>>& families,
    const Mat& rho) {
  HistoryDistribution hd;
  hd.wire_dims = c.wire_dims();
  hd.ambient_dim = c.total_dim();
  hd.rule = ProbabilityRule::kChainSandwich;
  hd.rho = rho;
  for (size_t i = 0; i < families.size(); ++i) {
    EventVariable v{"p_" + std::to_string(i), static_cast<int>(i), false,
                    static_cast<int>(families[i].size())};
    hd.variables.push_back(v);
    hd.projectors.push_back(families[i]);
  }
  hd.table.assign(hd.table_size(), 0.0);
  for (int idx = 0; idx < hd.table_size(); ++idx)
    hd.table[idx] = hd.evaluate(hd.unflatten(idx));
  return hd;
}

// ---------------------------------------------------------------------------
// Broken-wire construction and the preferred-decomposition oracle.
// ---------------------------------------------------------------------------

struct CutLeg {
  SystemRef segment;  // the original wire segment that was cut
  int out_wire = 0;   // extended wire whose input boundary is X^out
  int in_wire = 0;    // extended wire whose top boundary is X^in
};

/// The circuit with every 𝔅 wire segment cut. Cutting renames the wire from
/// that slot upward, so the broken channel is itself a plain circuit over an
/// enlarged wire set: X^out legs are the new wires' inputs and X^in legs are
/// the tops of the pieces that end at a cut.
struct BrokenCircuit {
  Circuit extended;
  std::vector<CutLeg> cuts;  // in 𝔅 order
  int original_wires = 0;

  /// Dense channel (⊗ X^out) ⊗ P -> (⊗ X^in) ⊗ F with cut legs in 𝔅 order
  /// and P/F the original input/output boundaries in wire order.
  UnitaryChannel to_channel(int max_dim = (1 << 13)) const {
    const int d = extended.total_dim();
    if (d > max_dim)
      throw NumericalError(
          "broken channel too large to materialize densely (" +
          std::to_string(d) + " > " + std::to_string(max_dim) + ")");
    Dims wd = extended.wire_dims();
    Mat u = Mat::Identity(d, d);
    for (const auto& layer : extended.layers) {
      Mat ul = Mat::Identity(d, d);
      for (const Gate& g : layer) ul = embed_mat(g.u, wd, g.wires) * ul;
      u = ul * u;
    }
    // Reorder input legs to (cut out-wires..., original wires...) and output
    // legs to (cut in-wires..., last pieces of original wires...).
    std::vector<int> in_order, out_order;
    for (const CutLeg& cut : cuts) in_order.push_back(cut.out_wire);
    for (int w = 0; w < original_wires; ++w) in_order.push_back(w);
    std::vector<int> last_alias(original_wires);
    for (int w = 0; w < original_wires; ++w) last_alias[w] = w;
    for (const CutLeg& cut : cuts)
      last_alias[cut.segment.wire] = cut.out_wire;
    for (const CutLeg& cut : cuts) out_order.push_back(cut.in_wire);
    for (int w = 0; w < original_wires; ++w) out_order.push_back(last_alias[w]);

    auto reorder_map = [&](const std::vector<int>& order) {
      Dims od;
      for (int w : order) od.push_back(wd[w]);
      std::vector<int> map(d);
      std::vector<int> digits, odig(order.size());
      for (int i = 0; i < d; ++i) {
        detail::decompose_index(i, od, odig);
        digits.assign(wd.size(), 0);
        for (size_t k = 0; k < order.size(); ++k) digits[order[k]] = odig[k];
        map[i] = detail::compose_index(digits, wd);
      }
      return map;
    };
    std::vector<int> in_map = reorder_map(in_order);
    std::vector<int> out_map = reorder_map(out_order);
    Mat v(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) v(i, j) = u(out_map[i], in_map[j]);
    int d_cut = 1;
    for (const CutLeg& cut : cuts) d_cut *= wd[cut.out_wire];
    return UnitaryChannel(v, {d_cut, d / d_cut}, {d_cut, d / d_cut});
  }
};

inline BrokenCircuit break_wires(const Circuit& c,
                                 const SystemsOfInterest& soi) {
  validate_circuit(c);
  BrokenCircuit out;
  out.original_wires = c.num_wires();
  out.extended.wires = c.wires;
  out.cuts.resize(soi.size());
  std::vector<int> alias(c.num_wires());
  for (int w = 0; w < c.num_wires(); ++w) alias[w] = w;
  for (int s = 0; s < c.num_slots(); ++s) {
    for (int i = 0; i < soi.size(); ++i) {
      if (soi.refs[i].slot != s) continue;
      int w = soi.refs[i].wire;
      int fresh = static_cast<int>(out.extended.wires.size());
      out.extended.wires.push_back(
          {c.wires[w].label + "#cut" + std::to_string(i), c.wires[w].dim});
      out.cuts[i] = CutLeg{soi.refs[i], fresh, alias[w]};
      alias[w] = fresh;
    }
    if (s < static_cast<int>(c.layers.size())) {
      std::vector<Gate> layer;
      for (const Gate& g : c.layers[s]) {
        Gate rebound = g;
        for (int& w : rebound.wires) w = alias[w];
        layer.push_back(std::move(rebound));
      }
      out.extended.layers.push_back(std::move(layer));
    }
  }
  return out;
}

struct OraclePreferredEntry {
  std::string label;
  bool up = false;
  bool span_match = false;         // span_C(preferred family) equals the
                                   // pipeline's decohered algebra
  bool noninterference_ok = false; // condition (1): preferred family exerts
                                   // no interference influence on the target
  int incompatible_checked = 0;    // condition (2) samples
  int incompatible_influencing = 0;
};

struct OracleReport {
  std::vector<OraclePreferredEntry> entries;

  bool all_match() const {
    for (const auto& e : entries)
      if (!e.span_match || !e.noninterference_ok ||
          e.incompatible_influencing != e.incompatible_checked)
        return false;
    return true;
  }
};

/// Independently recomputes every preferred projective decomposition from the
/// broken-wire channel as the centre of the relative commutant, and checks it
/// against the circuit pipeline's decohered algebras. Also spot-verifies the
/// interference-influence characterization of preferred decompositions.
inline OracleReport oracle_preferred_match(const Circuit& c,
                                           const SystemsOfInterest& soi,
                                           AnalysisOptions opts = {},
                                           int incompatible_samples = 20) {
  CircuitAnalyzer analyzer(c, soi, opts);
  std::vector<SystemAnalysis> analyses;
  for (int i = 0; i < soi.size(); ++i) analyses.push_back(analyzer.analyze(i));

  BrokenCircuit broken = break_wires(c, soi);
  const Circuit& ext = broken.extended;
  const int top = ext.num_slots() - 1;

  std::vector<std::vector<LocalOp>> in_units, out_units;
  for (const CutLeg& cut : broken.cuts) {
    in_units.push_back(detail::pulled_units(ext, {cut.in_wire, top}));
    out_units.push_back(detail::pulled_units(ext, {cut.out_wire, 0}));
  }

  OracleReport rep;
  int nontrivial = 0;
  for (int i = 0; i < soi.size(); ++i) {
    const SystemAnalysis& an = analyses[i];
    for (bool up : {true, false}) {
      const std::vector<LocalOp>& source =
          up ? out_units[i] : in_units[i];
      const std::vector<std::vector<LocalOp>>& targets =
          up ? in_units : out_units;
      std::vector<const std::vector<LocalOp>*> constraint_ptrs;
      for (const auto& t : targets) constraint_ptrs.push_back(&t);
      const int wdim = c.wires[soi.refs[i].wire].dim;
      OperatorAlgebra pacc_like =
          detail::directional_pacc(ext, source, constraint_ptrs, wdim);
      OperatorAlgebra pref_span = intersect(pacc_like, commutant(pacc_like));
      SubspaceDecomposition pref =
          subspace_decomposition(block_structure(pref_span, opts.seed));

      OraclePreferredEntry entry;
      entry.label = soi.labels[i];
      entry.up = up;
      entry.span_match = equals(pref_span, up ? an.up_dec : an.down_dec);

      // Condition (1): no preferred projector influences any target leg.
      entry.noninterference_ok = true;
      Dims wd = ext.wire_dims();
      std::vector<LocalOp> pulled_pref;
      for (const Mat& p : pref.projectors) {
        LocalOp lifted{source[0].wires, Mat()};
        // Express p in the pulled source frame: p = sum_ij p_ij pulled(E_ij).
        Mat acc = Mat::Zero(source[0].m.rows(), source[0].m.cols());
        for (int col = 0; col < wdim; ++col)
          for (int row = 0; row < wdim; ++row)
            acc += p(row, col) * source[col * wdim + row].m;
        lifted.m = std::move(acc);
        pulled_pref.push_back(lifted);
      }
      for (const LocalOp& p : pulled_pref)
        for (const auto& tsys : targets)
          for (const LocalOp& t : tsys) {
            auto [ep, et] = align_local(p, t, wd);
            if (comm(ep.m, et.m).norm() >
                tol::inf * std::max(1.0, ep.m.norm() * et.m.norm()))
              entry.noninterference_ok = false;
          }

      if (pref.size() > 1) ++nontrivial;
      rep.entries.push_back(std::move(entry));
    }
  }

  // Condition (2): incompatible projective decompositions must exert an
  // interference influence on the combined target legs.
  if (nontrivial > 0) {
    int per_entry = (incompatible_samples + nontrivial - 1) / nontrivial;
    Rng rng(opts.seed ^ 0x0c0ffeeULL);
    int entry_idx = -1;
    for (int i = 0; i < soi.size(); ++i) {
      for (bool up : {true, false}) {
        ++entry_idx;
        OraclePreferredEntry& entry = rep.entries[entry_idx];
        const std::vector<LocalOp>& source = up ? out_units[i] : in_units[i];
        const std::vector<std::vector<LocalOp>>& targets =
            up ? in_units : out_units;
        const int wdim = c.wires[soi.refs[i].wire].dim;
        const SubspaceDecomposition& pref_dec =
            up ? analyses[i].up_events : analyses[i].down_events;
        if (pref_dec.size() < 2) continue;
        Dims wd = ext.wire_dims();
        for (int s = 0; s < per_entry; ++s) {
          // Random rank-1 projective decomposition, resampled until it is
          // incompatible with the preferred one.
          Mat basis;
          bool incompatible = false;
          for (int attempt = 0; attempt < 20 && !incompatible; ++attempt) {
            basis = random_unitary(wdim, rng);
            for (int k = 0; k < wdim && !incompatible; ++k) {
              Mat q = basis.col(k) * basis.col(k).adjoint();
              for (const Mat& p : pref_dec.projectors)
                if (comm(p, q).norm() > 1e-3) incompatible = true;
            }
          }
          if (!incompatible) continue;
          ++entry.incompatible_checked;
          bool influences = false;
          for (int k = 0; k < wdim && !influences; ++k) {
            Mat q = basis.col(k) * basis.col(k).adjoint();
            Mat acc = Mat::Zero(source[0].m.rows(), source[0].m.cols());
            for (int col = 0; col < wdim; ++col)
              for (int row = 0; row < wdim; ++row)
                acc += q(row, col) * source[col * wdim + row].m;
            LocalOp lifted{source[0].wires, std::move(acc)};
            for (const auto& tsys : targets)
              for (const LocalOp& t : tsys) {
                auto [eq, et] = align_local(lifted, t, wd);
                if (comm(eq.m, et.m).norm() >
                    tol::inf * std::max(1.0, eq.m.norm() * et.m.norm()))
                  influences = true;
              }
          }
          if (influences) ++entry.incompatible_influencing;
        }
      }
    }
  }
  return rep;
}

}  // namespace decolab
