#pragma once

#include <cctype>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "decolab/circuit.hpp"
#include "decolab/common.hpp"
#include "decolab/linops.hpp"

namespace decolab {

struct ParseError : Error {
  int line = 0;
  int col = 0;
  ParseError(const std::string& msg, int l, int c)
      : Error(msg + " (line " + std::to_string(l) + ", column " +
              std::to_string(c) + ")"),
        line(l),
        col(c) {}
};

namespace qcdl {

// ---------------------------------------------------------------------------
// Document model for the .qcdl circuit-description format (version qcdl-1).
// ---------------------------------------------------------------------------

struct GateSpec {
  std::string name;              // builtin name, or "matrix"
  std::vector<GateSpec> params;  // branches of controlled(...)
  std::optional<Mat> matrix;     // payload of matrix(...)
  std::vector<std::string> wires;  // bound wire labels (top level only)
  int line = 0, col = 0;
};

struct SystemSpec {
  std::string label;
  std::string wire;
  int slot = 0;
  int line = 0, col = 0;
};

struct Query {
  enum class Kind { kProb, kCondition };
  Kind kind = Kind::kProb;
  std::vector<std::pair<std::string, int>> given;
  std::vector<std::string> targets;  // condition queries only
};

struct Document {
  std::string version;
  std::vector<std::pair<std::string, int>> wires;
  std::vector<std::vector<GateSpec>> layers;
  std::vector<SystemSpec> systems;
  std::vector<Query> queries;
};

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

namespace detail {

struct Token {
  enum class Kind { kIdent, kNumber, kPunct, kEnd };
  Kind kind = Kind::kEnd;
  std::string text;
  double number = 0.0;
  int line = 0, col = 0;
};

class Lexer {
 public:
  explicit Lexer(const std::string& text) : text_(text) { advance(); }

  const Token& peek() const { return current_; }

  Token next() {
    Token t = current_;
    advance();
    return t;
  }

 private:
  void advance() {
    skip_space();
    current_ = Token{};
    current_.line = line_;
    current_.col = col_;
    if (pos_ >= text_.size()) {
      current_.kind = Token::Kind::kEnd;
      return;
    }
    char c = text_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      current_.kind = Token::Kind::kIdent;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
              text_[pos_] == '_' || text_[pos_] == '-')) {
        current_.text += text_[pos_];
        consume();
      }
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+') {
      current_.kind = Token::Kind::kNumber;
      size_t start = pos_;
      if (c == '-' || c == '+') consume();
      bool digits = false;
      while (pos_ < text_.size() &&
             std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        consume();
        digits = true;
      }
      if (pos_ < text_.size() && text_[pos_] == '.') {
        consume();
        while (pos_ < text_.size() &&
               std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
          consume();
          digits = true;
        }
      }
      if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
        consume();
        if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+'))
          consume();
        while (pos_ < text_.size() &&
               std::isdigit(static_cast<unsigned char>(text_[pos_])))
          consume();
      }
      if (!digits)
        throw ParseError("malformed number", current_.line, current_.col);
      current_.text = text_.substr(start, pos_ - start);
      current_.number = std::stod(current_.text);
      return;
    }
    if (std::string("{}()[],:=@").find(c) != std::string::npos) {
      current_.kind = Token::Kind::kPunct;
      current_.text = std::string(1, c);
      consume();
      return;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", line_,
                     col_);
  }

  void skip_space() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') consume();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        consume();
      } else {
        break;
      }
    }
  }

  void consume() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  const std::string& text_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  Token current_;
};

class Parser {
 public:
  explicit Parser(const std::string& text) : lex_(text) {}

  Document parse() {
    Document doc;
    expect_ident("version");
    Token v = expect(Token::Kind::kIdent, "format version");
    if (v.text != "qcdl-1")
      throw ParseError("unsupported version '" + v.text +
                           "'; expected qcdl-1",
                       v.line, v.col);
    doc.version = v.text;
    bool saw_wires = false, saw_layers = false, saw_systems = false,
         saw_queries = false;
    while (lex_.peek().kind != Token::Kind::kEnd) {
      Token key = expect(Token::Kind::kIdent, "section name");
      if (key.text == "wires" && !saw_wires) {
        saw_wires = true;
        parse_wires(doc);
      } else if (key.text == "layers" && !saw_layers) {
        saw_layers = true;
        parse_layers(doc);
      } else if (key.text == "systems" && !saw_systems) {
        saw_systems = true;
        parse_systems(doc);
      } else if (key.text == "queries" && !saw_queries) {
        saw_queries = true;
        parse_queries(doc);
      } else {
        throw ParseError("unknown or repeated section '" + key.text + "'",
                         key.line, key.col);
      }
    }
    if (!saw_wires)
      throw ParseError("document has no wires section", 1, 1);
    return doc;
  }

 private:
  Token expect(Token::Kind kind, const std::string& what) {
    Token t = lex_.next();
    if (t.kind != kind)
      throw ParseError("expected " + what + ", found '" + t.text + "'",
                       t.line, t.col);
    return t;
  }

  Token expect_punct(const std::string& p) {
    Token t = lex_.next();
    if (t.kind != Token::Kind::kPunct || t.text != p)
      throw ParseError("expected '" + p + "', found '" + t.text + "'", t.line,
                       t.col);
    return t;
  }

  void expect_ident(const std::string& word) {
    Token t = lex_.next();
    if (t.kind != Token::Kind::kIdent || t.text != word)
      throw ParseError("expected '" + word + "', found '" + t.text + "'",
                       t.line, t.col);
  }

  bool peek_punct(const std::string& p) const {
    return lex_.peek().kind == Token::Kind::kPunct && lex_.peek().text == p;
  }

  bool peek_ident(const std::string& word) const {
    return lex_.peek().kind == Token::Kind::kIdent && lex_.peek().text == word;
  }

  void skip_comma() {
    if (peek_punct(",")) lex_.next();
  }

  int expect_int(const std::string& what) {
    Token t = expect(Token::Kind::kNumber, what);
    double rounded = std::round(t.number);
    if (std::abs(t.number - rounded) > 0)
      throw ParseError(what + " must be an integer", t.line, t.col);
    return static_cast<int>(rounded);
  }

  void parse_wires(Document& doc) {
    expect_punct("{");
    while (!peek_punct("}")) {
      Token name = expect(Token::Kind::kIdent, "wire label");
      expect_punct(":");
      int dim = expect_int("wire dimension");
      if (dim < 1)
        throw ParseError("wire dimension must be positive", name.line,
                         name.col);
      for (const auto& [label, _] : doc.wires)
        if (label == name.text)
          throw ParseError("duplicate wire label '" + name.text + "'",
                           name.line, name.col);
      doc.wires.emplace_back(name.text, dim);
      skip_comma();
    }
    expect_punct("}");
  }

  GateSpec parse_gate_expr() {
    Token name = expect(Token::Kind::kIdent, "gate name");
    GateSpec g;
    g.name = name.text;
    g.line = name.line;
    g.col = name.col;
    if (g.name == "matrix") {
      expect_punct("(");
      g.matrix = parse_matrix();
      expect_punct(")");
    } else if (peek_punct("(")) {
      lex_.next();
      while (!peek_punct(")")) {
        g.params.push_back(parse_gate_expr());
        skip_comma();
      }
      expect_punct(")");
    }
    return g;
  }

  Mat parse_matrix() {
    Token open = expect_punct("[");
    std::vector<std::vector<cxd>> rows;
    while (!peek_punct("]")) {
      expect_punct("[");
      std::vector<cxd> row;
      while (!peek_punct("]")) {
        expect_punct("[");
        Token re = expect(Token::Kind::kNumber, "real part");
        skip_comma();
        Token im = expect(Token::Kind::kNumber, "imaginary part");
        expect_punct("]");
        row.emplace_back(re.number, im.number);
        skip_comma();
      }
      expect_punct("]");
      skip_comma();
      if (!rows.empty() && rows.front().size() != row.size())
        throw ParseError("ragged matrix rows", open.line, open.col);
      rows.push_back(std::move(row));
    }
    expect_punct("]");
    if (rows.empty())
      throw ParseError("empty matrix literal", open.line, open.col);
    Mat m(rows.size(), rows.front().size());
    for (size_t r = 0; r < rows.size(); ++r)
      for (size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
    return m;
  }

  void parse_layers(Document& doc) {
    expect_punct("{");
    while (!peek_punct("}")) {
      expect_ident("layer");
      expect_punct("{");
      std::vector<GateSpec> layer;
      while (!peek_punct("}")) {
        GateSpec g = parse_gate_expr();
        expect_punct("@");
        expect_punct("(");
        while (!peek_punct(")")) {
          Token w = expect(Token::Kind::kIdent, "wire label");
          g.wires.push_back(w.text);
          skip_comma();
        }
        expect_punct(")");
        if (g.wires.empty())
          throw ParseError("gate binds no wires", g.line, g.col);
        layer.push_back(std::move(g));
        skip_comma();
      }
      expect_punct("}");
      doc.layers.push_back(std::move(layer));
      skip_comma();
    }
    expect_punct("}");
  }

  void parse_systems(Document& doc) {
    expect_punct("{");
    while (!peek_punct("}")) {
      Token label = expect(Token::Kind::kIdent, "system label");
      expect_punct("=");
      expect_punct("(");
      Token wire = expect(Token::Kind::kIdent, "wire label");
      skip_comma();
      int slot = expect_int("slot");
      expect_punct(")");
      for (const SystemSpec& s : doc.systems)
        if (s.label == label.text)
          throw ParseError("duplicate system label '" + label.text + "'",
                           label.line, label.col);
      doc.systems.push_back(
          SystemSpec{label.text, wire.text, slot, label.line, label.col});
      skip_comma();
    }
    expect_punct("}");
  }

  void parse_queries(Document& doc) {
    expect_punct("{");
    while (!peek_punct("}")) {
      Token kind = expect(Token::Kind::kIdent, "query kind");
      Query q;
      if (kind.text == "prob") {
        q.kind = Query::Kind::kProb;
        expect_punct("{");
        parse_assignments(q.given);
        expect_punct("}");
      } else if (kind.text == "condition") {
        q.kind = Query::Kind::kCondition;
        expect_punct("{");
        expect_ident("target");
        expect_punct("=");
        expect_punct("(");
        while (!peek_punct(")")) {
          Token t = expect(Token::Kind::kIdent, "target variable");
          q.targets.push_back(t.text);
          skip_comma();
        }
        expect_punct(")");
        if (peek_ident("given")) {
          lex_.next();
          expect_punct("{");
          parse_assignments(q.given);
          expect_punct("}");
        }
        expect_punct("}");
      } else {
        throw ParseError("unknown query kind '" + kind.text + "'", kind.line,
                         kind.col);
      }
      doc.queries.push_back(std::move(q));
      skip_comma();
    }
    expect_punct("}");
  }

  void parse_assignments(std::vector<std::pair<std::string, int>>& out) {
    while (!peek_punct("}")) {
      Token name = expect(Token::Kind::kIdent, "event variable");
      expect_punct("=");
      int value = expect_int("event value");
      out.emplace_back(name.text, value);
      skip_comma();
    }
  }

  Lexer lex_;
};

}  // namespace detail

inline Document parse_document(const std::string& text) {
  return detail::Parser(text).parse();
}

// ---------------------------------------------------------------------------
// Compilation to a validated Circuit + SystemsOfInterest.
// ---------------------------------------------------------------------------

namespace detail {

inline Mat compile_gate(const GateSpec& g, const Dims& bound_dims);

inline Mat compile_branch(const GateSpec& g, const Dims& dims) {
  return compile_gate(g, dims);
}

inline Mat compile_gate(const GateSpec& g, const Dims& bound_dims) {
  const int dim = product(bound_dims);
  auto require = [&](bool ok, const std::string& msg) {
    if (!ok) throw ParseError(msg, g.line, g.col);
  };
  if (g.name == "identity") return Mat::Identity(dim, dim);
  if (g.name == "swap") {
    require(bound_dims.size() == 2, "swap binds exactly two wires");
    require(bound_dims[0] == bound_dims[1],
            "swap requires equal wire dimensions");
    return swap_mat(bound_dims[0], bound_dims[1]);
  }
  if (g.name == "cnot") {
    require(bound_dims == Dims{2, 2}, "cnot requires two qubit wires");
    return cnot_mat();
  }
  if (g.name == "hadamard") {
    require(bound_dims == Dims{2}, "hadamard requires one qubit wire");
    return hadamard_mat();
  }
  if (g.name == "pauli_x" || g.name == "pauli_y" || g.name == "pauli_z") {
    require(bound_dims == Dims{2}, g.name + " requires one qubit wire");
    if (g.name == "pauli_x") return pauli_x();
    if (g.name == "pauli_y") return pauli_y();
    return pauli_z();
  }
  if (g.name == "controlled") {
    require(bound_dims.size() >= 2,
            "controlled needs a control wire and at least one target wire");
    require(static_cast<int>(g.params.size()) == bound_dims[0],
            "controlled needs one branch per control dimension (" +
                std::to_string(bound_dims[0]) + ")");
    Dims rest(bound_dims.begin() + 1, bound_dims.end());
    std::vector<Mat> branches;
    for (const GateSpec& b : g.params)
      branches.push_back(compile_branch(b, rest));
    return controlled_mat(branches);
  }
  if (g.name == "matrix") {
    require(g.matrix.has_value(), "matrix gate without payload");
    require(g.matrix->rows() == dim && g.matrix->cols() == dim,
            "explicit matrix is " + std::to_string(g.matrix->rows()) + "x" +
                std::to_string(g.matrix->cols()) + " but the bound wires give " +
                std::to_string(dim));
    if (!is_unitary(*g.matrix))
      throw ParseError("explicit matrix is not unitary within tolerance " +
                           std::to_string(tol::unitary),
                       g.line, g.col);
    return *g.matrix;
  }
  throw ParseError("unknown builtin gate '" + g.name + "'", g.line, g.col);
}

}  // namespace detail

struct Compiled {
  Circuit circuit;
  SystemsOfInterest systems;
  std::vector<Query> queries;
};

inline Compiled compile(const Document& doc) {
  Compiled out;
  std::map<std::string, int> wire_index;
  for (const auto& [label, dim] : doc.wires) {
    wire_index[label] = static_cast<int>(out.circuit.wires.size());
    out.circuit.wires.push_back(Wire{label, dim});
  }
  for (const auto& layer : doc.layers) {
    std::vector<Gate> gates;
    for (const GateSpec& g : layer) {
      Gate gate;
      Dims bound;
      for (const std::string& w : g.wires) {
        auto it = wire_index.find(w);
        if (it == wire_index.end())
          throw ParseError("gate bound to unknown wire '" + w + "'", g.line,
                           g.col);
        gate.wires.push_back(it->second);
        bound.push_back(out.circuit.wires[it->second].dim);
      }
      gate.u = detail::compile_gate(g, bound);
      gates.push_back(std::move(gate));
    }
    out.circuit.layers.push_back(std::move(gates));
  }
  try {
    validate_circuit(out.circuit);
  } catch (const Error& e) {
    throw ParseError(e.what(), 1, 1);
  }

  std::vector<std::pair<std::string, SystemRef>> systems;
  for (const SystemSpec& s : doc.systems) {
    auto it = wire_index.find(s.wire);
    if (it == wire_index.end())
      throw ParseError("system '" + s.label + "' names unknown wire '" +
                           s.wire + "'",
                       s.line, s.col);
    if (s.slot < 0 || s.slot >= out.circuit.num_slots())
      throw ParseError("system '" + s.label + "' slot " +
                           std::to_string(s.slot) + " outside 0.." +
                           std::to_string(out.circuit.num_slots() - 1),
                       s.line, s.col);
    systems.emplace_back(s.label, SystemRef{it->second, s.slot});
  }
  try {
    out.systems = make_systems_of_interest(out.circuit, std::move(systems));
  } catch (const Error& e) {
    throw ParseError(e.what(), 1, 1);
  }
  out.queries = doc.queries;
  return out;
}

// ---------------------------------------------------------------------------
// Serialization (canonical form; matrices at 17 significant digits).
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline void serialize_gate(std::ostringstream& os, const GateSpec& g) {
  if (g.name == "matrix") {
    os << "matrix([";
    for (int r = 0; r < g.matrix->rows(); ++r) {
      if (r) os << ", ";
      os << "[";
      for (int c = 0; c < g.matrix->cols(); ++c) {
        if (c) os << ", ";
        os << "[" << format_double((*g.matrix)(r, c).real()) << ", "
           << format_double((*g.matrix)(r, c).imag()) << "]";
      }
      os << "]";
    }
    os << "])";
    return;
  }
  os << g.name;
  if (!g.params.empty()) {
    os << "(";
    for (size_t i = 0; i < g.params.size(); ++i) {
      if (i) os << ", ";
      serialize_gate(os, g.params[i]);
    }
    os << ")";
  }
}

}  // namespace detail

inline std::string serialize(const Document& doc) {
  std::ostringstream os;
  os << "version qcdl-1\n\n";
  os << "wires {\n";
  for (const auto& [label, dim] : doc.wires)
    os << "  " << label << ":" << dim << "\n";
  os << "}\n\n";
  os << "layers {\n";
  for (const auto& layer : doc.layers) {
    os << "  layer {\n";
    for (const GateSpec& g : layer) {
      os << "    ";
      detail::serialize_gate(os, g);
      os << " @ (";
      for (size_t i = 0; i < g.wires.size(); ++i) {
        if (i) os << ", ";
        os << g.wires[i];
      }
      os << ")\n";
    }
    os << "  }\n";
  }
  os << "}\n";
  if (!doc.systems.empty()) {
    os << "\nsystems {\n";
    for (const SystemSpec& s : doc.systems)
      os << "  " << s.label << " = (" << s.wire << ", " << s.slot << ")\n";
    os << "}\n";
  }
  if (!doc.queries.empty()) {
    os << "\nqueries {\n";
    for (const Query& q : doc.queries) {
      if (q.kind == Query::Kind::kProb) {
        os << "  prob {";
        for (const auto& [name, value] : q.given)
          os << " " << name << "=" << value;
        os << " }\n";
      } else {
        os << "  condition { target = (";
        for (size_t i = 0; i < q.targets.size(); ++i) {
          if (i) os << ", ";
          os << q.targets[i];
        }
        os << ")";
        if (!q.given.empty()) {
          os << " given {";
          for (const auto& [name, value] : q.given)
            os << " " << name << "=" << value;
          os << " }";
        }
        os << " }\n";
      }
    }
    os << "}\n";
  }
  return os.str();
}

/// Serializes the compiled circuit back into a document (builtin gate specs
/// are preserved by keeping the Document as the primary representation).
inline std::string serialize(const Compiled& compiled, const Document& doc) {
  (void)compiled;
  return serialize(doc);
}

// ---------------------------------------------------------------------------
// Builtin scenarios.
// ---------------------------------------------------------------------------

struct ScenarioOptions {
  std::optional<Mat> v_matrix;  // preparation unitary; default hadamard
  std::optional<Mat> w_matrix;  // second-measurement basis change; default
                                // hadamard (two_measurements, wigner)
};

namespace detail {

inline GateSpec control_ix() {
  GateSpec g;
  g.name = "controlled";
  g.params.push_back(GateSpec{"identity", {}, std::nullopt, {}, 0, 0});
  g.params.push_back(GateSpec{"pauli_x", {}, std::nullopt, {}, 0, 0});
  return g;
}

inline GateSpec on_wires(GateSpec g, std::vector<std::string> wires) {
  g.wires = std::move(wires);
  return g;
}

inline GateSpec single_qubit_gate(const std::optional<Mat>& m,
                                  const std::string& wire) {
  GateSpec g;
  if (m.has_value()) {
    g.name = "matrix";
    g.matrix = *m;
  } else {
    g.name = "hadamard";
  }
  g.wires = {wire};
  return g;
}

inline GateSpec named(const std::string& name,
                      std::vector<std::string> wires) {
  GateSpec g;
  g.name = name;
  g.wires = std::move(wires);
  return g;
}

}  // namespace detail

inline Document builtin_scenario(const std::string& name,
                                 const ScenarioOptions& opts = {}) {
  using detail::control_ix;
  using detail::named;
  using detail::on_wires;
  using detail::single_qubit_gate;
  Document doc;
  doc.version = "qcdl-1";
  if (name == "single_measurement") {
    doc.wires = {{"F", 2}, {"sys", 2}, {"G", 2}, {"dev", 2}, {"H", 2}};
    doc.layers.push_back({on_wires(control_ix(), {"sys", "F"}),
                          on_wires(control_ix(), {"dev", "G"})});
    doc.layers.push_back({single_qubit_gate(opts.v_matrix, "sys")});
    doc.layers.push_back({named("cnot", {"sys", "dev"})});
    doc.layers.push_back({on_wires(control_ix(), {"dev", "H"})});
    doc.systems = {{"F1", "F", 0},  {"F2", "F", 1},  {"G1", "G", 0},
                   {"G2", "G", 1},  {"S", "sys", 2}, {"M", "dev", 2},
                   {"N", "dev", 3}, {"H1", "H", 0},  {"H2", "H", 4}};
    return doc;
  }
  if (name == "two_measurements") {
    doc.wires = {{"F", 2},  {"sys", 2},  {"G", 2}, {"dev1", 2},
                 {"H", 2},  {"J", 2},    {"dev2", 2}, {"K", 2}};
    doc.layers.push_back({on_wires(control_ix(), {"sys", "F"}),
                          on_wires(control_ix(), {"dev1", "G"}),
                          on_wires(control_ix(), {"dev2", "J"})});
    doc.layers.push_back({single_qubit_gate(opts.v_matrix, "sys")});
    doc.layers.push_back({named("cnot", {"sys", "dev1"})});
    doc.layers.push_back({on_wires(control_ix(), {"dev1", "H"})});
    doc.layers.push_back({single_qubit_gate(opts.w_matrix, "sys")});
    doc.layers.push_back({named("cnot", {"sys", "dev2"})});
    doc.layers.push_back({on_wires(control_ix(), {"dev2", "K"})});
    doc.systems = {{"F1", "F", 0},   {"F2", "F", 1},   {"G1", "G", 0},
                   {"G2", "G", 1},   {"S", "sys", 2},  {"M", "dev1", 2},
                   {"N", "dev1", 3}, {"H1", "H", 0},   {"H2", "H", 4},
                   {"T", "sys", 4},  {"J1", "J", 0},   {"J2", "J", 1},
                   {"O", "dev2", 5}, {"P", "dev2", 6}, {"K1", "K", 0},
                   {"K2", "K", 7}};
    return doc;
  }
  if (name == "wigner") {
    doc.wires = {{"F", 2},  {"sys", 2},  {"G", 2}, {"dev1", 2},
                 {"H", 2},  {"J", 2},    {"dev2", 2}, {"K", 2}};
    doc.layers.push_back({on_wires(control_ix(), {"sys", "F"}),
                          on_wires(control_ix(), {"dev1", "G"}),
                          on_wires(control_ix(), {"dev2", "J"})});
    doc.layers.push_back({single_qubit_gate(opts.v_matrix, "sys")});
    doc.layers.push_back({named("cnot", {"sys", "dev1"})});
    doc.layers.push_back({on_wires(control_ix(), {"dev1", "H"})});
    // The lab evolution is undone with the adjoint gates; the default
    // controlled-(I,X) interactions are self-inverse.
    doc.layers.push_back({on_wires(control_ix(), {"dev1", "H"})});
    doc.layers.push_back({named("cnot", {"sys", "dev1"})});
    doc.layers.push_back({single_qubit_gate(opts.w_matrix, "sys")});
    doc.layers.push_back({named("cnot", {"sys", "dev2"})});
    doc.layers.push_back({on_wires(control_ix(), {"dev2", "K"})});
    doc.systems = {{"F1", "F", 0},   {"F2", "F", 1},   {"G1", "G", 0},
                   {"G2", "G", 1},   {"S", "sys", 2},  {"M", "dev1", 2},
                   {"N", "dev1", 3}, {"H1", "H", 0},   {"H2", "H", 4},
                   {"T", "sys", 6},  {"J1", "J", 0},   {"J2", "J", 1},
                   {"O", "dev2", 7}, {"P", "dev2", 8}, {"K1", "K", 0},
                   {"K2", "K", 9}};
    return doc;
  }
  throw NumericalError(
      "unknown scenario '" + name +
      "'; choices: single_measurement, two_measurements, wigner");
}

/// Labels of 𝔅 restricted to the lab for the Wigner scenario (everything at
/// or below the H2 fragment segment).
inline std::vector<std::string> wigner_lab_labels() {
  return {"F1", "F2", "G1", "G2", "S", "M", "N", "H1", "H2"};
}

}  // namespace qcdl
}  // namespace decolab
