#pragma once

// Parser for the discrete-network subset of the BIF format:
//
//   network <name> { }
//   variable <name> { type discrete [ <k> ] { v1, v2, ... }; }
//   probability ( <child> ) { table p1, ..., pk; }
//   probability ( <child> | <p1>, <p2> ) {
//     (v1, v2) p1, ..., pk;      // one row per parent configuration
//     ...                        // or a flat `table` over all rows,
//   }                            // last declared parent varying fastest
//
// Anything outside this subset is rejected with a line/column-tagged error.
// CPT rows must sum to 1 within 1e-6 and are renormalized exactly.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "calibench/graphs.hpp"

namespace calibench::data {

class BifParseError : public std::runtime_error {
 public:
  BifParseError(const std::string& msg, int line, int col)
      : std::runtime_error("BIF parse error at " + std::to_string(line) + ":" +
                           std::to_string(col) + ": " + msg),
        line(line),
        col(col) {}
  int line;
  int col;
};

// Conditional probability table. Rows enumerate parent configurations in
// mixed-radix order over the declared parent list (last parent fastest);
// columns enumerate child values in declared order.
struct Cpt {
  std::vector<int> parents;
  Eigen::MatrixXd table;

  int row_index(const std::vector<int>& parent_values) const {
    int idx = 0;
    for (std::size_t k = 0; k < parent_values.size(); ++k) idx = idx * radix[k] + parent_values[k];
    return idx;
  }

  std::vector<int> radix;  // parent cardinalities, declared order
};

struct BayesNet {
  std::vector<std::string> names;
  std::vector<std::vector<std::string>> value_labels;
  graphs::Dag dag{0};
  std::vector<Cpt> cpts;

  int node_count() const { return static_cast<int>(names.size()); }
  int cardinality(int i) const { return static_cast<int>(value_labels[static_cast<std::size_t>(i)].size()); }
};

namespace detail {

struct BifToken {
  std::string text;
  int line;
  int col;
};

class BifLexer {
 public:
  explicit BifLexer(std::string_view text) : text_(text) {}

  BifToken next() {
    skip_space();
    BifToken t{"", line_, col_};
    if (pos_ >= text_.size()) return t;
    char c = text_[pos_];
    if (is_word_char(c)) {
      while (pos_ < text_.size() && is_word_char(text_[pos_])) t.text.push_back(take());
      return t;
    }
    t.text.push_back(take());
    return t;
  }

  BifToken peek() {
    auto saved_pos = pos_;
    auto saved_line = line_;
    auto saved_col = col_;
    BifToken t = next();
    pos_ = saved_pos;
    line_ = saved_line;
    col_ = saved_col;
    return t;
  }

 private:
  static bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' ||
           c == '+';
  }

  char take() {
    char c = text_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  void skip_space() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '/') {
        while (pos_ < text_.size() && text_[pos_] != '\n') take();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        take();
      } else {
        break;
      }
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class BifParser {
 public:
  explicit BifParser(std::string_view text) : lex_(text) {}

  BayesNet parse() {
    expect_keyword("network");
    BifToken name = lex_.next();
    if (name.text.empty()) fail("expected network name", name);
    expect("{");
    // Skip nothing: the subset allows only an empty network block.
    expect("}");

    while (true) {
      BifToken t = lex_.peek();
      if (t.text.empty()) break;
      if (t.text == "variable") {
        parse_variable();
      } else if (t.text == "probability") {
        parse_probability();
      } else {
        fail("expected 'variable' or 'probability', got '" + t.text + "'", t);
      }
    }
    return finish();
  }

 private:
  [[noreturn]] void fail(const std::string& msg, const BifToken& t) {
    throw BifParseError(msg, t.line, t.col);
  }

  BifToken expect(const std::string& text) {
    BifToken t = lex_.next();
    if (t.text != text) fail("expected '" + text + "', got '" + t.text + "'", t);
    return t;
  }

  void expect_keyword(const std::string& kw) { expect(kw); }

  int var_index(const BifToken& t) {
    auto it = index_.find(t.text);
    if (it == index_.end()) fail("unknown variable '" + t.text + "'", t);
    return it->second;
  }

  void parse_variable() {
    expect_keyword("variable");
    BifToken name = lex_.next();
    if (name.text.empty()) fail("expected variable name", name);
    if (index_.contains(name.text)) fail("duplicate variable '" + name.text + "'", name);
    expect("{");
    expect_keyword("type");
    expect_keyword("discrete");
    expect("[");
    BifToken card_tok = lex_.next();
    int card = parse_int(card_tok);
    expect("]");
    expect("{");
    std::vector<std::string> labels;
    for (int k = 0; k < card; ++k) {
      if (k > 0) expect(",");
      BifToken v = lex_.next();
      if (v.text.empty()) fail("expected value label", v);
      labels.push_back(v.text);
    }
    expect("}");
    expect(";");
    expect("}");

    index_[name.text] = static_cast<int>(names_.size());
    names_.push_back(name.text);
    labels_.push_back(std::move(labels));
    cpt_seen_.push_back(false);
    cpts_.emplace_back();
  }

  void parse_probability() {
    expect_keyword("probability");
    expect("(");
    BifToken child_tok = lex_.next();
    int child = var_index(child_tok);
    if (cpt_seen_[static_cast<std::size_t>(child)])
      fail("duplicate probability block for '" + child_tok.text + "'", child_tok);
    std::vector<int> parents;
    BifToken t = lex_.next();
    if (t.text == "|") {
      while (true) {
        BifToken p = lex_.next();
        parents.push_back(var_index(p));
        BifToken sep = lex_.next();
        if (sep.text == ")") break;
        if (sep.text != ",") fail("expected ',' or ')'", sep);
      }
    } else if (t.text != ")") {
      fail("expected '|' or ')'", t);
    }
    expect("{");

    Cpt cpt;
    cpt.parents = parents;
    for (int p : parents) cpt.radix.push_back(card(p));
    int rows = 1;
    for (int r : cpt.radix) rows *= r;
    int cols = card(child);
    cpt.table = Eigen::MatrixXd::Constant(rows, cols, -1.0);

    BifToken head = lex_.peek();
    if (head.text == "table") {
      lex_.next();
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
          if (r + c > 0) expect(",");
          cpt.table(r, c) = parse_double(lex_.next());
        }
      expect(";");
    } else {
      if (parents.empty()) fail("root probability block must use 'table'", head);
      for (int r = 0; r < rows; ++r) {
        BifToken open = lex_.next();
        if (open.text != "(") fail("expected '(' starting a CPT row", open);
        std::vector<int> pv;
        for (std::size_t k = 0; k < parents.size(); ++k) {
          if (k > 0) expect(",");
          BifToken v = lex_.next();
          pv.push_back(value_index(parents[k], v));
        }
        expect(")");
        int row = cpt.row_index(pv);
        if (cpt.table(row, 0) >= 0.0) fail("duplicate CPT row", open);
        for (int c = 0; c < cols; ++c) {
          if (c > 0) expect(",");
          cpt.table(row, c) = parse_double(lex_.next());
        }
        expect(";");
      }
    }
    BifToken close = expect("}");
    for (int r = 0; r < rows; ++r) {
      double s = cpt.table.row(r).sum();
      if (cpt.table.row(r).minCoeff() < 0.0)
        fail("CPT for '" + child_tok.text + "' is missing a parent configuration", close);
      if (std::abs(s - 1.0) > 1e-6)
        fail("CPT row for '" + child_tok.text + "' sums to " + std::to_string(s), close);
      cpt.table.row(r) /= s;
    }
    cpts_[static_cast<std::size_t>(child)] = std::move(cpt);
    cpt_seen_[static_cast<std::size_t>(child)] = true;
  }

  BayesNet finish() {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (!cpt_seen_[i])
        throw BifParseError("variable '" + names_[i] + "' has no probability block", 1, 1);
    BayesNet net;
    net.names = names_;
    net.value_labels = labels_;
    net.dag = graphs::Dag(static_cast<int>(names_.size()));
    for (std::size_t child = 0; child < cpts_.size(); ++child)
      for (int p : cpts_[child].parents) net.dag.add_edge(p, static_cast<int>(child));
    net.cpts = cpts_;
    return net;
  }

  int card(int i) const { return static_cast<int>(labels_[static_cast<std::size_t>(i)].size()); }

  int value_index(int var, const BifToken& t) {
    const auto& labels = labels_[static_cast<std::size_t>(var)];
    for (std::size_t k = 0; k < labels.size(); ++k)
      if (labels[k] == t.text) return static_cast<int>(k);
    fail("unknown value '" + t.text + "' for variable '" + names_[static_cast<std::size_t>(var)] + "'", t);
  }

  int parse_int(const BifToken& t) {
    try {
      std::size_t used = 0;
      int v = std::stoi(t.text, &used);
      if (used != t.text.size() || v < 1) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      fail("expected positive integer, got '" + t.text + "'", t);
    }
  }

  double parse_double(const BifToken& t) {
    try {
      std::size_t used = 0;
      double v = std::stod(t.text, &used);
      if (used != t.text.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      fail("expected number, got '" + t.text + "'", t);
    }
  }

  BifLexer lex_;
  std::map<std::string, int> index_;
  std::vector<std::string> names_;
  std::vector<std::vector<std::string>> labels_;
  std::vector<bool> cpt_seen_;
  std::vector<Cpt> cpts_;
};

}  // namespace detail

inline BayesNet parse_bif(std::string_view text) { return detail::BifParser(text).parse(); }

inline BayesNet parse_bif_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("parse_bif_file: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_bif(ss.str());
}

}  // namespace calibench::data
