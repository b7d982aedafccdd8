// stencilforge - parsing expression grammar engine with packrat memoization
// Copyright (c) 2026 the stencilforge authors
// Distributed under the MIT license; see the LICENSE file.

#ifndef SFORGE_PEG_HPP
#define SFORGE_PEG_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace sforge::peg {

// Byte offsets map to 1-based line/column pairs for diagnostics.
struct source_pos {
  std::size_t line = 1;
  std::size_t column = 1;
};

inline source_pos line_col(std::string_view text, std::size_t offset) {
  source_pos p;
  if (offset > text.size()) offset = text.size();
  for (std::size_t i = 0; i < offset; ++i) {
    if (text[i] == '\n') {
      ++p.line;
      p.column = 1;
    } else {
      ++p.column;
    }
  }
  return p;
}

class grammar_error : public std::runtime_error {
public:
  grammar_error(const std::string& what, source_pos pos)
      : std::runtime_error(what + " at line " + std::to_string(pos.line) +
                           ", column " + std::to_string(pos.column)),
        pos_(pos) {}

  source_pos pos() const { return pos_; }

private:
  source_pos pos_;
};

enum class expr_kind {
  literal,    // 'text'
  char_class, // [a-z0-9_]
  any,        // .
  sequence,   // e1 e2 ...
  choice,     // e1 / e2 / ...
  star,       // e*
  plus,       // e+
  optional,   // e?
  and_pred,   // &e
  not_pred,   // !e
  rule_ref    // name
};

struct expr {
  expr_kind kind{};
  std::string text;  // literal bytes, or referenced rule name
  std::vector<std::pair<unsigned char, unsigned char>> ranges;  // char_class
  std::vector<expr> children;
  int target = -1;    // rule index, resolved at compile time for rule_ref
  source_pos where{}; // position in the grammar source
};

struct rule_def {
  std::string name;
  expr body;
  source_pos where{};
};

// A parse tree node covers input bytes [begin, end) and carries one child per
// rule reference matched inside the rule body, in match order.
struct parse_node {
  int rule = -1;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::vector<std::shared_ptr<const parse_node>> children;
};

using node_ptr = std::shared_ptr<const parse_node>;

struct match_options {
  bool memoize = true;
};

struct match_result {
  node_ptr root;               // null when the start rule did not match
  std::size_t end = 0;         // bytes consumed on success
  std::size_t farthest = 0;    // farthest byte examined by any terminal
  std::size_t evaluations = 0; // rule-body evaluations performed
  explicit operator bool() const { return root != nullptr; }
};

namespace detail {

// Recursive-descent parser for the grammar notation itself: one rule per
// line, `name <- expression`, with  / * + ? & !  ()  '...'  [...]  .  and
// `#` comments.
class notation_parser {
public:
  explicit notation_parser(std::string_view src) : src_(src) {}

  std::vector<rule_def> parse() {
    std::vector<rule_def> rules;
    std::size_t pos = 0;
    std::size_t line_no = 1;
    while (pos <= src_.size()) {
      std::size_t eol = src_.find('\n', pos);
      if (eol == std::string_view::npos) eol = src_.size();
      line_ = src_.substr(pos, eol - pos);
      line_no_ = line_no;
      cur_ = 0;
      skip_ws();
      if (!at_end()) {
        rule_def def;
        def.where = here();
        def.name = parse_ident("rule name");
        skip_ws();
        if (!eat("<-")) fail("expected '<-'");
        skip_ws();
        def.body = parse_choice();
        skip_ws();
        if (!at_end()) fail("unexpected trailing input after rule");
        rules.push_back(std::move(def));
      }
      if (eol == src_.size()) break;
      pos = eol + 1;
      ++line_no;
    }
    return rules;
  }

private:
  std::string_view src_;
  std::string_view line_;
  std::size_t line_no_ = 1;
  std::size_t cur_ = 0;

  source_pos here() const { return {line_no_, cur_ + 1}; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw grammar_error(msg, here());
  }

  bool at_end() const {
    return cur_ >= line_.size() || line_[cur_] == '#';
  }

  char peek() const { return line_[cur_]; }

  void skip_ws() {
    while (cur_ < line_.size() && (line_[cur_] == ' ' || line_[cur_] == '\t')) ++cur_;
  }

  bool eat(std::string_view tok) {
    if (line_.substr(cur_, tok.size()) == tok) {
      cur_ += tok.size();
      return true;
    }
    return false;
  }

  static bool ident_start(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
  }
  static bool ident_cont(char c) {
    return ident_start(c) || (c >= '0' && c <= '9');
  }

  std::string parse_ident(const char* what) {
    if (at_end() || !ident_start(peek())) fail(std::string("expected ") + what);
    std::size_t start = cur_;
    while (cur_ < line_.size() && ident_cont(line_[cur_])) ++cur_;
    return std::string(line_.substr(start, cur_ - start));
  }

  expr parse_choice() {
    expr first = parse_sequence();
    skip_ws();
    if (at_end() || peek() != '/') return first;
    expr out;
    out.kind = expr_kind::choice;
    out.where = first.where;
    out.children.push_back(std::move(first));
    while (!at_end() && peek() == '/') {
      ++cur_;
      skip_ws();
      out.children.push_back(parse_sequence());
      skip_ws();
    }
    return out;
  }

  expr parse_sequence() {
    expr first = parse_prefixed();
    skip_ws();
    if (!starts_element()) return first;
    expr out;
    out.kind = expr_kind::sequence;
    out.where = first.where;
    out.children.push_back(std::move(first));
    while (starts_element()) {
      out.children.push_back(parse_prefixed());
      skip_ws();
    }
    return out;
  }

  // True when the cursor sits on the start of another sequence element.
  bool starts_element() const {
    if (at_end()) return false;
    char c = peek();
    return c == '\'' || c == '[' || c == '.' || c == '(' || c == '&' ||
           c == '!' || ident_start(c);
  }

  expr parse_prefixed() {
    if (!at_end() && (peek() == '&' || peek() == '!')) {
      expr out;
      out.kind = peek() == '&' ? expr_kind::and_pred : expr_kind::not_pred;
      out.where = here();
      ++cur_;
      skip_ws();
      out.children.push_back(parse_prefixed());
      return out;
    }
    return parse_postfixed();
  }

  expr parse_postfixed() {
    expr out = parse_primary();
    while (!at_end() && (peek() == '*' || peek() == '+' || peek() == '?')) {
      expr wrap;
      wrap.kind = peek() == '*'   ? expr_kind::star
                  : peek() == '+' ? expr_kind::plus
                                  : expr_kind::optional;
      wrap.where = out.where;
      ++cur_;
      wrap.children.push_back(std::move(out));
      out = std::move(wrap);
    }
    return out;
  }

  expr parse_primary() {
    if (at_end()) fail("expected expression");
    char c = peek();
    if (c == '\'') return parse_literal();
    if (c == '[') return parse_class();
    if (c == '.') {
      expr out;
      out.kind = expr_kind::any;
      out.where = here();
      ++cur_;
      return out;
    }
    if (c == '(') {
      ++cur_;
      skip_ws();
      expr inner = parse_choice();
      skip_ws();
      if (at_end() || peek() != ')') fail("expected ')'");
      ++cur_;
      return inner;
    }
    if (ident_start(c)) {
      expr out;
      out.kind = expr_kind::rule_ref;
      out.where = here();
      out.text = parse_ident("rule name");
      return out;
    }
    fail("expected expression");
  }

  char parse_escape(const char* context) {
    // Cursor sits on the byte after the backslash.
    if (cur_ >= line_.size()) fail(std::string("unterminated escape in ") + context);
    char c = line_[cur_++];
    switch (c) {
      case '\\': return '\\';
      case '\'': return '\'';
      case ']': return ']';
      case '[': return '[';
      case '-': return '-';
      case 'n': return '\n';
      case 'r': return '\r';
      case 't': return '\t';
      default: fail(std::string("invalid escape in ") + context);
    }
  }

  expr parse_literal() {
    expr out;
    out.kind = expr_kind::literal;
    out.where = here();
    ++cur_;  // opening quote
    while (true) {
      if (cur_ >= line_.size()) fail("unterminated literal");
      char c = line_[cur_];
      if (c == '\'') {
        ++cur_;
        return out;
      }
      if (c == '\\') {
        ++cur_;
        out.text.push_back(parse_escape("literal"));
      } else {
        out.text.push_back(c);
        ++cur_;
      }
    }
  }

  expr parse_class() {
    expr out;
    out.kind = expr_kind::char_class;
    out.where = here();
    ++cur_;  // opening bracket
    while (true) {
      if (cur_ >= line_.size()) fail("unterminated character class");
      char c = line_[cur_];
      if (c == ']') {
        ++cur_;
        if (out.ranges.empty()) fail("empty character class");
        return out;
      }
      unsigned char lo;
      if (c == '\\') {
        ++cur_;
        lo = static_cast<unsigned char>(parse_escape("character class"));
      } else {
        lo = static_cast<unsigned char>(c);
        ++cur_;
      }
      unsigned char hi = lo;
      // A '-' forms a range unless it is the last byte before ']'.
      if (cur_ + 1 < line_.size() && line_[cur_] == '-' && line_[cur_ + 1] != ']') {
        ++cur_;
        char d = line_[cur_];
        if (d == '\\') {
          ++cur_;
          hi = static_cast<unsigned char>(parse_escape("character class"));
        } else {
          hi = static_cast<unsigned char>(d);
          ++cur_;
        }
        if (hi < lo) fail("character range out of order");
      }
      out.ranges.emplace_back(lo, hi);
    }
  }
};

}  // namespace detail

class grammar {
public:
  // Compiles grammar notation into an executable grammar.  Rejects syntax
  // errors, duplicate or undefined rules, and left recursion (direct,
  // indirect, or through nullable prefixes), all with source positions.
  static grammar compile(std::string_view source) {
    grammar g;
    g.rules_ = detail::notation_parser(source).parse();
    if (g.rules_.empty()) throw grammar_error("grammar defines no rules", {1, 1});
    for (std::size_t i = 0; i < g.rules_.size(); ++i) {
      auto [it, inserted] = g.index_.emplace(g.rules_[i].name, static_cast<int>(i));
      if (!inserted)
        throw grammar_error("rule '" + g.rules_[i].name + "' redefined", g.rules_[i].where);
    }
    for (auto& r : g.rules_) g.resolve_refs(r.body);
    g.check_left_recursion();
    return g;
  }

  int rule_index(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? -1 : it->second;
  }

  const rule_def& rule(int index) const { return rules_[static_cast<std::size_t>(index)]; }
  const std::string& rule_name(int index) const { return rule(index).name; }
  std::size_t size() const { return rules_.size(); }

private:
  std::vector<rule_def> rules_;
  std::unordered_map<std::string, int> index_;

  void resolve_refs(expr& e) {
    if (e.kind == expr_kind::rule_ref) {
      auto it = index_.find(e.text);
      if (it == index_.end())
        throw grammar_error("reference to undefined rule '" + e.text + "'", e.where);
      e.target = it->second;
    }
    for (auto& c : e.children) resolve_refs(c);
  }

  bool expr_nullable(const expr& e, const std::vector<bool>& rule_nullable) const {
    switch (e.kind) {
      case expr_kind::literal: return e.text.empty();
      case expr_kind::char_class:
      case expr_kind::any: return false;
      case expr_kind::sequence:
        for (const auto& c : e.children)
          if (!expr_nullable(c, rule_nullable)) return false;
        return true;
      case expr_kind::choice:
        for (const auto& c : e.children)
          if (expr_nullable(c, rule_nullable)) return true;
        return false;
      case expr_kind::star:
      case expr_kind::optional:
      case expr_kind::and_pred:
      case expr_kind::not_pred: return true;
      case expr_kind::plus: return expr_nullable(e.children[0], rule_nullable);
      case expr_kind::rule_ref: return rule_nullable[static_cast<std::size_t>(e.target)];
    }
    return false;
  }

  // Rules reachable at the leftmost edge of e, given which rules can match
  // without consuming input.  An edge from rule A to rule B here means a
  // match of A may invoke B at the same input position.
  void head_rules(const expr& e, const std::vector<bool>& rule_nullable,
                  std::vector<int>& out) const {
    switch (e.kind) {
      case expr_kind::literal:
      case expr_kind::char_class:
      case expr_kind::any: return;
      case expr_kind::sequence:
        for (const auto& c : e.children) {
          head_rules(c, rule_nullable, out);
          if (!expr_nullable(c, rule_nullable)) return;
        }
        return;
      case expr_kind::choice:
        for (const auto& c : e.children) head_rules(c, rule_nullable, out);
        return;
      case expr_kind::star:
      case expr_kind::plus:
      case expr_kind::optional:
      case expr_kind::and_pred:
      case expr_kind::not_pred:
        head_rules(e.children[0], rule_nullable, out);
        return;
      case expr_kind::rule_ref:
        out.push_back(e.target);
        return;
    }
  }

  void check_left_recursion() const {
    const std::size_t n = rules_.size();
    std::vector<bool> nullable(n, false);
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (!nullable[i] && expr_nullable(rules_[i].body, nullable)) {
          nullable[i] = true;
          changed = true;
        }
      }
    }
    std::vector<std::vector<int>> heads(n);
    for (std::size_t i = 0; i < n; ++i) head_rules(rules_[i].body, nullable, heads[i]);

    // DFS cycle detection over the head graph.
    std::vector<int> state(n, 0);  // 0 unvisited, 1 on stack, 2 done
    for (std::size_t i = 0; i < n; ++i) {
      if (state[i] == 0) dfs_cycle(static_cast<int>(i), heads, state);
    }
  }

  void dfs_cycle(int r, const std::vector<std::vector<int>>& heads,
                 std::vector<int>& state) const {
    state[static_cast<std::size_t>(r)] = 1;
    for (int next : heads[static_cast<std::size_t>(r)]) {
      if (state[static_cast<std::size_t>(next)] == 1)
        throw grammar_error("left recursion involving rule '" +
                                rules_[static_cast<std::size_t>(next)].name + "'",
                            rules_[static_cast<std::size_t>(next)].where);
      if (state[static_cast<std::size_t>(next)] == 0) dfs_cycle(next, heads, state);
    }
    state[static_cast<std::size_t>(r)] = 2;
  }
};

inline grammar compile_grammar(std::string_view source) { return grammar::compile(source); }

namespace detail {

class matcher {
public:
  matcher(const grammar& g, std::string_view input, bool memoize)
      : g_(g), in_(input), memo_on_(memoize) {
    if (memo_on_) memo_.resize(g_.size() * (in_.size() + 1));
  }

  match_result run(int start_rule) {
    match_result res;
    std::size_t end = 0;
    node_ptr node;
    if (eval_rule(start_rule, 0, end, node)) {
      res.root = std::move(node);
      res.end = end;
    }
    res.farthest = farthest_;
    res.evaluations = evals_;
    return res;
  }

private:
  struct memo_entry {
    std::int8_t state = 0;  // 0 unknown, 1 fail, 2 success
    std::size_t end = 0;
    node_ptr node;
  };

  const grammar& g_;
  std::string_view in_;
  bool memo_on_;
  std::vector<memo_entry> memo_;
  std::size_t farthest_ = 0;
  std::size_t evals_ = 0;

  memo_entry& slot(int rule, std::size_t pos) {
    return memo_[static_cast<std::size_t>(rule) * (in_.size() + 1) + pos];
  }

  void note_failure(std::size_t pos) {
    if (pos > farthest_) farthest_ = pos;
  }

  bool eval_rule(int rule, std::size_t pos, std::size_t& end, node_ptr& out) {
    if (memo_on_) {
      memo_entry& m = slot(rule, pos);
      if (m.state == 1) return false;
      if (m.state == 2) {
        end = m.end;
        out = m.node;
        return true;
      }
    }
    ++evals_;
    std::vector<node_ptr> kids;
    std::size_t body_end = pos;
    bool ok = eval(g_.rule(rule).body, pos, body_end, kids);
    if (ok) {
      auto node = std::make_shared<parse_node>();
      node->rule = rule;
      node->begin = pos;
      node->end = body_end;
      node->children = std::move(kids);
      if (memo_on_) {
        memo_entry& m = slot(rule, pos);
        m.state = 2;
        m.end = body_end;
        m.node = node;
      }
      end = body_end;
      out = std::move(node);
      return true;
    }
    if (memo_on_) slot(rule, pos).state = 1;
    return false;
  }

  bool eval(const expr& e, std::size_t pos, std::size_t& end,
            std::vector<node_ptr>& kids) {
    switch (e.kind) {
      case expr_kind::literal: {
        for (std::size_t i = 0; i < e.text.size(); ++i) {
          if (pos + i >= in_.size() || in_[pos + i] != e.text[i]) {
            note_failure(pos + i);
            return false;
          }
        }
        end = pos + e.text.size();
        return true;
      }
      case expr_kind::char_class: {
        if (pos < in_.size()) {
          auto b = static_cast<unsigned char>(in_[pos]);
          for (auto [lo, hi] : e.ranges) {
            if (b >= lo && b <= hi) {
              end = pos + 1;
              return true;
            }
          }
        }
        note_failure(pos);
        return false;
      }
      case expr_kind::any: {
        if (pos < in_.size()) {
          end = pos + 1;
          return true;
        }
        note_failure(pos);
        return false;
      }
      case expr_kind::sequence: {
        std::size_t mark = kids.size();
        std::size_t at = pos;
        for (const auto& c : e.children) {
          std::size_t next = at;
          if (!eval(c, at, next, kids)) {
            kids.resize(mark);
            return false;
          }
          at = next;
        }
        end = at;
        return true;
      }
      case expr_kind::choice: {
        std::size_t mark = kids.size();
        for (const auto& c : e.children) {
          std::size_t next = pos;
          if (eval(c, pos, next, kids)) {
            end = next;
            return true;
          }
          kids.resize(mark);
        }
        return false;
      }
      case expr_kind::star: {
        std::size_t at = pos;
        while (true) {
          std::size_t mark = kids.size();
          std::size_t next = at;
          if (!eval(e.children[0], at, next, kids)) {
            kids.resize(mark);
            break;
          }
          if (next == at) break;  // repetition of an empty match stops
          at = next;
        }
        end = at;
        return true;
      }
      case expr_kind::plus: {
        std::size_t at = pos;
        std::size_t first_end = at;
        std::size_t mark = kids.size();
        if (!eval(e.children[0], at, first_end, kids)) {
          kids.resize(mark);
          return false;
        }
        at = first_end;
        while (true) {
          std::size_t iter_mark = kids.size();
          std::size_t next = at;
          if (!eval(e.children[0], at, next, kids)) {
            kids.resize(iter_mark);
            break;
          }
          if (next == at) break;
          at = next;
        }
        end = at;
        return true;
      }
      case expr_kind::optional: {
        std::size_t mark = kids.size();
        std::size_t next = pos;
        if (eval(e.children[0], pos, next, kids)) {
          end = next;
        } else {
          kids.resize(mark);
          end = pos;
        }
        return true;
      }
      case expr_kind::and_pred: {
        std::vector<node_ptr> scratch;
        std::size_t next = pos;
        if (!eval(e.children[0], pos, next, scratch)) return false;
        end = pos;
        return true;
      }
      case expr_kind::not_pred: {
        std::vector<node_ptr> scratch;
        std::size_t next = pos;
        if (eval(e.children[0], pos, next, scratch)) return false;
        end = pos;
        return true;
      }
      case expr_kind::rule_ref: {
        std::size_t next = pos;
        node_ptr node;
        if (!eval_rule(e.target, pos, next, node)) return false;
        kids.push_back(std::move(node));
        end = next;
        return true;
      }
    }
    return false;
  }
};

}  // namespace detail

// Matches `start_rule` against a prefix of `input`.  The returned tree, end
// offset, and farthest position are identical with memoization on and off;
// with it on, rule evaluations are bounded by rules * (input length + 1).
inline match_result match(const grammar& g, std::string_view start_rule,
                          std::string_view input, match_options opts = {}) {
  int r = g.rule_index(start_rule);
  if (r < 0) throw std::invalid_argument("unknown start rule '" + std::string(start_rule) + "'");
  detail::matcher m(g, input, opts.memoize);
  return m.run(r);
}

}  // namespace sforge::peg

#endif  // SFORGE_PEG_HPP
