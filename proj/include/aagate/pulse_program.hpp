#pragma once

//
// Line-oriented pulse-program language.
//
//   program   := line*
//   line      := [ statement ] [ '#' comment ] EOL
//   statement := 'param' IDENT '=' expr
//              | 'pulse' IDENT axis expr [ 'dur' expr ]
//              | 'delay' expr
//   axis      := [ '-' ] ( 'x' | 'y' )
//   expr      := term  ( ('+' | '-') term )*
//   term      := unary ( ('*' | '/') unary )*
//   unary     := '-' unary | primary
//   primary   := NUMBER | IDENT | '(' expr ')'
//
// Angles are radians, durations seconds. 'pi' is always bound; 'J' is bound
// at resolve time from the spin system (declaring either as a param is an
// error). An expression runs to the end of the line or to the 'dur' keyword.
// There is no control flow.
//

#include <cctype>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "aagate/spin_system.hpp"

namespace aagate {

struct ParseError : std::runtime_error {
  int line, col;
  ParseError(int line_, int col_, const std::string& what_)
      : std::runtime_error("parse error at " + std::to_string(line_) + ":" +
                           std::to_string(col_) + ": " + what_),
        line(line_),
        col(col_) {}
};

struct EvalError : std::runtime_error {
  int line, col;
  EvalError(int line_, int col_, const std::string& what_)
      : std::runtime_error("eval error at " + std::to_string(line_) + ":" +
                           std::to_string(col_) + ": " + what_),
        line(line_),
        col(col_) {}
};

struct ResolveError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Kind { number, ident, negate, binary };
  Kind kind = Kind::number;
  double number = 0.0;
  std::string ident;
  char op = 0;  // '+', '-', '*', '/'
  ExprPtr lhs, rhs;
  int line = 0, col = 0;

  static ExprPtr make_number(double v, int line, int col) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::number;
    e->number = v;
    e->line = line;
    e->col = col;
    return e;
  }
  static ExprPtr make_ident(std::string name, int line, int col) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::ident;
    e->ident = std::move(name);
    e->line = line;
    e->col = col;
    return e;
  }
  static ExprPtr make_negate(ExprPtr inner, int line, int col) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::negate;
    e->lhs = std::move(inner);
    e->line = line;
    e->col = col;
    return e;
  }
  static ExprPtr make_binary(char op, ExprPtr l, ExprPtr r, int line, int col) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::binary;
    e->op = op;
    e->lhs = std::move(l);
    e->rhs = std::move(r);
    e->line = line;
    e->col = col;
    return e;
  }
};

// Structural equality, ignoring source positions.
inline bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
  if (!a || !b) return !a && !b;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case Expr::Kind::number:
      return a->number == b->number;
    case Expr::Kind::ident:
      return a->ident == b->ident;
    case Expr::Kind::negate:
      return expr_equal(a->lhs, b->lhs);
    case Expr::Kind::binary:
      return a->op == b->op && expr_equal(a->lhs, b->lhs) &&
             expr_equal(a->rhs, b->rhs);
  }
  return false;
}

enum class AxisDir { x, y, neg_x, neg_y };

inline double axis_phase(AxisDir a) {
  switch (a) {
    case AxisDir::x: return 0.0;
    case AxisDir::y: return 0.5 * pi;
    case AxisDir::neg_x: return pi;
    case AxisDir::neg_y: return 1.5 * pi;
  }
  return 0.0;
}

inline const char* axis_text(AxisDir a) {
  switch (a) {
    case AxisDir::x: return "x";
    case AxisDir::y: return "y";
    case AxisDir::neg_x: return "-x";
    case AxisDir::neg_y: return "-y";
  }
  return "x";
}

struct ParamDecl {
  std::string name;
  ExprPtr value;
  int line = 0;
};

struct PulseStmt {
  std::string channel;
  AxisDir axis = AxisDir::x;
  ExprPtr flip;
  ExprPtr dur;  // null -> instantaneous
  int line = 0;
};

struct DelayStmt {
  ExprPtr duration;
  int line = 0;
};

using EventStmt = std::variant<PulseStmt, DelayStmt>;

struct PulseProgram {
  std::vector<ParamDecl> params;
  std::vector<EventStmt> events;
};

inline bool program_equal(const PulseProgram& a, const PulseProgram& b) {
  if (a.params.size() != b.params.size() || a.events.size() != b.events.size())
    return false;
  for (size_t i = 0; i < a.params.size(); ++i)
    if (a.params[i].name != b.params[i].name ||
        !expr_equal(a.params[i].value, b.params[i].value))
      return false;
  for (size_t i = 0; i < a.events.size(); ++i) {
    const auto* pa = std::get_if<PulseStmt>(&a.events[i]);
    const auto* pb = std::get_if<PulseStmt>(&b.events[i]);
    if ((pa == nullptr) != (pb == nullptr)) return false;
    if (pa) {
      if (pa->channel != pb->channel || pa->axis != pb->axis ||
          !expr_equal(pa->flip, pb->flip) || !expr_equal(pa->dur, pb->dur))
        return false;
    } else {
      const auto& da = std::get<DelayStmt>(a.events[i]);
      const auto& db = std::get<DelayStmt>(b.events[i]);
      if (!expr_equal(da.duration, db.duration)) return false;
    }
  }
  return true;
}

namespace detail {

struct Token {
  enum class Kind { number, ident, punct, eol, eof };
  Kind kind = Kind::eof;
  double number = 0.0;
  std::string text;
  char punct = 0;
  int line = 1, col = 1;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) {}

  Token next() {
    for (;;) {
      if (pos_ >= src_.size()) return make(Token::Kind::eof);
      char c = src_[pos_];
      if (c == '\r') { ++pos_; ++col_; continue; }
      if (c == '\n') {
        Token t = make(Token::Kind::eol);
        ++pos_;
        ++line_;
        col_ = 1;
        return t;
      }
      if (c == ' ' || c == '\t') { ++pos_; ++col_; continue; }
      if (c == '#') {  // comment runs to end of line
        while (pos_ < src_.size() && src_[pos_] != '\n') { ++pos_; ++col_; }
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(c))) return lex_number();
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_')
        return lex_ident();
      if (c == '+' || c == '-' || c == '*' || c == '/' || c == '(' ||
          c == ')' || c == '=') {
        Token t = make(Token::Kind::punct);
        t.punct = c;
        ++pos_;
        ++col_;
        return t;
      }
      throw ParseError(line_, col_,
                       std::string("unexpected character '") + c + "'");
    }
  }

 private:
  Token make(Token::Kind k) const {
    Token t;
    t.kind = k;
    t.line = line_;
    t.col = col_;
    return t;
  }

  Token lex_number() {
    Token t = make(Token::Kind::number);
    size_t start = pos_;
    while (pos_ < src_.size() &&
           std::isdigit(static_cast<unsigned char>(src_[pos_])))
      advance();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      advance();
      while (pos_ < src_.size() &&
             std::isdigit(static_cast<unsigned char>(src_[pos_])))
        advance();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      size_t mark = pos_;
      int mark_col = col_;
      advance();
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-'))
        advance();
      if (pos_ < src_.size() &&
          std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        while (pos_ < src_.size() &&
               std::isdigit(static_cast<unsigned char>(src_[pos_])))
          advance();
      } else {  // not an exponent after all ("1e" then junk): back off
        pos_ = mark;
        col_ = mark_col;
      }
    }
    t.text = src_.substr(start, pos_ - start);
    t.number = std::stod(t.text);
    return t;
  }

  Token lex_ident() {
    Token t = make(Token::Kind::ident);
    size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
            src_[pos_] == '_'))
      advance();
    t.text = src_.substr(start, pos_ - start);
    return t;
  }

  void advance() { ++pos_; ++col_; }

  const std::string& src_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
};

class Parser {
 public:
  explicit Parser(const std::string& src) : lexer_(src) { shift(); }

  PulseProgram parse() {
    PulseProgram prog;
    for (;;) {
      while (tok_.kind == Token::Kind::eol) shift();
      if (tok_.kind == Token::Kind::eof) break;
      parse_statement(prog);
      if (tok_.kind != Token::Kind::eol && tok_.kind != Token::Kind::eof)
        throw ParseError(tok_.line, tok_.col, "unexpected token after statement");
    }
    return prog;
  }

 private:
  void parse_statement(PulseProgram& prog) {
    if (tok_.kind != Token::Kind::ident)
      throw ParseError(tok_.line, tok_.col, "expected statement");
    if (tok_.text == "param") {
      shift();
      parse_param(prog);
    } else if (tok_.text == "pulse") {
      shift();
      parse_pulse(prog);
    } else if (tok_.text == "delay") {
      int line = tok_.line;
      shift();
      DelayStmt d;
      d.duration = parse_expr();
      d.line = line;
      prog.events.emplace_back(std::move(d));
    } else {
      throw ParseError(tok_.line, tok_.col,
                       "unknown keyword '" + tok_.text + "'");
    }
  }

  void parse_param(PulseProgram& prog) {
    if (tok_.kind != Token::Kind::ident)
      throw ParseError(tok_.line, tok_.col, "expected param name");
    if (tok_.text == "pi" || tok_.text == "J")
      throw ParseError(tok_.line, tok_.col,
                       "reserved identifier '" + tok_.text + "'");
    ParamDecl decl;
    decl.name = tok_.text;
    decl.line = tok_.line;
    for (const auto& p : prog.params)
      if (p.name == decl.name)
        throw ParseError(tok_.line, tok_.col,
                         "duplicate param '" + decl.name + "'");
    shift();
    if (tok_.kind != Token::Kind::punct || tok_.punct != '=')
      throw ParseError(tok_.line, tok_.col, "expected '='");
    shift();
    decl.value = parse_expr();
    prog.params.push_back(std::move(decl));
  }

  void parse_pulse(PulseProgram& prog) {
    if (tok_.kind != Token::Kind::ident)
      throw ParseError(tok_.line, tok_.col, "expected channel name");
    PulseStmt p;
    p.channel = tok_.text;
    p.line = tok_.line;
    shift();
    p.axis = parse_axis();
    p.flip = parse_expr();
    if (tok_.kind == Token::Kind::ident && tok_.text == "dur") {
      shift();
      p.dur = parse_expr();
    }
    prog.events.emplace_back(std::move(p));
  }

  AxisDir parse_axis() {
    bool neg = false;
    int line = tok_.line, col = tok_.col;
    if (tok_.kind == Token::Kind::punct && tok_.punct == '-') {
      neg = true;
      shift();
    }
    if (tok_.kind == Token::Kind::ident && tok_.text == "x") {
      shift();
      return neg ? AxisDir::neg_x : AxisDir::x;
    }
    if (tok_.kind == Token::Kind::ident && tok_.text == "y") {
      shift();
      return neg ? AxisDir::neg_y : AxisDir::y;
    }
    throw ParseError(line, col, "expected axis (x, y, -x or -y)");
  }

  ExprPtr parse_expr() {
    ExprPtr lhs = parse_term();
    while (tok_.kind == Token::Kind::punct &&
           (tok_.punct == '+' || tok_.punct == '-')) {
      char op = tok_.punct;
      int line = tok_.line, col = tok_.col;
      shift();
      lhs = Expr::make_binary(op, std::move(lhs), parse_term(), line, col);
    }
    return lhs;
  }

  ExprPtr parse_term() {
    ExprPtr lhs = parse_unary();
    while (tok_.kind == Token::Kind::punct &&
           (tok_.punct == '*' || tok_.punct == '/')) {
      char op = tok_.punct;
      int line = tok_.line, col = tok_.col;
      shift();
      lhs = Expr::make_binary(op, std::move(lhs), parse_unary(), line, col);
    }
    return lhs;
  }

  ExprPtr parse_unary() {
    if (tok_.kind == Token::Kind::punct && tok_.punct == '-') {
      int line = tok_.line, col = tok_.col;
      shift();
      return Expr::make_negate(parse_unary(), line, col);
    }
    return parse_primary();
  }

  ExprPtr parse_primary() {
    if (tok_.kind == Token::Kind::number) {
      ExprPtr e = Expr::make_number(tok_.number, tok_.line, tok_.col);
      shift();
      return e;
    }
    if (tok_.kind == Token::Kind::ident && tok_.text != "dur") {
      ExprPtr e = Expr::make_ident(tok_.text, tok_.line, tok_.col);
      shift();
      return e;
    }
    if (tok_.kind == Token::Kind::punct && tok_.punct == '(') {
      shift();
      ExprPtr e = parse_expr();
      if (tok_.kind != Token::Kind::punct || tok_.punct != ')')
        throw ParseError(tok_.line, tok_.col, "expected ')'");
      shift();
      return e;
    }
    throw ParseError(tok_.line, tok_.col, "expected expression");
  }

  void shift() { tok_ = lexer_.next(); }

  Lexer lexer_;
  Token tok_;
};

inline void render_expr(const ExprPtr& e, std::ostringstream& out) {
  switch (e->kind) {
    case Expr::Kind::number:
      out << format_double(e->number);
      break;
    case Expr::Kind::ident:
      out << e->ident;
      break;
    case Expr::Kind::negate:
      out << "-";
      if (e->lhs->kind == Expr::Kind::binary) {
        out << "(";
        render_expr(e->lhs, out);
        out << ")";
      } else {
        render_expr(e->lhs, out);
      }
      break;
    case Expr::Kind::binary: {
      auto wrap = [&](const ExprPtr& child, bool right_side) {
        bool paren = false;
        if (child->kind == Expr::Kind::binary) {
          bool parent_mul = e->op == '*' || e->op == '/';
          bool child_mul = child->op == '*' || child->op == '/';
          // Parenthesize whenever precedence or right-associativity could
          // reassociate the tree on reparse.
          paren = (parent_mul && !child_mul) ||
                  (right_side && (e->op == '-' || e->op == '/' ||
                                  (parent_mul && child_mul)));
        } else if (child->kind == Expr::Kind::negate && right_side) {
          paren = true;
        }
        if (paren) out << "(";
        render_expr(child, out);
        if (paren) out << ")";
      };
      wrap(e->lhs, false);
      out << " " << e->op << " ";
      wrap(e->rhs, true);
      break;
    }
  }
}

}  // namespace detail

inline PulseProgram parse(const std::string& source) {
  return detail::Parser(source).parse();
}

// Render a program back to source text. Round-tripping through parse()
// reproduces a structurally identical AST.
inline std::string render(const PulseProgram& prog) {
  std::ostringstream out;
  for (const auto& p : prog.params) {
    out << "param " << p.name << " = ";
    detail::render_expr(p.value, out);
    out << "\n";
  }
  for (const auto& ev : prog.events) {
    if (const auto* p = std::get_if<PulseStmt>(&ev)) {
      out << "pulse " << p->channel << " " << axis_text(p->axis) << " ";
      detail::render_expr(p->flip, out);
      if (p->dur) {
        out << " dur ";
        detail::render_expr(p->dur, out);
      }
      out << "\n";
    } else {
      const auto& d = std::get<DelayStmt>(ev);
      out << "delay ";
      detail::render_expr(d.duration, out);
      out << "\n";
    }
  }
  return out.str();
}

struct Bindings {
  std::map<std::string, double> values;

  static Bindings with_builtins(std::optional<double> j = std::nullopt) {
    Bindings b;
    b.values["pi"] = pi;
    if (j) b.values["J"] = *j;
    return b;
  }
};

inline double eval_expr(const ExprPtr& e, const Bindings& bindings) {
  switch (e->kind) {
    case Expr::Kind::number:
      return e->number;
    case Expr::Kind::ident: {
      auto it = bindings.values.find(e->ident);
      if (it == bindings.values.end())
        throw EvalError(e->line, e->col,
                        "unbound identifier '" + e->ident + "'");
      return it->second;
    }
    case Expr::Kind::negate:
      return -eval_expr(e->lhs, bindings);
    case Expr::Kind::binary: {
      double l = eval_expr(e->lhs, bindings);
      double r = eval_expr(e->rhs, bindings);
      switch (e->op) {
        case '+': return l + r;
        case '-': return l - r;
        case '*': return l * r;
        case '/':
          if (r == 0.0) throw EvalError(e->line, e->col, "division by zero");
          return l / r;
      }
      throw EvalError(e->line, e->col, "unknown operator");
    }
  }
  throw EvalError(e->line, e->col, "malformed expression");
}

// One contiguous piece of a resolved timeline: either a pulse (possibly
// zero-duration) or a free-evolution delay.
struct TimelineSegment {
  double start = 0.0;
  double duration = 0.0;
  std::optional<PulseSpec> pulse;  // nullopt -> delay

  bool is_pulse() const { return pulse.has_value(); }
};

struct EventTimeline {
  std::vector<TimelineSegment> segments;
  double total_duration = 0.0;
  std::map<std::string, double> bindings;  // evaluated params, pi and J
};

// Numeric timeline for a program. Parameter expressions evaluate in
// declaration order (forward references are unbound); overrides rebind
// declared params before anything is evaluated. J comes from the spin
// system, never from the program.
inline EventTimeline resolve(const PulseProgram& prog,
                             const std::map<std::string, double>& overrides,
                             const SpinSystem& sys) {
  for (const auto& [name, value] : overrides) {
    bool declared = false;
    for (const auto& p : prog.params) declared |= (p.name == name);
    if (!declared)
      throw ResolveError("override of undeclared param '" + name + "'");
  }

  Bindings env = Bindings::with_builtins(sys.j_coupling);
  for (const auto& p : prog.params) {
    auto ov = overrides.find(p.name);
    env.values[p.name] =
        (ov != overrides.end()) ? ov->second : eval_expr(p.value, env);
  }

  EventTimeline tl;
  tl.bindings = env.values;
  double t = 0.0;
  for (const auto& ev : prog.events) {
    TimelineSegment seg;
    seg.start = t;
    if (const auto* p = std::get_if<PulseStmt>(&ev)) {
      auto site = sys.site_for_channel(p->channel);
      if (!site)
        throw ResolveError("unknown channel '" + p->channel + "' at line " +
                           std::to_string(p->line));
      PulseSpec spec;
      spec.channel = *site;
      spec.phase_rad = axis_phase(p->axis);
      spec.flip_rad = eval_expr(p->flip, env);
      spec.duration_s = p->dur ? eval_expr(p->dur, env) : 0.0;
      if (spec.duration_s < 0.0)
        throw ResolveError("negative duration at line " +
                           std::to_string(p->line));
      seg.duration = spec.duration_s;
      seg.pulse = spec;
    } else {
      const auto& d = std::get<DelayStmt>(ev);
      seg.duration = eval_expr(d.duration, env);
      if (seg.duration < 0.0)
        throw ResolveError("negative duration at line " +
                           std::to_string(d.line));
    }
    t += seg.duration;
    tl.segments.push_back(std::move(seg));
  }
  tl.total_duration = t;
  return tl;
}

// The idealized version of a timeline: every pulse becomes a zero-duration
// kick with the same flip angle and phase, delays keep their length.
inline EventTimeline collapse_pulses(const EventTimeline& tl) {
  EventTimeline out;
  out.bindings = tl.bindings;
  double t = 0.0;
  for (const auto& seg : tl.segments) {
    TimelineSegment s = seg;
    s.start = t;
    if (s.pulse) {
      s.pulse->duration_s = 0.0;
      s.duration = 0.0;
    }
    t += s.duration;
    out.segments.push_back(std::move(s));
  }
  out.total_duration = t;
  return out;
}

}  // namespace aagate
