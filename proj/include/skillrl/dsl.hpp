#pragma once
// The action language agents write: a line-oriented mini language with
// function definition, calls, loops, api statements, and print. Every input
// string either parses or produces a parse error; execution never aborts the
// process. Values are JSON (null, bool, number, string, list, object).
//
// Grammar (see docs/dsl.md for the EBNF):
//   stmt  := "api" app "." method "(" args ")"
//          | "let" ident "=" expr
//          | "def" ident "(" params ")" ":" block
//          | "call" ident "(" args ")"
//          | "for" ident "in" expr ":" block
//          | "print" "(" expr ")"
//          | "done" "(" ")"
//   expr  := primary { "." ident }
//   primary := literal | ident | "[" args "]" | "api" app "." method "(" args ")"
// Blocks are indented statement lists or a single inline statement after the
// colon. Lines starting with '#' are comments.

#include <cctype>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "skillrl/common.hpp"

namespace skillrl::dsl {

using Value = nlohmann::json;

// --------------------------------------------------------------------------
// AST

enum class ExprKind { Literal, Var, ListLit, Field, ApiCall };

struct Expr {
  ExprKind kind = ExprKind::Literal;
  Value literal;
  std::string name;         // Var name, Field name, or ApiCall "app.method"
  std::vector<Expr> parts;  // ListLit elements, ApiCall args, Field base at [0]
};

enum class StmtKind { Api, Let, Def, Call, For, Print, Done };

struct Stmt {
  StmtKind kind = StmtKind::Done;
  std::string name;                 // api "app.method" / let var / def or call name / for var
  std::vector<std::string> params;  // def parameters
  std::vector<Expr> args;           // api/call args; let/print/for expression at [0]
  std::vector<Stmt> body;           // def/for block
  std::string body_source;          // def only: original dedented body text
  int line = 0;
};

struct Program {
  std::vector<Stmt> stmts;
};

struct ParseOutcome {
  std::optional<Program> program;
  int error_line = 0;
  std::string error;
  bool ok() const { return program.has_value(); }
};

// --------------------------------------------------------------------------
// Parser

namespace detail {

struct Line {
  int number = 0;
  int indent = 0;
  bool comment = false;
  std::string text;  // trimmed content
  std::string raw;   // original text
};

struct LineParseError {
  int line;
  std::string message;
};

// Tokenizer over one logical line.
class LineLexer {
 public:
  LineLexer(std::string_view text, int line) : text_(text), line_(line) {}

  // Token kinds: ident, number, string, symbol. Lookahead of one.
  struct Token {
    enum Kind { Ident, Number, String, Symbol, End } kind = End;
    std::string text;
    Value value;  // Number/String literal value
  };

  const Token& peek() {
    if (!current_) current_ = lex();
    return *current_;
  }

  Token take() {
    Token t = peek();
    current_.reset();
    return t;
  }

  bool accept_symbol(char c) {
    if (peek().kind == Token::Symbol && peek().text.size() == 1 && peek().text[0] == c) {
      take();
      return true;
    }
    return false;
  }

  void expect_symbol(char c) {
    if (!accept_symbol(c)) fail(std::string("expected '") + c + "'");
  }

  std::string expect_ident() {
    if (peek().kind != Token::Ident) fail("expected identifier");
    return take().text;
  }

  bool at_end() { return peek().kind == Token::End; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw LineParseError{line_, msg};
  }

 private:
  Token lex() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
    if (pos_ >= text_.size() || text_[pos_] == '#') return {};
    char c = text_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
        ++pos_;
      return {Token::Ident, std::string(text_.substr(start, pos_ - start)), {}};
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '-' && pos_ + 1 < text_.size() &&
         std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])))) {
      std::size_t start = pos_;
      ++pos_;
      bool is_double = false;
      while (pos_ < text_.size() &&
             (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
        if (text_[pos_] == '.') {
          // Field access on a literal is not part of the grammar, so a dot
          // inside a number always extends the number.
          if (is_double) fail("malformed number");
          is_double = true;
        }
        ++pos_;
      }
      std::string num(text_.substr(start, pos_ - start));
      Value v = is_double ? Value(std::stod(num)) : Value(std::stoll(num));
      return {Token::Number, num, v};
    }
    if (c == '"') {
      ++pos_;
      std::string out;
      while (pos_ < text_.size() && text_[pos_] != '"') {
        if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) {
          char e = text_[pos_ + 1];
          if (e == 'n') out += '\n';
          else if (e == 't') out += '\t';
          else if (e == '"') out += '"';
          else if (e == '\\') out += '\\';
          else fail("unknown escape in string");
          pos_ += 2;
        } else {
          out += text_[pos_++];
        }
      }
      if (pos_ >= text_.size()) fail("unterminated string");
      ++pos_;  // closing quote
      return {Token::String, out, Value(out)};
    }
    static const std::string symbols = "()[]=,.:";
    if (symbols.find(c) != std::string::npos) {
      ++pos_;
      return {Token::Symbol, std::string(1, c), {}};
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  std::string_view text_;
  int line_;
  std::size_t pos_ = 0;
  std::optional<Token> current_;
};

class Parser {
 public:
  explicit Parser(std::string_view source) {
    int number = 0;
    std::size_t start = 0;
    while (start <= source.size()) {
      std::size_t end = source.find('\n', start);
      std::string_view raw = source.substr(
          start, end == std::string_view::npos ? std::string_view::npos : end - start);
      ++number;
      Line ln;
      ln.number = number;
      ln.raw = std::string(raw);
      std::size_t i = 0;
      while (i < raw.size() && (raw[i] == ' ' || raw[i] == '\t')) ++i;
      ln.indent = static_cast<int>(i);
      std::string_view rest = raw.substr(i);
      while (!rest.empty() && (rest.back() == '\r' || rest.back() == ' ' || rest.back() == '\t'))
        rest.remove_suffix(1);
      ln.text = std::string(rest);
      ln.comment = !ln.text.empty() && ln.text[0] == '#';
      if (!ln.text.empty()) lines_.push_back(ln);
      if (end == std::string_view::npos) break;
      start = end + 1;
    }
  }

  Program parse_program() {
    Program prog;
    std::size_t i = 0;
    while (i < lines_.size()) {
      if (lines_[i].comment) {
        ++i;
        continue;
      }
      int base = lines_[i].indent;
      prog.stmts.push_back(parse_stmt(i, base));
    }
    return prog;
  }

 private:
  // Parses the statement at lines_[i] (advancing i past it and any block).
  Stmt parse_stmt(std::size_t& i, int enclosing_indent) {
    const Line& ln = lines_[i];
    if (ln.indent > enclosing_indent && i > 0)
      throw LineParseError{ln.number, "unexpected indentation"};
    LineLexer lex(ln.text, ln.number);
    std::string head = lex.expect_ident();
    Stmt stmt;
    stmt.line = ln.number;
    if (head == "api") {
      stmt.kind = StmtKind::Api;
      stmt.name = parse_api_name(lex);
      stmt.args = parse_args(lex);
      end_of_line(lex);
      ++i;
    } else if (head == "let") {
      stmt.kind = StmtKind::Let;
      stmt.name = lex.expect_ident();
      lex.expect_symbol('=');
      stmt.args.push_back(parse_expr(lex));
      end_of_line(lex);
      ++i;
    } else if (head == "call") {
      stmt.kind = StmtKind::Call;
      stmt.name = lex.expect_ident();
      stmt.args = parse_args(lex);
      end_of_line(lex);
      ++i;
    } else if (head == "print") {
      stmt.kind = StmtKind::Print;
      lex.expect_symbol('(');
      stmt.args.push_back(parse_expr(lex));
      lex.expect_symbol(')');
      end_of_line(lex);
      ++i;
    } else if (head == "done") {
      stmt.kind = StmtKind::Done;
      lex.expect_symbol('(');
      lex.expect_symbol(')');
      end_of_line(lex);
      ++i;
    } else if (head == "def") {
      stmt.kind = StmtKind::Def;
      stmt.name = lex.expect_ident();
      lex.expect_symbol('(');
      if (!lex.accept_symbol(')')) {
        stmt.params.push_back(lex.expect_ident());
        while (lex.accept_symbol(',')) stmt.params.push_back(lex.expect_ident());
        lex.expect_symbol(')');
      }
      lex.expect_symbol(':');
      parse_block(lex, i, ln, stmt.body, &stmt.body_source);
    } else if (head == "for") {
      stmt.kind = StmtKind::For;
      stmt.name = lex.expect_ident();
      std::string kw = lex.expect_ident();
      if (kw != "in") lex.fail("expected 'in'");
      stmt.args.push_back(parse_expr(lex));
      lex.expect_symbol(':');
      parse_block(lex, i, ln, stmt.body, nullptr);
    } else {
      throw LineParseError{ln.number, "unknown statement '" + head + "'"};
    }
    return stmt;
  }

  // Block = rest of the header line (single inline statement) or the
  // following lines indented deeper than the header.
  void parse_block(LineLexer& lex, std::size_t& i, const Line& header,
                   std::vector<Stmt>& body, std::string* source_out) {
    if (!lex.at_end()) {
      // Inline form: everything after ':' is one statement.
      std::size_t colon = header.text.find(':');
      // def parameter lists contain no ':', so the first colon ends the header.
      std::string inline_text = header.text.substr(colon + 1);
      std::size_t first = inline_text.find_first_not_of(" \t");
      inline_text = first == std::string::npos ? "" : inline_text.substr(first);
      Parser sub(inline_text);
      if (sub.lines_.empty()) throw LineParseError{header.number, "empty block"};
      sub.lines_[0].number = header.number;
      std::size_t j = 0;
      body.push_back(sub.parse_stmt(j, sub.lines_[0].indent));
      if (j != sub.lines_.size())
        throw LineParseError{header.number, "trailing content after inline block"};
      if (source_out) *source_out = inline_text;
      ++i;
      return;
    }
    ++i;
    std::size_t begin = i;
    while (i < lines_.size() && lines_[i].indent > header.indent) ++i;
    std::size_t end = i;
    int block_indent = -1;
    for (std::size_t j = begin; j < end; ++j) {
      if (lines_[j].comment) continue;
      if (block_indent < 0) block_indent = lines_[j].indent;
      else if (lines_[j].indent < block_indent)
        throw LineParseError{lines_[j].number, "inconsistent indentation"};
    }
    if (block_indent < 0) throw LineParseError{header.number, "empty block"};
    i = begin;
    while (i < end) {
      if (lines_[i].comment) {
        ++i;
        continue;
      }
      body.push_back(parse_stmt(i, lines_[i].indent));
    }
    if (source_out) {
      std::string src;
      for (std::size_t j = begin; j < end; ++j) {
        const std::string& raw = lines_[j].raw;
        int cut = std::min(block_indent, lines_[j].indent);
        src += raw.substr(static_cast<std::size_t>(cut));
        src += '\n';
      }
      if (!src.empty()) src.pop_back();
      *source_out = src;
    }
  }

  std::string parse_api_name(LineLexer& lex) {
    std::string app = lex.expect_ident();
    lex.expect_symbol('.');
    std::string method = lex.expect_ident();
    return app + "." + method;
  }

  std::vector<Expr> parse_args(LineLexer& lex) {
    std::vector<Expr> args;
    lex.expect_symbol('(');
    if (lex.accept_symbol(')')) return args;
    args.push_back(parse_expr(lex));
    while (lex.accept_symbol(',')) args.push_back(parse_expr(lex));
    lex.expect_symbol(')');
    return args;
  }

  Expr parse_expr(LineLexer& lex) {
    Expr e = parse_primary(lex);
    while (lex.accept_symbol('.')) {
      Expr field;
      field.kind = ExprKind::Field;
      field.name = lex.expect_ident();
      field.parts.push_back(std::move(e));
      e = std::move(field);
    }
    return e;
  }

  Expr parse_primary(LineLexer& lex) {
    using Token = LineLexer::Token;
    Expr e;
    const Token& t = lex.peek();
    if (t.kind == Token::Number || t.kind == Token::String) {
      e.kind = ExprKind::Literal;
      e.literal = lex.take().value;
      return e;
    }
    if (t.kind == Token::Symbol && t.text == "[") {
      lex.take();
      e.kind = ExprKind::ListLit;
      if (lex.accept_symbol(']')) return e;
      e.parts.push_back(parse_expr(lex));
      while (lex.accept_symbol(',')) e.parts.push_back(parse_expr(lex));
      lex.expect_symbol(']');
      return e;
    }
    if (t.kind == Token::Ident) {
      std::string name = lex.take().text;
      if (name == "true" || name == "false") {
        e.kind = ExprKind::Literal;
        e.literal = Value(name == "true");
        return e;
      }
      if (name == "null") {
        e.kind = ExprKind::Literal;
        e.literal = Value(nullptr);
        return e;
      }
      if (name == "api") {
        e.kind = ExprKind::ApiCall;
        e.name = parse_api_name(lex);
        e.parts = parse_args(lex);
        return e;
      }
      e.kind = ExprKind::Var;
      e.name = name;
      return e;
    }
    lex.fail("expected expression");
  }

  void end_of_line(LineLexer& lex) {
    if (!lex.at_end()) lex.fail("trailing content");
  }

  std::vector<Line> lines_;
};

}  // namespace detail

inline ParseOutcome parse(std::string_view source) {
  ParseOutcome out;
  try {
    detail::Parser parser(source);
    out.program = parser.parse_program();
  } catch (const detail::LineParseError& e) {
    out.error_line = e.line;
    out.error = e.message;
  }
  return out;
}

// True when any line opens with a statement keyword; used to distinguish an
// attempted action (possibly malformed) from a prose-only response.
inline bool looks_like_code(std::string_view text) {
  static const char* kKeywords[] = {"api ", "let ", "def ", "call ", "for ",
                                    "print(", "print (", "done(", "done ("};
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    std::string_view line = text.substr(
        start, end == std::string_view::npos ? std::string_view::npos : end - start);
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t'))
      line.remove_prefix(1);
    for (const char* kw : kKeywords)
      if (line.substr(0, std::string_view(kw).size()) == kw) return true;
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return false;
}

// --------------------------------------------------------------------------
// Interpreter

struct FunctionDef {
  std::string name;
  std::vector<std::string> params;
  std::vector<Stmt> body;
  std::string body_source;
};

using FunctionTable = std::map<std::string, FunctionDef>;

struct ApiResult {
  bool ok = true;
  Value value;
  std::string error;  // names the failing call when !ok
};

using ApiDispatcher =
    std::function<ApiResult(const std::string& name, const std::vector<Value>& args)>;

struct ExecEvent {
  enum Kind { Def, CallUser, Api, Done } kind;
  std::string name;
  bool ok = true;
};

struct ExecOutcome {
  std::string output;
  bool is_error = false;
  std::string error;
  bool done = false;
  std::vector<ExecEvent> events;
};

namespace detail {

struct RuntimeErr {
  std::string message;
};

class Executor {
 public:
  Executor(const ApiDispatcher& api, FunctionTable& functions, ExecOutcome& out)
      : api_(api), functions_(functions), out_(out) {}

  void run(const std::vector<Stmt>& stmts, std::map<std::string, Value>& scope, int depth) {
    if (depth > kMaxDepth) throw RuntimeErr{"call depth limit exceeded"};
    for (const Stmt& s : stmts) {
      if (++budget_ > kMaxStatements) throw RuntimeErr{"statement budget exceeded"};
      switch (s.kind) {
        case StmtKind::Api:
          call_api(s.name, eval_args(s.args, scope, depth));
          break;
        case StmtKind::Let:
          scope[s.name] = eval(s.args[0], scope, depth);
          break;
        case StmtKind::Print: {
          Value v = eval(s.args[0], scope, depth);
          out_.output += v.is_string() ? v.get<std::string>() : v.dump();
          out_.output += '\n';
          break;
        }
        case StmtKind::Done:
          out_.done = true;
          out_.output += "task marked complete\n";
          out_.events.push_back({ExecEvent::Done, "done", true});
          break;
        case StmtKind::Def:
          functions_[s.name] = FunctionDef{s.name, s.params, s.body, s.body_source};
          out_.output += "defined " + s.name + "\n";
          out_.events.push_back({ExecEvent::Def, s.name, true});
          break;
        case StmtKind::Call: {
          auto it = functions_.find(s.name);
          if (it == functions_.end())
            throw RuntimeErr{"call to undefined function '" + s.name + "'"};
          std::vector<Value> args = eval_args(s.args, scope, depth);
          if (args.size() != it->second.params.size())
            throw RuntimeErr{"wrong arity for '" + s.name + "' (expected " +
                             std::to_string(it->second.params.size()) + ", got " +
                             std::to_string(args.size()) + ")"};
          std::map<std::string, Value> locals;
          for (std::size_t i = 0; i < args.size(); ++i)
            locals[it->second.params[i]] = std::move(args[i]);
          try {
            run(it->second.body, locals, depth + 1);
          } catch (RuntimeErr&) {
            out_.events.push_back({ExecEvent::CallUser, s.name, false});
            throw;
          }
          out_.events.push_back({ExecEvent::CallUser, s.name, true});
          break;
        }
        case StmtKind::For: {
          Value list = eval(s.args[0], scope, depth);
          if (!list.is_array())
            throw RuntimeErr{"for expects a list at line " + std::to_string(s.line)};
          for (const Value& item : list) {
            scope[s.name] = item;
            run(s.body, scope, depth);
          }
          break;
        }
      }
    }
  }

 private:
  Value call_api(const std::string& name, const std::vector<Value>& args) {
    ApiResult r = api_(name, args);
    if (!r.ok) {
      out_.events.push_back({ExecEvent::Api, name, false});
      throw RuntimeErr{r.error.empty() ? name + ": api error" : r.error};
    }
    out_.events.push_back({ExecEvent::Api, name, true});
    out_.output += name + " -> " + r.value.dump() + "\n";
    return r.value;
  }

  std::vector<Value> eval_args(const std::vector<Expr>& args,
                               std::map<std::string, Value>& scope, int depth) {
    std::vector<Value> out;
    out.reserve(args.size());
    for (const Expr& a : args) out.push_back(eval(a, scope, depth));
    return out;
  }

  Value eval(const Expr& e, std::map<std::string, Value>& scope, int depth) {
    switch (e.kind) {
      case ExprKind::Literal:
        return e.literal;
      case ExprKind::Var: {
        auto it = scope.find(e.name);
        if (it == scope.end()) throw RuntimeErr{"unknown variable '" + e.name + "'"};
        return it->second;
      }
      case ExprKind::ListLit: {
        Value list = Value::array();
        for (const Expr& el : e.parts) list.push_back(eval(el, scope, depth));
        return list;
      }
      case ExprKind::Field: {
        Value base = eval(e.parts[0], scope, depth);
        if (!base.is_object() || !base.contains(e.name))
          throw RuntimeErr{"unknown field '" + e.name + "'"};
        return base[e.name];
      }
      case ExprKind::ApiCall:
        return call_api(e.name, eval_args(e.parts, scope, depth));
    }
    throw RuntimeErr{"invalid expression"};
  }

  static constexpr int kMaxDepth = 16;
  static constexpr long kMaxStatements = 100000;

  const ApiDispatcher& api_;
  FunctionTable& functions_;
  ExecOutcome& out_;
  long budget_ = 0;
};

}  // namespace detail

// Runs a parsed program. Statements before a runtime error commit: the
// partial output, registered functions, and scope mutations all persist.
inline ExecOutcome execute_program(const Program& program, const ApiDispatcher& api,
                                   FunctionTable& functions,
                                   std::map<std::string, Value>& scope) {
  ExecOutcome out;
  detail::Executor exec(api, functions, out);
  try {
    exec.run(program.stmts, scope, 0);
  } catch (const detail::RuntimeErr& e) {
    out.is_error = true;
    out.error = e.message;
    out.output += "error: " + e.message + "\n";
  }
  return out;
}

}  // namespace skillrl::dsl
