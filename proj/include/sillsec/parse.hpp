#ifndef SILLSEC_PARSE_HPP
#define SILLSEC_PARSE_HPP

#include <cctype>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sillsec/ast.hpp"

namespace sillsec {

namespace detail {

enum class Tok {
  Ident, One, LBrace, RBrace, LParen, RParen, LBracket, RBracket,
  Colon, DoubleColon, Semi, Comma, Dot, Eq, Lt, Pipe, Plus, Amp, Star,
  Lolli, Arrow, FatArrow, At, Eof
};

struct Token {
  Tok kind;
  std::string text;
  Span span;
};

class Lexer {
public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_ws();
      Span sp{line_, col_};
      if (pos_ >= src_.size()) {
        out.push_back({Tok::Eof, "", sp});
        return out;
      }
      char c = src_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::string id;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
                src_[pos_] == '_' || src_[pos_] == '\'')) {
          id += src_[pos_];
          advance();
        }
        out.push_back({Tok::Ident, id, sp});
        continue;
      }
      if (c == '1') {
        advance();
        out.push_back({Tok::One, "1", sp});
        continue;
      }
      auto two = pos_ + 1 < src_.size() ? src_.substr(pos_, 2) : std::string_view{};
      if (two == "<-") { advance(2); out.push_back({Tok::Arrow, "<-", sp}); continue; }
      if (two == "=>") { advance(2); out.push_back({Tok::FatArrow, "=>", sp}); continue; }
      if (two == "-o") { advance(2); out.push_back({Tok::Lolli, "-o", sp}); continue; }
      if (two == "::") { advance(2); out.push_back({Tok::DoubleColon, "::", sp}); continue; }
      Tok k;
      switch (c) {
        case '{': k = Tok::LBrace; break;
        case '}': k = Tok::RBrace; break;
        case '(': k = Tok::LParen; break;
        case ')': k = Tok::RParen; break;
        case '[': k = Tok::LBracket; break;
        case ']': k = Tok::RBracket; break;
        case ':': k = Tok::Colon; break;
        case ';': k = Tok::Semi; break;
        case ',': k = Tok::Comma; break;
        case '.': k = Tok::Dot; break;
        case '=': k = Tok::Eq; break;
        case '<': k = Tok::Lt; break;
        case '|': k = Tok::Pipe; break;
        case '+': k = Tok::Plus; break;
        case '&': k = Tok::Amp; break;
        case '*': k = Tok::Star; break;
        case '@': k = Tok::At; break;
        default:
          throw SyntaxError("unexpected character '" + std::string(1, c) + "'", sp);
      }
      advance();
      out.push_back({k, std::string(1, c), sp});
    }
  }

private:
  void advance(int n = 1) {
    for (int i = 0; i < n; ++i) {
      if (src_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
  }

  void skip_ws() {
    for (;;) {
      while (pos_ < src_.size() &&
             std::isspace(static_cast<unsigned char>(src_[pos_])))
        advance();
      if (pos_ + 1 < src_.size() && src_[pos_] == '/' && src_[pos_ + 1] == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
        continue;
      }
      return;
    }
  }

  std::string_view src_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  Program program() {
    Program prog;
    bool saw_lattice = false;
    std::set<std::string> type_names, def_names;
    while (!at(Tok::Eof)) {
      if (at_kw("lattice")) {
        if (saw_lattice)
          throw DuplicateDefinition("duplicate lattice block", peek().span);
        saw_lattice = true;
        prog.lattice_decl = lattice_block();
      } else if (at_kw("type")) {
        Span sp = peek().span;
        eat_kw("type");
        std::string name = ident("type name");
        if (!type_names.insert(name).second)
          throw DuplicateDefinition("duplicate type '" + name + "'", sp);
        expect(Tok::Eq, "'='");
        TypeRef t = type();
        expect(Tok::Semi, "';'");
        prog.type_abbrevs.emplace_back(name, t);
      } else if (at_kw("proc")) {
        ProcessDef def = proc_decl();
        if (!def_names.insert(def.name).second)
          throw DuplicateDefinition("duplicate proc '" + def.name + "'", def.span);
        prog.defs.push_back(std::move(def));
      } else if (at_kw("main")) {
        eat_kw("main");
        if (prog.main)
          throw DuplicateDefinition("duplicate main declaration", peek().span);
        prog.main = ident("process name");
        expect(Tok::Semi, "';'");
      } else {
        throw SyntaxError("expected 'lattice', 'type', 'proc' or 'main', got '" +
                              peek().text + "'",
                          peek().span);
      }
    }
    return prog;
  }

private:
  const Token& peek(int k = 0) const {
    size_t i = pos_ + k;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  bool at(Tok k) const { return peek().kind == k; }
  bool at_kw(std::string_view kw) const {
    return peek().kind == Tok::Ident && peek().text == kw;
  }
  Token next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  Token expect(Tok k, const std::string& what) {
    if (!at(k))
      throw SyntaxError("expected " + what + ", got '" + peek().text + "'", peek().span);
    return next();
  }
  void eat_kw(std::string_view kw) {
    if (!at_kw(kw))
      throw SyntaxError("expected '" + std::string(kw) + "', got '" + peek().text + "'",
                        peek().span);
    next();
  }
  std::string ident(const std::string& what) {
    if (!at(Tok::Ident))
      throw SyntaxError("expected " + what + ", got '" + peek().text + "'", peek().span);
    return next().text;
  }

  LatticeDecl lattice_block() {
    LatticeDecl decl;
    decl.span = peek().span;
    eat_kw("lattice");
    expect(Tok::LBrace, "'{'");
    eat_kw("levels");
    decl.levels.push_back(ident("level name"));
    while (at(Tok::Comma)) {
      next();
      decl.levels.push_back(ident("level name"));
    }
    expect(Tok::Semi, "';'");
    if (at_kw("order")) {
      eat_kw("order");
      for (;;) {
        std::string lo = ident("level name");
        expect(Tok::Lt, "'<'");
        std::string hi = ident("level name");
        decl.order.emplace_back(lo, hi);
        if (!at(Tok::Comma)) break;
        next();
      }
      expect(Tok::Semi, "';'");
    }
    expect(Tok::RBrace, "'}'");
    return decl;
  }

  TypeRef type() {
    TypeRef lhs = type_tensor();
    if (at(Tok::Lolli)) {
      Span sp = next().span;
      return t_lolli(lhs, type(), sp);
    }
    return lhs;
  }

  TypeRef type_tensor() {
    TypeRef lhs = type_atom();
    if (at(Tok::Star)) {
      Span sp = next().span;
      return t_tensor(lhs, type_tensor(), sp);
    }
    return lhs;
  }

  TypeRef type_atom() {
    Span sp = peek().span;
    if (at(Tok::One)) {
      next();
      return t_one(sp);
    }
    if (at(Tok::Plus) || at(Tok::Amp)) {
      bool internal = at(Tok::Plus);
      next();
      expect(Tok::LBrace, "'{'");
      auto br = branch_types();
      expect(Tok::RBrace, "'}'");
      return internal ? t_internal(std::move(br), sp) : t_external(std::move(br), sp);
    }
    if (at(Tok::LParen)) {
      next();
      TypeRef t = type();
      expect(Tok::RParen, "')'");
      return t;
    }
    if (at(Tok::Ident)) return t_named(next().text, sp);
    throw SyntaxError("expected a session type, got '" + peek().text + "'", sp);
  }

  std::vector<std::pair<std::string, TypeRef>> branch_types() {
    std::vector<std::pair<std::string, TypeRef>> out;
    std::set<std::string> seen;
    for (;;) {
      Span sp = peek().span;
      std::string lbl = ident("branch label");
      if (!seen.insert(lbl).second)
        throw SyntaxError("duplicate branch label '" + lbl + "'", sp);
      expect(Tok::Colon, "':'");
      out.emplace_back(lbl, type());
      if (!at(Tok::Comma)) break;
      next();
    }
    return out;
  }

  ProcessDef proc_decl() {
    ProcessDef def;
    def.span = peek().span;
    eat_kw("proc");
    def.name = ident("process name");
    expect(Tok::LBracket, "'['");
    def.offers.sec = ident("secrecy level");
    expect(Tok::RBracket, "']'");
    expect(Tok::LParen, "'('");
    if (!at(Tok::RParen)) {
      for (;;) {
        ChanDecl d;
        d.span = peek().span;
        d.var = ident("channel variable");
        expect(Tok::Colon, "':'");
        d.type = type();
        expect(Tok::LBracket, "'['");
        d.sec = ident("secrecy level");
        expect(Tok::RBracket, "']'");
        def.uses.push_back(std::move(d));
        if (!at(Tok::Comma)) break;
        next();
      }
    }
    expect(Tok::RParen, "')'");
    expect(Tok::DoubleColon, "'::'");
    expect(Tok::LParen, "'('");
    def.offers.span = peek().span;
    def.offers.var = ident("channel variable");
    expect(Tok::Colon, "':'");
    def.offers.type = type();
    expect(Tok::RParen, "')'");
    expect(Tok::At, "'@'");
    def.run_level = ident("secrecy level");
    expect(Tok::Eq, "'='");
    expect(Tok::LBrace, "'{'");
    def.body = process();
    expect(Tok::RBrace, "'}'");
    return def;
  }

  TermRef process() {
    Span sp = peek().span;
    if (at_kw("case")) {
      next();
      ChanRef subj{ident("channel"), -1};
      expect(Tok::LBrace, "'{'");
      std::vector<std::pair<std::string, TermRef>> br;
      std::set<std::string> seen;
      for (;;) {
        Span bsp = peek().span;
        std::string lbl = ident("branch label");
        if (!seen.insert(lbl).second)
          throw SyntaxError("duplicate case label '" + lbl + "'", bsp);
        expect(Tok::FatArrow, "'=>'");
        br.emplace_back(lbl, process());
        if (!at(Tok::Pipe)) break;
        next();
      }
      expect(Tok::RBrace, "'}'");
      return mk_term({TermKind::Case, sp, subj, {}, "", "", std::move(br), "", {}, "", nullptr});
    }
    if (at_kw("send")) {
      next();
      ChanRef payload{ident("channel"), -1};
      ChanRef carrier{ident("channel"), -1};
      expect(Tok::Semi, "';'");
      return mk_term(
          {TermKind::SendChan, sp, carrier, payload, "", "", {}, "", {}, "", process()});
    }
    if (at_kw("close")) {
      next();
      ChanRef subj{ident("channel"), -1};
      return mk_term({TermKind::Close, sp, subj, {}, "", "", {}, "", {}, "", nullptr});
    }
    if (at_kw("wait")) {
      next();
      ChanRef subj{ident("channel"), -1};
      expect(Tok::Semi, "';'");
      return mk_term({TermKind::Wait, sp, subj, {}, "", "", {}, "", {}, "", process()});
    }
    if (at_kw("fwd")) {
      next();
      ChanRef offer{ident("channel"), -1};
      ChanRef from{ident("channel"), -1};
      return mk_term({TermKind::Fwd, sp, offer, from, "", "", {}, "", {}, "", nullptr});
    }
    if (at(Tok::Ident) && peek(1).kind == Tok::Arrow) {
      std::string binder = ident("channel variable");
      next();  // <-
      if (at_kw("recv")) {
        next();
        ChanRef carrier{ident("channel"), -1};
        expect(Tok::Semi, "';'");
        return mk_term(
            {TermKind::RecvChan, sp, carrier, {}, binder, "", {}, "", {}, "", process()});
      }
      if (at_kw("spawn")) {
        next();
        std::string name = ident("process name");
        expect(Tok::LParen, "'('");
        std::vector<ChanRef> args;
        if (!at(Tok::RParen)) {
          for (;;) {
            args.push_back({ident("channel"), -1});
            if (!at(Tok::Comma)) break;
            next();
          }
        }
        expect(Tok::RParen, "')'");
        expect(Tok::At, "'@'");
        std::string lvl = ident("secrecy level");
        expect(Tok::Semi, "';'");
        return mk_term({TermKind::Spawn, sp, {}, {}, binder, "", {}, name, std::move(args),
                        lvl, process()});
      }
      throw SyntaxError("expected 'recv' or 'spawn' after '<-', got '" + peek().text + "'",
                        peek().span);
    }
    if (at(Tok::Ident) && peek(1).kind == Tok::Dot) {
      ChanRef subj{ident("channel"), -1};
      next();  // .
      std::string lbl = ident("label");
      expect(Tok::Semi, "';'");
      return mk_term(
          {TermKind::SendLabel, sp, subj, {}, "", lbl, {}, "", {}, "", process()});
    }
    throw SyntaxError("expected a process term, got '" + peek().text + "'", sp);
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
};

}  // namespace detail

inline Program parse_program(std::string_view text) {
  detail::Lexer lex(text);
  detail::Parser p(lex.run());
  return p.program();
}

}  // namespace sillsec

#endif
