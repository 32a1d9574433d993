#ifndef SILLSEC_AST_HPP
#define SILLSEC_AST_HPP

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sillsec/error.hpp"
#include "sillsec/lattice.hpp"

namespace sillsec {

// A channel operand. gen < 0 means a source-level channel variable; the
// runtime substitutes real channels (name, generation >= 0) into terms.
struct ChanRef {
  std::string name;
  int gen = -1;

  bool operator==(const ChanRef&) const = default;
  auto operator<=>(const ChanRef&) const = default;
};

inline std::string to_string(const ChanRef& c) {
  return c.gen < 0 ? c.name : c.name + "@" + std::to_string(c.gen);
}

enum class TypeKind { Internal, External, Tensor, Lolli, One, Named };

struct SessionType;
using TypeRef = std::shared_ptr<const SessionType>;

struct SessionType {
  TypeKind kind;
  std::vector<std::pair<std::string, TypeRef>> branches;  // Internal/External
  TypeRef payload;                                        // Tensor/Lolli
  TypeRef cont;                                           // Tensor/Lolli
  std::string name;                                       // Named
  Span span;
};

inline TypeRef t_one(Span sp = {}) {
  return std::make_shared<SessionType>(SessionType{TypeKind::One, {}, nullptr, nullptr, "", sp});
}
inline TypeRef t_named(std::string n, Span sp = {}) {
  return std::make_shared<SessionType>(
      SessionType{TypeKind::Named, {}, nullptr, nullptr, std::move(n), sp});
}
inline TypeRef t_internal(std::vector<std::pair<std::string, TypeRef>> br, Span sp = {}) {
  return std::make_shared<SessionType>(
      SessionType{TypeKind::Internal, std::move(br), nullptr, nullptr, "", sp});
}
inline TypeRef t_external(std::vector<std::pair<std::string, TypeRef>> br, Span sp = {}) {
  return std::make_shared<SessionType>(
      SessionType{TypeKind::External, std::move(br), nullptr, nullptr, "", sp});
}
inline TypeRef t_tensor(TypeRef a, TypeRef b, Span sp = {}) {
  return std::make_shared<SessionType>(
      SessionType{TypeKind::Tensor, {}, std::move(a), std::move(b), "", sp});
}
inline TypeRef t_lolli(TypeRef a, TypeRef b, Span sp = {}) {
  return std::make_shared<SessionType>(
      SessionType{TypeKind::Lolli, {}, std::move(a), std::move(b), "", sp});
}

inline bool type_equal(const TypeRef& a, const TypeRef& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case TypeKind::One:
      return true;
    case TypeKind::Named:
      return a->name == b->name;
    case TypeKind::Internal:
    case TypeKind::External: {
      if (a->branches.size() != b->branches.size()) return false;
      for (size_t i = 0; i < a->branches.size(); ++i) {
        if (a->branches[i].first != b->branches[i].first) return false;
        if (!type_equal(a->branches[i].second, b->branches[i].second)) return false;
      }
      return true;
    }
    case TypeKind::Tensor:
    case TypeKind::Lolli:
      return type_equal(a->payload, b->payload) && type_equal(a->cont, b->cont);
  }
  return false;
}

enum class TermKind { SendLabel, Case, SendChan, RecvChan, Close, Wait, Fwd, Spawn };

struct ProcessTerm;
using TermRef = std::shared_ptr<const ProcessTerm>;

// One node of a process term. Field use by kind:
//   SendLabel: subject.label, cont            -- subject.l; P
//   Case:      subject, branches              -- case subject { l => P | ... }
//   SendChan:  payload, subject, cont         -- send payload subject; P
//   RecvChan:  binder, subject, cont          -- binder <- recv subject; P
//   Close:     subject                        -- close subject
//   Wait:      subject, cont                  -- wait subject; P
//   Fwd:       subject, payload               -- fwd subject payload (subject <- payload)
//   Spawn:     binder, def_name, args, run_level, cont
struct ProcessTerm {
  TermKind kind;
  Span span;
  ChanRef subject;
  ChanRef payload;
  std::string binder;
  std::string label;
  std::vector<std::pair<std::string, TermRef>> branches;
  std::string def_name;
  std::vector<ChanRef> args;
  std::string run_level;
  TermRef cont;
};

inline TermRef mk_term(ProcessTerm t) {
  return std::make_shared<ProcessTerm>(std::move(t));
}

inline bool term_equal(const TermRef& a, const TermRef& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind || a->subject != b->subject || a->payload != b->payload ||
      a->binder != b->binder || a->label != b->label || a->def_name != b->def_name ||
      a->args != b->args || a->run_level != b->run_level)
    return false;
  if (a->branches.size() != b->branches.size()) return false;
  for (size_t i = 0; i < a->branches.size(); ++i) {
    if (a->branches[i].first != b->branches[i].first) return false;
    if (!term_equal(a->branches[i].second, b->branches[i].second)) return false;
  }
  return term_equal(a->cont, b->cont);
}

// Number of term constructors; the multiset measure for termination counts
// these per process.
inline int term_size(const TermRef& t) {
  if (!t) return 0;
  int n = 1 + term_size(t->cont);
  for (const auto& [_, body] : t->branches) n += term_size(body);
  return n;
}

// Substitutes channel `to` for every occurrence of `from` (path-copying; the
// original term is shared and unchanged).
inline TermRef subst_chan(const TermRef& t, const ChanRef& from, const ChanRef& to) {
  if (!t) return t;
  ProcessTerm out = *t;
  bool changed = false;
  auto sub = [&](ChanRef& c) {
    if (c == from) {
      c = to;
      changed = true;
    }
  };
  sub(out.subject);
  sub(out.payload);
  for (auto& a : out.args) sub(a);
  auto c2 = subst_chan(t->cont, from, to);
  if (c2 != t->cont) changed = true;
  out.cont = c2;
  for (auto& [lbl, body] : out.branches) {
    auto b2 = subst_chan(body, from, to);
    if (b2 != body) changed = true;
    body = b2;
  }
  return changed ? mk_term(std::move(out)) : t;
}

struct ChanDecl {
  std::string var;
  TypeRef type;
  std::string sec;
  Span span;
};

struct ProcessDef {
  std::string name;
  Span span;
  std::vector<ChanDecl> uses;
  ChanDecl offers;
  std::string run_level;  // initial running secrecy
  TermRef body;
};

struct Program {
  LatticeDecl lattice_decl;
  SecurityLattice lattice;  // filled by resolve()
  std::vector<std::pair<std::string, TypeRef>> type_abbrevs;
  std::vector<ProcessDef> defs;
  std::optional<std::string> main;
  bool resolved = false;

  const TypeRef* find_type(const std::string& n) const {
    for (const auto& [name, t] : type_abbrevs)
      if (name == n) return &t;
    return nullptr;
  }
  const ProcessDef* find_def(const std::string& n) const {
    for (const auto& d : defs)
      if (d.name == n) return &d;
    return nullptr;
  }
};

}  // namespace sillsec

#endif
