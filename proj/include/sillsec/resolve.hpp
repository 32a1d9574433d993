#ifndef SILLSEC_RESOLVE_HPP
#define SILLSEC_RESOLVE_HPP

#include <map>
#include <set>
#include <string>
#include <vector>

#include "sillsec/ast.hpp"
#include "sillsec/parse.hpp"

namespace sillsec {

using TypeAbbrevs = std::vector<std::pair<std::string, TypeRef>>;

namespace detail {

inline TypeRef expand_rec(const TypeAbbrevs& abbrevs, const TypeRef& t,
                          std::set<std::string>& visiting) {
  switch (t->kind) {
    case TypeKind::One:
      return t;
    case TypeKind::Named: {
      if (visiting.count(t->name))
        throw RecursiveType("recursive type abbreviation '" + t->name + "'", t->span);
      const TypeRef* def = nullptr;
      for (const auto& [n, ty] : abbrevs)
        if (n == t->name) def = &ty;
      if (!def) throw UnknownType("unknown type '" + t->name + "'", t->span);
      visiting.insert(t->name);
      TypeRef out = expand_rec(abbrevs, *def, visiting);
      visiting.erase(t->name);
      return out;
    }
    case TypeKind::Internal:
    case TypeKind::External: {
      std::vector<std::pair<std::string, TypeRef>> br;
      br.reserve(t->branches.size());
      for (const auto& [lbl, bt] : t->branches)
        br.emplace_back(lbl, expand_rec(abbrevs, bt, visiting));
      return t->kind == TypeKind::Internal ? t_internal(std::move(br), t->span)
                                           : t_external(std::move(br), t->span);
    }
    case TypeKind::Tensor:
      return t_tensor(expand_rec(abbrevs, t->payload, visiting),
                      expand_rec(abbrevs, t->cont, visiting), t->span);
    case TypeKind::Lolli:
      return t_lolli(expand_rec(abbrevs, t->payload, visiting),
                     expand_rec(abbrevs, t->cont, visiting), t->span);
  }
  return t;
}

// Scope discipline: a channel variable is bound by the signature or by an
// enclosing recv/spawn binder; rebinding an in-scope name is rejected.
inline void check_body(const Program& prog, const ProcessDef& def, const TermRef& t,
                       std::set<std::string> scope) {
  if (!t) return;
  auto used = [&](const ChanRef& c, const Span& sp) {
    if (!scope.count(c.name))
      throw UnboundChannelVar("channel '" + c.name + "' is not bound here", sp);
  };
  switch (t->kind) {
    case TermKind::SendLabel:
      used(t->subject, t->span);
      check_body(prog, def, t->cont, scope);
      break;
    case TermKind::Case:
      used(t->subject, t->span);
      for (const auto& [_, body] : t->branches) check_body(prog, def, body, scope);
      break;
    case TermKind::SendChan:
      used(t->payload, t->span);
      used(t->subject, t->span);
      check_body(prog, def, t->cont, scope);
      break;
    case TermKind::RecvChan: {
      used(t->subject, t->span);
      if (scope.count(t->binder))
        throw UnboundChannelVar("binder '" + t->binder + "' shadows a channel in scope",
                                t->span);
      scope.insert(t->binder);
      check_body(prog, def, t->cont, scope);
      break;
    }
    case TermKind::Close:
      used(t->subject, t->span);
      break;
    case TermKind::Wait:
      used(t->subject, t->span);
      check_body(prog, def, t->cont, scope);
      break;
    case TermKind::Fwd:
      used(t->subject, t->span);
      used(t->payload, t->span);
      break;
    case TermKind::Spawn: {
      const ProcessDef* callee = prog.find_def(t->def_name);
      if (!callee)
        throw UnknownProcess("unknown process '" + t->def_name + "'", t->span);
      if (callee->uses.size() != t->args.size())
        throw LoadError("process '" + t->def_name + "' takes " +
                            std::to_string(callee->uses.size()) + " channel(s), got " +
                            std::to_string(t->args.size()),
                        t->span);
      for (const auto& a : t->args) used(a, t->span);
      if (scope.count(t->binder))
        throw UnboundChannelVar("binder '" + t->binder + "' shadows a channel in scope",
                                t->span);
      scope.insert(t->binder);
      check_body(prog, def, t->cont, scope);
      break;
    }
  }
}

inline void check_levels(const SecurityLattice& lat, const ProcessDef& def) {
  auto known = [&](const std::string& l, const Span& sp) {
    if (!lat.has_level(l)) throw UnknownLevel("unknown level '" + l + "'", sp);
  };
  known(def.offers.sec, def.span);
  known(def.run_level, def.span);
  for (const auto& u : def.uses) known(u.sec, u.span);
}

inline void collect_spawn_levels(const SecurityLattice& lat, const TermRef& t) {
  if (!t) return;
  if (t->kind == TermKind::Spawn && !lat.has_level(t->run_level))
    throw UnknownLevel("unknown level '" + t->run_level + "'", t->span);
  for (const auto& [_, b] : t->branches) collect_spawn_levels(lat, b);
  collect_spawn_levels(lat, t->cont);
}

}  // namespace detail

// Fully expands named abbreviations; the result contains no NamedRef and the
// expansion is idempotent.
inline TypeRef expand_type(const TypeAbbrevs& abbrevs, const TypeRef& t) {
  std::set<std::string> visiting;
  return detail::expand_rec(abbrevs, t, visiting);
}

// Validates the lattice, checks every type reference and abbreviation
// acyclicity, and checks channel-variable scoping in every body.
inline Program resolve(Program prog) {
  if (prog.lattice_decl.levels.empty())
    throw LatticeError("program has no lattice declaration");
  prog.lattice = validate_lattice(prog.lattice_decl);

  for (const auto& [name, t] : prog.type_abbrevs) (void)expand_type(prog.type_abbrevs, t);

  for (const auto& def : prog.defs) {
    detail::check_levels(prog.lattice, def);
    (void)expand_type(prog.type_abbrevs, def.offers.type);
    std::set<std::string> scope{def.offers.var};
    if (def.offers.var.empty())
      throw SyntaxError("process '" + def.name + "' has no offered channel", def.span);
    for (const auto& u : def.uses) {
      (void)expand_type(prog.type_abbrevs, u.type);
      if (!scope.insert(u.var).second)
        throw DuplicateDefinition(
            "channel variable '" + u.var + "' repeats in the signature of '" + def.name + "'",
            u.span);
    }
    detail::check_body(prog, def, def.body, scope);
    detail::collect_spawn_levels(prog.lattice, def.body);
  }
  if (prog.main && !prog.find_def(*prog.main))
    throw UnknownProcess("unknown main process '" + *prog.main + "'");

  // The spawn call graph must be acyclic: definitions stand for their inlined
  // bodies, so a cycle would mean a nonterminating process.
  {
    std::map<std::string, int> state;  // 0 unseen, 1 visiting, 2 done
    std::function<void(const ProcessDef&)> visit_def;
    std::function<void(const TermRef&)> visit_term = [&](const TermRef& t) {
      if (!t) return;
      if (t->kind == TermKind::Spawn) {
        const ProcessDef* callee = prog.find_def(t->def_name);
        if (callee) {
          int& s = state[callee->name];
          if (s == 1)
            throw RecursiveType("recursive process definition '" + callee->name + "'",
                                t->span);
          if (s == 0) visit_def(*callee);
        }
      }
      for (const auto& [_, b] : t->branches) visit_term(b);
      visit_term(t->cont);
    };
    visit_def = [&](const ProcessDef& def) {
      state[def.name] = 1;
      visit_term(def.body);
      state[def.name] = 2;
    };
    for (const auto& def : prog.defs)
      if (state[def.name] == 0) visit_def(def);
  }
  prog.resolved = true;
  return prog;
}

inline Program load_program(std::string_view text) { return resolve(parse_program(text)); }

}  // namespace sillsec

#endif
