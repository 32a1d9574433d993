#ifndef SILLSEC_PRETTY_HPP
#define SILLSEC_PRETTY_HPP

#include <sstream>
#include <string>

#include "sillsec/ast.hpp"

namespace sillsec {

namespace detail {

inline void print_type(std::ostream& os, const TypeRef& t, bool parens_lolli = false) {
  switch (t->kind) {
    case TypeKind::One:
      os << "1";
      break;
    case TypeKind::Named:
      os << t->name;
      break;
    case TypeKind::Internal:
    case TypeKind::External: {
      os << (t->kind == TypeKind::Internal ? "+{ " : "&{ ");
      bool first = true;
      for (const auto& [lbl, bt] : t->branches) {
        if (!first) os << ", ";
        first = false;
        os << lbl << ": ";
        print_type(os, bt);
      }
      os << " }";
      break;
    }
    case TypeKind::Tensor: {
      // '*' binds tighter than '-o'; left operand of '*' must be atomic.
      bool lp = t->payload->kind == TypeKind::Tensor || t->payload->kind == TypeKind::Lolli;
      if (lp) os << "(";
      print_type(os, t->payload);
      if (lp) os << ")";
      os << " * ";
      bool rp = t->cont->kind == TypeKind::Lolli;
      if (rp) os << "(";
      print_type(os, t->cont);
      if (rp) os << ")";
      break;
    }
    case TypeKind::Lolli: {
      if (parens_lolli) os << "(";
      bool lp = t->payload->kind == TypeKind::Lolli;
      if (lp) os << "(";
      print_type(os, t->payload);
      if (lp) os << ")";
      os << " -o ";
      print_type(os, t->cont);
      if (parens_lolli) os << ")";
      break;
    }
  }
}

inline void indent(std::ostream& os, int n) {
  for (int i = 0; i < n; ++i) os << "  ";
}

inline void print_term(std::ostream& os, const TermRef& t, int ind) {
  indent(os, ind);
  switch (t->kind) {
    case TermKind::SendLabel:
      os << t->subject.name << "." << t->label << ";\n";
      print_term(os, t->cont, ind);
      break;
    case TermKind::Case: {
      os << "case " << t->subject.name << " {\n";
      bool first = true;
      for (const auto& [lbl, body] : t->branches) {
        indent(os, ind + 1);
        os << (first ? "  " : "| ") << lbl << " =>\n";
        first = false;
        print_term(os, body, ind + 3);
      }
      indent(os, ind);
      os << "}\n";
      break;
    }
    case TermKind::SendChan:
      os << "send " << t->payload.name << " " << t->subject.name << ";\n";
      print_term(os, t->cont, ind);
      break;
    case TermKind::RecvChan:
      os << t->binder << " <- recv " << t->subject.name << ";\n";
      print_term(os, t->cont, ind);
      break;
    case TermKind::Close:
      os << "close " << t->subject.name << "\n";
      break;
    case TermKind::Wait:
      os << "wait " << t->subject.name << ";\n";
      print_term(os, t->cont, ind);
      break;
    case TermKind::Fwd:
      os << "fwd " << t->subject.name << " " << t->payload.name << "\n";
      break;
    case TermKind::Spawn: {
      os << t->binder << " <- spawn " << t->def_name << "(";
      bool first = true;
      for (const auto& a : t->args) {
        if (!first) os << ", ";
        first = false;
        os << a.name;
      }
      os << ") @ " << t->run_level << ";\n";
      print_term(os, t->cont, ind);
      break;
    }
  }
}

}  // namespace detail

inline std::string pretty_type(const TypeRef& t) {
  std::ostringstream os;
  detail::print_type(os, t);
  return os.str();
}

inline std::string pretty_term(const TermRef& t, int indent = 0) {
  std::ostringstream os;
  detail::print_term(os, t, indent);
  return os.str();
}

inline std::string pretty_program(const Program& prog) {
  std::ostringstream os;
  if (!prog.lattice_decl.levels.empty()) {
    os << "lattice { levels ";
    for (size_t i = 0; i < prog.lattice_decl.levels.size(); ++i) {
      if (i) os << ", ";
      os << prog.lattice_decl.levels[i];
    }
    os << ";";
    if (!prog.lattice_decl.order.empty()) {
      os << "\n          order ";
      for (size_t i = 0; i < prog.lattice_decl.order.size(); ++i) {
        if (i) os << ", ";
        os << prog.lattice_decl.order[i].first << " < " << prog.lattice_decl.order[i].second;
      }
      os << ";";
    }
    os << " }\n\n";
  }
  for (const auto& [name, t] : prog.type_abbrevs) {
    os << "type " << name << " = " << pretty_type(t) << ";\n";
  }
  if (!prog.type_abbrevs.empty()) os << "\n";
  for (const auto& def : prog.defs) {
    os << "proc " << def.name << " [" << def.offers.sec << "] (";
    bool first = true;
    for (const auto& u : def.uses) {
      if (!first) os << ", ";
      first = false;
      os << u.var << ": " << pretty_type(u.type) << " [" << u.sec << "]";
    }
    os << ") :: (" << def.offers.var << ": " << pretty_type(def.offers.type) << ") @ "
       << def.run_level << " = {\n";
    os << pretty_term(def.body, 1);
    os << "}\n\n";
  }
  if (prog.main) os << "main " << *prog.main << ";\n";
  return os.str();
}

}  // namespace sillsec

#endif
