#ifndef SILLSEC_TYPECHECK_HPP
#define SILLSEC_TYPECHECK_HPP

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sillsec/ast.hpp"
#include "sillsec/pretty.hpp"
#include "sillsec/resolve.hpp"

namespace sillsec {

enum class TypeErrorKind {
  LinearityViolation,
  TypeMismatch,
  SecrecyFlowViolation,
  PresuppositionViolation,
  LabelNotInChoice,
  ContextNotEmpty,
};

inline const char* to_string(TypeErrorKind k) {
  switch (k) {
    case TypeErrorKind::LinearityViolation: return "LinearityViolation";
    case TypeErrorKind::TypeMismatch: return "TypeMismatch";
    case TypeErrorKind::SecrecyFlowViolation: return "SecrecyFlowViolation";
    case TypeErrorKind::PresuppositionViolation: return "PresuppositionViolation";
    case TypeErrorKind::LabelNotInChoice: return "LabelNotInChoice";
    case TypeErrorKind::ContextNotEmpty: return "ContextNotEmpty";
  }
  return "?";
}

struct TypeError {
  TypeErrorKind kind;
  Span span;
  std::string constraint;
};

using CheckResult = std::optional<TypeError>;

// Secrecy premises of the typing rules, identified so tests can negate one at
// a time and verify each is load-bearing.
enum class PremiseId {
  AmpLGuard,          // &L: d1 ⊑ c
  LolliLGuard,        // ⊸L: d1 ⊑ d
  LolliLPayloadSec,   // ⊸L: payload secrecy = d
  TensorRPayloadSec,  // ⊗R: payload secrecy = c
  CutRunLeq,          // Cut: d1 ⊑ d2
  CutRunCap,          // Cut: d2 ⊑ d'
  CutArgLeq,          // Cut: c' ⊑ d' for each spawned resource
  CutOfferCap,        // Cut: d' ⊑ d
  FwdSecEq,           // Fwd: resource secrecy = offer secrecy
  PresupChild,        // (i): child max secrecy ⊑ parent max secrecy
  PresupRunning,      // (ii): running secrecy ⊑ max secrecy
};

// Running-secrecy adjustments on receives.
enum class RaiseId { OplusL, TensorL, OneL, AmpR, LolliR };

struct CheckProbe {
  std::function<bool(PremiseId, bool)> premise_filter;
  std::set<RaiseId> skip_raises;
  std::map<PremiseId, int> premise_hits;
  std::map<RaiseId, int> raise_hits;
};

namespace detail {
inline CheckProbe*& check_probe() {
  thread_local CheckProbe* p = nullptr;
  return p;
}
}  // namespace detail

struct ProbeGuard {
  explicit ProbeGuard(CheckProbe* p) { detail::check_probe() = p; }
  ~ProbeGuard() { detail::check_probe() = nullptr; }
};

struct ChanBinding {
  TypeRef type;  // fully expanded
  std::string sec;
};

struct TypingContext {
  const Program* prog = nullptr;
  SecurityLattice lattice;
  std::map<ChanRef, ChanBinding> delta;
  ChanRef offer_chan;
  ChanBinding offer;
  std::string running;
  int next_psi = 0;
};

namespace detail {

inline bool premise(PremiseId id, bool actual) {
  if (auto* p = check_probe()) {
    ++p->premise_hits[id];
    if (p->premise_filter) return p->premise_filter(id, actual);
  }
  return actual;
}

inline bool raise_skipped(RaiseId id) {
  if (auto* p = check_probe()) {
    ++p->raise_hits[id];
    return p->skip_raises.count(id) > 0;
  }
  return false;
}

inline std::string not_leq(const std::string& a, const std::string& b) {
  return a + " ⋢ " + b;  // ⋢
}
inline std::string not_eq_str(const std::string& a, const std::string& b) {
  return a + " ≠ " + b;  // ≠
}

inline void assert_presups(const TypingContext& ctx) {
  auto lv = [](const std::string& s) { return SecLevel::concrete(s); };
  for (const auto& [chan, b] : ctx.delta) {
    if (!ctx.lattice.leq(lv(b.sec), lv(ctx.offer.sec)))
      throw std::logic_error("tree invariant broken: " + to_string(chan) + "[" + b.sec +
                             "] exceeds offer secrecy " + ctx.offer.sec);
  }
  if (!ctx.lattice.leq(lv(ctx.running), lv(ctx.offer.sec)))
    throw std::logic_error("tree invariant broken: running secrecy " + ctx.running +
                           " exceeds offer secrecy " + ctx.offer.sec);
}

inline void raise_running(TypingContext& ctx, RaiseId id, const std::string& target) {
  if (raise_skipped(id)) return;
  auto lv = SecLevel::concrete(target);
  auto run = SecLevel::concrete(ctx.running);
  std::string next = id == RaiseId::AmpR || id == RaiseId::LolliR
                         ? target
                         : ctx.lattice.join(lv, run).name;
  if (!ctx.lattice.leq(run, SecLevel::concrete(next)))
    throw std::logic_error("running secrecy would decrease: " + ctx.running + " -> " + next);
  ctx.running = next;
}

inline const TypeRef* branch_type(const TypeRef& t, const std::string& label) {
  for (const auto& [lbl, bt] : t->branches)
    if (lbl == label) return &bt;
  return nullptr;
}

inline std::string label_set(const TypeRef& t) {
  std::string s = "{";
  for (size_t i = 0; i < t->branches.size(); ++i) {
    if (i) s += ", ";
    s += t->branches[i].first;
  }
  return s + "}";
}

}  // namespace detail

inline CheckResult check_process(TypingContext ctx, const TermRef& t) {
  using namespace detail;
  assert_presups(ctx);
  auto err = [&](TypeErrorKind k, const Span& sp, std::string c) -> CheckResult {
    return TypeError{k, sp, std::move(c)};
  };
  auto lv = [](const std::string& s) { return SecLevel::concrete(s); };
  auto leq = [&](const std::string& a, const std::string& b) {
    return ctx.lattice.leq(lv(a), lv(b));
  };

  const bool on_offer = t->kind != TermKind::Spawn && t->subject == ctx.offer_chan;
  auto lookup = [&](const ChanRef& c) -> const ChanBinding* {
    auto it = ctx.delta.find(c);
    return it == ctx.delta.end() ? nullptr : &it->second;
  };

  switch (t->kind) {
    case TermKind::SendLabel: {
      if (on_offer) {  // ⊕R
        if (ctx.offer.type->kind != TypeKind::Internal)
          return err(TypeErrorKind::TypeMismatch, t->span,
                     "provider sends a label only at an internal choice, offer is " +
                         pretty_type(ctx.offer.type));
        const TypeRef* bt = branch_type(ctx.offer.type, t->label);
        if (!bt)
          return err(TypeErrorKind::LabelNotInChoice, t->span,
                     "label '" + t->label + "' not in " + label_set(ctx.offer.type));
        ctx.offer.type = *bt;
        return check_process(std::move(ctx), t->cont);
      }
      const ChanBinding* b = lookup(t->subject);  // &L
      if (!b)
        return err(TypeErrorKind::LinearityViolation, t->span,
                   "channel '" + to_string(t->subject) + "' is not available here");
      if (b->type->kind != TypeKind::External)
        return err(TypeErrorKind::TypeMismatch, t->span,
                   "client sends a label only at an external choice, '" +
                       to_string(t->subject) + "' is " + pretty_type(b->type));
      if (!premise(PremiseId::AmpLGuard, leq(ctx.running, b->sec)))
        return err(TypeErrorKind::SecrecyFlowViolation, t->span,
                   not_leq(ctx.running, b->sec));
      const TypeRef* bt = branch_type(b->type, t->label);
      if (!bt)
        return err(TypeErrorKind::LabelNotInChoice, t->span,
                   "label '" + t->label + "' not in " + label_set(b->type));
      ctx.delta[t->subject].type = *bt;
      return check_process(std::move(ctx), t->cont);
    }

    case TermKind::Case: {
      const TypeRef* choice = nullptr;
      if (on_offer) {  // &R
        if (ctx.offer.type->kind != TypeKind::External)
          return err(TypeErrorKind::TypeMismatch, t->span,
                     "provider cases only on an external choice, offer is " +
                         pretty_type(ctx.offer.type));
        choice = &ctx.offer.type;
      } else {  // ⊕L
        const ChanBinding* b = lookup(t->subject);
        if (!b)
          return err(TypeErrorKind::LinearityViolation, t->span,
                     "channel '" + to_string(t->subject) + "' is not available here");
        if (b->type->kind != TypeKind::Internal)
          return err(TypeErrorKind::TypeMismatch, t->span,
                     "client cases only on an internal choice, '" + to_string(t->subject) +
                         "' is " + pretty_type(b->type));
        choice = &b->type;
      }
      std::set<std::string> type_labels;
      for (const auto& [lbl, _] : (*choice)->branches) type_labels.insert(lbl);
      std::set<std::string> case_labels;
      for (const auto& [lbl, _] : t->branches) case_labels.insert(lbl);
      for (const auto& lbl : case_labels)
        if (!type_labels.count(lbl))
          return err(TypeErrorKind::LabelNotInChoice, t->span,
                     "label '" + lbl + "' not in " + label_set(*choice));
      for (const auto& lbl : type_labels)
        if (!case_labels.count(lbl))
          return err(TypeErrorKind::LabelNotInChoice, t->span,
                     "missing branch '" + lbl + "' of " + label_set(*choice));
      TypeRef choice_ty = *choice;
      for (const auto& [lbl, body] : t->branches) {
        TypingContext branch_ctx = ctx;
        const TypeRef* bt = branch_type(choice_ty, lbl);
        if (on_offer) {
          branch_ctx.offer.type = *bt;
          raise_running(branch_ctx, RaiseId::AmpR, ctx.offer.sec);
        } else {
          branch_ctx.delta[t->subject].type = *bt;
          raise_running(branch_ctx, RaiseId::OplusL, ctx.delta.at(t->subject).sec);
        }
        if (auto e = check_process(std::move(branch_ctx), body)) return e;
      }
      return std::nullopt;
    }

    case TermKind::SendChan: {
      const ChanBinding* payload = lookup(t->payload);
      if (on_offer) {  // ⊗R
        if (ctx.offer.type->kind != TypeKind::Tensor)
          return err(TypeErrorKind::TypeMismatch, t->span,
                     "provider sends a channel only at a tensor, offer is " +
                         pretty_type(ctx.offer.type));
        if (!payload)
          return err(TypeErrorKind::LinearityViolation, t->span,
                     "channel '" + to_string(t->payload) + "' is not available here");
        if (!premise(PremiseId::TensorRPayloadSec, ctx.lattice.eq(lv(payload->sec),
                                                                  lv(ctx.offer.sec))))
          return err(TypeErrorKind::SecrecyFlowViolation, t->span,
                     not_eq_str(payload->sec, ctx.offer.sec));
        if (!type_equal(payload->type, ctx.offer.type->payload))
          return err(TypeErrorKind::TypeMismatch, t->span,
                     "payload has type " + pretty_type(payload->type) + ", expected " +
                         pretty_type(ctx.offer.type->payload));
        ctx.delta.erase(t->payload);
        ctx.offer.type = ctx.offer.type->cont;
        return check_process(std::move(ctx), t->cont);
      }
      const ChanBinding* carrier = lookup(t->subject);  // ⊸L
      if (!carrier)
        return err(TypeErrorKind::LinearityViolation, t->span,
                   "channel '" + to_string(t->subject) + "' is not available here");
      if (carrier->type->kind != TypeKind::Lolli)
        return err(TypeErrorKind::TypeMismatch, t->span,
                   "client sends a channel only at a lolli, '" + to_string(t->subject) +
                       "' is " + pretty_type(carrier->type));
      if (!premise(PremiseId::LolliLGuard, leq(ctx.running, carrier->sec)))
        return err(TypeErrorKind::SecrecyFlowViolation, t->span,
                   not_leq(ctx.running, carrier->sec));
      if (!payload)
        return err(TypeErrorKind::LinearityViolation, t->span,
                   "channel '" + to_string(t->payload) + "' is not available here");
      if (!premise(PremiseId::LolliLPayloadSec,
                   ctx.lattice.eq(lv(payload->sec), lv(carrier->sec))))
        return err(TypeErrorKind::SecrecyFlowViolation, t->span,
                   not_eq_str(payload->sec, carrier->sec));
      if (!type_equal(payload->type, carrier->type->payload))
        return err(TypeErrorKind::TypeMismatch, t->span,
                   "payload has type " + pretty_type(payload->type) + ", expected " +
                       pretty_type(carrier->type->payload));
      TypeRef cont_ty = carrier->type->cont;
      ctx.delta.erase(t->payload);
      ctx.delta[t->subject].type = cont_ty;
      return check_process(std::move(ctx), t->cont);
    }

    case TermKind::RecvChan: {
      ChanRef binder{t->binder, -1};
      if (ctx.delta.count(binder) || binder == ctx.offer_chan)
        return err(TypeErrorKind::LinearityViolation, t->span,
                   "binder '" + t->binder + "' shadows a live channel");
      if (on_offer) {  // ⊸R
        if (ctx.offer.type->kind != TypeKind::Lolli)
          return err(TypeErrorKind::TypeMismatch, t->span,
                     "provider receives a channel only at a lolli, offer is " +
                         pretty_type(ctx.offer.type));
        std::string psi = "ψ" + std::to_string(ctx.next_psi++);
        ctx.lattice = ctx.lattice.bind_var(psi, lv(ctx.offer.sec));
        ctx.delta[binder] = {ctx.offer.type->payload,
                             ctx.lattice.resolve(SecLevel::var(psi))};
        ctx.offer.type = ctx.offer.type->cont;
        raise_running(ctx, RaiseId::LolliR, ctx.offer.sec);
        return check_process(std::move(ctx), t->cont);
      }
      const ChanBinding* carrier = lookup(t->subject);  // ⊗L
      if (!carrier)
        return err(TypeErrorKind::LinearityViolation, t->span,
                   "channel '" + to_string(t->subject) + "' is not available here");
      if (carrier->type->kind != TypeKind::Tensor)
        return err(TypeErrorKind::TypeMismatch, t->span,
                   "client receives a channel only at a tensor, '" + to_string(t->subject) +
                       "' is " + pretty_type(carrier->type));
      std::string psi = "ψ" + std::to_string(ctx.next_psi++);
      ctx.lattice = ctx.lattice.bind_var(psi, lv(carrier->sec));
      std::string carrier_sec = carrier->sec;
      ctx.delta[binder] = {carrier->type->payload,
                           ctx.lattice.resolve(SecLevel::var(psi))};
      ctx.delta[t->subject].type = carrier->type->cont;
      raise_running(ctx, RaiseId::TensorL, carrier_sec);
      return check_process(std::move(ctx), t->cont);
    }

    case TermKind::Close: {  // 1R
      if (!on_offer)
        return err(TypeErrorKind::TypeMismatch, t->span,
                   "close acts on the offered channel, not '" + to_string(t->subject) + "'");
      if (ctx.offer.type->kind != TypeKind::One)
        return err(TypeErrorKind::TypeMismatch, t->span,
                   "close requires offer type 1, got " + pretty_type(ctx.offer.type));
      if (!ctx.delta.empty()) {
        std::string left;
        for (const auto& [c, _] : ctx.delta) {
          if (!left.empty()) left += ", ";
          left += to_string(c);
        }
        return err(TypeErrorKind::ContextNotEmpty, t->span,
                   "context not consumed: " + left);
      }
      return std::nullopt;
    }

    case TermKind::Wait: {  // 1L
      if (on_offer)
        return err(TypeErrorKind::TypeMismatch, t->span,
                   "wait acts on a used channel, not the offer");
      const ChanBinding* b = lookup(t->subject);
      if (!b)
        return err(TypeErrorKind::LinearityViolation, t->span,
                   "channel '" + to_string(t->subject) + "' is not available here");
      if (b->type->kind != TypeKind::One)
        return err(TypeErrorKind::TypeMismatch, t->span,
                   "wait requires type 1, '" + to_string(t->subject) + "' is " +
                       pretty_type(b->type));
      std::string sec = b->sec;
      ctx.delta.erase(t->subject);
      raise_running(ctx, RaiseId::OneL, sec);
      return check_process(std::move(ctx), t->cont);
    }

    case TermKind::Fwd: {
      if (!on_offer)
        return err(TypeErrorKind::TypeMismatch, t->span,
                   "fwd offers '" + to_string(t->subject) + "' which is not the offer");
      const ChanBinding* b = lookup(t->payload);
      if (!b)
        return err(TypeErrorKind::LinearityViolation, t->span,
                   "channel '" + to_string(t->payload) + "' is not available here");
      if (ctx.delta.size() != 1) {
        std::string left;
        for (const auto& [c, _] : ctx.delta) {
          if (c == t->payload) continue;
          if (!left.empty()) left += ", ";
          left += to_string(c);
        }
        return err(TypeErrorKind::ContextNotEmpty, t->span,
                   "context not consumed: " + left);
      }
      if (!premise(PremiseId::FwdSecEq, ctx.lattice.eq(lv(b->sec), lv(ctx.offer.sec))))
        return err(TypeErrorKind::SecrecyFlowViolation, t->span,
                   not_eq_str(b->sec, ctx.offer.sec));
      if (!type_equal(b->type, ctx.offer.type))
        return err(TypeErrorKind::TypeMismatch, t->span,
                   "fwd connects " + pretty_type(b->type) + " to " +
                       pretty_type(ctx.offer.type));
      return std::nullopt;
    }

    case TermKind::Spawn: {  // Cut
      const ProcessDef* callee = ctx.prog ? ctx.prog->find_def(t->def_name) : nullptr;
      if (!callee)
        return err(TypeErrorKind::TypeMismatch, t->span,
                   "unknown process '" + t->def_name + "'");
      const std::string& d2 = t->run_level;
      const std::string& dp = callee->offers.sec;
      if (d2 != callee->run_level)
        return err(TypeErrorKind::TypeMismatch, t->span,
                   "spawn level " + d2 + " does not match definition level @" +
                       callee->run_level);
      if (!premise(PremiseId::CutRunLeq, leq(ctx.running, d2)))
        return err(TypeErrorKind::SecrecyFlowViolation, t->span,
                   not_leq(ctx.running, d2) + " ⊑ " + dp);
      if (!premise(PremiseId::CutRunCap, leq(d2, dp)))
        return err(TypeErrorKind::SecrecyFlowViolation, t->span,
                   ctx.running + " ⊑ " + not_leq(d2, dp));
      for (size_t i = 0; i < t->args.size(); ++i) {
        const ChanBinding* b = lookup(t->args[i]);
        if (!b)
          return err(TypeErrorKind::LinearityViolation, t->span,
                     "channel '" + to_string(t->args[i]) + "' is not available here");
        const ChanDecl& want = callee->uses[i];
        if (!ctx.lattice.eq(lv(b->sec), lv(want.sec)))
          return err(TypeErrorKind::SecrecyFlowViolation, t->span,
                     not_eq_str(b->sec, want.sec));
        TypeRef want_ty = expand_type(ctx.prog->type_abbrevs, want.type);
        if (!type_equal(b->type, want_ty))
          return err(TypeErrorKind::TypeMismatch, t->span,
                     "argument '" + to_string(t->args[i]) + "' has type " +
                         pretty_type(b->type) + ", expected " + pretty_type(want_ty));
        if (!premise(PremiseId::CutArgLeq, leq(b->sec, dp)))
          return err(TypeErrorKind::SecrecyFlowViolation, t->span, not_leq(b->sec, dp));
      }
      if (!premise(PremiseId::CutOfferCap, leq(dp, ctx.offer.sec)))
        return err(TypeErrorKind::SecrecyFlowViolation, t->span,
                   not_leq(dp, ctx.offer.sec));
      ChanRef binder{t->binder, -1};
      if (ctx.delta.count(binder) || binder == ctx.offer_chan)
        return err(TypeErrorKind::LinearityViolation, t->span,
                   "binder '" + t->binder + "' shadows a live channel");
      for (const auto& a : t->args) ctx.delta.erase(a);
      ctx.delta[binder] = {expand_type(ctx.prog->type_abbrevs, callee->offers.type), dp};
      return check_process(std::move(ctx), t->cont);
    }
  }
  return std::nullopt;
}

// Checks the signature presuppositions, then the body.
inline CheckResult check_signature(const Program& prog, const ProcessDef& def) {
  using namespace detail;
  auto lv = [](const std::string& s) { return SecLevel::concrete(s); };
  for (const auto& u : def.uses) {
    if (!premise(PremiseId::PresupChild, prog.lattice.leq(lv(u.sec), lv(def.offers.sec))))
      return TypeError{TypeErrorKind::PresuppositionViolation, u.span,
                       not_leq(u.sec, def.offers.sec)};
  }
  if (!premise(PremiseId::PresupRunning,
               prog.lattice.leq(lv(def.run_level), lv(def.offers.sec))))
    return TypeError{TypeErrorKind::PresuppositionViolation, def.span,
                     not_leq(def.run_level, def.offers.sec)};

  TypingContext ctx;
  ctx.prog = &prog;
  ctx.lattice = prog.lattice;
  ctx.offer_chan = {def.offers.var, -1};
  ctx.offer = {expand_type(prog.type_abbrevs, def.offers.type), def.offers.sec};
  ctx.running = def.run_level;
  for (const auto& u : def.uses)
    ctx.delta[{u.var, -1}] = {expand_type(prog.type_abbrevs, u.type), u.sec};
  return check_process(std::move(ctx), def.body);
}

struct DefReport {
  std::string def;
  CheckResult error;  // nullopt = accepted
};

// Checks every definition independently; the report is total over defs.
inline std::vector<DefReport> check_program(const Program& prog) {
  std::vector<DefReport> out;
  out.reserve(prog.defs.size());
  for (const auto& def : prog.defs) out.push_back({def.name, check_signature(prog, def)});
  return out;
}

}  // namespace sillsec

#endif
