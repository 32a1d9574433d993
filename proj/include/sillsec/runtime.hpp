#ifndef SILLSEC_RUNTIME_HPP
#define SILLSEC_RUNTIME_HPP

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "sillsec/ast.hpp"
#include "sillsec/typecheck.hpp"

namespace sillsec {

struct ChanInfo {
  TypeRef type;  // session type at this generation, fully expanded
  std::string sec;
};

enum class NodeKind { Proc, Msg };

// One configuration node. A msg node's term has one of the five shapes the
// dynamics emits: close, label send + generation link, channel send +
// generation link.
struct Node {
  NodeKind kind;
  ChanRef offer;
  TermRef term;
  std::string running;  // Proc only
  int origin = 0;       // provenance tag, propagated to spawned nodes and msgs
};

enum class RuleTag {
  Fwd, Cut, OneSend, OneRecv, PlusSend, PlusRecv, WithSend, WithRecv,
  TensorSend, TensorRecv, LolliSend, LolliRecv,
};

inline const char* to_string(RuleTag t) {
  switch (t) {
    case RuleTag::Fwd: return "fwd";
    case RuleTag::Cut: return "cut";
    case RuleTag::OneSend: return "1-send";
    case RuleTag::OneRecv: return "1-recv";
    case RuleTag::PlusSend: return "+-send";
    case RuleTag::PlusRecv: return "+-recv";
    case RuleTag::WithSend: return "&-send";
    case RuleTag::WithRecv: return "&-recv";
    case RuleTag::TensorSend: return "*-send";
    case RuleTag::TensorRecv: return "*-recv";
    case RuleTag::LolliSend: return "-o-send";
    case RuleTag::LolliRecv: return "-o-recv";
  }
  return "?";
}

struct StepChoice {
  int node = -1;
  RuleTag rule{};
  ChanRef subject;  // redex channel, stable across commuting steps

  bool operator==(const StepChoice&) const = default;
};

struct StepRecord {
  int step;
  RuleTag rule;
  int node;
  ChanRef chan;
  std::string payload;  // label or sent channel, when applicable
};

struct Configuration {
  std::shared_ptr<const Program> prog;
  std::vector<Node> nodes;
  std::vector<ChanRef> provided;  // Δ': offered to the right
  std::vector<ChanRef> used;      // Δ: consumed from the left
  std::map<ChanRef, ChanInfo> chan_info;
  int next_fresh = 0;
};

namespace detail {

inline void free_chans(const TermRef& t, std::vector<ChanRef>& out) {
  if (!t) return;
  auto add = [&](const ChanRef& c) {
    if (c.gen >= 0) out.push_back(c);
  };
  add(t->subject);
  add(t->payload);
  for (const auto& a : t->args) add(a);
  for (const auto& [_, b] : t->branches) free_chans(b, out);
  free_chans(t->cont, out);
}

inline std::vector<ChanRef> node_uses(const Node& n) {
  std::vector<ChanRef> out;
  free_chans(n.term, out);
  out.erase(std::remove(out.begin(), out.end(), n.offer), out.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline bool is_positive_msg(const Node& n) {
  return n.term->kind == TermKind::Close || n.term->subject == n.offer;
}

// Msg builders; the trailing fwd links the two generations of the carrier.
inline TermRef msg_label_pos(const ChanRef& old_gen, const std::string& label,
                             const ChanRef& new_gen) {
  TermRef link = mk_term({TermKind::Fwd, {}, old_gen, new_gen, "", "", {}, "", {}, "", nullptr});
  return mk_term({TermKind::SendLabel, {}, old_gen, {}, "", label, {}, "", {}, "", link});
}
inline TermRef msg_label_neg(const ChanRef& old_gen, const std::string& label,
                             const ChanRef& new_gen) {
  TermRef link = mk_term({TermKind::Fwd, {}, new_gen, old_gen, "", "", {}, "", {}, "", nullptr});
  return mk_term({TermKind::SendLabel, {}, old_gen, {}, "", label, {}, "", {}, "", link});
}
inline TermRef msg_chan_pos(const ChanRef& payload, const ChanRef& old_gen,
                            const ChanRef& new_gen) {
  TermRef link = mk_term({TermKind::Fwd, {}, old_gen, new_gen, "", "", {}, "", {}, "", nullptr});
  return mk_term({TermKind::SendChan, {}, old_gen, payload, "", "", {}, "", {}, "", link});
}
inline TermRef msg_chan_neg(const ChanRef& payload, const ChanRef& old_gen,
                            const ChanRef& new_gen) {
  TermRef link = mk_term({TermKind::Fwd, {}, new_gen, old_gen, "", "", {}, "", {}, "", nullptr});
  return mk_term({TermKind::SendChan, {}, old_gen, payload, "", "", {}, "", {}, "", link});
}

// Hook for the preservation mutation tests: forces the running secrecy
// assigned by receive steps.
inline std::optional<std::string>*& forced_recv_running() {
  thread_local std::optional<std::string>* p = nullptr;
  return p;
}

}  // namespace detail

struct RuntimeProbeGuard {
  explicit RuntimeProbeGuard(std::optional<std::string>* forced) {
    detail::forced_recv_running() = forced;
  }
  ~RuntimeProbeGuard() { detail::forced_recv_running() = nullptr; }
};

// Boots a single definition: one proc node at generation 0, signature
// channels becoming the open interface.
inline Configuration boot(std::shared_ptr<const Program> prog, const std::string& entry,
                          bool enforce_typing = true) {
  const ProcessDef* def = prog->find_def(entry);
  if (!def) throw UnknownProcess("unknown process '" + entry + "'");
  if (enforce_typing) {
    if (auto e = check_signature(*prog, *def))
      throw IllTyped("process '" + entry + "' is ill-typed: " + e->constraint + " at " +
                     to_string(e->span));
  }
  Configuration c;
  c.prog = std::move(prog);
  ChanRef offer{def->offers.var, 0};
  TermRef body = subst_chan(def->body, {def->offers.var, -1}, offer);
  c.chan_info[offer] = {expand_type(c.prog->type_abbrevs, def->offers.type),
                        def->offers.sec};
  for (const auto& u : def->uses) {
    ChanRef uc{u.var, 0};
    body = subst_chan(body, {u.var, -1}, uc);
    c.chan_info[uc] = {expand_type(c.prog->type_abbrevs, u.type), u.sec};
    c.used.push_back(uc);
  }
  c.provided.push_back(offer);
  c.nodes.push_back({NodeKind::Proc, offer, body, def->run_level, 0});
  return c;
}

// Renames a channel base everywhere; composition helper for hand-built
// systems whose boots would otherwise collide on signature variable names.
inline Configuration rename_base(Configuration c, const std::string& from,
                                 const std::string& to) {
  auto fix = [&](ChanRef& ch) {
    if (ch.name == from) ch.name = to;
  };
  std::function<TermRef(const TermRef&)> fix_term = [&](const TermRef& t) -> TermRef {
    if (!t) return t;
    ProcessTerm out = *t;
    fix(out.subject);
    fix(out.payload);
    for (auto& a : out.args) fix(a);
    for (auto& [_, b] : out.branches) b = fix_term(b);
    out.cont = fix_term(t->cont);
    return mk_term(std::move(out));
  };
  for (auto& n : c.nodes) {
    fix(n.offer);
    n.term = fix_term(n.term);
  }
  for (auto& ch : c.provided) fix(ch);
  for (auto& ch : c.used) fix(ch);
  std::map<ChanRef, ChanInfo> info;
  for (auto& [ch, ci] : c.chan_info) {
    ChanRef k = ch;
    fix(k);
    info[k] = ci;
  }
  c.chan_info = std::move(info);
  return c;
}

// Concatenates configurations left to right, connecting interfaces by channel
// identity.
inline Configuration compose(std::vector<Configuration> parts) {
  Configuration out;
  for (auto& p : parts) {
    if (!out.prog) out.prog = p.prog;
    std::set<ChanRef> here_provides(p.provided.begin(), p.provided.end());
    std::set<ChanRef> out_provides(out.provided.begin(), out.provided.end());
    // p consumes what earlier parts provide.
    std::vector<ChanRef> still_provided;
    std::set<ChanRef> p_uses(p.used.begin(), p.used.end());
    for (const auto& ch : out.provided)
      if (!p_uses.count(ch)) still_provided.push_back(ch);
    for (const auto& ch : p.used)
      if (!out_provides.count(ch)) out.used.push_back(ch);
    out.provided = std::move(still_provided);
    for (const auto& ch : p.provided) out.provided.push_back(ch);
    for (auto& n : p.nodes) out.nodes.push_back(std::move(n));
    for (auto& [ch, ci] : p.chan_info) out.chan_info.emplace(ch, ci);
    out.next_fresh = std::max(out.next_fresh, p.next_fresh);
  }
  return out;
}

// All currently firable redexes in left-to-right node order.
inline std::vector<StepChoice> enabled(const Configuration& c) {
  using namespace detail;
  std::vector<StepChoice> out;
  std::set<ChanRef> iface(c.provided.begin(), c.provided.end());

  // Positive message delivered along ch; a negative message also provides its
  // new generation (to the sender's own continuation) and must not match.
  auto find_msg_providing = [&](const ChanRef& ch) -> int {
    for (size_t j = 0; j < c.nodes.size(); ++j)
      if (c.nodes[j].kind == NodeKind::Msg && c.nodes[j].offer == ch &&
          detail::is_positive_msg(c.nodes[j]))
        return int(j);
    return -1;
  };
  // Negative message whose carrier is ch (its subject, not a payload).
  auto find_msg_consuming = [&](const ChanRef& ch) -> int {
    for (size_t j = 0; j < c.nodes.size(); ++j) {
      const Node& m = c.nodes[j];
      if (m.kind == NodeKind::Msg && m.term->subject == ch && m.offer != ch) return int(j);
    }
    return -1;
  };

  for (size_t i = 0; i < c.nodes.size(); ++i) {
    const Node& n = c.nodes[i];
    if (n.kind == NodeKind::Msg) continue;
    const TermRef& t = n.term;
    const bool on_offer = t->subject == n.offer;
    switch (t->kind) {
      case TermKind::Close:
        out.push_back({int(i), RuleTag::OneSend, n.offer});
        break;
      case TermKind::SendLabel:
        out.push_back({int(i), on_offer ? RuleTag::PlusSend : RuleTag::WithSend, t->subject});
        break;
      case TermKind::SendChan:
        out.push_back({int(i), on_offer ? RuleTag::TensorSend : RuleTag::LolliSend,
                       t->subject});
        break;
      case TermKind::Spawn:
        out.push_back({int(i), RuleTag::Cut, n.offer});
        break;
      case TermKind::Wait: {
        int m = find_msg_providing(t->subject);
        if (m >= 0 && c.nodes[m].term->kind == TermKind::Close)
          out.push_back({int(i), RuleTag::OneRecv, t->subject});
        break;
      }
      case TermKind::Case: {
        if (on_offer) {
          int m = find_msg_consuming(n.offer);
          if (m >= 0 && c.nodes[m].term->kind == TermKind::SendLabel)
            out.push_back({int(i), RuleTag::WithRecv, n.offer});
        } else {
          int m = find_msg_providing(t->subject);
          if (m >= 0 && c.nodes[m].term->kind == TermKind::SendLabel)
            out.push_back({int(i), RuleTag::PlusRecv, t->subject});
        }
        break;
      }
      case TermKind::RecvChan: {
        if (on_offer) {
          int m = find_msg_consuming(n.offer);
          if (m >= 0 && c.nodes[m].term->kind == TermKind::SendChan)
            out.push_back({int(i), RuleTag::LolliRecv, n.offer});
        } else {
          int m = find_msg_providing(t->subject);
          if (m >= 0 && c.nodes[m].term->kind == TermKind::SendChan)
            out.push_back({int(i), RuleTag::TensorRecv, t->subject});
        }
        break;
      }
      case TermKind::Fwd:
        if (!iface.count(n.offer)) out.push_back({int(i), RuleTag::Fwd, n.offer});
        break;
    }
  }
  return out;
}

namespace detail {

inline const ChanInfo& info(const Configuration& c, const ChanRef& ch) {
  auto it = c.chan_info.find(ch);
  if (it == c.chan_info.end())
    throw RuntimeError("no channel info for " + to_string(ch));
  return it->second;
}

inline std::string recv_running(const Configuration& c, const std::string& d1,
                                const std::string& carrier_sec) {
  if (auto* f = forced_recv_running(); f && f->has_value()) return **f;
  return c.prog->lattice
      .join(SecLevel::concrete(d1), SecLevel::concrete(carrier_sec))
      .name;
}

inline TypeRef branch_of(const TypeRef& t, const std::string& label) {
  for (const auto& [lbl, bt] : t->branches)
    if (lbl == label) return bt;
  throw RuntimeError("label '" + label + "' missing from " + pretty_type(t));
}

inline void subst_everywhere(Configuration& c, const ChanRef& from, const ChanRef& to) {
  for (auto& n : c.nodes) n.term = subst_chan(n.term, from, to);
  for (auto& ch : c.provided)
    if (ch == from) ch = to;
  for (auto& ch : c.used)
    if (ch == from) ch = to;
}

}  // namespace detail

// Applies one dynamics row. The rewrite is local: the redex node is replaced
// in place, message nodes are inserted adjacent to their sender, consumed
// messages are removed.
inline Configuration step(Configuration c, const StepChoice& choice) {
  using namespace detail;
  auto en = enabled(c);
  if (std::find(en.begin(), en.end(), choice) == en.end())
    throw NotEnabled("chosen redex is not enabled");

  const int i = choice.node;
  Node node = c.nodes[i];
  const TermRef t = node.term;

  // Positive message delivered along ch; a negative message also provides its
  // new generation (to the sender's own continuation) and must not match.
  auto find_msg_providing = [&](const ChanRef& ch) -> int {
    for (size_t j = 0; j < c.nodes.size(); ++j)
      if (c.nodes[j].kind == NodeKind::Msg && c.nodes[j].offer == ch &&
          detail::is_positive_msg(c.nodes[j]))
        return int(j);
    return -1;
  };
  auto find_msg_consuming = [&](const ChanRef& ch) -> int {
    for (size_t j = 0; j < c.nodes.size(); ++j) {
      const Node& m = c.nodes[j];
      if (m.kind == NodeKind::Msg && m.term->subject == ch && m.offer != ch) return int(j);
    }
    return -1;
  };
  auto erase_node = [&](int idx) { c.nodes.erase(c.nodes.begin() + idx); };

  switch (choice.rule) {
    case RuleTag::Cut: {
      const ProcessDef* callee = c.prog->find_def(t->def_name);
      if (!callee) throw RuntimeError("unknown process '" + t->def_name + "'");
      ChanRef fresh{t->binder + "#" + std::to_string(c.next_fresh++), 0};
      c.chan_info[fresh] = {expand_type(c.prog->type_abbrevs, callee->offers.type),
                            callee->offers.sec};
      TermRef body = subst_chan(callee->body, {callee->offers.var, -1}, fresh);
      for (size_t k = 0; k < callee->uses.size(); ++k)
        body = subst_chan(body, {callee->uses[k].var, -1}, t->args[k]);
      Node spawned{NodeKind::Proc, fresh, body, t->run_level, node.origin};
      Node cont{NodeKind::Proc, node.offer, subst_chan(t->cont, {t->binder, -1}, fresh),
                node.running, node.origin};
      c.nodes[i] = cont;
      c.nodes.insert(c.nodes.begin() + i, spawned);  // spawned left of spawner
      return c;
    }

    case RuleTag::OneSend: {
      c.nodes[i] = {NodeKind::Msg, node.offer, t, "", node.origin};
      return c;
    }

    case RuleTag::OneRecv: {
      int m = find_msg_providing(t->subject);
      std::string carrier_sec = info(c, t->subject).sec;
      Node cont{NodeKind::Proc, node.offer, t->cont,
                recv_running(c, node.running, carrier_sec), node.origin};
      c.nodes[i] = cont;
      erase_node(m);
      return c;
    }

    case RuleTag::PlusSend: {  // provider sends label on its offer
      ChanRef old_gen = node.offer;
      ChanRef new_gen{old_gen.name, old_gen.gen + 1};
      const ChanInfo& ci = info(c, old_gen);
      c.chan_info[new_gen] = {branch_of(ci.type, t->label), ci.sec};
      Node cont{NodeKind::Proc, new_gen, subst_chan(t->cont, old_gen, new_gen),
                node.running, node.origin};
      Node msg{NodeKind::Msg, old_gen, msg_label_pos(old_gen, t->label, new_gen), "",
               node.origin};
      c.nodes[i] = cont;
      c.nodes.insert(c.nodes.begin() + i + 1, msg);  // msg to the right
      return c;
    }

    case RuleTag::WithSend: {  // client sends label on a resource
      ChanRef old_gen = t->subject;
      ChanRef new_gen{old_gen.name, old_gen.gen + 1};
      const ChanInfo& ci = info(c, old_gen);
      c.chan_info[new_gen] = {branch_of(ci.type, t->label), ci.sec};
      Node cont{NodeKind::Proc, node.offer, subst_chan(t->cont, old_gen, new_gen),
                node.running, node.origin};
      Node msg{NodeKind::Msg, new_gen, msg_label_neg(old_gen, t->label, new_gen), "",
               node.origin};
      c.nodes[i] = cont;
      c.nodes.insert(c.nodes.begin() + i, msg);  // msg to the left
      return c;
    }

    case RuleTag::PlusRecv: {  // client consumes a positive label message
      int m = find_msg_providing(t->subject);
      const Node& msg = c.nodes[m];
      std::string label = msg.term->label;
      ChanRef next = msg.term->cont->payload;  // linked new generation
      std::string carrier_sec = info(c, t->subject).sec;
      TermRef body;
      for (const auto& [lbl, b] : t->branches)
        if (lbl == label) body = b;
      if (!body) throw RuntimeError("case has no branch '" + label + "'");
      Node cont{NodeKind::Proc, node.offer, subst_chan(body, t->subject, next),
                recv_running(c, node.running, carrier_sec), node.origin};
      c.nodes[i] = cont;
      erase_node(m);
      return c;
    }

    case RuleTag::WithRecv: {  // provider consumes a negative label message
      int m = find_msg_consuming(node.offer);
      const Node& msg = c.nodes[m];
      std::string label = msg.term->label;
      ChanRef next = msg.offer;  // provider continues at the new generation
      std::string carrier_sec = info(c, node.offer).sec;
      TermRef body;
      for (const auto& [lbl, b] : t->branches)
        if (lbl == label) body = b;
      if (!body) throw RuntimeError("case has no branch '" + label + "'");
      Node cont{NodeKind::Proc, next, subst_chan(body, node.offer, next), carrier_sec,
                node.origin};
      if (auto* f = detail::forced_recv_running(); f && f->has_value())
        cont.running = **f;
      c.nodes[i] = cont;
      erase_node(m);
      return c;
    }

    case RuleTag::TensorSend: {  // provider sends a channel on its offer
      ChanRef old_gen = node.offer;
      ChanRef new_gen{old_gen.name, old_gen.gen + 1};
      const ChanInfo& ci = info(c, old_gen);
      c.chan_info[new_gen] = {ci.type->cont, ci.sec};
      Node cont{NodeKind::Proc, new_gen, subst_chan(t->cont, old_gen, new_gen),
                node.running, node.origin};
      Node msg{NodeKind::Msg, old_gen, msg_chan_pos(t->payload, old_gen, new_gen), "",
               node.origin};
      c.nodes[i] = cont;
      c.nodes.insert(c.nodes.begin() + i + 1, msg);
      return c;
    }

    case RuleTag::LolliSend: {  // client sends a channel on a resource
      ChanRef old_gen = t->subject;
      ChanRef new_gen{old_gen.name, old_gen.gen + 1};
      const ChanInfo& ci = info(c, old_gen);
      c.chan_info[new_gen] = {ci.type->cont, ci.sec};
      Node cont{NodeKind::Proc, node.offer, subst_chan(t->cont, old_gen, new_gen),
                node.running, node.origin};
      Node msg{NodeKind::Msg, new_gen, msg_chan_neg(t->payload, old_gen, new_gen), "",
               node.origin};
      c.nodes[i] = cont;
      c.nodes.insert(c.nodes.begin() + i, msg);
      return c;
    }

    case RuleTag::TensorRecv: {  // client receives a channel
      int m = find_msg_providing(t->subject);
      const Node& msg = c.nodes[m];
      ChanRef payload = msg.term->payload;
      ChanRef next = msg.term->cont->payload;
      std::string carrier_sec = info(c, t->subject).sec;
      TermRef body = subst_chan(t->cont, {t->binder, -1}, payload);
      body = subst_chan(body, t->subject, next);
      Node cont{NodeKind::Proc, node.offer, body,
                recv_running(c, node.running, carrier_sec), node.origin};
      c.nodes[i] = cont;
      erase_node(m);
      return c;
    }

    case RuleTag::LolliRecv: {  // provider receives a channel
      int m = find_msg_consuming(node.offer);
      const Node& msg = c.nodes[m];
      ChanRef payload = msg.term->payload;
      ChanRef next = msg.offer;
      std::string carrier_sec = info(c, node.offer).sec;
      TermRef body = subst_chan(t->cont, {t->binder, -1}, payload);
      body = subst_chan(body, node.offer, next);
      Node cont{NodeKind::Proc, next, body, carrier_sec, node.origin};
      if (auto* f = detail::forced_recv_running(); f && f->has_value())
        cont.running = **f;
      c.nodes[i] = cont;
      erase_node(m);
      return c;
    }

    case RuleTag::Fwd: {
      ChanRef from = t->payload;
      ChanRef offer = node.offer;
      erase_node(i);
      subst_everywhere(c, offer, from);
      return c;
    }
  }
  throw NotEnabled("unhandled rule");
}

struct Scheduler {
  enum class Kind { Leftmost, Rightmost, Random } kind = Kind::Leftmost;
  uint64_t seed = 0;

  static Scheduler leftmost() { return {Kind::Leftmost, 0}; }
  static Scheduler rightmost() { return {Kind::Rightmost, 0}; }
  static Scheduler random(uint64_t seed) { return {Kind::Random, seed}; }
};

inline constexpr long kDefaultStepBudget = 1'000'000;

struct RunResult {
  Configuration config;
  std::vector<StepRecord> trace;
};

// Term size with spawns counted at their inlined body weight (definitions
// stand for their bodies; the call graph is acyclic).
inline long term_weight(const Program& prog, const TermRef& t) {
  if (!t) return 0;
  long n = 1 + term_weight(prog, t->cont);
  for (const auto& [_, body] : t->branches) n += term_weight(prog, body);
  if (t->kind == TermKind::Spawn) {
    if (const ProcessDef* callee = prog.find_def(t->def_name))
      n += term_weight(prog, callee->body);
  }
  return n;
}

// Multiset of process-term sizes over proc nodes; the termination measure.
inline std::vector<int> proc_term_sizes(const Configuration& c) {
  std::vector<int> out;
  for (const auto& n : c.nodes)
    if (n.kind == NodeKind::Proc) out.push_back(int(term_weight(*c.prog, n.term)));
  std::sort(out.begin(), out.end());
  return out;
}

// Dershowitz-Manna comparison: a < b iff after cancelling common elements,
// every leftover of a is dominated by some leftover of b, and b has leftovers.
inline bool multiset_less(std::vector<int> a, std::vector<int> b) {
  std::vector<int> ra, rb;
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++i, ++j;
    } else if (a[i] < b[j]) {
      ra.push_back(a[i++]);
    } else {
      rb.push_back(b[j++]);
    }
  }
  ra.insert(ra.end(), a.begin() + i, a.end());
  rb.insert(rb.end(), b.begin() + j, b.end());
  if (rb.empty()) return false;
  for (int x : ra) {
    bool dominated = false;
    for (int y : rb) dominated = dominated || x < y;
    if (!dominated) return false;
  }
  return true;
}

namespace detail {

inline bool blocked_at_interface(const Configuration& c, const Node& n) {
  std::set<ChanRef> prov(c.provided.begin(), c.provided.end());
  std::set<ChanRef> used(c.used.begin(), c.used.end());
  if (n.kind == NodeKind::Msg) {
    if (is_positive_msg(n)) return prov.count(n.offer) > 0;
    return used.count(n.term->subject) > 0;  // negative message along Δ
  }
  const TermRef& t = n.term;
  switch (t->kind) {
    case TermKind::Wait:
      return used.count(t->subject) > 0;
    case TermKind::Case:
    case TermKind::RecvChan:
      if (t->subject == n.offer) return prov.count(n.offer) > 0;
      return used.count(t->subject) > 0;
    case TermKind::Fwd:
      return prov.count(n.offer) > 0;
    default:
      return false;
  }
}

// Parent of node i: the node consuming its offered channel, or -1 when the
// offer is in the provided interface (tree root).
inline std::vector<int> parents(const Configuration& c) {
  std::vector<int> out(c.nodes.size(), -1);
  for (size_t i = 0; i < c.nodes.size(); ++i) {
    for (size_t j = 0; j < c.nodes.size(); ++j) {
      if (i == j) continue;
      auto uses = node_uses(c.nodes[j]);
      if (std::find(uses.begin(), uses.end(), c.nodes[i].offer) != uses.end()) {
        out[i] = int(j);
        break;
      }
    }
  }
  return out;
}

}  // namespace detail

// Poised: empty, or no step is enabled and every maximal tree is blocked on
// the external interface.
inline bool is_poised(const Configuration& c) {
  if (c.nodes.empty()) return true;
  if (!enabled(c).empty()) return false;
  auto parent = detail::parents(c);
  // Root of each node's tree.
  std::vector<int> root(c.nodes.size());
  for (size_t i = 0; i < c.nodes.size(); ++i) {
    int r = int(i);
    int hops = 0;
    while (parent[r] >= 0 && hops++ < int(c.nodes.size())) r = parent[r];
    root[i] = r;
  }
  std::set<int> trees(root.begin(), root.end());
  for (int r : trees) {
    bool ok = false;
    for (size_t i = 0; i < c.nodes.size(); ++i)
      if (root[i] == r && detail::blocked_at_interface(c, c.nodes[i])) ok = true;
    if (!ok) return false;
  }
  return true;
}

// Runs until no redex is enabled. Deterministic given the scheduler.
inline RunResult run_to_poised(Configuration c, Scheduler sched = Scheduler::leftmost(),
                               long budget = kDefaultStepBudget) {
  RunResult out;
  std::mt19937_64 rng(sched.seed);
  int stepno = 0;
  for (;;) {
    auto en = enabled(c);
    if (en.empty()) break;
    if (budget-- <= 0) throw StepBudgetExceeded("step budget exceeded");
    size_t pick = 0;
    switch (sched.kind) {
      case Scheduler::Kind::Leftmost: pick = 0; break;
      case Scheduler::Kind::Rightmost: pick = en.size() - 1; break;
      case Scheduler::Kind::Random:
        pick = std::uniform_int_distribution<size_t>(0, en.size() - 1)(rng);
        break;
    }
    const StepChoice& ch = en[pick];
    std::string payload;
    const Node& n = c.nodes[ch.node];
    if (n.term->kind == TermKind::SendLabel) payload = n.term->label;
    if (n.term->kind == TermKind::SendChan) payload = to_string(n.term->payload);
    if (n.term->kind == TermKind::Spawn) payload = n.term->def_name;
    if (n.term->kind == TermKind::Fwd) payload = to_string(n.term->payload);
    out.trace.push_back({stepno++, ch.rule, ch.node, ch.subject, payload});
    c = step(std::move(c), ch);
  }
  out.config = std::move(c);
  return out;
}

// Structural comparison modulo the names of cut-allocated channels: fresh
// bases ("name#k") are renumbered in first-occurrence order.
inline Configuration canonicalize_fresh(const Configuration& c) {
  std::map<std::string, std::string> rename;
  auto canon = [&](const ChanRef& ch) -> std::string {
    if (ch.name.find('#') == std::string::npos) return ch.name;
    auto it = rename.find(ch.name);
    if (it != rename.end()) return it->second;
    std::string base = ch.name.substr(0, ch.name.find('#'));
    std::string fresh = base + "#f" + std::to_string(rename.size());
    rename.emplace(ch.name, fresh);
    return fresh;
  };
  std::function<void(const TermRef&)> visit_term = [&](const TermRef& t) {
    if (!t) return;
    if (t->subject.gen >= 0) canon(t->subject);
    if (t->payload.gen >= 0) canon(t->payload);
    for (const auto& a : t->args)
      if (a.gen >= 0) canon(a);
    for (const auto& [_, b] : t->branches) visit_term(b);
    visit_term(t->cont);
  };
  for (const auto& n : c.nodes) {
    canon(n.offer);
    visit_term(n.term);
  }
  Configuration out = c;
  for (const auto& [from, to] : rename) {
    Configuration tmp = rename_base(std::move(out), from, to);
    out = std::move(tmp);
  }
  return out;
}

inline bool config_equal(const Configuration& a, const Configuration& b) {
  if (a.nodes.size() != b.nodes.size()) return false;
  for (size_t i = 0; i < a.nodes.size(); ++i) {
    const Node& x = a.nodes[i];
    const Node& y = b.nodes[i];
    if (x.kind != y.kind || x.offer != y.offer || x.running != y.running) return false;
    if (!term_equal(x.term, y.term)) return false;
  }
  return a.provided == b.provided && a.used == b.used;
}

inline bool config_equal_modulo_fresh(const Configuration& a, const Configuration& b) {
  return config_equal(canonicalize_fresh(a), canonicalize_fresh(b));
}

}  // namespace sillsec

#endif
